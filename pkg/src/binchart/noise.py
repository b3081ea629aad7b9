"""Error distributions, change-point streams and the image-noise model."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Literal

import numpy as np
from scipy import special

Family = Literal["gaussian", "laplace", "cauchy"]
FAMILIES = ("gaussian", "laplace", "cauchy")


@dataclass(frozen=True)
class ErrorDist:
    """Centered symmetric error law.

    ``scale`` is the standard deviation for ``gaussian`` and the usual scale
    parameter for ``laplace`` (density ``exp(-|x|/b)/(2b)``) and ``cauchy``.
    Jump heights are always expressed in raw ``scale`` units.
    """

    family: Family = "gaussian"
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown error family {self.family!r}; choose from {FAMILIES}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive and finite, got {self.scale!r}")

    @classmethod
    def standardized(cls, family: Family) -> "ErrorDist":
        """Unit-variance member of ``family`` (unit scale for Cauchy, which has no variance).

        Use this when jump heights are meant in standard-deviation units: a
        Laplace law with variance 1 has scale ``1/sqrt(2)``.
        """
        return cls(family, 1.0 / math.sqrt(2.0) if family == "laplace" else 1.0)

    def cdf(self, x):
        z = np.asarray(x, dtype=float) / self.scale
        if self.family == "gaussian":
            out = special.ndtr(z)
        elif self.family == "laplace":
            out = np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0.0)),
                           1.0 - 0.5 * np.exp(-np.maximum(z, 0.0)))
        else:
            out = 0.5 + np.arctan(z) / np.pi
        return out if np.ndim(out) else float(out)

    def pdf(self, x):
        z = np.asarray(x, dtype=float) / self.scale
        if self.family == "gaussian":
            out = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        elif self.family == "laplace":
            out = 0.5 * np.exp(-np.abs(z))
        else:
            out = 1.0 / (np.pi * (1.0 + z * z))
        out = out / self.scale
        return out if np.ndim(out) else float(out)

    def sample(self, rng: np.random.Generator, size=None):
        if self.family == "gaussian":
            return self.scale * rng.standard_normal(size)
        if self.family == "laplace":
            return rng.laplace(0.0, self.scale, size)
        return self.scale * rng.standard_cauchy(size)


GAUSSIAN = ErrorDist("gaussian", 1.0)


def sample_error(dist: ErrorDist, rng: np.random.Generator) -> float:
    return float(dist.sample(rng))


def shift_probability(dist: ErrorDist, m: float) -> float:
    """Success probability ``1 - F(-m)`` of a binarized observation after a jump ``m``."""
    if m == 0:
        return 0.5
    # 1 - F(-m) == F(m) by symmetry; F(m) keeps full precision for small m
    return float(dist.cdf(m))


@dataclass(frozen=True)
class ChangePointSpec:
    jump: float = 0.0
    change_index: int = 0
    target: float = 0.0


def gen_stream(spec: ChangePointSpec, dist: ErrorDist,
               rng: np.random.Generator, block: int = 1024) -> Iterator[float]:
    """Infinite stream ``target + jump*1(i >= change_index) + eps_i``, i = 0, 1, ..."""
    i = 0
    while True:
        eps = dist.sample(rng, block)
        idx = np.arange(i, i + block)
        y = spec.target + spec.jump * (idx >= spec.change_index) + eps
        yield from y.tolist()
        i += block


@dataclass(frozen=True)
class LocalAlternative:
    p0: float
    delta: float
    theta: float
    N: int

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if self.N < 1:
            raise ValueError(f"N must be positive, got {self.N}")
        if not 0 < self.p1 < 1:
            raise ValueError(f"p1 = p0 + delta/sqrt(N) = {self.p1} is not in (0, 1)")

    @property
    def p1(self) -> float:
        return self.p0 + self.delta / math.sqrt(self.N)

    @property
    def change_index(self) -> int:
        # guard against N*theta landing a hair below an integer
        return math.floor(self.N * self.theta + 1e-9)

    def success_probs(self) -> np.ndarray:
        """``E Z_i`` for i = 1..N (entry ``i-1``)."""
        i = np.arange(1, self.N + 1)
        return np.where(i < self.change_index, self.p0, self.p1)


def bernoulli_array(la: LocalAlternative, rng: np.random.Generator,
                    n_rows: int) -> np.ndarray:
    """``n_rows`` independent replications of Z_1..Z_N as an int8 matrix."""
    return (rng.random((n_rows, la.N)) < la.success_probs()).astype(np.int8)


def gen_bernoulli_stream(la: LocalAlternative, rng: np.random.Generator) -> Iterator[int]:
    yield from bernoulli_array(la, rng, 1)[0].tolist()


def jump_to_delta(dist: ErrorDist, delta_m: float, N: int | None = None,
                  exact: bool = False) -> float:
    """Drift ``Delta`` equivalent to a jump of height ``delta_m/sqrt(N)``.

    The first-order value is ``f(0)*delta_m``.  With ``exact=True`` the
    finite-N value ``sqrt(N)*(p1 - 1/2)`` is returned instead.
    """
    if not exact:
        return float(dist.pdf(0.0)) * delta_m
    if not N or N < 1:
        raise ValueError("exact conversion needs a positive N")
    root = math.sqrt(N)
    return root * (shift_probability(dist, delta_m / root) - 0.5)


# --- image noise -----------------------------------------------------------

VarianceFn = Callable[[np.ndarray], float]


def energy_variance(neighbors: np.ndarray) -> float:
    """Default conditional scale: ``sqrt(1 + mean(neighbors**2))``."""
    if neighbors.size == 0:
        return 1.0
    return math.sqrt(1.0 + float(np.mean(neighbors * neighbors)))


def unit_variance(neighbors: np.ndarray) -> float:
    return 1.0


@dataclass(frozen=True)
class ImageNoiseModel:
    """Locally dependent image noise ``eps_ij = h_ij * xi_ij``.

    Pixels are ``(column i, row j)`` with ``0 <= i < width`` and
    ``0 <= j < height``; rows are scanned bottom (j=0) to top.  ``h_ij`` is
    ``variance_fn`` applied to the innovations of the sliced neighbourhood
    of ``(i, j-1)`` restricted to its ``h`` most recent rows: column ``i``
    rows ``j-h..j-1`` and columns ``i +/- 1..h`` rows ``j-h..j-1+h``.  The
    innovation ``xi_ij`` itself is never part of it.
    """

    width: int
    height: int
    h: int = 1
    base: ErrorDist = GAUSSIAN
    variance_fn: VarianceFn = energy_variance

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        if self.h < 1:
            raise ValueError("neighbourhood radius h must be >= 1")

    def neighborhood(self, i: int, j: int) -> list[tuple[int, int]]:
        """Pixels whose innovations determine ``h_ij``."""
        lo = max(0, j - self.h)
        cells = [(i, l) for l in range(lo, j)]
        for c in range(max(0, i - self.h), min(self.width, i + self.h + 1)):
            if c == i:
                continue
            top = min(self.height, j + self.h)
            cells.extend((c, l) for l in range(lo, top))
        return cells


def _scales(model: ImageNoiseModel, xi: np.ndarray, col_offset: int,
            columns: range) -> np.ndarray:
    """Conditional scales for the given image columns.

    ``xi`` holds innovations for image columns starting at ``col_offset``.
    """
    out = np.empty((len(columns), model.height))
    for a, i in enumerate(columns):
        for j in range(model.height):
            cells = model.neighborhood(i, j)
            if cells:
                cols, rows = zip(*cells)
                vals = xi[np.asarray(cols) - col_offset, np.asarray(rows)]
            else:
                vals = np.empty(0)
            s = model.variance_fn(vals)
            if not (math.isfinite(s) and s > 0):
                raise ValueError(f"variance function returned invalid scale {s!r} at pixel ({i}, {j})")
            out[a, j] = s
    return out


def sample_image(model: ImageNoiseModel, rng: np.random.Generator):
    """Innovations ``xi`` and errors ``eps`` for the whole image, shape (width, height)."""
    xi = model.base.sample(rng, (model.width, model.height))
    scales = _scales(model, xi, 0, range(model.width))
    return xi, scales * xi, scales


def image_column_stream(model: ImageNoiseModel, column: int,
                        rng: np.random.Generator) -> Iterator[float]:
    """Errors of one column, bottom to top."""
    if not 0 <= column < model.width:
        raise ValueError(f"column {column} outside image of width {model.width}")
    lo = max(0, column - model.h)
    hi = min(model.width, column + model.h + 1)
    xi = model.base.sample(rng, (hi - lo, model.height))
    scales = _scales(model, xi, lo, range(column, column + 1))[0]
    yield from (scales * xi[column - lo]).tolist()
