"""Brownian limit of the one-sided truncated chart and its finite-N counterpart.

Under a buffer strategy ``M(t)`` the centred, rescaled window count
converges to ``eta0 * V(t)`` with ``V(t) = B(t) - B(t - M(t))``; with a local
shift of the success probability, a piecewise-linear drift is added.  This
module simulates both the limit stopping times on a time grid and the
finite-N stopping time ``S_N / N`` so the two can be compared.

Conventions:
  * a path that never crosses gets ``tau = inf``; ``censor_at_one`` maps it
    to the point mass at 1 used in distributional comparisons;
  * the finite-N window at time ``n`` covers ``Z_{n-M_n} .. Z_{n-1}`` with
    ``Z_1`` the first observation, so ``M_n`` is capped at ``n - 1``;
  * on the grid, ``B(t - M(t))`` is linearly interpolated between grid points.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, NamedTuple, Sequence

import numpy as np

from .noise import LocalAlternative

StrategyKind = Literal["linear_fraction", "constant_eta_gated", "constant_eta_min", "custom"]
KINDS = ("linear_fraction", "constant_eta_gated", "constant_eta_min", "custom")
_EPS = 1e-9


@dataclass(frozen=True)
class BufferStrategy:
    """Asymptotic buffer length ``M(t)`` on [0, 1] and its discrete version ``M_n``.

    ``param`` is ``xi`` for ``linear_fraction`` and ``eta`` for the two
    constant strategies; ``custom`` interpolates ``table`` (pairs ``(t, M)``).
    """

    kind: StrategyKind = "linear_fraction"
    param: float = 0.5
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; choose from {KINDS}")
        if self.kind == "custom":
            if len(self.table) < 2:
                raise ValueError("custom strategy needs at least two (t, M) points")
        elif not self.param > 0:
            raise ValueError(f"strategy parameter must be positive, got {self.param}")

    @classmethod
    def linear(cls, xi: float) -> "BufferStrategy":
        return cls("linear_fraction", xi)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "linear_fraction":
            out = self.param * t
        elif self.kind == "constant_eta_gated":
            out = np.where(t >= self.param - _EPS, self.param, 0.0)
        elif self.kind == "constant_eta_min":
            out = np.minimum(t, self.param)
        else:
            ts, ms = zip(*self.table)
            out = np.interp(t, ts, ms)
        return out if out.ndim else float(out)

    def discrete(self, n, N: int) -> np.ndarray:
        """Integer buffer lengths ``M_n`` for ``n = 1..N`` (or the given ``n``)."""
        n = np.asarray(n, dtype=np.int64)
        if self.kind == "linear_fraction":
            raw = np.floor(self.param * n + _EPS)
        elif self.kind == "constant_eta_gated":
            raw = np.where(n >= self.param * N - _EPS, math.floor(self.param * N + _EPS), 0)
        elif self.kind == "constant_eta_min":
            raw = np.minimum(n, math.floor(self.param * N + _EPS))
        else:
            raw = np.floor(N * self(n / N) + _EPS)
        return np.clip(np.minimum(raw.astype(np.int64), n - 1), 0, None)


class Conditions(NamedTuple):
    natural: bool
    modifier: bool


def check_conditions(strategy: BufferStrategy, n_grid: int = 10_001) -> Conditions:
    """Natural condition ``M(t) <= t`` and modifier condition ``M(t) < t`` on (0, 1]."""
    t = np.linspace(0.0, 1.0, n_grid)
    m = strategy(t)
    natural = bool(np.all(m <= t + 1e-12))
    modifier = bool(np.all(m[1:] < t[1:] - 1e-12))
    return Conditions(natural, modifier)


def _require_natural(strategy: BufferStrategy) -> None:
    if not check_conditions(strategy).natural:
        warnings.warn(f"{strategy} violates the natural condition M(t) <= t", stacklevel=3)


def drift(strategy: BufferStrategy, t, delta: float, theta: float):
    """Deterministic part of the limit under a local change at ``theta``."""
    t = np.asarray(t, dtype=float)
    m = strategy(t)
    out = np.where(t < theta, 0.0, np.where(t < theta + m, (t - theta) * delta, m * delta))
    return out if out.ndim else float(out)


def noise_scale(p0: float) -> float:
    return math.sqrt(p0 * (1.0 - p0))


# --- limit process on a grid ----------------------------------------------

def _lag_weights(strategy, G):
    t = np.arange(G + 1) / G
    u = np.clip(t - strategy(t), 0.0, 1.0) * G
    i0 = np.minimum(np.floor(u).astype(np.int64), G)
    w = u - i0
    i1 = np.minimum(i0 + 1, G)
    return t, i0, i1, w


def brownian_paths(rng: np.random.Generator, n_paths: int, G: int) -> np.ndarray:
    """Standard Brownian motion at ``t = g/G``, shape ``(n_paths, G+1)``."""
    B = np.zeros((n_paths, G + 1))
    np.cumsum(rng.standard_normal((n_paths, G)) / math.sqrt(G), axis=1, out=B[:, 1:])
    return B


def window_process(B: np.ndarray, strategy: BufferStrategy) -> np.ndarray:
    """``V(t_g) = B(t_g) - B(t_g - M(t_g))`` for paths sampled on a uniform grid."""
    G = B.shape[1] - 1
    _, i0, i1, w = _lag_weights(strategy, G)
    return B - (B[:, i0] * (1.0 - w) + B[:, i1] * w)


def sample_tau1(strategy: BufferStrategy, k: float, G: int, n_paths: int,
                rng: np.random.Generator, delta: float = 0.0, theta: float = 0.5,
                p0: float = 0.5, batch: int = 1000) -> np.ndarray:
    """First grid time where ``eta0*V(t) + drift(t) > k*sqrt(M(t))*eta0``.

    Returns ``inf`` for paths without a crossing on [0, 1].  With
    ``delta=0`` this is the driftless stopping time.
    """
    if G < 100:
        raise ValueError(f"grid size must be >= 100, got {G}")
    if delta < 0:
        raise ValueError("drift delta must be non-negative")
    _require_natural(strategy)
    eta0 = noise_scale(p0)
    t = np.arange(G + 1) / G
    m = strategy(t)
    # dividing the drift by eta0 keeps delta=0 bit-identical to the driftless rule
    bound = k * np.sqrt(m) - drift(strategy, t, delta, theta) / eta0
    live = m > 0
    out = np.empty(n_paths)
    for start in range(0, n_paths, batch):
        n = min(batch, n_paths - start)
        V = window_process(brownian_paths(rng, n, G), strategy)
        cross = (V > bound) & live
        first = cross.argmax(axis=1)
        hit = cross[np.arange(n), first]
        out[start:start + n] = np.where(hit, t[first], np.inf)
    return out


def sample_tau(strategy: BufferStrategy, k: float, G: int, n_paths: int,
               rng: np.random.Generator, batch: int = 1000) -> np.ndarray:
    return sample_tau1(strategy, k, G, n_paths, rng, 0.0, 0.5, 0.5, batch)


def simulate_tau(strategy: BufferStrategy, k: float, G: int,
                 rng: np.random.Generator) -> float | None:
    tau = sample_tau(strategy, k, G, 1, rng)[0]
    return None if math.isinf(tau) else float(tau)


def simulate_tau1(strategy: BufferStrategy, k: float, delta: float, theta: float,
                  G: int, rng: np.random.Generator, p0: float = 0.5) -> float | None:
    tau = sample_tau1(strategy, k, G, 1, rng, delta, theta, p0)[0]
    return None if math.isinf(tau) else float(tau)


# --- finite-N stopping rule -------------------------------------------------

def sample_stopping(N: int, strategy: BufferStrategy, p0: float, delta: float,
                    theta: float, k: float, n_reps: int, rng: np.random.Generator,
                    batch: int = 1000) -> np.ndarray:
    """``S_N / N`` for the truncated upper chart with buffer lengths ``M_n``.

    ``S_N`` is the first ``n <= N`` with ``J_n > M_n*p0 + k*sqrt(M_n*p0*(1-p0))``
    where ``J_n`` counts ones among ``Z_{n-M_n} .. Z_{n-1}``; runs without a
    signal return 1.
    """
    if not check_conditions(strategy).natural:
        raise ValueError(f"{strategy} violates the natural condition M(t) <= t")
    n = np.arange(1, N + 1)
    Mn = strategy.discrete(n, N)
    if N < 2 or not np.any(Mn >= 1):
        raise ValueError(f"N={N} is too small for {strategy}: no buffer of length >= 1")
    la = LocalAlternative(p0=p0, delta=delta, theta=theta, N=N)
    probs = la.success_probs()
    thr = Mn * p0 + k * np.sqrt(Mn * p0 * (1 - p0))
    live = Mn >= 1
    out = np.empty(n_reps)
    for start in range(0, n_reps, batch):
        r = min(batch, n_reps - start)
        Z = (rng.random((r, N)) < probs).astype(np.int32)
        C = np.zeros((r, N + 1), dtype=np.int32)
        np.cumsum(Z, axis=1, out=C[:, 1:])
        # J_n = C[n-1] - C[n-1-M_n]
        J = C[:, n - 1] - C[:, n - 1 - Mn]
        cross = (J > thr) & live
        first = cross.argmax(axis=1)
        hit = cross[np.arange(r), first]
        out[start:start + r] = np.where(hit, n[first] / N, 1.0)
    return out


def finite_N_stopping(N: int, strategy: BufferStrategy, p0: float, delta: float,
                      theta: float, rng: np.random.Generator, k: float = 2.0) -> float:
    return float(sample_stopping(N, strategy, p0, delta, theta, k, 1, rng)[0])


# --- comparisons -------------------------------------------------------------

def censor_at_one(x) -> np.ndarray:
    return np.minimum(np.asarray(x, dtype=float), 1.0)


def ks_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sample Kolmogorov-Smirnov statistic ``sup |F_a - F_b|``."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def analytic_covariance(strategy: BufferStrategy, s: float, t: float) -> float:
    """``E V(s) V(t)`` for ``s <= t``: the overlap of the two windows."""
    if s > t:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    lo = max(s - strategy(s), t - strategy(t))
    return max(0.0, s - lo)


class CovarianceCheck(NamedTuple):
    empirical: float
    analytic: float
    std_error: float


def covariance_check(strategy: BufferStrategy, s: float, t: float, n_paths: int,
                     rng: np.random.Generator, G: int | None = None) -> CovarianceCheck:
    """Empirical vs analytic ``E V(s) V(t)``.

    With ``G=None`` the Brownian path is sampled exactly at the four times
    involved; otherwise on the ``G`` grid with interpolation, as the
    stopping-time simulations do.
    """
    if s > t:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    if G is None:
        times = np.array([s - strategy(s), s, t - strategy(t), t], dtype=float)
        uniq, inv = np.unique(times, return_inverse=True)
        gaps = np.diff(np.concatenate([[0.0], uniq]))
        B = np.cumsum(rng.standard_normal((n_paths, uniq.size)) * np.sqrt(gaps), axis=1)
        b = B[:, inv]
        prod = (b[:, 1] - b[:, 0]) * (b[:, 3] - b[:, 2])
    else:
        prods = []
        for start in range(0, n_paths, 1000):
            n = min(1000, n_paths - start)
            V = window_process(brownian_paths(rng, n, G), strategy)
            grid = np.arange(G + 1) / G
            vs = np.array([np.interp(s, grid, row) for row in V])
            vt = np.array([np.interp(t, grid, row) for row in V])
            prods.append(vs * vt)
        prod = np.concatenate(prods)
    return CovarianceCheck(float(prod.mean()), analytic_covariance(strategy, s, t),
                           float(prod.std(ddof=1) / math.sqrt(n_paths)))
