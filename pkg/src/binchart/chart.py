"""Binary moving-buffer chart and the classic N*p chart.

Observations are thresholded at zero (``1`` if ``y >= 0``) and the chart
counts ones among the ``M`` most recent bits.  Timing convention: ``step``
pushes the new bit first and then compares the updated count with the
limits, so the first check after the pre-run already involves the first new
observation, and a run length is the number of observations consumed.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Literal, NamedTuple, Sequence

import numpy as np

Sided = Literal["two_sided", "upper_only"]
SIDED_CHOICES = ("two_sided", "upper_only")


class Signal(enum.Enum):
    IN_CONTROL = "in_control"
    UPPER = "upper_signal"
    LOWER = "lower_signal"


def binarize(y: float) -> int:
    """Return 1 for ``y >= 0`` and 0 otherwise; a tie at zero maps to 1."""
    y = float(y)
    if not math.isfinite(y):
        raise ValueError(f"cannot binarize non-finite observation {y!r}")
    return 1 if y >= 0.0 else 0


def binarize_array(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("cannot binarize non-finite observations")
    return (y >= 0.0).astype(np.int8)


@dataclass(frozen=True)
class ChartLimits:
    ucl: float
    lcl: float

    def __post_init__(self):
        if self.lcl > self.ucl:
            raise ValueError(f"lcl={self.lcl} exceeds ucl={self.ucl}")

    @property
    def upper_count(self) -> int:
        """Smallest integer count strictly above the UCL."""
        return math.floor(self.ucl) + 1

    @property
    def lower_count(self) -> int:
        """Largest integer count strictly below the LCL."""
        return math.ceil(self.lcl) - 1

    def classify(self, count: float, sided: Sided = "two_sided") -> Signal:
        if count > self.ucl:
            return Signal.UPPER
        if sided == "two_sided" and count < self.lcl:
            return Signal.LOWER
        return Signal.IN_CONTROL


def _limits(n: int, p0: float, k: float, what: str) -> ChartLimits:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"{what} must be a positive integer, got {n!r}")
    if not 0.0 < p0 < 1.0:
        raise ValueError(f"p0 must lie in (0, 1), got {p0!r}")
    if not (math.isfinite(k) and k >= 0.0):
        raise ValueError(f"k must be a finite non-negative number, got {k!r}")
    half_width = k * math.sqrt(n * p0 * (1.0 - p0))
    return ChartLimits(ucl=n * p0 + half_width, lcl=n * p0 - half_width)


def buffer_limits(M: int, p0: float, k: float) -> ChartLimits:
    """Limits ``M*p0 +/- k*sqrt(M*p0*(1-p0))`` for the window count."""
    return _limits(M, p0, k, "buffer length M")


def classic_limits(N: int, p0: float, k: float) -> ChartLimits:
    """Limits ``N*p0 +/- k*sqrt(N*p0*(1-p0))`` for the block count."""
    return _limits(N, p0, k, "sample size N")


def signal_counts(limits: ChartLimits, sided: Sided) -> tuple[int, int]:
    """Integer form of the signal rule: signal iff ``J >= hi`` or ``J <= lo``.

    ``lo`` is ``-1`` (unreachable) for upper-only charts.
    """
    lo = limits.lower_count if sided == "two_sided" else -1
    return limits.upper_count, lo


def _check_sided(sided: str) -> None:
    if sided not in SIDED_CHOICES:
        raise ValueError(f"sided must be one of {SIDED_CHOICES}, got {sided!r}")


@dataclass
class BufferChart:
    M: int
    k: float
    p0: float = 0.5
    sided: Sided = "two_sided"
    ring: deque = field(default_factory=deque, repr=False)
    count: int = 0
    limits: ChartLimits | None = None

    def step(self, z: int) -> tuple[int, Signal]:
        if z not in (0, 1):
            raise ValueError(f"binary sample must be 0 or 1, got {z!r}")
        if len(self.ring) != self.M:
            raise RuntimeError("chart is not initialized; use init_buffer()")
        # ring is newest first: the oldest bit sits at the right end
        evicted = self.ring.pop()
        self.ring.appendleft(int(z))
        self.count += int(z) - evicted
        return self.count, self.limits.classify(self.count, self.sided)


def init_buffer(
    M: int, k: float, p0: float = 0.5, sided: Sided = "two_sided",
    pre_run: Sequence[int] = (),
) -> BufferChart:
    """Build a chart whose buffer holds ``pre_run``, listed newest first.

    ``pre_run[0]`` is the most recent bit and ``pre_run[-1]`` the next one
    to be evicted.

    The pre-run content itself is never checked.
    """
    _check_sided(sided)
    limits = buffer_limits(M, p0, k)
    bits = [int(b) for b in pre_run]
    if len(bits) != M:
        raise ValueError(f"pre-run must contain exactly M={M} bits, got {len(bits)}")
    if any(b not in (0, 1) for b in bits):
        raise ValueError("pre-run bits must be 0 or 1")
    return BufferChart(M=M, k=k, p0=p0, sided=sided, ring=deque(bits),
                       count=sum(bits), limits=limits)


def step(chart: BufferChart, z: int) -> tuple[int, Signal]:
    return chart.step(z)


@dataclass
class ClassicNpChart:
    """N*p chart evaluated once per completed block of ``N`` observations."""

    N: int
    k: float
    p0: float = 0.5
    sided: Sided = "two_sided"
    count: int = 0
    position: int = 0
    limits: ChartLimits | None = None

    def __post_init__(self):
        _check_sided(self.sided)
        if self.limits is None:
            self.limits = classic_limits(self.N, self.p0, self.k)

    def step(self, z: int) -> Signal:
        if z not in (0, 1):
            raise ValueError(f"binary sample must be 0 or 1, got {z!r}")
        self.count += int(z)
        self.position += 1
        if self.position < self.N:
            return Signal.IN_CONTROL
        signal = self.limits.classify(self.count, self.sided)
        self.count = 0
        self.position = 0
        return signal


class RunLength(NamedTuple):
    steps: int
    censored: bool


def _check_max_steps(max_steps: int) -> None:
    if max_steps <= 0:
        raise ValueError(f"max_steps must be positive, got {max_steps}")


def run_length(chart: BufferChart, stream: Iterable[float], max_steps: int) -> RunLength:
    """Feed observations until the first signal.

    Returns the 1-based index of the signalling observation, or
    ``(max_steps, True)`` when no signal occurs within ``max_steps``.
    """
    _check_max_steps(max_steps)
    n = 0
    for y in stream:
        n += 1
        _, sig = chart.step(binarize(y))
        if sig is not Signal.IN_CONTROL:
            return RunLength(n, False)
        if n >= max_steps:
            break
    return RunLength(n, True)


def classic_run_length(chart: ClassicNpChart, stream: Iterable[float],
                       max_steps: int) -> RunLength:
    _check_max_steps(max_steps)
    n = 0
    for y in stream:
        n += 1
        if chart.step(binarize(y)) is not Signal.IN_CONTROL:
            return RunLength(n, False)
        if n >= max_steps:
            break
    return RunLength(n, True)
