"""Chart design: threshold calibration, buffer-length choice, exact small-M ARLs."""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .arl import AllCensoredError, ArlEstimate, SimConfig, estimate_arl
from .chart import Sided, buffer_limits, classic_limits, signal_counts, _check_sided
from .noise import ErrorDist, GAUSSIAN

MAX_EXACT_M = 16
K_GRID = (1.0, 3.5, 0.01)


class UnreachableError(RuntimeError):
    """The requested design target cannot be met."""


# --- exact Markov chain oracle ---------------------------------------------

def _chain(M, k, p0, sided):
    if isinstance(M, bool) or int(M) != M or M < 1:
        raise ValueError(f"M must be a positive integer, got {M!r}")
    if M > MAX_EXACT_M:
        raise ValueError(f"exact ARL needs 2**M states; M={M} exceeds {MAX_EXACT_M}")
    _check_sided(sided)
    hi, lo = signal_counts(buffer_limits(M, p0, k), sided)
    n = 1 << M
    states = np.arange(n)
    # bit 0 is the newest observation, bit M-1 the oldest
    counts = np.array([bin(s).count("1") for s in range(n)])
    absorbing = (counts >= hi) | (counts <= lo)
    shifted = (states << 1) & (n - 1)
    return counts, absorbing, shifted, shifted | 1


def exact_rl_moments(M: int, k: float, p: float, p0: float = 0.5,
                     sided: Sided = "two_sided", pre_run: str = "random") -> tuple[float, float]:
    """Exact mean and standard deviation of the run length for i.i.d. Bernoulli(p) bits.

    The buffer state is the vector of the last ``M`` bits.  The initial state
    is drawn from i.i.d. Bernoulli(``p0``) bits (``pre_run="random"``) or from
    that law conditioned on a non-signalling count (``"non_signaling"``); the
    pre-run itself is never checked, so at least one new bit is consumed.
    """
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    counts, absorbing, nxt0, nxt1 = _chain(M, k, p0, sided)
    if not absorbing.any():
        raise UnreachableError(
            f"limits for M={M}, k={k} lie outside [0, M]; the chart never signals")
    transient = np.flatnonzero(~absorbing)
    pos = np.full(absorbing.size, -1)
    pos[transient] = np.arange(transient.size)

    rows, cols, vals = [], [], []
    for nxt, prob in ((nxt0, 1 - p), (nxt1, p)):
        tgt = nxt[transient]
        keep = ~absorbing[tgt]
        rows.append(np.flatnonzero(keep))
        cols.append(pos[tgt[keep]])
        vals.append(np.full(int(keep.sum()), prob))
    Q = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(transient.size, transient.size))
    A = (sparse.identity(transient.size, format="csr") - Q).tocsc()
    h1 = np.zeros(absorbing.size)
    h2 = np.zeros(absorbing.size)
    # absorption-time moments: h1 = 1 + Q h1 and, from T = 1 + T',
    # h2 = 1 + 2 Q h1 + Q h2
    if transient.size:
        h1[transient] = spsolve(A, np.ones(transient.size))
        h2[transient] = spsolve(A, 2 * (Q @ h1[transient]) + 1.0)

    init = p0 ** counts * (1 - p0) ** (M - counts)
    if pre_run == "non_signaling":
        init = init * ~absorbing
        if init.sum() == 0:
            raise UnreachableError("no non-signalling pre-run content exists")
        init = init / init.sum()
    elif pre_run != "random":
        raise ValueError(f"unknown pre-run policy {pre_run!r}")

    # one forced step from the pre-run state, then absorption time from there
    m1_next = (1 - p) * h1[nxt0] + p * h1[nxt1]
    m2_next = (1 - p) * h2[nxt0] + p * h2[nxt1]
    mean = float(init @ (1.0 + m1_next))
    second = float(init @ (1.0 + 2.0 * m1_next + m2_next))
    return mean, math.sqrt(max(second - mean * mean, 0.0))


def exact_arl_markov(M: int, k: float, p: float = 0.5, p0: float = 0.5,
                     sided: Sided = "two_sided", pre_run: str = "random") -> float:
    """Exact ARL of the buffer chart for i.i.d. Bernoulli(``p``) bits, ``M <= 16``."""
    return exact_rl_moments(M, k, p, p0, sided, pre_run)[0]


# --- calibration -----------------------------------------------------------

@dataclass(frozen=True)
class DesignResult:
    M: int
    k: float
    achieved_arl0: float
    target_arl0: float
    std_error: float = float("nan")

    def as_dict(self) -> dict:
        return asdict(self)


def k_grid(lo: float = K_GRID[0], hi: float = K_GRID[1], step: float = K_GRID[2]) -> np.ndarray:
    n = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(n + 1), 10)


def plateaus(M: int, p0: float = 0.5, sided: Sided = "two_sided",
             grid: np.ndarray | None = None) -> list[tuple[float, int, int]]:
    """Distinct charts on the k grid as ``(leftmost k, hi, lo)``, in increasing k.

    Charts that can never signal (both integer thresholds outside ``[0, M]``)
    are dropped.
    """
    grid = k_grid() if grid is None else grid
    out = []
    for k in grid:
        hi, lo = signal_counts(buffer_limits(M, p0, float(k)), sided)
        if hi > M and lo < 0:
            break
        if not out or (out[-1][1], out[-1][2]) != (hi, lo):
            out.append((float(k), hi, lo))
    return out


def _plateau_stream(M, hi, lo):
    return (M, hi, lo + 1)


def calibrate_k(M: int, p0: float = 0.5, dist: ErrorDist = GAUSSIAN,
                target_arl0: float = 435.0, sim: SimConfig = SimConfig(),
                tolerance: float = 0.10, sided: Sided = "two_sided",
                grid: np.ndarray | None = None) -> DesignResult:
    """Smallest grid ``k`` whose simulated in-control ARL is at least ``(1-tolerance)*target``.

    In-control ARL depends on ``k`` only through the integer signal counts,
    and is non-decreasing across those plateaus, so the search bisects over
    plateaus and returns the left end of the winning one.
    """
    if target_arl0 <= 0:
        raise ValueError("target ARL must be positive")
    levels = plateaus(M, p0, sided, grid)
    if not levels:
        raise UnreachableError(f"no signalling chart with M={M} on the k grid")
    need = (1.0 - tolerance) * target_arl0
    cache: dict[int, ArlEstimate] = {}

    def arl(i: int) -> ArlEstimate:
        if i not in cache:
            k, hi, lo = levels[i]
            try:
                cache[i] = estimate_arl(M, k, p0, sided, dist, 0.0, sim,
                                        stream=_plateau_stream(M, hi, lo))
            except AllCensoredError:
                cache[i] = ArlEstimate(math.inf, math.nan, math.nan, sim.n_runs, sim.n_runs)
        return cache[i]

    last = len(levels) - 1
    if arl(last).mean_rl < need:
        raise UnreachableError(
            f"in-control ARL {arl(last).mean_rl:.1f} at k={levels[last][0]} is the largest "
            f"attainable for M={M}; target {target_arl0} (tolerance {tolerance:.0%}) is unreachable")
    lo_i, hi_i = -1, last
    while hi_i - lo_i > 1:
        mid = (lo_i + hi_i) // 2
        if arl(mid).mean_rl >= need:
            hi_i = mid
        else:
            lo_i = mid
    est = arl(hi_i)
    return DesignResult(M=M, k=levels[hi_i][0], achieved_arl0=est.mean_rl,
                        target_arl0=target_arl0, std_error=est.std_error)


def exact_classic_arl(N: int, k: float, p: float = 0.5, p0: float = 0.5,
                      sided: Sided = "two_sided") -> float:
    """ARL of the block-evaluated N*p chart: ``N / P(block count signals)``."""
    from scipy.stats import binom

    hi, lo = signal_counts(classic_limits(N, p0, k), sided)
    p_sig = binom.sf(hi - 1, N, p) + (binom.cdf(lo, N, p) if lo >= 0 else 0.0)
    if p_sig <= 0:
        raise UnreachableError(f"classic chart N={N}, k={k} can never signal")
    return float(N / p_sig)


def calibrate_classic_k(N: int, p0: float = 0.5, target_arl0: float = 435.0,
                        tolerance: float = 0.10, sided: Sided = "two_sided",
                        grid: np.ndarray | None = None) -> DesignResult:
    """Smallest grid ``k`` whose exact classic-chart ARL0 is at least ``(1-tolerance)*target``."""
    need = (1.0 - tolerance) * target_arl0
    for k in (k_grid() if grid is None else grid):
        hi, lo = signal_counts(classic_limits(N, p0, float(k)), sided)
        if hi > N and lo < 0:
            break
        arl0 = exact_classic_arl(N, float(k), p0, p0, sided)
        if arl0 >= need:
            return DesignResult(M=N, k=float(k), achieved_arl0=arl0,
                                target_arl0=target_arl0, std_error=0.0)
    raise UnreachableError(f"classic chart with N={N} cannot reach ARL0 {target_arl0}")


@dataclass(frozen=True)
class BufferChoice:
    M: int
    k: float
    arl_out: float
    candidates: tuple = field(default=())

    def as_dict(self) -> dict:
        return {"M": self.M, "k": self.k, "arl_out": self.arl_out,
                "candidates": [dict(zip(("M", "k", "arl0", "arl_out"), c)) for c in self.candidates]}


def optimize_buffer(jump: float, p0: float = 0.5, dist: ErrorDist = GAUSSIAN,
                    target_arl0: float = 435.0, candidate_Ms: Sequence[int] = (),
                    sim: SimConfig = SimConfig(), tolerance: float = 0.10,
                    designs: dict[int, DesignResult] | None = None) -> BufferChoice:
    """Candidate buffer length with the smallest out-of-control ARL at ``jump``.

    Each candidate is calibrated first (or taken from ``designs``); candidates
    whose target is unreachable are skipped.
    """
    if len(candidate_Ms) == 0:
        raise ValueError("candidate list is empty")
    rows = []
    for M in candidate_Ms:
        d = (designs or {}).get(M)
        if d is None:
            try:
                d = calibrate_k(M, p0, dist, target_arl0, sim, tolerance)
            except UnreachableError:
                continue
        out = estimate_arl(M, d.k, p0, "two_sided", dist, jump, sim, stream=(M, 1))
        rows.append((M, d.k, d.achieved_arl0, out.mean_rl))
    if not rows:
        raise UnreachableError("no candidate buffer length reaches the in-control target")
    best = min(rows, key=lambda r: r[3])
    return BufferChoice(M=best[0], k=best[1], arl_out=best[3], candidates=tuple(rows))


def log_arl_profile(Ms: Sequence[int], ks: Sequence[float], dist: ErrorDist = GAUSSIAN,
                    sim: SimConfig = SimConfig(n_runs=10_000), p0: float = 0.5,
                    sided: Sided = "two_sided") -> list[tuple[int, float, float]]:
    """``(M, k, log ARL0)`` on a grid; charts that never signal give ``inf``."""
    table = []
    for M in Ms:
        seen: dict[tuple[int, int], float] = {}
        for k in ks:
            key = signal_counts(buffer_limits(M, p0, float(k)), sided)
            if key not in seen:
                hi, lo = key
                if hi > M and lo < 0:
                    seen[key] = math.inf
                else:
                    try:
                        seen[key] = math.log(estimate_arl(
                            M, float(k), p0, sided, dist, 0.0, sim,
                            stream=_plateau_stream(M, hi, lo)).mean_rl)
                    except AllCensoredError:
                        seen[key] = math.inf
            table.append((int(M), float(k), seen[key]))
    return table
