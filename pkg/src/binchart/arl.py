"""Monte-Carlo run-length estimation.

Protocol: each run starts with a buffer filled by binarized in-control
observations; the jump is present from the first new observation on, and
the run length counts new observations until the first signal.

Runs are split into fixed-size chunks.  Chunk ``c`` of experiment cell
``stream`` draws from ``substream(root_seed, stream, c)``; chunks are
simulated vectorised over runs and reassembled in chunk order, so the result
is a function of the configuration alone, not of ``workers``.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from typing import Callable, Literal, Sequence

import numpy as np

from .chart import Sided, buffer_limits, classic_limits, signal_counts, _check_sided
from .noise import ErrorDist, GAUSSIAN
from .rng import DEFAULT_SEED, substream

PreRun = Literal["random", "non_signaling"]


class AllCensoredError(RuntimeError):
    """Every simulated run reached ``max_steps`` without a signal."""


@dataclass(frozen=True)
class SimConfig:
    n_runs: int = 30_000
    max_steps: int = 100_000
    root_seed: int = DEFAULT_SEED
    chunk_size: int = 1_000
    pre_run: PreRun = "random"
    workers: int = 1

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        if self.pre_run not in ("random", "non_signaling"):
            raise ValueError(f"unknown pre-run policy {self.pre_run!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def replace(self, **kw) -> "SimConfig":
        return SimConfig(**{**asdict(self), **kw})


@dataclass(frozen=True)
class ArlEstimate:
    mean_rl: float
    rl_dispersion: float
    std_error: float
    n_runs: int
    n_censored: int

    @classmethod
    def from_run_lengths(cls, rl: np.ndarray, censored: np.ndarray) -> "ArlEstimate":
        done = rl[~censored]
        n_cens = int(censored.sum())
        if done.size == 0:
            raise AllCensoredError(
                f"all {rl.size} runs censored at max_steps; the chart never signalled")
        disp = float(done.std(ddof=1)) if done.size > 1 else 0.0
        return cls(mean_rl=float(done.mean()), rl_dispersion=disp,
                   std_error=disp / math.sqrt(done.size),
                   n_runs=int(rl.size), n_censored=n_cens)

    def as_dict(self) -> dict:
        return asdict(self)


# --- chunk kernels ---------------------------------------------------------

def _block_sizes(max_steps: int, first: int = 128, cap: int = 2048):
    done, b = 0, first
    while done < max_steps:
        b_now = min(b, max_steps - done)
        yield done, b_now
        done += b_now
        b = min(2 * b, cap)


def first_signal_in_windows(tail: np.ndarray, bits: np.ndarray,
                            hi: int, lo: int) -> np.ndarray:
    """Index of the first signalling window in each row, or -1.

    ``tail`` holds the current buffer (oldest first), ``bits`` the next
    observations; window ``j`` is the buffer after pushing ``bits[:, j]``.
    """
    M = tail.shape[1]
    x = np.concatenate([tail, bits], axis=1)
    cs = np.cumsum(x, axis=1, dtype=np.int32)
    B = bits.shape[1]
    J = cs[:, M:M + B] - cs[:, :B]
    sig = (J >= hi) | (J <= lo)
    first = sig.argmax(axis=1)
    hit = sig[np.arange(sig.shape[0]), first]
    return np.where(hit, first, -1)


def _pre_run(rng, n, M, dist, hi, lo, policy):
    bits = (dist.sample(rng, (n, M)) >= 0).astype(np.int8)
    if policy == "non_signaling":
        if max(lo + 1, 0) > min(hi - 1, M):
            raise ValueError("no non-signalling buffer content exists")
        for _ in range(10_000):
            c = bits.sum(axis=1)
            bad = (c >= hi) | (c <= lo)
            if not bad.any():
                break
            bits[bad] = (dist.sample(rng, (int(bad.sum()), M)) >= 0)
        else:
            raise RuntimeError("could not draw a non-signalling pre-run")
    return bits


def buffer_chunk(root_seed: int, key: tuple, n: int, M: int, hi: int, lo: int,
                 dist: ErrorDist, jump: float, max_steps: int,
                 pre_run: str) -> np.ndarray:
    """Run lengths for ``n`` runs of the buffer chart; -1 marks censoring."""
    rng = substream(root_seed, *key)
    rl = np.full(n, -1, dtype=np.int64)
    tail = _pre_run(rng, n, M, dist, hi, lo, pre_run)
    active = np.arange(n)
    for done, B in _block_sizes(max_steps):
        bits = ((jump + dist.sample(rng, (active.size, B))) >= 0).astype(np.int8)
        first = first_signal_in_windows(tail, bits, hi, lo)
        hit = first >= 0
        rl[active[hit]] = done + first[hit] + 1
        keep = ~hit
        tail = np.concatenate([tail[keep], bits[keep]], axis=1)[:, -M:]
        active = active[keep]
        if active.size == 0:
            break
    return rl


def classic_chunk(root_seed: int, key: tuple, n: int, N: int, hi: int, lo: int,
                  dist: ErrorDist, jump: float, max_steps: int) -> np.ndarray:
    rng = substream(root_seed, *key)
    rl = np.full(n, -1, dtype=np.int64)
    active = np.arange(n)
    max_blocks = max_steps // N
    done = 0
    nb = 8
    while done < max_blocks and active.size:
        nb_now = min(nb, max_blocks - done)
        y = jump + dist.sample(rng, (active.size, nb_now, N))
        counts = (y >= 0).sum(axis=2)
        sig = (counts >= hi) | (counts <= lo)
        first = sig.argmax(axis=1)
        hit = sig[np.arange(active.size), first]
        rl[active[hit]] = (done + first[hit] + 1) * N
        active = active[~hit]
        done += nb_now
        nb = min(2 * nb, 256)
    return rl


# --- orchestration ----------------------------------------------------------

def run_chunks(kernel: Callable, sim: SimConfig, stream: Sequence[int] | int,
               *args) -> np.ndarray:
    """Evaluate ``kernel`` on every chunk and concatenate in chunk order."""
    stream = (stream,) if isinstance(stream, int) else tuple(stream)
    sizes = [sim.chunk_size] * (sim.n_runs // sim.chunk_size)
    if sim.n_runs % sim.chunk_size:
        sizes.append(sim.n_runs % sim.chunk_size)
    jobs = [(sim.root_seed, stream + (c,), n) + tuple(args) for c, n in enumerate(sizes)]
    if sim.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=sim.workers) as ex:
            parts = list(ex.map(_call, [kernel] * len(jobs), jobs))
    else:
        parts = [kernel(*job) for job in jobs]
    return np.concatenate(parts)


def _call(kernel, job):
    return kernel(*job)


def buffer_run_lengths(M: int, k: float, p0: float = 0.5, sided: Sided = "two_sided",
                       dist: ErrorDist = GAUSSIAN, jump: float = 0.0,
                       sim: SimConfig = SimConfig(), stream=0) -> np.ndarray:
    _check_sided(sided)
    hi, lo = signal_counts(buffer_limits(M, p0, k), sided)
    return run_chunks(buffer_chunk, sim, stream, M, hi, lo, dist, float(jump),
                      sim.max_steps, sim.pre_run)


def estimate_arl(M: int, k: float, p0: float = 0.5, sided: Sided = "two_sided",
                 dist: ErrorDist = GAUSSIAN, jump: float = 0.0,
                 sim: SimConfig = SimConfig(), stream=0) -> ArlEstimate:
    """Mean run length of the buffer chart with the jump present from time zero."""
    rl = buffer_run_lengths(M, k, p0, sided, dist, jump, sim, stream)
    return ArlEstimate.from_run_lengths(rl, rl < 0)


def arl_curve(M: int, k: float, p0: float = 0.5, dist: ErrorDist = GAUSSIAN,
              jump_grid: Sequence[float] = (0.0,), sim: SimConfig = SimConfig(),
              sided: Sided = "two_sided", stream=0) -> list[tuple[float, ArlEstimate]]:
    """One estimate per jump; cell ``i`` uses substream ``(stream, i)``."""
    if len(jump_grid) == 0:
        raise ValueError("jump grid is empty")
    base = (stream,) if isinstance(stream, int) else tuple(stream)
    return [(float(m), estimate_arl(M, k, p0, sided, dist, m, sim, base + (i,)))
            for i, m in enumerate(jump_grid)]


def estimate_arl_classic(N: int, k: float, p0: float = 0.5, dist: ErrorDist = GAUSSIAN,
                         jump: float = 0.0, sim: SimConfig = SimConfig(),
                         sided: Sided = "two_sided", stream=0) -> ArlEstimate:
    """Classic N*p chart; signals can only occur at multiples of ``N``."""
    _check_sided(sided)
    hi, lo = signal_counts(classic_limits(N, p0, k), sided)
    rl = run_chunks(classic_chunk, sim, stream, N, hi, lo, dist, float(jump), sim.max_steps)
    return ArlEstimate.from_run_lengths(rl, rl < 0)
