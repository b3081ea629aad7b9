"""Shewhart, EWMA and CUSUM charts for individual observations.

All three assume target 0 and unit error scale.  Signal rules:

  Shewhart   |y| > L
  EWMA       z_n = lam*y + (1-lam)*z_{n-1}, z_0 = 0; |z_n| > L*sqrt(lam/(2-lam))
  CUSUM      S+_n = max(0, S+_{n-1} + y - kappa) > h, and for the two-sided
             chart also S-_n = max(0, S-_{n-1} - y - kappa) > h

EWMA uses the asymptotic standard deviation, so ``lam=1`` reproduces the
Shewhart chart with the same ``L``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict, replace
from typing import Literal

import numpy as np

from .arl import AllCensoredError, ArlEstimate, SimConfig, run_chunks
from .chart import Signal, Sided
from .design import UnreachableError
from .noise import ErrorDist, GAUSSIAN
from .rng import substream

Kind = Literal["shewhart", "ewma", "cusum"]


@dataclass
class ShewhartChart:
    L: float = 3.0
    kind: str = "shewhart"

    def reset(self):
        pass

    def step(self, y: float) -> Signal:
        if y > self.L:
            return Signal.UPPER
        if y < -self.L:
            return Signal.LOWER
        return Signal.IN_CONTROL

    def init_state(self, n: int):
        return ()

    def update(self, state, y):
        return state, np.abs(y) > self.L

    threshold_name = "L"


@dataclass
class EwmaChart:
    lam: float = 0.1
    L: float = 2.8
    kind: str = "ewma"
    z: float = 0.0

    def __post_init__(self):
        if not 0 < self.lam <= 1:
            raise ValueError(f"EWMA smoothing must lie in (0, 1], got {self.lam}")

    @property
    def half_width(self) -> float:
        return self.L * math.sqrt(self.lam / (2.0 - self.lam))

    def reset(self):
        self.z = 0.0

    def step(self, y: float) -> Signal:
        self.z = self.lam * y + (1.0 - self.lam) * self.z
        if self.z > self.half_width:
            return Signal.UPPER
        if self.z < -self.half_width:
            return Signal.LOWER
        return Signal.IN_CONTROL

    def init_state(self, n: int):
        return np.zeros(n)

    def update(self, z, y):
        z = self.lam * y + (1.0 - self.lam) * z
        return z, np.abs(z) > self.half_width

    threshold_name = "L"


@dataclass
class CusumChart:
    kappa: float = 0.25
    h: float = 8.0
    sided: Sided = "two_sided"
    kind: str = "cusum"
    s_hi: float = 0.0
    s_lo: float = 0.0

    def reset(self):
        self.s_hi = self.s_lo = 0.0

    def step(self, y: float) -> Signal:
        self.s_hi = max(0.0, self.s_hi + y - self.kappa)
        self.s_lo = max(0.0, self.s_lo - y - self.kappa)
        if self.s_hi > self.h:
            return Signal.UPPER
        if self.sided == "two_sided" and self.s_lo > self.h:
            return Signal.LOWER
        return Signal.IN_CONTROL

    def init_state(self, n: int):
        return np.zeros(n), np.zeros(n)

    def update(self, state, y):
        hi, lo = state
        hi = np.maximum(0.0, hi + y - self.kappa)
        lo = np.maximum(0.0, lo - y - self.kappa)
        sig = hi > self.h
        if self.sided == "two_sided":
            sig |= lo > self.h
        return (hi, lo), sig

    threshold_name = "h"


BaselineChart = ShewhartChart | EwmaChart | CusumChart


def make_baseline(kind: Kind, **params) -> BaselineChart:
    cls = {"shewhart": ShewhartChart, "ewma": EwmaChart, "cusum": CusumChart}.get(kind)
    if cls is None:
        raise ValueError(f"unknown baseline chart {kind!r}")
    return cls(**params)


def baseline_step(chart: BaselineChart, y: float) -> Signal:
    return chart.step(y)


def _take(state, keep):
    if isinstance(state, tuple):
        return tuple(_take(s, keep) for s in state)
    return state[keep]


def baseline_chunk(root_seed: int, key: tuple, n: int, chart: BaselineChart,
                   dist: ErrorDist, jump: float, max_steps: int) -> np.ndarray:
    rng = substream(root_seed, *key)
    rl = np.full(n, -1, dtype=np.int64)
    active = np.arange(n)
    state = chart.init_state(n)
    done, B = 0, 64
    while done < max_steps and active.size:
        B_now = min(B, max_steps - done)
        y = jump + dist.sample(rng, (active.size, B_now))
        stopped = np.zeros(active.size, dtype=bool)
        for j in range(B_now):
            state, sig = chart.update(state, y[:, j])
            new = sig & ~stopped
            rl[active[new]] = done + j + 1
            stopped |= sig
        keep = ~stopped
        active = active[keep]
        state = _take(state, keep)
        done += B_now
        B = min(2 * B, 1024)
    return rl


def estimate_baseline_arl(chart: BaselineChart, dist: ErrorDist = GAUSSIAN,
                          jump: float = 0.0, sim: SimConfig = SimConfig(),
                          stream=0) -> ArlEstimate:
    rl = run_chunks(baseline_chunk, sim, stream, chart, dist, float(jump), sim.max_steps)
    return ArlEstimate.from_run_lengths(rl, rl < 0)


def _with_threshold(chart: BaselineChart, value: float) -> BaselineChart:
    return replace(chart, **{chart.threshold_name: value})


def calibrate_baseline(kind: Kind, target_arl0: float, sim: SimConfig = SimConfig(),
                       dist: ErrorDist = GAUSSIAN, rel_tol: float = 0.01,
                       stream=(9,), **params) -> BaselineChart:
    """Tune the decision threshold (``L`` or ``h``) to an in-control ARL.

    All evaluations reuse one substream, so the simulated ARL is monotone in
    the threshold and plain bisection applies.
    """
    if target_arl0 <= 1:
        raise ValueError("target ARL must exceed 1")
    if target_arl0 >= sim.max_steps:
        raise UnreachableError(
            f"target ARL {target_arl0} is not below the censoring horizon max_steps={sim.max_steps}")
    chart = make_baseline(kind, **params)

    def arl(v):
        try:
            return estimate_baseline_arl(_with_threshold(chart, v), dist, 0.0, sim, stream).mean_rl
        except AllCensoredError:
            return math.inf

    lo, hi = 0.0, 1.0
    while arl(hi) < target_arl0:
        lo, hi = hi, 2 * hi
        if hi > 256:
            raise UnreachableError(f"no {kind} threshold reaches in-control ARL {target_arl0}")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        a = arl(mid)
        if abs(a - target_arl0) <= rel_tol * target_arl0:
            return _with_threshold(chart, mid)
        if a < target_arl0:
            lo = mid
        else:
            hi = mid
    return _with_threshold(chart, 0.5 * (lo + hi))


def chart_params(chart: BaselineChart) -> dict:
    d = asdict(chart)
    for transient in ("z", "s_hi", "s_lo"):
        d.pop(transient, None)
    return d
