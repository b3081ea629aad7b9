"""Command-line experiment runner.

    binchart simulate   --config gaussian_m12.yaml --format csv --out m12.csv
    binchart design     --config design.yaml
    binchart limit      --config limit.yaml --out limit.json
    binchart compare    --config compare.yaml --workers 4
    binchart image-demo --config image.yaml

Every output embeds the normalised config (including the seed), and feeding
an output file back through ``--config`` reproduces it byte for byte.  The
worker count is deliberately not part of the config: results never depend
on it.

Exit codes: 0 success, 1 config error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .arl import AllCensoredError, ArlEstimate, SimConfig, arl_curve, estimate_arl, estimate_arl_classic
from .baselines import calibrate_baseline, chart_params, estimate_baseline_arl
from .chart import SIDED_CHOICES, BufferChart, Signal, binarize, buffer_limits, init_buffer
from .config import CONFIG_PREFIX, ConfigError, ExperimentConfig, load_config
from .design import UnreachableError, calibrate_classic_k, calibrate_k, optimize_buffer
from .limit import (BufferStrategy, censor_at_one, check_conditions, ks_distance,
                    sample_stopping, sample_tau1)
from .noise import ErrorDist, ImageNoiseModel, energy_variance, sample_image, unit_variance
from .rng import substream

COMMANDS = ("simulate", "design", "limit", "compare", "image-demo")
ARL_COLUMNS = ["jump", "arl", "rl_disp", "std_error", "n_runs", "n_censored"]

# substream tags, one per command, so outputs of different commands never share draws
_TAG_SIMULATE, _TAG_COMPARE, _TAG_LIMIT, _TAG_IMAGE = 1, 2, 3, 4


class Output:
    """Result of a command: JSON payload plus a flat table for CSV."""

    def __init__(self, results: Any, columns: list[str], rows: list[list[Any]]):
        self.results = results
        self.columns = columns
        self.rows = rows


@contextlib.contextmanager
def config_phase():
    """Turn validation failures while building objects into config errors."""
    try:
        yield
    except (ValueError, TypeError) as exc:
        if isinstance(exc, (UnreachableError, AllCensoredError)):
            raise
        raise ConfigError(str(exc)) from exc


def _sim(cfg: ExperimentConfig, workers: int) -> SimConfig:
    s = cfg.sim
    return SimConfig(n_runs=s.n_runs, max_steps=s.max_steps, root_seed=cfg.seed,
                     chunk_size=s.chunk_size, pre_run=s.pre_run, workers=workers)


def _dist(cfg: ExperimentConfig) -> ErrorDist:
    if cfg.noise.standardized:
        return ErrorDist.standardized(cfg.noise.family)
    return ErrorDist(cfg.noise.family, float(cfg.noise.scale))


def _arl_row(jump: float, est: ArlEstimate) -> list[Any]:
    return [jump, est.mean_rl, est.rl_dispersion, est.std_error, est.n_runs, est.n_censored]


def _jumps(values) -> list[float]:
    if not values:
        raise ConfigError("jump grid is empty")
    return [float(v) for v in values]


# --- commands ----------------------------------------------------------------

def cmd_simulate(cfg: ExperimentConfig, workers: int = 1) -> Output:
    """ARL and run-length dispersion of one buffer chart over a jump grid."""
    with config_phase():
        sim, dist = _sim(cfg, workers), _dist(cfg)
        c = cfg.chart
        if c.sided not in SIDED_CHOICES:
            raise ConfigError(f"chart.sided must be one of {SIDED_CHOICES}")
        jumps = _jumps(cfg.jumps)
        buffer_limits(c.M, c.p0, c.k)
    curve = arl_curve(c.M, c.k, c.p0, dist, jumps, sim, c.sided, stream=_TAG_SIMULATE)
    rows = [_arl_row(m, est) for m, est in curve]
    results = {"chart": {"M": c.M, "k": c.k, "p0": c.p0, "sided": c.sided},
               "rows": [dict(zip(ARL_COLUMNS, r)) for r in rows]}
    return Output(results, ARL_COLUMNS, rows)


def cmd_design(cfg: ExperimentConfig, workers: int = 1) -> Output:
    """Calibrate k for a buffer length, or pick the best length for a jump."""
    d = cfg.design
    with config_phase():
        sim, dist = _sim(cfg, workers), _dist(cfg)
        if not d.target_arl0 > 0:
            raise ConfigError("design.target_arl0 must be positive")
        if d.M is None and not (d.candidates and d.jump is not None):
            raise ConfigError("design needs either M, or candidates together with jump")
    if d.M is not None:
        res = calibrate_k(int(d.M), d.p0, dist, d.target_arl0, sim, d.tolerance)
        results = {"mode": "calibrate", **res.as_dict()}
        cols = ["M", "k", "achieved_arl0", "target_arl0", "std_error"]
        return Output(results, cols, [[results[c] for c in cols]])
    choice = optimize_buffer(float(d.jump), d.p0, dist, d.target_arl0,
                             [int(m) for m in d.candidates], sim, d.tolerance)
    results = {"mode": "optimize", "jump": float(d.jump), "target_arl0": d.target_arl0,
               **choice.as_dict()}
    cols = ["M", "k", "arl0", "arl_out", "best"]
    rows = [[c["M"], c["k"], c["arl0"], c["arl_out"], int(c["M"] == choice.M)]
            for c in results["candidates"]]
    return Output(results, cols, rows)


def _strategy(spec: dict) -> BufferStrategy:
    if not isinstance(spec, dict):
        raise ConfigError("strategy must be a mapping with kind/param")
    bad = set(spec) - {"kind", "param", "table"}
    if bad:
        raise ConfigError(f"unknown strategy keys {sorted(bad)}")
    table = tuple(tuple(p) for p in spec.get("table", ()))
    s = BufferStrategy(spec.get("kind", "linear_fraction"), float(spec.get("param", 0.5)), table)
    if not check_conditions(s).natural:
        raise ConfigError(f"strategy {spec} violates the natural condition M(t) <= t")
    return s


def cmd_limit(cfg: ExperimentConfig, workers: int = 1,
              samples_out: Path | None = None) -> Output:
    """Compare finite-N stopping times with the Brownian limit (KS distance)."""
    L = cfg.limit
    with config_phase():
        strat = _strategy(L.strategy)
        ref = _strategy(L.reference) if L.reference else None
        Ns = [int(n) for n in L.N]
        if not Ns:
            raise ConfigError("limit.N is empty")
        if L.n_paths < 1:
            raise ConfigError("limit.n_paths must be positive")
        deltas = [0.0, float(L.delta)] if L.delta else [0.0]

    # one set of Brownian paths (stream 0) drives every limit sample: the
    # driftless and drifted stopping times, and both strategies, are paired
    def limit_sample(s, delta):
        rng = substream(cfg.seed, _TAG_LIMIT, 0)
        return censor_at_one(sample_tau1(s, L.k, L.G, L.n_paths, rng, delta, L.theta, L.p0))

    limit = {dv: limit_sample(strat, dv) for dv in deltas}
    samples = [("limit", 0, dv, limit[dv]) for dv in deltas]
    rows, ks_rows = [], []
    for a, N in enumerate(Ns):
        for b, dv in enumerate(deltas):
            rng = substream(cfg.seed, _TAG_LIMIT, 1, a, b)
            fin = sample_stopping(N, strat, L.p0, dv, L.theta, L.k, L.n_paths, rng)
            ks = ks_distance(fin, limit[dv])
            samples.append(("finite", N, dv, fin))
            ks_rows.append({"N": N, "delta": dv, "ks": ks, "n_samples": L.n_paths,
                            "mean_finite": float(fin.mean()), "mean_limit": float(limit[dv].mean())})
            rows.append([N, dv, ks, L.n_paths, float(fin.mean()), float(limit[dv].mean())])
    trend = {}
    for dv in deltas:
        seq = [r["ks"] for r in ks_rows if r["delta"] == dv]
        trend[str(dv)] = bool(all(x > y for x, y in zip(seq, seq[1:])))
    results: dict[str, Any] = {
        "strategy": {"kind": strat.kind, "param": strat.param},
        "k": L.k, "G": L.G, "theta": L.theta, "p0": L.p0,
        "ks": ks_rows, "ks_decreasing_in_N": trend,
    }
    if ref is not None and L.delta:
        tr = limit_sample(ref, float(L.delta))
        ts = limit[float(L.delta)]
        diff = tr - ts
        se = float(diff.std(ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else math.nan
        results["paired"] = {
            "reference": {"kind": ref.kind, "param": ref.param},
            "delta": float(L.delta),
            "mean_tau1_strategy": float(ts.mean()),
            "mean_tau1_reference": float(tr.mean()),
            "mean_difference": float(diff.mean()),
            "std_error": se,
            "strategy_earlier": bool(diff.mean() > 3 * se),
        }
    if samples_out is not None:
        _write_samples(samples_out, cfg, samples)
    return Output(results, ["N", "delta", "ks", "n_samples", "mean_finite", "mean_limit"], rows)


def _write_samples(path: Path, cfg: ExperimentConfig, samples) -> None:
    buf = io.StringIO()
    buf.write(f"# binchart limit samples\n{CONFIG_PREFIX}{_config_json(cfg)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["source", "N", "delta", "index", "value"])
    for source, N, dv, vals in samples:
        for i, v in enumerate(vals):
            w.writerow([source, N, dv, i, _fmt(float(v))])
    path.write_text(buf.getvalue())


def _binary_design(cfg, sim, dist):
    c = cfg.compare
    d = calibrate_k(c.M, 0.5, dist, c.target_arl0, sim, c.tolerance)
    return {"M": c.M, "k": d.k}


def cmd_compare(cfg: ExperimentConfig, workers: int = 1) -> Output:
    """Out-of-control ARLs of the binary chart and the baselines at a common ARL0."""
    c = cfg.compare
    known = ("binary", "classic_np", "shewhart", "ewma", "cusum")
    with config_phase():
        sim, dist = _sim(cfg, workers), _dist(cfg)
        jumps = _jumps(c.jumps)
        bad = [x for x in c.charts if x not in known]
        if bad or not c.charts:
            raise ConfigError(f"compare.charts must be a non-empty subset of {known}, got {c.charts}")
        if c.cusum_sided not in SIDED_CHOICES:
            raise ConfigError(f"compare.cusum_sided must be one of {SIDED_CHOICES}")

    rows, charts = [], []
    for tag, name in enumerate(known):
        if name not in c.charts:
            continue
        stream = (_TAG_COMPARE, tag)
        if name == "binary":
            params = _binary_design(cfg, sim, dist)
            run = lambda m, i: estimate_arl(params["M"], params["k"], 0.5, "two_sided", dist, m,
                                            sim, stream + (i,))
        elif name == "classic_np":
            d = calibrate_classic_k(c.N, 0.5, c.target_arl0, c.tolerance)
            params = {"N": c.N, "k": d.k}
            run = lambda m, i: estimate_arl_classic(params["N"], params["k"], 0.5, dist, m,
                                                    sim, "two_sided", stream + (i,))
        else:
            extra = {"ewma": {"lam": c.ewma_lambda},
                     "cusum": {"kappa": c.cusum_kappa, "sided": c.cusum_sided}}.get(name, {})
            chart = calibrate_baseline(name, c.target_arl0, sim, dist, stream=stream + (999,), **extra)
            params = chart_params(chart)
            params.pop("kind")
            run = lambda m, i, chart=chart: estimate_baseline_arl(chart, dist, m, sim, stream + (i,))
        label = ";".join(f"{k}={v}" for k, v in params.items())
        cells = []
        for i, m in enumerate(jumps):
            est = run(m, i)
            rows.append([name, label] + _arl_row(m, est))
            cells.append(dict(zip(ARL_COLUMNS, _arl_row(m, est))))
        charts.append({"chart": name, "params": params, "rows": cells})
    results = {"target_arl0": c.target_arl0, "charts": charts}
    return Output(results, ["chart", "params"] + ARL_COLUMNS, rows)


def cmd_image_demo(cfg: ExperimentConfig, workers: int = 1) -> Output:
    """Buffer chart run up each column of a synthetic image.

    Rows and columns are 1-based in config and output.  The shift is added
    to every selected column from ``shift_row`` to the top.  The chart is
    restarted (fresh random pre-run) after each false alarm; the first signal
    at or above ``shift_row`` is the detection.
    """
    im = cfg.image
    with config_phase():
        if im.variance not in ("energy", "unit"):
            raise ConfigError("image.variance must be 'energy' or 'unit'")
        model = ImageNoiseModel(im.width, im.height, im.h, _dist(cfg),
                                energy_variance if im.variance == "energy" else unit_variance)
        if not 1 <= im.shift_row <= im.height:
            raise ConfigError(f"image.shift_row must lie in 1..{im.height}, got {im.shift_row}")
        if im.shift_columns == "all":
            cols = list(range(1, im.width + 1))
        elif isinstance(im.shift_columns, list):
            cols = sorted({int(x) for x in im.shift_columns})
            if any(not 1 <= x <= im.width for x in cols):
                raise ConfigError(f"image.shift_columns must lie in 1..{im.width}")
        else:
            raise ConfigError("image.shift_columns must be 'all' or a list of columns")
        buffer_limits(im.M, 0.5, im.k)

    _, eps, _ = sample_image(model, substream(cfg.seed, _TAG_IMAGE, 0))
    pre = substream(cfg.seed, _TAG_IMAGE, 1)
    shifted = set(cols) if im.shift else set()
    start = im.shift_row - 1

    def fresh() -> BufferChart:
        return init_buffer(im.M, im.k, pre_run=(pre.random(im.M) < 0.5).astype(int).tolist())

    per_col, rows = [], []
    for i in range(im.width):
        y = eps[i] + np.where(np.arange(im.height) >= start, im.shift if (i + 1) in shifted else 0.0, 0.0)
        chart, alarms, detect = fresh(), 0, None
        for j, v in enumerate(y.tolist()):
            _, sig = chart.step(binarize(v))
            if sig is Signal.IN_CONTROL:
                continue
            if j < start:
                alarms += 1
                chart = fresh()
            else:
                detect = j + 1
                break
        delay = None if detect is None else detect - im.shift_row + 1
        per_col.append({"column": i + 1, "shifted": (i + 1) in shifted, "detection_row": detect,
                        "delay": delay, "false_alarms": alarms})
        rows.append([i + 1, int((i + 1) in shifted), detect, delay, alarms])

    delays = [r["delay"] for r in per_col if r["shifted"] and r["delay"] is not None]
    n_pre = im.width * start
    summary = {
        "n_shifted": len(shifted),
        "n_detected": len(delays),
        "mean_delay": float(np.mean(delays)) if delays else None,
        "false_alarms": sum(r["false_alarms"] for r in per_col),
        "pre_shift_observations": n_pre,
        "false_alarm_rate": sum(r["false_alarms"] for r in per_col) / n_pre if n_pre else None,
    }
    results = {"summary": summary, "columns": per_col}
    return Output(results, ["column", "shifted", "detection_row", "delay", "false_alarms"], rows)


HANDLERS: dict[str, Callable[..., Output]] = {
    "simulate": cmd_simulate, "design": cmd_design, "limit": cmd_limit,
    "compare": cmd_compare, "image-demo": cmd_image_demo,
}


# --- serialisation -------------------------------------------------------------

def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _config_json(cfg: ExperimentConfig) -> str:
    return json.dumps(_clean(cfg.to_dict()), sort_keys=True, separators=(",", ":"))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render(command: str, cfg: ExperimentConfig, out: Output, fmt: str) -> str:
    if fmt == "json":
        doc = {"tool": "binchart", "version": __version__, "command": command,
               "seed": cfg.seed, "config": cfg.to_dict(), "results": out.results}
        return json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# binchart {__version__} {command}\n# seed: {cfg.seed}\n")
    buf.write(f"{CONFIG_PREFIX}{_config_json(cfg)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(out.columns)
    for r in out.rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


# --- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="binchart", description="Moving-buffer binary control chart experiments.")
    p.add_argument("--version", action="version", version=f"binchart {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=(HANDLERS[name].__doc__ or "").strip().split("\n")[0] or None)
        sp.add_argument("--config", type=Path, help="YAML/JSON config, or a previous output file")
        sp.add_argument("--seed", type=int, help="root seed (unsigned 64-bit); overrides the config")
        sp.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
        sp.add_argument("--out", type=Path, help="output path (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"),
                        default="json" if name in ("design", "limit", "image-demo") else "csv")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {args.seed}")
            cfg.seed = args.seed
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        kwargs = {}
        if args.command == "limit" and args.out is not None:
            kwargs["samples_out"] = args.out.with_name(args.out.stem + ".samples.csv")
        out = HANDLERS[args.command](cfg, args.workers, **kwargs)
        text = render(args.command, cfg, out, args.format)
    except (ConfigError, FileNotFoundError, IsADirectoryError, json.JSONDecodeError) as exc:
        print(f"binchart: config error: {exc}", file=sys.stderr)
        return 1
    except (UnreachableError, AllCensoredError, RuntimeError, ValueError, ArithmeticError) as exc:
        print(f"binchart: runtime error: {exc}", file=sys.stderr)
        return 2
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
