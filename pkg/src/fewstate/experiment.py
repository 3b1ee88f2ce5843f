"""Experiment runner: configs, per-trial rows, sweeps and slope fits.

A config plus the code version fixes every output byte: each trial's seed
is derived from the base seed and the trial index, and wall-clock time is
only written when explicitly requested.
"""

from __future__ import annotations

import csv
import functools
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import generators as gen
from .baselines import CountMin, MisraGries, SpaceSaving
from .entropy import EntropyEstimator
from .fp_estimator import FpEstimator
from .full_sample_hold import FullSampleAndHold
from .model import PRESETS, SeededPrf, StateMeter, derive_params
from .oracle import FrequencyOracle
from .sample_hold import SampleAndHold
from .stable import StableSketch

# accumulator base when the config leaves it unset
DEFAULT_ACC_BASE = {"stable-fp": 0.5, "entropy": 0.002}

ALGOS = ("sample-hold", "full-sample-hold", "fp", "stable-fp", "entropy", "mg", "ss", "cm")
COLUMNS = ("trial", "seed", "algo", "n", "m", "p", "eps", "estimate", "oracle", "rel_err",
           "state_changes", "peak_words", "wall_ms")
SUMMARY_COLUMNS = ("vary", "value", "trials", "mean_state_changes", "mean_peak_words",
                   "mean_rel_err", "median_rel_err")

# keys forwarded to derive_params
PARAM_KNOBS = ("gamma", "log_factor", "kappa_const", "k_factor", "hh_reps", "fp_reps",
               "counter_eps", "counter_delta", "length_base", "level_slack", "level_rho",
               "rho", "band_offset", "k_lo", "k_hi")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    stream: str = "permutation:n=4096"
    algo: str = "full-sample-hold"
    p: float = 2.0
    eps: float = 0.5
    delta: float = 0.1
    preset: str = "practical"
    trials: int = 1
    seed: int = 1
    out: str | None = None
    timing: bool = False
    workers: int = 1
    exact_counters: bool = False
    pruning: str = "age"
    rescale: str = "rescaled"
    rows: int | None = None
    acc_base: float | None = None
    coins: str | None = None
    baseline_k: int | None = None
    cm_width: int | None = None
    cm_depth: int | None = None
    knobs: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.algo not in ALGOS:
            raise ConfigError(f"unknown algorithm {self.algo!r}; expected one of {ALGOS}")
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 < self.eps < 1 or not 0 < self.delta < 1:
            raise ConfigError("eps and delta must lie in (0, 1)")


_BOOL = {"1": True, "true": True, "yes": True, "0": False, "false": False, "no": False}


def _coerce(name: str, raw: str, kind):
    if raw.lower() in ("none", ""):
        return None
    try:
        if kind is bool:
            return _BOOL[raw.lower()]
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


_FIELD_KINDS = {
    "stream": str, "algo": str, "p": float, "eps": float, "delta": float, "preset": str,
    "trials": int, "seed": int, "out": str, "timing": bool, "workers": int,
    "exact_counters": bool, "pruning": str, "rescale": str, "rows": int, "acc_base": float,
    "coins": str, "baseline_k": int, "cm_width": int, "cm_depth": int,
}
_KNOB_KINDS = {"hh_reps": int, "fp_reps": int, "k_lo": int, "k_hi": int, "band_offset": int,
               "level_rho": str}


def apply_settings(cfg: ExperimentConfig, settings: dict[str, str]) -> ExperimentConfig:
    """Return a copy of ``cfg`` with string key=value settings applied."""
    updates = {}
    knobs = dict(cfg.knobs)
    for key, raw in settings.items():
        key = key.strip().replace("-", "_")
        raw = raw.strip()
        if key in _FIELD_KINDS:
            updates[key] = _coerce(key, raw, _FIELD_KINDS[key])
        elif key in PARAM_KNOBS:
            knobs[key] = _coerce(key, raw, _KNOB_KINDS.get(key, float))
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return replace(cfg, knobs=knobs, **updates)


def parse_key_values(text: str, origin: str = "config") -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path) -> dict[str, str]:
    return parse_key_values(Path(path).read_text(), str(path))


def config_to_text(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        if f.name == "knobs":
            continue
        lines.append(f"{f.name}={getattr(cfg, f.name)}")
    for k in sorted(cfg.knobs):
        lines.append(f"{k}={cfg.knobs[k]}")
    return "\n".join(lines) + "\n"


# -- streams -----------------------------------------------------------------


def _spec_args(body: str) -> dict[str, str]:
    args = {}
    for part in filter(None, body.split(",")):
        if "=" not in part:
            raise ConfigError(f"stream parameter {part!r} is not key=value")
        k, v = part.split("=", 1)
        args[k.strip()] = v.strip()
    return args


def _num(args, key, kind=int, default=None):
    if key not in args:
        if default is None:
            raise ConfigError(f"stream spec needs {key}=")
        return default
    try:
        return kind(float(args[key])) if kind is int else kind(args[key])
    except ValueError as exc:
        raise ConfigError(f"bad stream parameter {key}={args[key]!r}") from exc


def build_stream(spec: str, seed: int, p: float = 2.0, eps: float = 0.5) -> gen.Stream:
    """Materialise a stream from ``kind:key=value,...`` or a file path."""
    kind, _, body = spec.partition(":")
    kind = kind.strip().lower()
    args = _spec_args(body)
    if "seed" in args:
        seed = _num(args, "seed")
    if kind == "permutation":
        return gen.gen_permutation(_num(args, "n"), seed)
    if kind == "zipf":
        return gen.gen_zipf(_num(args, "n"), _num(args, "m"), _num(args, "s", float, 1.1), seed)
    if kind == "uniform":
        return gen.gen_uniform(_num(args, "d", int, _num(args, "n", int, 1024)),
                               _num(args, "copies", int, 16), seed)
    if kind in ("lowerbound-s1", "lowerbound-s2"):
        s1, s2 = gen.gen_lowerbound_pair(_num(args, "n"), _num(args, "p", float, p), seed)
        return s1 if kind.endswith("s1") else s2
    if kind == "planted-hh":
        return gen.gen_planted_hh(_num(args, "n"), _num(args, "p", float, p),
                                  _num(args, "eps", float, eps), seed)
    if kind == "pseudoheavy":
        return gen.gen_pseudoheavy(_num(args, "n"), seed)
    if not body and Path(spec).exists():
        return gen.read_stream(spec)
    if kind and not body and ("/" in spec or "." in spec):
        raise FileNotFoundError(spec)
    raise ConfigError(f"unknown stream kind {kind!r}")


def with_stream_param(spec: str, key: str, value) -> str:
    kind, _, body = spec.partition(":")
    args = _spec_args(body)
    args[key] = str(value)
    if kind.strip().lower() == "permutation" and key == "m":
        args = {"n": str(value), **{k: v for k, v in args.items() if k not in ("n", "m")}}
    return kind + ":" + ",".join(f"{k}={v}" for k, v in args.items())


# -- trials ------------------------------------------------------------------


def trial_seed(base: int, trial: int) -> int:
    return SeededPrf(base, "trial").bits(trial)


def _params(cfg: ExperimentConfig, n: int, m: int):
    try:
        return derive_params(max(2, n), max(1, m), cfg.eps, cfg.delta, cfg.p, cfg.preset,
                             **cfg.knobs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _consume(sketch, items, meter: StateMeter, with_time: bool = True) -> None:
    proc = sketch.process
    end = meter.end_update
    if with_time:
        for t, item in enumerate(items, 1):
            proc(t, item)
            end()
    else:
        for item in items:
            proc(item)
            end()


def run_trial(cfg: ExperimentConfig, trial: int) -> dict:
    seed = trial_seed(cfg.seed, trial)
    stream = build_stream(cfg.stream, seed, cfg.p, cfg.eps)
    oracle = FrequencyOracle(stream.items)
    items = stream.items.tolist()
    n, m = stream.n, len(stream)
    prf = SeededPrf(seed, cfg.algo)
    meter = StateMeter()
    target = stream.meta.get("planted", stream.meta.get("heavy"))
    if target is None and m:
        target = oracle.top()

    start = time.perf_counter()
    algo = cfg.algo
    acc_base = cfg.acc_base or DEFAULT_ACC_BASE.get(algo)
    if algo in ("sample-hold", "full-sample-hold", "fp"):
        params = _params(cfg, n, m)
        if algo == "sample-hold":
            sketch = SampleAndHold.from_params(params, prf.rng(), meter,
                                               exact=cfg.exact_counters, pruning=cfg.pruning)
        elif algo == "full-sample-hold":
            sketch = FullSampleAndHold(params, prf, meter, exact_counters=cfg.exact_counters,
                                       rescale=cfg.rescale, pruning=cfg.pruning)
        else:
            sketch = FpEstimator(params, prf, meter, exact_counters=cfg.exact_counters,
                                 rescale=cfg.rescale)
        _consume(sketch, items, meter)
        if algo == "fp":
            estimate, truth = sketch.estimate(m), float(oracle.fp(cfg.p))
        else:
            estimate, truth = sketch.estimate(target) if m else 0.0, float(oracle[target] if m else 0)
    elif algo == "stable-fp":
        rows = cfg.rows or math.ceil(64 / cfg.eps**2)
        sketch = StableSketch(cfg.p, rows, prf, a=acc_base, meter=meter,
                              exact=cfg.exact_counters, coins=cfg.coins or "shared")
        _consume(sketch, items, meter, with_time=False)
        estimate, truth = sketch.estimate(), float(oracle.fp(cfg.p))
    elif algo == "entropy":
        sketch = EntropyEstimator(cfg.eps, max(4, m), prf, rows=cfg.rows, a=acc_base,
                                  meter=meter, exact=cfg.exact_counters,
                                  coins=cfg.coins or "per-row")
        _consume(sketch, items, meter, with_time=False)
        estimate, truth = sketch.estimate(), oracle.entropy()
    else:
        k = cfg.baseline_k or math.ceil(2 / cfg.eps)
        if algo == "mg":
            sketch = MisraGries(k, meter)
        elif algo == "ss":
            sketch = SpaceSaving(k, meter)
        else:
            width = cfg.cm_width or math.ceil(math.e / cfg.eps)
            depth = cfg.cm_depth or math.ceil(math.log(1 / cfg.delta))
            sketch = CountMin(width, depth, prf, meter)
        _consume(sketch, items, meter)
        estimate, truth = (sketch.estimate(target), float(oracle[target])) if m else (0.0, 0.0)
    wall_ms = (time.perf_counter() - start) * 1000.0

    rel_err = abs(estimate - truth) / abs(truth) if truth else None
    return {
        "trial": trial,
        "seed": seed,
        "algo": algo,
        "n": n,
        "m": m,
        "p": cfg.p,
        "eps": cfg.eps,
        "estimate": estimate,
        "oracle": truth,
        "rel_err": rel_err,
        "state_changes": meter.total_state_changes,
        "peak_words": meter.peak_words,
        "wall_ms": wall_ms if cfg.timing else None,
    }


def run(cfg: ExperimentConfig) -> list[dict]:
    cfg.validate()
    if cfg.workers == 1:
        return [run_trial(cfg, i) for i in range(cfg.trials)]
    # trials are independent and seeded by index, so order of completion
    # cannot leak into the output
    with ProcessPoolExecutor(cfg.workers) as pool:
        return list(pool.map(functools.partial(run_trial, cfg), range(cfg.trials)))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(round(value, 10))
    return str(value)


def rows_to_csv(rows, columns=COLUMNS) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


# -- sweeps ------------------------------------------------------------------


@dataclass
class SlopeFit:
    slope: float
    stderr: float
    intercept: float


def fit_loglog(xs, ys) -> SlopeFit:
    """Least-squares slope of log(y) against log(x) with its standard error."""
    x = np.log(np.asarray(xs, dtype=np.float64))
    y = np.log(np.maximum(np.asarray(ys, dtype=np.float64), 1e-300))
    if x.size < 3:
        raise ConfigError("need at least 3 points for a slope with standard error")
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = x.size - 2
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    return SlopeFit(float(coef[0]), float(math.sqrt(cov[0, 0])), float(coef[1]))


def sweep(cfg: ExperimentConfig, vary: str, values) -> tuple[list[dict], list[dict], SlopeFit]:
    """Run ``cfg`` at each value of ``vary`` (n, m or eps).

    Returns per-trial rows, per-point summaries and the log-log slope of
    mean state changes against the varied quantity.
    """
    values = list(values)
    if len(values) < 4:
        raise ConfigError("a sweep needs at least 4 points")
    if vary not in ("n", "m", "eps"):
        raise ConfigError("vary must be one of n, m, eps")
    all_rows, summary = [], []
    for value in values:
        if vary == "eps":
            point = replace(cfg, eps=float(value))
        else:
            point = replace(cfg, stream=with_stream_param(cfg.stream, vary, int(value)))
        rows = run(point)
        for r in rows:
            r["vary"], r["value"] = vary, value
        all_rows.extend(rows)
        errs = [r["rel_err"] for r in rows if r["rel_err"] is not None]
        summary.append({
            "vary": vary,
            "value": value,
            "trials": len(rows),
            "mean_state_changes": float(np.mean([r["state_changes"] for r in rows])),
            "mean_peak_words": float(np.mean([r["peak_words"] for r in rows])),
            "mean_rel_err": float(np.mean(errs)) if errs else None,
            "median_rel_err": float(np.median(errs)) if errs else None,
        })
    xs = [float(s["value"]) for s in summary]
    fit = fit_loglog(xs, [s["mean_state_changes"] for s in summary])
    return all_rows, summary, fit
