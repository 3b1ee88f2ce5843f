"""Command-line entry point: ``fewstate gen|run|sweep|compare``.

Settings are resolved in three layers: built-in defaults, then an optional
``--config`` file of key=value lines, then ``--set KEY=VALUE`` and the
named flags.  Exit codes: 0 ok, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import experiment as ex
from .generators import StreamFormatError, write_stream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

log = logging.getLogger("fewstate")

# flag name -> config key
_FLAGS = {
    "algo": "algo", "p": "p", "eps": "eps", "delta": "delta", "preset": "preset",
    "trials": "trials", "seed": "seed", "stream": "stream", "out": "out",
    "workers": "workers", "pruning": "pruning", "rescale": "rescale", "rows": "rows",
}


def _common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key=value config file")
    sub.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                     help="override any config key (repeatable)")
    sub.add_argument("--algo", choices=ex.ALGOS)
    sub.add_argument("--p", type=float)
    sub.add_argument("--eps", type=float)
    sub.add_argument("--delta", type=float)
    sub.add_argument("--preset", choices=("paper", "practical"))
    sub.add_argument("--trials", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--stream", help="stream file or kind:key=value,... spec")
    sub.add_argument("--out", help="output path (default: stdout)")
    sub.add_argument("--workers", type=int)
    sub.add_argument("--pruning", choices=("age", "global"))
    sub.add_argument("--rescale", choices=("rescaled", "literal", "max"))
    sub.add_argument("--rows", type=int, help="rows of the stable / entropy sketches")
    sub.add_argument("--exact-counters", action="store_true", default=None)
    sub.add_argument("--timing", action="store_true", default=None,
                     help="fill wall_ms (makes output non-reproducible)")


def build_parser() -> argparse.ArgumentParser:
    # argparse exits with 2 on its own usage errors, which matches EXIT_CONFIG
    parser = argparse.ArgumentParser(prog="fewstate",
                                     description="Few-state-change streaming sketches.")
    parser.add_argument("-v", "--verbose", action="store_true")
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("gen", help="write a generated stream to a file")
    gen.add_argument("--stream", required=True)
    gen.add_argument("--seed", type=int, default=1)
    gen.add_argument("--p", type=float, default=2.0)
    gen.add_argument("--eps", type=float, default=0.5)
    gen.add_argument("--out", required=True)

    run = subs.add_parser("run", help="run trials and emit one CSV row per trial")
    _common(run)

    sweep = subs.add_parser("sweep", help="vary n, m or eps and fit a log-log slope")
    _common(sweep)
    sweep.add_argument("--vary", choices=("n", "m", "eps"), required=True)
    sweep.add_argument("--values", required=True, help="comma separated sweep points")
    sweep.add_argument("--trials-out", help="also write the per-trial rows here")

    compare = subs.add_parser("compare", help="run several algorithms on the same stream")
    _common(compare)
    compare.add_argument("--algos", default="full-sample-hold,mg,ss,cm",
                         help="comma separated algorithm ids")
    return parser


def resolve_config(args) -> ex.ExperimentConfig:
    settings: dict[str, str] = {}
    if args.config:
        settings.update(ex.load_config(args.config))
    for item in args.overrides:
        settings.update(ex.parse_key_values(item, "--set"))
    cfg = ex.apply_settings(ex.ExperimentConfig(), settings)
    flags = {key: getattr(args, name) for name, key in _FLAGS.items()
             if getattr(args, name, None) is not None}
    if args.exact_counters:
        flags["exact_counters"] = True
    if args.timing:
        flags["timing"] = True
    cfg = replace(cfg, **flags)
    cfg.validate()
    return cfg


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _parse_values(raw: str, vary: str) -> list:
    try:
        vals = [float(v) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise ex.ConfigError(f"bad sweep values {raw!r}") from exc
    return vals if vary == "eps" else [int(v) for v in vals]


def cmd_gen(args) -> None:
    stream = ex.build_stream(args.stream, args.seed, args.p, args.eps)
    write_stream(args.out, stream)


def cmd_run(args) -> None:
    cfg = resolve_config(args)
    _emit(ex.rows_to_csv(ex.run(cfg)), cfg.out)


def cmd_sweep(args) -> None:
    cfg = resolve_config(args)
    rows, summary, fit = ex.sweep(cfg, args.vary, _parse_values(args.values, args.vary))
    for s in summary:
        s["slope"], s["slope_stderr"] = fit.slope, fit.stderr
    cols = ex.SUMMARY_COLUMNS + ("slope", "slope_stderr")
    _emit(ex.rows_to_csv(summary, cols), cfg.out)
    if args.trials_out:
        _emit(ex.rows_to_csv(rows, ("vary", "value") + ex.COLUMNS), args.trials_out)
    log.info("slope %.4f +/- %.4f", fit.slope, fit.stderr)


def cmd_compare(args) -> None:
    cfg = resolve_config(args)
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    rows = []
    for algo in algos:
        point = replace(cfg, algo=algo)
        point.validate()
        rows.extend(ex.run(point))
    _emit(ex.rows_to_csv(rows), cfg.out)


_COMMANDS = {"gen": cmd_gen, "run": cmd_run, "sweep": cmd_sweep, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        _COMMANDS[args.command](args)
    except (StreamFormatError, OSError) as exc:
        print(f"fewstate: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # ConfigError and bad generator parameters
        print(f"fewstate: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
