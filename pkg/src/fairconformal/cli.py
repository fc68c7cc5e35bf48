"""``fairconformal`` command line: ``run``, ``synth`` and ``eval``.

Exit codes: 0 on success, 1 on a validation error (bad config, unreadable
input), 2 on a runtime failure.
"""
import argparse
import json
import logging
import os
import sys

from .config import ConfigError, parse_overrides, validate_config
from .dataset import SCENARIOS, DatasetError, generate_synthetic, write_csv
from .fair import METHODS as SMOOTHING_METHODS
from .fair import Smoothing
from .experiment import (
    ExperimentFailure,
    evaluate_predictions,
    load_predictions_csv,
    run_experiment,
)

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("fairconformal")


def _parser():
    p = argparse.ArgumentParser(prog="fairconformal",
                                description="Fair conformal quantile prediction experiments.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the repeated experiment protocol")
    r.add_argument("--config", help="key = value config file")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable; wins over the file)")
    r.add_argument("--output-dir")
    r.add_argument("--repetitions", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--jobs", type=int)

    s = sub.add_parser("synth", help="write a synthetic dataset as CSV")
    s.add_argument("--scenario", default="shift", choices=sorted(SCENARIOS))
    s.add_argument("--n", type=int, default=2000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", required=True)

    e = sub.add_parser("eval", help="post-process and score precomputed quantile predictions")
    e.add_argument("--predictions", required=True,
                   help="CSV with split, group, response, q_lo, q_hi columns")
    e.add_argument("--alpha", type=float, default=0.1)
    e.add_argument("--methods", default="cfqp,cqr")
    e.add_argument("--smoothing", default="triangular", choices=SMOOTHING_METHODS)
    e.add_argument("--bandwidth", type=float)
    e.add_argument("--sigma", type=float, help="jitter half-width (default: IQR rule)")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--delimiter", default=",")
    e.add_argument("--output", help="write the JSON report here instead of stdout")
    return p


def _cmd_run(args):
    overrides = parse_overrides(args.set)
    for flag, key in (("output_dir", "output_dir"), ("repetitions", "repetitions"),
                      ("seed", "seed"), ("jobs", "jobs")):
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = str(value)
    config = validate_config(args.config, overrides)
    result = run_experiment(config)
    for method, block in result.summary["methods"].items():
        print(f"{method:>6}: {block['table_row']}")
    print(f"wrote {os.path.join(config.output_dir, 'summary.json')}")
    return EXIT_OK


def _cmd_synth(args):
    if args.n < 1:
        raise ConfigError([f"--n must be >= 1, got {args.n}"])
    data = generate_synthetic(args.scenario, args.n, args.seed)
    write_csv(data, args.output)
    print(f"wrote {args.n} rows to {args.output}")
    return EXIT_OK


def _cmd_eval(args):
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    errors = [f"unknown method {m!r}" for m in methods if m not in ("cfqp", "cqr", "unfair")]
    if not 0 < args.alpha < 1:
        errors.append(f"alpha must lie in (0, 1), got {args.alpha}")
    if errors:
        raise ConfigError(errors)
    parts, n_groups, labels = load_predictions_csv(args.predictions, args.delimiter)
    reports = evaluate_predictions(parts, n_groups, args.alpha, methods,
                                   Smoothing(args.smoothing, args.bandwidth), args.sigma,
                                   args.seed)
    doc = {"n_groups": n_groups, "group_labels": list(labels),
           "methods": {m: rep.to_dict() for m, rep in reports.items()}}
    text = json.dumps(doc, indent=2) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "synth": _cmd_synth, "eval": _cmd_eval}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ExperimentFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # anything else is a runtime failure, not a traceback
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
