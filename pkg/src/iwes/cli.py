"""Command-line entry point.

Subcommands: train, sweep, bench, eval.  Each takes an optional
--config JSON file plus positional key=value overrides; flags beat file
values.  Exit codes: 0 success, 1 config error, 2 runtime error.
"""

import argparse
import logging
import os
import sys

from .config import ConfigError, RunConfig, apply_overrides, load_config
from .config import make_objective
from .objectives import evaluate_policy_median
from .persistence import load_params
from .pool import derive_episode_seed
from .runner import SWEEP_AXES, STREAM_EVAL, bench_throughput, sweep, train


class _Parser(argparse.ArgumentParser):
    """Bad command lines are config errors (exit 1), not argparse's 2."""

    def error(self, message):
        raise ConfigError(message)


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file; defaults used if omitted")
    sub.add_argument(
        "overrides",
        nargs="*",
        metavar="key=value",
        help="config overrides applied after the file",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="iwes", description=__doc__.strip().splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    p_train = subs.add_parser("train", help="run training for every seed")
    _add_common(p_train)

    p_sweep = subs.add_parser("sweep", help="train across values of one axis")
    p_sweep.add_argument("--axis", required=True, help="one of: " + ", ".join(sorted(SWEEP_AXES)))
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    _add_common(p_sweep)

    p_bench = subs.add_parser("bench", help="time training iterations per (hidden, K)")
    p_bench.add_argument("--k-values", required=True, help="comma-separated reuse counts")
    p_bench.add_argument("--hidden-values", required=True, help="comma-separated widths")
    p_bench.add_argument("--timed-iters", type=int, default=20)
    p_bench.add_argument("--warmup", type=int, default=2)
    p_bench.add_argument("--out", help="output CSV path (default <out_dir>/bench.csv)")
    _add_common(p_bench)

    p_eval = subs.add_parser("eval", help="median return of saved parameters")
    p_eval.add_argument("--params", required=True, help="params_final.bin path")
    _add_common(p_eval)
    return parser


def _load_effective_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg = apply_overrides(cfg, args.overrides)
    cfg.validate()
    return cfg


def _parse_number_list(text: str, kind, what: str):
    try:
        return [kind(part) for part in text.split(",") if part != ""]
    except ValueError as exc:
        raise ConfigError(f"bad {what}: {text!r} ({exc})") from exc


def _cmd_train(args) -> int:
    cfg = _load_effective_config(args)
    artifacts = train(cfg)
    print(f"wrote artifacts to {artifacts.out_dir}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_effective_config(args)
    if args.axis not in SWEEP_AXES:
        raise ConfigError(
            f"unknown sweep axis {args.axis!r}; have {', '.join(sorted(SWEEP_AXES))}"
        )
    kind = int if args.axis in ("K", "hidden") else float
    values = _parse_number_list(args.values, kind, "--values")
    if not values:
        raise ConfigError("--values is empty")
    result = sweep(cfg, args.axis, values)
    print(f"wrote sweep summary to {result.summary_csv}")
    return 0


def _cmd_bench(args) -> int:
    cfg = _load_effective_config(args)
    k_values = _parse_number_list(args.k_values, int, "--k-values")
    hidden_values = _parse_number_list(args.hidden_values, int, "--hidden-values")
    if not k_values or not hidden_values:
        raise ConfigError("--k-values and --hidden-values must be non-empty")
    if args.timed_iters < 1 or args.warmup < 0:
        raise ConfigError("--timed-iters must be >= 1 and --warmup >= 0")
    out_path = args.out
    if out_path is None:
        os.makedirs(cfg.out_dir, exist_ok=True)
        out_path = os.path.join(cfg.out_dir, "bench.csv")
    rows = bench_throughput(
        cfg,
        k_values,
        hidden_values,
        timed_iters=args.timed_iters,
        warmup=args.warmup,
        out_path=out_path,
    )
    print(f"{'hidden':>6} {'K':>3} {'ms/iter':>12} {'ratio':>8}")
    for row in rows:
        print(
            f"{row['hidden']:>6d} {row['K']:>3d} "
            f"{row['median_iter_ms']:>12.3f} {row['ratio_vs_k0']:>8.3f}"
        )
    print(f"wrote bench table to {out_path}")
    return 0


def _cmd_eval(args) -> int:
    cfg = _load_effective_config(args)
    params = load_params(args.params)
    objective = make_objective(cfg)
    if params.size != objective.dim:
        raise ConfigError(
            f"params file has {params.size} values but objective "
            f"{cfg.objective!r} expects {objective.dim}"
        )
    seed_base = derive_episode_seed(cfg.seeds[0], STREAM_EVAL)
    median, _ = evaluate_policy_median(objective, params, cfg.n_eval, seed_base)
    print(f"median_eval_return {median:.17g}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "sweep": _cmd_sweep,
    "bench": _cmd_bench,
    "eval": _cmd_eval,
}


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:
        # argparse --help path; errors are rerouted to ConfigError
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
