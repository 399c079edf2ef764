"""Command-line interface.

Subcommands: ``expected``, ``cdf``, ``simulate``, ``sweep`` and ``validate``.
Every run prints the resolved configuration as ``# key = value`` lines before
its report. Exit codes: 0 success, 1 failed check or numeric failure,
2 usage, 3 dimension cap, 4 output error.
"""
import argparse
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ewsn_retrieval import config as config_module
from ewsn_retrieval.config import ResolvedConfig
from ewsn_retrieval import phtype, sweep
from ewsn_retrieval.errors import EwsnError, ValidationError
from ewsn_retrieval.model import w_phase_type
from ewsn_retrieval.retrieval import METHODS, expected_time, expected_time_matrix, ws_cdf
from ewsn_retrieval.sim import ArrivalMode, simulate
from ewsn_retrieval.utils.decorators import timing
from ewsn_retrieval.utils.file_utils import frame_to_csv, write_text
from ewsn_retrieval.utils.log import logger
from ewsn_retrieval.utils.structure import dotdict
from ewsn_retrieval.validation import format_report, run_suite, simulation_configs

# flag -> argparse keywords; ``dest`` is the configuration key
COMMON_FLAGS: Dict[str, Dict[str, Any]] = {
    "n": {"dest": "n_sensors", "type": int, "help": "number of sensors N"},
    "b": {"dest": "battery_cap", "type": int, "help": "battery capacity B"},
    "lambda-e": {"dest": "harvest_rate", "type": float, "help": "energy harvest rate per sensor"},
    "mu": {"dest": "broadcast_rate", "type": float, "help": "network broadcast rate (per sensor mu/N)"},
    "lambda-a": {"dest": "client_arrival_rate", "type": float, "help": "client arrival rate"},
    "s": {"dest": "samples_needed", "type": int, "help": "distinct measurements needed"},
    "sigma2": {"dest": "sigma2", "type": float, "help": "measurement noise variance (with --threshold)"},
    "threshold": {"dest": "threshold", "type": float, "help": "variance target of the estimate (with --sigma2)"},
    "reps": {"dest": "replications", "type": int, "help": "simulation replications"},
    "seed": {"dest": "seed", "type": int, "help": "simulation seed"},
    "warmup": {"dest": "warmup_time", "type": float, "help": "simulation warmup time"},
    "rewarm": {"dest": "rewarm_time", "type": float, "help": "time between injected clients"},
    "per-trajectory": {"dest": "replications_per_trajectory", "type": int, "help": "clients per trajectory"},
    "arrival-mode": {"dest": "arrival_mode", "choices": [m.value for m in ArrivalMode]},
    "dimension-cap": {"dest": "dimension_cap", "type": int, "help": "largest Kronecker dimension"},
    "workers": {"dest": "workers", "type": int, "help": "worker threads"},
    "log-level": {"dest": "log_level", "type": str.upper, "choices": ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]},
    "config": {"dest": "config_path", "help": "TOML configuration file"},
}


def _add_arguments(parser: argparse.ArgumentParser, table: Dict[str, Dict[str, Any]]) -> None:
    for name, user_args in table.items():
        user_args = dict(user_args)
        if "store_" not in user_args.get("action", ""):
            user_args.setdefault("default", None)
        parser.add_argument(f"--{name}", **user_args)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _add_arguments(common, COMMON_FLAGS)

    parser = argparse.ArgumentParser(
        prog="ewsn",
        description="Retrieval time of s distinct measurements in an energy-harvesting sensor network.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    expected = commands.add_parser("expected", parents=[common], help="E[W_s] at one point")
    _add_arguments(
        expected,
        {
            "method": {"choices": list(METHODS), "default": "closed"},
            "moment": {"type": int, "default": 1, "help": "moment order k (k > 1 needs --method matrix)"},
        },
    )

    cdf = commands.add_parser("cdf", parents=[common], help="tabulate P(W_s <= t)")
    _add_arguments(
        cdf,
        {
            "t-max": {"dest": "t_max", "type": float, "default": 100.0},
            "steps": {"type": int, "default": 100},
            "method": {"choices": ["closed", "matrix"], "default": "closed",
                       "help": "matrix adds the Kronecker CDF column"},
            "out": {"help": "CSV path (default stdout)"},
        },
    )

    simulate_cmd = commands.add_parser("simulate", parents=[common], help="Monte Carlo replicates of W_s")
    _add_arguments(
        simulate_cmd,
        {
            "out": {"help": "replicate CSV path"},
            "summary": {"help": "summary JSON path"},
        },
    )

    sweep_cmd = commands.add_parser("sweep", parents=[common], help="E[W_s] over one parameter")
    _add_arguments(
        sweep_cmd,
        {
            "preset": {"choices": list(sweep.PRESETS)},
            "param": {"choices": list(sweep.SWEEP_PARAMS)},
            "values": {"help": "comma list or start:stop[:step]"},
            "methods": {"default": "closed_form", "help": "comma list of " + ", ".join(sweep.SWEEP_METHODS)},
            "out": {"help": "CSV path (default stdout)"},
        },
    )

    validate = commands.add_parser("validate", parents=[common], help="run the cross-check suite")
    _add_arguments(validate, {"quick": {"action": "store_true", "help": "skip simulation checks"}})

    return parser


def resolve(args: argparse.Namespace) -> ResolvedConfig:
    flags = {spec["dest"]: getattr(args, spec["dest"]) for spec in COMMON_FLAGS.values()}
    path = flags.pop("config_path")
    cfg = config_module.load_config(flags, config_path=path)
    logger.set_level(cfg.log_level)
    return cfg


def _header(command: str, cfg: dotdict, extra: Optional[Dict[str, Any]] = None) -> str:
    shown = dotdict(cfg)
    shown.update(extra or {})
    logger.debug(f"resolved configuration for {command}", kind="config", data={"command": command})
    return "\n".join([f"# command = {command}"] + shown.echo_lines()) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        write_text(out, text)
    else:
        sys.stdout.write(text)


@timing
def cmd_expected(args: argparse.Namespace, cfg: ResolvedConfig) -> int:
    q = config_module.retrieval_query(cfg)
    if args.moment < 1:
        raise ValidationError(f"--moment must be >= 1, got {args.moment}")
    if args.moment > 1 and args.method != "matrix":
        raise ValidationError("moments above the first need --method matrix")

    if args.moment == 1:
        value = expected_time(q, args.method, cap=cfg.dimension_cap)
        label = "E[W_s]"
    else:
        value = expected_time_matrix(q, k=args.moment, cap=cfg.dimension_cap)
        label = f"E[W_s^{args.moment}]"
    sys.stdout.write(_header("expected", cfg, {"method": args.method, "moment": args.moment}))
    sys.stdout.write(f"{label} = {value:.12g} (method={args.method})\n")
    return 0


@timing
def cmd_cdf(args: argparse.Namespace, cfg: ResolvedConfig) -> int:
    q = config_module.retrieval_query(cfg)
    if args.t_max <= 0 or args.steps < 1:
        raise ValidationError("--t-max must be > 0 and --steps >= 1")
    ts = np.linspace(0.0, args.t_max, args.steps + 1)
    frame = pd.DataFrame({"t": ts, "ws_cdf": [ws_cdf(q, t) for t in ts]})
    if args.method == "matrix":
        d = w_phase_type(q.params)
        n, s = q.params.n_sensors, q.samples_needed
        frame["ws_cdf_matrix"] = [
            phtype.order_stat_cdf_matrix(d, n, s, t, cap=cfg.dimension_cap) for t in ts
        ]
    header = _header("cdf", cfg, {"t_max": args.t_max, "steps": args.steps, "method": args.method})
    _emit(header + frame_to_csv(frame, "%.12g"), args.out)
    return 0


@timing
def cmd_simulate(args: argparse.Namespace, cfg: ResolvedConfig) -> int:
    c = config_module.sim_config(cfg)
    result = simulate(c)
    if args.out:
        result.write_replicates(args.out)
    if args.summary:
        result.write_summary(args.summary)
    sys.stdout.write(_header("simulate", cfg, {"warmup_time": c.resolved_warmup}))
    sys.stdout.write(
        f"mean = {result.mean:.12g}\n"
        f"ci_halfwidth_95 = {result.ci_halfwidth_95:.12g}\n"
        f"ci_low = {result.ci_low:.12g}\n"
        f"ci_high = {result.ci_high:.12g}\n"
        f"replications = {result.replications}\n"
        f"seed = {result.seed_used}\n"
    )
    return 0


def _sweep_specs(args: argparse.Namespace, cfg: ResolvedConfig) -> List[sweep.SweepSpec]:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    simulation = config_module.sim_config(cfg) if "simulate" in methods else None
    if args.preset:
        if args.param or args.values:
            raise ValidationError("--preset cannot be combined with --param/--values")
        return sweep.preset(
            args.preset,
            battery_cap=cfg.explicit("battery_cap"),
            methods=methods,
            simulation=simulation,
            dimension_cap=cfg.dimension_cap,
        )
    if not (args.param and args.values):
        raise ValidationError("sweep needs --preset or both --param and --values")
    return [
        sweep.SweepSpec(
            swept_param=args.param,
            values=sweep.parse_values(args.values),
            base=config_module.model_params(cfg),
            samples_needed=cfg.samples_needed,
            methods=methods,
            dimension_cap=cfg.dimension_cap,
            simulation=simulation,
        )
    ]


@timing
def cmd_sweep(args: argparse.Namespace, cfg: ResolvedConfig) -> int:
    specs = _sweep_specs(args, cfg)
    rows = sweep.run_sweep(specs, workers=cfg.workers)
    sys.stdout.write(_header("sweep", cfg, {"preset": args.preset, "methods": args.methods}))
    if args.out:
        sweep.write_csv(rows, args.out)
        sys.stdout.write(f"wrote {len(rows)} rows to {args.out}\n")
    else:
        sys.stdout.write(sweep.to_csv(rows))
    return 0


@timing
def cmd_validate(args: argparse.Namespace, cfg: ResolvedConfig) -> int:
    extra: Dict[str, Any] = {"quick": args.quick}
    if not args.quick:
        configs = simulation_configs(cfg.seed, cfg.replications, cfg.workers, cfg.warmup_time)
        extra["warmup_time"] = [c.resolved_warmup for c in configs]
    checks = run_suite(
        quick=args.quick,
        seed=cfg.seed,
        replications=cfg.replications,
        workers=cfg.workers,
        warmup_time=cfg.warmup_time,
    )
    sys.stdout.write(_header("validate", cfg, extra))
    sys.stdout.write(format_report(checks) + "\n")
    return 0 if all(c.passed for c in checks) else 1


COMMANDS: Dict[str, Callable[[argparse.Namespace, ResolvedConfig], int]] = {
    "expected": cmd_expected,
    "cdf": cmd_cdf,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](args, cfg)
    except EwsnError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
