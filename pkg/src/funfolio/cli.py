"""Command-line entry point.

Subcommands: fit, optimize, simulate, backtest, project. Every run that
writes files also writes a manifest (resolved config, seed, input/output
digests) next to the primary output; re-running with ``--config`` pointed
at a manifest reproduces the outputs bit-exactly.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import secrets
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .core import (
    ConstraintSet,
    BaseRule,
    parse_objective,
    policy_to_dict,
    read_panel_csv,
    write_panel_csv,
)
from .constraint import project
from .errors import FunfolioError, ValidationError
from .experiments import (
    BacktestConfig,
    SimStudyConfig,
    load_price_table,
    run_backtest,
    run_sim_study,
    write_backtest_report,
    write_sim_table,
)
from .funopt import LineSearchConfig, run_ascent
from .resample import DOUBLE_BLOCK, IID, MOVING_BLOCK, PARAMETRIC_AR1, ResampleScheme
from .solvers import solve_constant
from .tsmodel import GeneratorConfig, fit_ar1, simulate


class UsageError(Exception):
    """Missing or malformed command-line arguments."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(path, command, config, seed, inputs, outputs):
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "artifact_version": __version__,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)


def _load_config_file(path) -> dict:
    with open(path) as fh:
        obj = json.load(fh)
    # A manifest carries its resolved config under "config".
    if isinstance(obj, dict) and "config" in obj and "command" in obj:
        return obj["config"]
    if not isinstance(obj, dict):
        raise ValidationError("config file must hold a JSON object")
    return obj


def _resolve(args, defaults: dict) -> dict:
    """defaults < config file < explicit flags."""
    merged = dict(defaults)
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        for key, val in _load_config_file(cfg_path).items():
            if key in merged:
                merged[key] = val
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _resolve_seed(cfg: dict) -> int:
    if cfg.get("seed") is None:
        cfg["seed"] = secrets.randbits(63)
    return int(cfg["seed"])


def _resolve_threads(cfg: dict) -> int:
    if cfg.get("threads") is None:
        env = os.environ.get("FUNFOLIO_THREADS")
        cfg["threads"] = int(env) if env else (os.cpu_count() or 1)
    return int(cfg["threads"])


def _parse_resample(text: str, B: int, seed: int) -> ResampleScheme:
    text = text.strip().lower()
    if text == "iid":
        return ResampleScheme(kind=IID, B=B, seed=seed)
    if text == "dblock":
        return ResampleScheme(kind=DOUBLE_BLOCK, B=B, seed=seed)
    if text in ("par-ar1", "par_ar1"):
        return ResampleScheme(kind=PARAMETRIC_AR1, B=B, seed=seed)
    if text.startswith("block:l=") or text.startswith("block:L="):
        return ResampleScheme(kind=MOVING_BLOCK, B=B, seed=seed,
                              block_len=int(text.split("=", 1)[1]))
    raise ValidationError(
        f"unknown resample scheme {text!r} (use iid|block:L=6|dblock|par-ar1)")


_SCHEME_KINDS = {"iid": IID, "dblock": DOUBLE_BLOCK, "par-ar1": PARAMETRIC_AR1}


def _scheme_kind(text: str) -> str:
    key = text.strip().lower()
    if key in _SCHEME_KINDS:
        return _SCHEME_KINDS[key]
    raise ValidationError(f"scheme {text!r} must be one of iid|dblock|par-ar1")


def build_parser() -> _Parser:
    parser = _Parser(prog="funfolio",
                     description="Functional mean-variance portfolio optimization")
    sub = parser.add_subparsers(dest="command")

    def add_common(p):
        p.add_argument("--config", help="JSON config file or a previous manifest")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)

    p = sub.add_parser("fit", help="fit the AR(1) moment model to a panel CSV")
    p.add_argument("--panel", help="input panel CSV")
    p.add_argument("--out", help="output model JSON")
    add_common(p)

    p = sub.add_parser("optimize", help="plug-in weights or functional policy")
    p.add_argument("--mode", choices=["plugin", "functional"])
    p.add_argument("--panel")
    p.add_argument("--objective", help="mv:lambda=..., sharpe:r0=..., msd:lambda=...")
    p.add_argument("--lb", type=float, help="per-asset lower bound (-inf allowed)")
    p.add_argument("--K", type=int, dest="K")
    p.add_argument("--boot", type=int)
    p.add_argument("--resample", help="iid|block:L=6|dblock|par-ar1")
    p.add_argument("--variant", choices=["projected", "linear_P"])
    p.add_argument("--out", help="policy/weights JSON output")
    p.add_argument("--trace", help="trace CSV output (functional mode)")
    add_common(p)

    p = sub.add_parser("simulate", help="run the simulation study")
    p.add_argument("--setting", choices=["ar", "iid", "garch"])
    p.add_argument("--objective", action="append",
                   help="repeatable: objective grid entries")
    p.add_argument("--lb", action="append", type=float,
                   help="repeatable: lower-bound grid entries")
    p.add_argument("--reps", type=int)
    p.add_argument("--n-train", type=int, dest="n_train")
    p.add_argument("--n-test", type=int, dest="n_test")
    p.add_argument("-p", "--assets", type=int, dest="p")
    p.add_argument("--K", type=int, dest="K")
    p.add_argument("--boot", type=int)
    p.add_argument("--resample", help="iid|dblock|par-ar1")
    p.add_argument("--out", help="table CSV output")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction)
    add_common(p)

    p = sub.add_parser("backtest", help="rolling monthly backtest on a price CSV")
    p.add_argument("--prices")
    p.add_argument("--benchmark")
    p.add_argument("--objective")
    p.add_argument("--lb", type=float)
    p.add_argument("--window", type=int)
    p.add_argument("--universe", type=int)
    p.add_argument("--K", type=int, dest="K")
    p.add_argument("--boot", type=int)
    p.add_argument("--resample", help="iid|dblock|par-ar1")
    p.add_argument("--market-values", dest="market_values",
                   help="sidecar CSV of market values for universe ranking")
    p.add_argument("--intervals",
                   help="comma-separated label ranges start:end for per-interval IRs")
    p.add_argument("--out", help="report directory")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction)
    add_common(p)

    p = sub.add_parser("project", help="project a vector onto the constraint set")
    p.add_argument("--lb", type=float, required=True)
    p.add_argument("--vector", required=True, help="comma-separated entries")

    p = sub.add_parser("generate", help="write a synthetic panel CSV")
    p.add_argument("--setting", choices=["ar", "iid", "garch"])
    p.add_argument("-n", "--rows", type=int, dest="n")
    p.add_argument("-p", "--assets", type=int, dest="p")
    p.add_argument("--out")
    add_common(p)

    return parser


def _cmd_fit(args) -> int:
    cfg = _resolve(args, {"panel": None, "out": None, "seed": None, "threads": None})
    if not cfg["panel"] or not cfg["out"]:
        raise UsageError("fit needs --panel and --out")
    panel = read_panel_csv(cfg["panel"])
    model = fit_ar1(panel)
    with open(cfg["out"], "w") as fh:
        json.dump(model.to_dict(), fh, indent=2)
    _write_manifest(cfg["out"] + ".manifest.json", "fit", cfg, cfg.get("seed"),
                    [cfg["panel"]], [cfg["out"]])
    return 0


def _cmd_optimize(args) -> int:
    defaults = {
        "mode": "plugin", "panel": None, "objective": None, "lb": -0.2,
        "K": 50, "boot": 60, "resample": "par-ar1", "variant": "projected",
        "out": None, "trace": None, "seed": None, "threads": None,
    }
    cfg = _resolve(args, defaults)
    if not cfg["panel"] or not cfg["objective"]:
        raise UsageError("optimize needs --panel and --objective")
    seed = _resolve_seed(cfg)
    panel = read_panel_csv(cfg["panel"])
    objective = parse_objective(cfg["objective"])
    omega = ConstraintSet(lower_bound=float(cfg["lb"]), p=panel.p)

    if cfg["mode"] == "plugin":
        r = panel.values
        mu_hat = r.mean(axis=0)
        v_hat = r.T @ r / r.shape[0]
        v_hat = (v_hat + v_hat.T) / 2.0
        w = solve_constant(objective, mu_hat, v_hat, omega)
        payload = {"weights": {a: float(x) for a, x in zip(panel.asset_ids, w)}}
        text = json.dumps(payload, indent=2)
        print(text)
        if cfg["out"]:
            with open(cfg["out"], "w") as fh:
                fh.write(text + "\n")
            _write_manifest(cfg["out"] + ".manifest.json", "optimize", cfg, seed,
                            [cfg["panel"]], [cfg["out"]])
        return 0

    model = fit_ar1(panel)
    scheme = _parse_resample(cfg["resample"], int(cfg["boot"]), seed)
    policy, trace, _ = run_ascent(panel, model, objective, omega,
                                  BaseRule.plug_in(objective), cfg["variant"],
                                  int(cfg["K"]), scheme)
    if not cfg["out"]:
        raise UsageError("functional optimize needs --out for the policy JSON")
    with open(cfg["out"], "w") as fh:
        json.dump(policy_to_dict(policy), fh, indent=2)
    outputs = [cfg["out"]]
    trace_path = cfg["trace"] or (os.path.splitext(cfg["out"])[0] + "_trace.csv")
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "U", "V", "G", "t", "a", "b"])
        for k in range(len(trace.U)):
            step = (repr(trace.t[k]), repr(policy.a[k]), repr(policy.b[k])) \
                if k < len(trace.t) else ("", "", "")
            writer.writerow([k, repr(trace.U[k]), repr(trace.V[k]),
                             repr(trace.G[k]), *step])
    outputs.append(trace_path)
    _write_manifest(cfg["out"] + ".manifest.json", "optimize", cfg, seed,
                    [cfg["panel"]], outputs)
    print(f"policy written to {cfg['out']} ({policy.steps} steps, "
          f"stop: {trace.stop_reason})")
    return 0


def _cmd_simulate(args) -> int:
    defaults = {
        "setting": "ar", "objective": None, "lb": None, "reps": 100,
        "n_train": 60, "n_test": 20, "p": 20, "K": 50, "boot": 60,
        "resample": "par-ar1", "out": None, "figures": True,
        "seed": None, "threads": None,
    }
    cfg = _resolve(args, defaults)
    if not cfg["out"]:
        raise UsageError("simulate needs --out for the table CSV")
    seed = _resolve_seed(cfg)
    threads = _resolve_threads(cfg)
    objectives = cfg["objective"] or ["mv:lambda=1.2815515655446004"]
    lbs = cfg["lb"] if cfg["lb"] is not None else [-0.2]
    study = SimStudyConfig(
        setting=GeneratorConfig.preset(cfg["setting"], n=2, p=2, seed=0),
        objectives=tuple(parse_objective(o) for o in objectives),
        lbs=tuple(lbs),
        n_train=int(cfg["n_train"]), n_test=int(cfg["n_test"]),
        replications=int(cfg["reps"]), p=int(cfg["p"]), B=int(cfg["boot"]),
        K=int(cfg["K"]), scheme_kind=_scheme_kind(cfg["resample"]),
        master_seed=seed,
    )
    rows = run_sim_study(study, threads=threads)
    write_sim_table(rows, cfg["out"])
    outputs = [cfg["out"]]
    if cfg["figures"]:
        from .report import save_sim_figure

        fig_path = os.path.splitext(cfg["out"])[0] + "_deltas.png"
        save_sim_figure(rows, fig_path)
        outputs.append(fig_path)
    _write_manifest(cfg["out"] + ".manifest.json", "simulate", cfg, seed,
                    [], outputs)
    for row in rows:
        print(f"{row['objective']} lb={row['lb']}: "
              f"d_pi={row['delta_pi_mean']:.4g} d_fun={row['delta_fun_mean']:.4g} "
              f"p={row['p_value'] if row['p_value'] is not None else 'n/a'} "
              f"(n+={row['n_plus']}, n0={row['n_zero']})")
    return 0


def _cmd_backtest(args) -> int:
    defaults = {
        "prices": None, "benchmark": None, "objective": "sharpe:r0=0",
        "lb": -0.2, "window": 120, "universe": 50, "K": 20, "boot": 60,
        "resample": "par-ar1", "market_values": None, "intervals": None,
        "out": None, "figures": True, "seed": None, "threads": None,
    }
    cfg = _resolve(args, defaults)
    if not cfg["prices"] or not cfg["benchmark"] or not cfg["out"]:
        raise UsageError("backtest needs --prices, --benchmark and --out")
    seed = _resolve_seed(cfg)
    threads = _resolve_threads(cfg)
    intervals = None
    if cfg["intervals"]:
        intervals = tuple(tuple(piece.split(":", 1)) for piece in
                          str(cfg["intervals"]).split(","))
    bt = BacktestConfig(
        objective=parse_objective(cfg["objective"]), lb=float(cfg["lb"]),
        benchmark_column=cfg["benchmark"], window=int(cfg["window"]),
        universe_size=int(cfg["universe"]), B=int(cfg["boot"]),
        K=int(cfg["K"]), scheme_kind=_scheme_kind(cfg["resample"]),
        intervals=intervals, master_seed=seed,
    )
    prices = load_price_table(cfg["prices"])
    market_values = load_price_table(cfg["market_values"]) \
        if cfg["market_values"] else None
    report = run_backtest(bt, prices, market_values, threads=threads)
    paths = write_backtest_report(report, cfg["out"])
    if cfg["figures"]:
        from .report import save_backtest_figure

        fig_path = os.path.join(cfg["out"], "cumulative_excess.png")
        save_backtest_figure(report, fig_path)
        paths.append(fig_path)
    inputs = [cfg["prices"]] + ([cfg["market_values"]] if cfg["market_values"] else [])
    _write_manifest(os.path.join(cfg["out"], "run_manifest.json"), "backtest",
                    cfg, seed, inputs, paths)
    for row in report.ir_rows:
        print(f"{row['interval']}: months={row['months']} "
              f"ir_pi={row['ir_pi']} ir_fun={row['ir_fun']}")
    return 0


def _cmd_project(args) -> int:
    try:
        v = np.array([float(x) for x in args.vector.split(",")])
    except ValueError:
        raise ValidationError(f"could not parse --vector {args.vector!r}")
    omega = ConstraintSet(lower_bound=args.lb, p=v.shape[0])
    w = project(omega, v)
    print("[" + ",".join(f"{x:.4f}" for x in w) + "]")
    return 0


def _cmd_generate(args) -> int:
    defaults = {"setting": "ar", "n": 80, "p": 20, "out": None,
                "seed": None, "threads": None}
    cfg = _resolve(args, defaults)
    if not cfg["out"]:
        raise UsageError("generate needs --out")
    seed = _resolve_seed(cfg)
    panel = simulate(GeneratorConfig.preset(cfg["setting"], n=int(cfg["n"]),
                                            p=int(cfg["p"]), seed=seed))
    write_panel_csv(panel, cfg["out"])
    _write_manifest(cfg["out"] + ".manifest.json", "generate", cfg, seed,
                    [], [cfg["out"]])
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "optimize": _cmd_optimize,
    "simulate": _cmd_simulate,
    "backtest": _cmd_backtest,
    "project": _cmd_project,
    "generate": _cmd_generate,
}


def dispatch(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FunfolioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
