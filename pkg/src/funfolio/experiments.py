"""Simulation study and rolling backtest orchestration.

Replications (simulation) and months (backtest) are independent work
units seeded from the master seed, so they can run in parallel and the
reports are bit-identical regardless of worker count.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy import special

from .core import (
    PROJECTED,
    BaseRule,
    ConstraintSet,
    FunctionalPolicy,
    ObjectiveSpec,
    ReturnPanel,
    validate_panel,
)
from .errors import (
    FunfolioError,
    InsufficientHistoryError,
    MissingBenchmarkError,
    ValidationError,
    ZeroVarianceError,
)
from .funopt import LineSearchConfig, base_weights, evaluate_policy, run_ascent
from .resample import DOUBLE_BLOCK, ResampleScheme
from .rng import MONTH, REPLICATION
from .solvers import solve_constant
from .stats import information_ratio, paired_t_test, realized_objective
from .tsmodel import GeneratorConfig, fit_ar1, simulate

__all__ = [
    "SimStudyConfig",
    "run_sim_study",
    "write_sim_table",
    "BacktestConfig",
    "BacktestReport",
    "run_backtest",
    "write_backtest_report",
    "z_quantile",
]

logger = logging.getLogger("funfolio")

# Two realized objectives count as equal for the n0 column below this.
_TIE_TOL = 1e-12


def z_quantile(q: float) -> float:
    """Standard normal quantile, e.g. z_0.9 ~ 1.2816."""
    return float(special.ndtri(q))


def _derive_seed(master_seed: int, namespace: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=int(master_seed),
                                spawn_key=(namespace, int(index)))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SimStudyConfig:
    """Grid and harness settings for the simulation study."""

    setting: GeneratorConfig
    objectives: tuple
    lbs: tuple
    n_train: int = 60
    n_test: int = 20
    replications: int = 100
    p: int = 20
    B: int = 60
    K: int = 50
    variant: str = PROJECTED
    scheme_kind: str = DOUBLE_BLOCK
    ls_cfg: LineSearchConfig = field(default_factory=LineSearchConfig)
    master_seed: int = 0

    def __post_init__(self):
        if self.n_train < 3:
            raise ValidationError(f"n_train must be >= 3, got {self.n_train}")
        if self.replications < 2:
            raise ValidationError(f"need >= 2 replications, got {self.replications}")
        object.__setattr__(self, "objectives", tuple(self.objectives))
        object.__setattr__(self, "lbs", tuple(float(x) for x in self.lbs))


def _sim_one_replication(args) -> list:
    """Realized objective triples (G_bl, G_pi, G_fun) for one replication.

    Returns one entry per (objective, lb) grid point; an entry is the
    triple or an error string when the replication degenerated there.
    """
    cfg, ell = args
    rep_seed = _derive_seed(cfg.master_seed, REPLICATION, ell)
    gen = replace(cfg.setting, n=cfg.n_train + cfg.n_test, p=cfg.p, seed=rep_seed)
    panel = simulate(gen)
    train = panel.window(0, cfg.n_train)
    out = []
    for objective in cfg.objectives:
        for lb in cfg.lbs:
            try:
                out.append(_sim_grid_point(cfg, panel, train, objective, lb, rep_seed))
            except FunfolioError as exc:
                out.append(f"{type(exc).__name__}: {exc}")
    return out


def _sim_grid_point(cfg: SimStudyConfig, panel: ReturnPanel, train: ReturnPanel,
                    objective: ObjectiveSpec, lb: float, rep_seed: int) -> tuple:
    omega = ConstraintSet(lower_bound=lb, p=cfg.p)
    model = fit_ar1(train)
    scheme = ResampleScheme(kind=cfg.scheme_kind, B=cfg.B, seed=rep_seed)
    policy, _, _ = run_ascent(train, model, objective, omega,
                              BaseRule.plug_in(objective), cfg.variant,
                              cfg.K, scheme, cfg.ls_cfg)
    r_bl, r_pi, r_fun = [], [], []
    for t in range(cfg.n_train, cfg.n_train + cfg.n_test):
        window = panel.window(t - cfg.n_train, t)
        r_t = panel.values[t]
        r_bl.append(float(r_t.mean()))
        w_pi = base_weights(BaseRule.plug_in(objective), window, omega)
        r_pi.append(float(w_pi @ r_t))
        w_fun = evaluate_policy(policy, window)
        r_fun.append(float(w_fun @ r_t))
    return (realized_objective(objective, r_bl),
            realized_objective(objective, r_pi),
            realized_objective(objective, r_fun))


def run_sim_study(cfg: SimStudyConfig, threads: int = 1) -> list:
    """Run the full study; one result row per (objective, lb) grid point.

    Each row reports the mean/sd of G_pi - G_bl and G_fun - G_bl across
    replications, the one-sided paired-t p-value for fun vs plug-in, the
    counts n_plus (G_fun > G_pi), n_zero (equal within 1e-12), and the
    number of excluded (degenerate) replications.
    """
    tasks = [(cfg, ell) for ell in range(cfg.replications)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            per_rep = list(pool.map(_sim_one_replication, tasks))
    else:
        per_rep = [_sim_one_replication(t) for t in tasks]

    rows = []
    idx = 0
    for objective in cfg.objectives:
        for lb in cfg.lbs:
            g_bl, g_pi, g_fun, excluded = [], [], [], 0
            for ell in range(cfg.replications):
                entry = per_rep[ell][idx]
                if isinstance(entry, str):
                    excluded += 1
                    logger.warning("replication %d excluded at (%s, lb=%s): %s",
                                   ell, objective.spec_string(), lb, entry)
                    continue
                g_bl.append(entry[0])
                g_pi.append(entry[1])
                g_fun.append(entry[2])
            idx += 1
            g_bl = np.array(g_bl)
            g_pi = np.array(g_pi)
            g_fun = np.array(g_fun)
            d_pi = g_pi - g_bl
            d_fun = g_fun - g_bl
            n_plus = int(np.sum(g_fun > g_pi + _TIE_TOL))
            n_zero = int(np.sum(np.abs(g_fun - g_pi) <= _TIE_TOL))
            try:
                p_val = paired_t_test(g_fun, g_pi).p_value if len(g_fun) >= 2 else None
            except ZeroVarianceError:
                p_val = None
            rows.append({
                "objective": objective.spec_string(),
                "lb": lb,
                "delta_pi_mean": float(d_pi.mean()) if d_pi.size else None,
                "delta_pi_sd": float(d_pi.std(ddof=1)) if d_pi.size > 1 else None,
                "delta_fun_mean": float(d_fun.mean()) if d_fun.size else None,
                "delta_fun_sd": float(d_fun.std(ddof=1)) if d_fun.size > 1 else None,
                "p_value": p_val,
                "n_plus": n_plus,
                "n_zero": n_zero,
                "n_excluded": excluded,
                "replications": cfg.replications,
            })
    return rows


_SIM_COLUMNS = ["objective", "lb", "delta_pi_mean", "delta_pi_sd",
                "delta_fun_mean", "delta_fun_sd", "p_value",
                "n_plus", "n_zero", "n_excluded", "replications"]


def write_sim_table(rows: list, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_SIM_COLUMNS)
        writer.writeheader()
        for row in rows:
            out = {k: ("" if row[k] is None else repr(row[k])
                       if isinstance(row[k], float) else row[k])
                   for k in _SIM_COLUMNS}
            writer.writerow(out)


@dataclass(frozen=True)
class BacktestConfig:
    """Rolling monthly backtest settings."""

    objective: ObjectiveSpec
    lb: float
    benchmark_column: str
    window: int = 120
    universe_size: int = 50
    B: int = 60
    K: int = 20
    variant: str = PROJECTED
    scheme_kind: str = DOUBLE_BLOCK
    ls_cfg: LineSearchConfig = field(default_factory=LineSearchConfig)
    intervals: Optional[tuple] = None   # ((label_start, label_end), ...)
    master_seed: int = 0

    def __post_init__(self):
        if self.window < 3:
            raise ValidationError(f"window must be >= 3, got {self.window}")
        if self.universe_size < 2:
            raise ValidationError("universe_size must be >= 2")
        if self.intervals is not None:
            object.__setattr__(self, "intervals",
                               tuple((str(a), str(b)) for a, b in self.intervals))


@dataclass
class BacktestReport:
    months: list                 # labels of realized test months
    excess_pi: np.ndarray
    excess_fun: np.ndarray
    cum_pi: np.ndarray
    cum_fun: np.ndarray
    ir_rows: list                # dicts: interval, start, end, months, ir_pi, ir_fun
    skipped: list                # (month_label, reason)
    policies: dict               # month label -> FunctionalPolicy
    weights: dict                # month label -> (asset labels, w_pi, w_fun)


def load_price_table(path) -> pd.DataFrame:
    """Tolerant price table reader: date-indexed, assets as columns.

    Missing prices stay as NaN; universe selection handles completeness.
    """
    df = pd.read_csv(path)
    if df.columns[0].strip().lower() != "date":
        raise ValidationError("price CSV must start with a 'date' column")
    df = df.set_index(df.columns[0])
    df.index = df.index.astype(str)
    return df.astype(np.float64)


def _select_universe(returns: pd.DataFrame, prices: pd.DataFrame, t: int,
                     window: int, m: int, benchmark: str,
                     market_values: Optional[pd.DataFrame]) -> list:
    """Assets with complete history over [t - window, t] ranked by size."""
    cols = [c for c in returns.columns if c != benchmark]
    block = returns.iloc[t - window: t + 1]
    complete = [c for c in cols if not block[c].isna().any()]
    if not complete:
        raise InsufficientHistoryError(
            f"no complete assets in the window ending at {returns.index[t]}"
        )
    if market_values is not None:
        asof = market_values.index[market_values.index <= returns.index[t - 1]]
        if len(asof) == 0:
            raise InsufficientHistoryError(
                f"no market-value row at or before {returns.index[t - 1]}")
        mv = market_values.loc[asof[-1]]
        ranked = sorted(complete, key=lambda c: (-float(mv.get(c, -np.inf)), c))
    else:
        avg = prices.loc[block.index[:-1], complete].mean()
        ranked = sorted(complete, key=lambda c: (-float(avg[c]), c))
    return ranked[:m]


def run_backtest(cfg: BacktestConfig, prices: pd.DataFrame,
                 market_values: Optional[pd.DataFrame] = None,
                 threads: int = 1) -> BacktestReport:
    """Monthly rolling backtest of plug-in vs functional portfolios.

    For each month t with a full trailing window, selects the universe,
    builds the excess-return panel over the benchmark, refreshes both the
    plug-in weights and the functional policy (trained on the trailing
    window, month-specific bootstrap stream), and records the realized
    excess returns. Months without enough history are skipped and logged.
    """
    if cfg.benchmark_column not in prices.columns:
        raise MissingBenchmarkError(
            f"benchmark column {cfg.benchmark_column!r} not in price table")
    logp = np.log(prices)
    returns = logp.diff().iloc[1:]
    if returns[cfg.benchmark_column].isna().any():
        raise MissingBenchmarkError("benchmark has missing prices in the sample")
    n_rows = returns.shape[0]
    if n_rows <= cfg.window:
        raise InsufficientHistoryError(
            f"{n_rows} return rows cannot support a {cfg.window}-month window")
    if market_values is None:
        logger.warning("no market-value table; ranking the universe by "
                       "average price over each window")

    months = list(range(cfg.window, n_rows))
    tasks = [(cfg, prices, returns, market_values, t) for t in months]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_backtest_one_month, tasks))
    else:
        results = [_backtest_one_month(task) for task in tasks]

    kept_labels, e_pi, e_fun, skipped = [], [], [], []
    policies, weights = {}, {}
    for t, res in zip(months, results):
        label = returns.index[t]
        if isinstance(res, str):
            skipped.append((label, res))
            logger.warning("skipped month %s: %s", label, res)
            continue
        e_pi.append(res["e_pi"])
        e_fun.append(res["e_fun"])
        kept_labels.append(label)
        policies[label] = res["policy"]
        weights[label] = (res["assets"], res["w_pi"], res["w_fun"])

    e_pi = np.array(e_pi)
    e_fun = np.array(e_fun)
    ir_rows = _ir_rows(cfg, kept_labels, e_pi, e_fun)
    return BacktestReport(months=kept_labels, excess_pi=e_pi, excess_fun=e_fun,
                          cum_pi=np.cumsum(e_pi), cum_fun=np.cumsum(e_fun),
                          ir_rows=ir_rows, skipped=skipped,
                          policies=policies, weights=weights)


def _backtest_one_month(args):
    cfg, prices, returns, market_values, t = args
    try:
        assets = _select_universe(returns, prices, t, cfg.window,
                                  cfg.universe_size, cfg.benchmark_column,
                                  market_values)
        u = returns[cfg.benchmark_column].to_numpy()
        r_win = returns[assets].iloc[t - cfg.window: t].to_numpy()
        e_win = r_win - u[t - cfg.window: t, None]
        panel = validate_panel(e_win, assets,
                               returns.index[t - cfg.window: t])
        omega = ConstraintSet(lower_bound=cfg.lb, p=len(assets))
        w_pi = base_weights(BaseRule.plug_in(cfg.objective), panel, omega)
        model = fit_ar1(panel)
        month_seed = _derive_seed(cfg.master_seed, MONTH, t)
        scheme = ResampleScheme(kind=cfg.scheme_kind, B=cfg.B, seed=month_seed)
        policy, _, _ = run_ascent(panel, model, cfg.objective, omega,
                                  BaseRule.plug_in(cfg.objective), cfg.variant,
                                  cfg.K, scheme, cfg.ls_cfg)
        w_fun = evaluate_policy(policy, panel)
        e_t = returns[assets].iloc[t].to_numpy() - u[t]
        return {
            "e_pi": float(w_pi @ e_t),
            "e_fun": float(w_fun @ e_t),
            "policy": policy,
            "assets": assets,
            "w_pi": w_pi,
            "w_fun": w_fun,
        }
    except FunfolioError as exc:
        return f"{type(exc).__name__}: {exc}"


def _ir_rows(cfg: BacktestConfig, labels: list, e_pi: np.ndarray,
             e_fun: np.ndarray) -> list:
    def ir_or_none(series):
        try:
            return information_ratio(series)
        except FunfolioError:
            return None

    def row(name, mask):
        k = int(mask.sum())
        if k < 2:
            return {"interval": name, "months": k, "ir_pi": None, "ir_fun": None}
        return {"interval": name, "months": k,
                "ir_pi": ir_or_none(e_pi[mask]),
                "ir_fun": ir_or_none(e_fun[mask])}

    rows = []
    labels_arr = np.array(labels)
    if cfg.intervals:
        for start, end in cfg.intervals:
            mask = (labels_arr >= start) & (labels_arr <= end)
            rows.append(row(f"{start}..{end}", mask))
    rows.append(row("overall", np.ones(len(labels), dtype=bool)))
    return rows


def write_backtest_report(report: BacktestReport, out_dir) -> list:
    """Write cumulative_excess.csv, information_ratios.csv and the
    per-month policy JSON files into ``out_dir``; returns written paths."""
    import os

    from .core import policy_to_json

    os.makedirs(out_dir, exist_ok=True)
    paths = []

    cum_path = os.path.join(out_dir, "cumulative_excess.csv")
    with open(cum_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "pi", "fun"])
        for label, cpi, cfun in zip(report.months, report.cum_pi, report.cum_fun):
            writer.writerow([label, repr(float(cpi)), repr(float(cfun))])
    paths.append(cum_path)

    ir_path = os.path.join(out_dir, "information_ratios.csv")
    with open(ir_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["interval", "months", "ir_pi", "ir_fun"])
        for row in report.ir_rows:
            writer.writerow([row["interval"], row["months"],
                             "" if row["ir_pi"] is None else repr(row["ir_pi"]),
                             "" if row["ir_fun"] is None else repr(row["ir_fun"])])
    paths.append(ir_path)

    for label, policy in report.policies.items():
        p = os.path.join(out_dir, f"policy_{label}.json")
        policy_to_json(policy, p)
        paths.append(p)
    return paths
