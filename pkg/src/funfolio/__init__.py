"""Functional mean-variance portfolio optimization.

Portfolio weights are treated as functions of the observed return
history and learned by bootstrap-estimated gradient ascent with
projection onto the lower-bounded budget simplex, alongside the plug-in
and equal-weight baselines, simulation studies and a rolling backtest.
"""

__version__ = "0.1.0"

from .core import (
    BaseRule,
    BootstrapEnsemble,
    ConstraintSet,
    FunctionalPolicy,
    ObjectiveSpec,
    ReturnPanel,
    parse_objective,
    policy_from_dict,
    policy_to_dict,
    read_panel_csv,
    validate_panel,
    write_panel_csv,
)
from .constraint import is_feasible, project, project_hyperplane
from .funopt import (
    AscentTrace,
    LineSearchConfig,
    evaluate_policy,
    evaluate_policy_matrix_form,
    line_search,
    run_ascent,
)
from .objectives import eval_F, grad_F
from .resample import ResampleScheme, resample, select_block_length
from .solvers import equal_weight, markowitz_closed_form, solve_constant
from .stats import (
    TestResult,
    information_ratio,
    ljung_box,
    paired_t_test,
    realized_objective,
)
from .tsmodel import (
    Ar1MomentModel,
    ConstantMomentModel,
    GeneratorConfig,
    cond_mean,
    cond_second_moment,
    fit_ar1,
    simulate,
)

__all__ = [
    "__version__",
    "BaseRule",
    "BootstrapEnsemble",
    "ConstraintSet",
    "FunctionalPolicy",
    "ObjectiveSpec",
    "ReturnPanel",
    "parse_objective",
    "policy_from_dict",
    "policy_to_dict",
    "read_panel_csv",
    "validate_panel",
    "write_panel_csv",
    "is_feasible",
    "project",
    "project_hyperplane",
    "AscentTrace",
    "LineSearchConfig",
    "evaluate_policy",
    "evaluate_policy_matrix_form",
    "line_search",
    "run_ascent",
    "eval_F",
    "grad_F",
    "ResampleScheme",
    "resample",
    "select_block_length",
    "equal_weight",
    "markowitz_closed_form",
    "solve_constant",
    "TestResult",
    "information_ratio",
    "ljung_box",
    "paired_t_test",
    "realized_objective",
    "Ar1MomentModel",
    "ConstantMomentModel",
    "GeneratorConfig",
    "cond_mean",
    "cond_second_moment",
    "fit_ar1",
    "simulate",
]
