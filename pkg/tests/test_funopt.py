import numpy as np
import pytest

import funfolio as ff
from funfolio.core import LINEAR_P, PROJECTED, BaseRule
from funfolio.errors import ValidationError
from funfolio.resample import ResampleScheme
from funfolio.tsmodel import ConstantMomentModel, GeneratorConfig
from helpers import mv_constrained_oracle, mv_hyperplane_oracle

MV = ff.ObjectiveSpec(kind="mv", lam=1.0)


def _phi(spec, U, V, Ud, Vd, Vdd):
    def phi(t):
        return ff.eval_F(spec, U + t * Ud, V + t * Vd + t * t * Vdd)
    return phi


# ---- line search ---------------------------------------------------------

def test_line_search_linear_improvement_takes_t_max():
    cfg = ff.LineSearchConfig(t_max=10.0)
    t = ff.line_search(MV, 0.0, 1.0, 1.0, 0.0, 0.0, cfg)
    assert t == pytest.approx(10.0)


def test_line_search_no_direction_returns_none():
    assert ff.line_search(MV, 0.0, 1.0, 0.0, 0.0, 0.0) is None


def test_line_search_near_maximizes_surrogate():
    # scalar scan oracle at 1e-5 resolution
    cfg = ff.LineSearchConfig(t_max=10.0)
    cases = [
        (MV, 0.0, 1.0, 1.0, 0.0, 1.0),
        (MV, 0.0, 1.0, 1.0, 0.5, 2.0),
        (ff.ObjectiveSpec(kind="mv", lam=2.5), 0.1, 1.5, 0.7, -0.1, 0.9),
        (ff.ObjectiveSpec(kind="sharpe", r0=0.0), 0.05, 1.0, 0.6, 0.2, 0.8),
        (ff.ObjectiveSpec(kind="msd", lam=0.6), 0.05, 1.0, 0.6, 0.2, 0.8),
    ]
    for spec, U, V, Ud, Vd, Vdd in cases:
        t = ff.line_search(spec, U, V, Ud, Vd, Vdd, cfg)
        assert t is not None
        phi = _phi(spec, U, V, Ud, Vd, Vdd)
        grid = np.arange(1e-5, 10.0 + 1e-5, 1e-5)
        vals = np.array([_safe(phi, g) for g in grid])
        assert phi(t) >= np.nanmax(vals) - 1e-6


def _safe(phi, t):
    from funfolio.errors import DegenerateVarianceError

    try:
        return phi(t)
    except DegenerateVarianceError:
        return np.nan


def test_line_search_requires_nonnegative_quadratic_term():
    with pytest.raises(ValidationError):
        ff.line_search(MV, 0.0, 1.0, 1.0, 0.0, -1e-3)


def test_line_search_skips_degenerate_trials():
    # sharpe with V - U^2 collapsing for large t: big steps are skipped,
    # small improving steps still found
    spec = ff.ObjectiveSpec(kind="sharpe", r0=0.0)
    cfg = ff.LineSearchConfig(t_max=10.0)
    t = ff.line_search(spec, 0.05, 1.0, 1.0, -4.0, 0.0, cfg)
    assert t is not None
    phi = _phi(spec, 0.05, 1.0, 1.0, -4.0, 0.0)
    assert phi(t) > phi(0.0)


# ---- run_ascent ----------------------------------------------------------

def _training_panel(seed=0, n=60, p=10):
    return ff.simulate(GeneratorConfig.preset("ar", n=n, p=p, seed=seed))


def test_run_ascent_improves_and_is_replayable():
    panel = _training_panel(seed=1)
    model = ff.fit_ar1(panel)
    omega = ff.ConstraintSet(lower_bound=-0.2, p=panel.p)
    scheme = ResampleScheme(kind="parametric_ar1", B=30, seed=2)
    policy, trace, ens = ff.run_ascent(panel, model, MV, omega,
                                       BaseRule.plug_in(MV), PROJECTED,
                                       20, scheme)
    assert trace.G[-1] >= trace.G[0]
    assert np.all(np.diff(np.array(trace.G)) > 0.0)
    assert policy.steps == len(trace.t)
    # replay each training replicate: must match optimizer's stored weights
    worst = 0.0
    for b, h in enumerate(ens.histories):
        w_replay = ff.evaluate_policy(policy, h)
        worst = max(worst, float(np.abs(w_replay - ens.weights[b]).max()))
    assert worst <= 1e-12


def test_run_ascent_monotone_across_objectives_and_variants():
    seeds = iter(range(100, 200))
    for kind, lam in (("mv", 1.28), ("sharpe", None), ("msd", 0.128)):
        spec = (ff.ObjectiveSpec(kind="sharpe", r0=0.0) if kind == "sharpe"
                else ff.ObjectiveSpec(kind=kind, lam=lam))
        for variant in (LINEAR_P, PROJECTED):
            for lb in (-1.0, -0.2):
                s = next(seeds)
                panel = _training_panel(seed=s, p=6)
                model = ff.fit_ar1(panel)
                omega = ff.ConstraintSet(lower_bound=lb, p=panel.p)
                scheme = ResampleScheme(kind="iid", B=20, seed=s)
                _, trace, _ = ff.run_ascent(panel, model, spec, omega,
                                            BaseRule.plug_in(spec), variant,
                                            10, scheme)
                gains = np.diff(np.array(trace.G))
                assert np.all(gains > 0.0), f"{kind} {variant} lb={lb}"


def test_run_ascent_feasibility_of_replayed_weights():
    panel = _training_panel(seed=3, p=8)
    model = ff.fit_ar1(panel)
    spec = ff.ObjectiveSpec(kind="mv", lam=1.28)
    scheme = ResampleScheme(kind="double_block", B=25, seed=4)

    omega = ff.ConstraintSet(lower_bound=-0.2, p=8)
    policy, _, ens = ff.run_ascent(panel, model, spec, omega,
                                   BaseRule.plug_in(spec), PROJECTED, 15, scheme)
    for h in ens.histories:
        assert ff.is_feasible(omega, ff.evaluate_policy(policy, h), tol=1e-10)

    omega_h = ff.ConstraintSet(lower_bound=-np.inf, p=8)
    policy2, _, ens2 = ff.run_ascent(panel, model, spec, omega_h,
                                     BaseRule.plug_in(spec), LINEAR_P, 15, scheme)
    for h in ens2.histories:
        w = ff.evaluate_policy(policy2, h)
        assert abs(w.sum() - 1.0) <= 1e-10


def test_constant_moments_constant_policy_function():
    # moment functions ignore the history and the base is stored: the
    # replayed weight function is constant, bit-exact across panels
    p = 5
    mu = np.array([0.3, 0.1, -0.1, 0.25, 0.05])
    V = np.diag([1.0, 2.0, 1.5, 1.2, 0.8]) + np.outer(mu, mu)
    model = ConstantMomentModel(mu=mu, V=V)
    omega = ff.ConstraintSet(lower_bound=0.0, p=p)
    w0 = np.full(p, 1.0 / p)
    panel = _training_panel(seed=5, p=p)
    scheme = ResampleScheme(kind="iid", B=1, seed=6)
    policy, trace, _ = ff.run_ascent(panel, model, MV, omega,
                                     BaseRule.stored_constant(w0), PROJECTED,
                                     10, scheme)
    outs = []
    for s in range(20):
        other = _training_panel(seed=50 + s, p=p)
        outs.append(ff.evaluate_policy(policy, other).tobytes())
    assert len(set(outs)) == 1


def test_stall_at_optimum_with_small_direction():
    # base rule already at the constrained optimum of the constant-moment
    # problem: first projected-hyperplane direction is ~0 and the run stalls
    p = 4
    mu = np.array([0.35, 0.2, 0.1, 0.05])
    sigma = np.diag([1.0, 1.3, 0.9, 1.1])
    V = sigma + np.outer(mu, mu)
    model = ConstantMomentModel(mu=mu, V=V)
    wstar = mv_hyperplane_oracle(mu, sigma, 1.0)
    omega = ff.ConstraintSet(lower_bound=-np.inf, p=p)
    panel = _training_panel(seed=7, p=p)
    scheme = ResampleScheme(kind="iid", B=1, seed=8)
    policy, trace, _ = ff.run_ascent(panel, model, MV, omega,
                                     BaseRule.stored_constant(wstar), LINEAR_P,
                                     10, scheme)
    assert trace.stop_reason == "stalled"
    assert policy.steps == 0
    a0, b0 = trace.grad[0]
    delta0 = ff.project_hyperplane(a0 * mu + 2.0 * b0 * (V @ wstar))
    assert np.linalg.norm(delta0) <= 1e-6


def test_k1_single_step_output():
    panel = _training_panel(seed=9, p=6)
    model = ff.fit_ar1(panel)
    omega = ff.ConstraintSet(lower_bound=-0.2, p=6)
    scheme = ResampleScheme(kind="parametric_ar1", B=20, seed=10)
    policy, trace, _ = ff.run_ascent(panel, model, MV, omega,
                                     BaseRule.plug_in(MV), PROJECTED, 1, scheme)
    assert policy.steps in (0, 1)
    if policy.steps == 1:
        assert trace.G[1] > trace.G[0]
        assert len(policy.a) == len(policy.b) == len(policy.t) == 1


def test_evaluate_policy_k0_returns_base():
    panel = _training_panel(seed=11, p=4)
    model = ff.fit_ar1(panel)
    omega = ff.ConstraintSet(lower_bound=-0.2, p=4)
    policy = ff.FunctionalPolicy(base_rule=BaseRule.equal_weight(), model=model,
                                 omega=omega, variant=PROJECTED, a=(), b=(), t=())
    assert np.array_equal(ff.evaluate_policy(policy, panel), np.full(4, 0.25))


def test_linear_variant_matches_matrix_expansion():
    panel = _training_panel(seed=12, p=7)
    model = ff.fit_ar1(panel)
    spec = ff.ObjectiveSpec(kind="mv", lam=0.8)
    omega = ff.ConstraintSet(lower_bound=-np.inf, p=7)
    scheme = ResampleScheme(kind="parametric_ar1", B=25, seed=13)
    policy, _, ens = ff.run_ascent(panel, model, spec, omega,
                                   BaseRule.plug_in(spec), LINEAR_P, 12, scheme)
    assert policy.steps >= 1
    for h in [panel, *ens.histories[:10]]:
        direct = ff.evaluate_policy(policy, h)
        matrix = ff.evaluate_policy_matrix_form(policy, h)
        assert np.abs(direct - matrix).max() <= 1e-10


def test_matrix_expansion_rejects_projected_variant():
    panel = _training_panel(seed=14, p=3)
    model = ff.fit_ar1(panel)
    policy = ff.FunctionalPolicy(base_rule=BaseRule.equal_weight(), model=model,
                                 omega=ff.ConstraintSet(lower_bound=0.0, p=3),
                                 variant=PROJECTED, a=(), b=(), t=())
    with pytest.raises(ValidationError):
        ff.evaluate_policy_matrix_form(policy, panel)


def test_geometric_rate_hyperplane():
    # constant-moment instance with known optimum: the iterate error decays
    # geometrically toward the closed-form solution
    p = 5
    mu = np.array([0.4, 0.1, -0.25, 0.3, -0.05])
    sigma = np.diag([1.0, 2.0, 3.5, 6.0, 9.0])
    V = sigma + np.outer(mu, mu)
    model = ConstantMomentModel(mu=mu, V=V)
    wstar = mv_hyperplane_oracle(mu, sigma, 1.0)
    omega = ff.ConstraintSet(lower_bound=-np.inf, p=p)
    panel = _training_panel(seed=15, p=p)
    scheme = ResampleScheme(kind="iid", B=1, seed=16)
    cfg = ff.LineSearchConfig(t_max=2.0, min_gain=1e-18)
    policy, trace, _ = ff.run_ascent(panel, model, MV, omega,
                                     BaseRule.equal_weight(), LINEAR_P,
                                     30, scheme, cfg)
    errs = _iterate_errors(policy, mu, V, omega, wstar, LINEAR_P)
    assert len(errs) >= 26
    ratios = errs[1:] / errs[:-1]
    assert np.all(ratios[4:25] <= 0.999)
    assert errs[-1] <= 1e-4 * errs[0]


def test_geometric_rate_projected_lb0():
    p = 5
    mu = np.array([0.4, 0.1, -0.25, 0.3, -0.05])
    sigma = np.diag([1.0, 2.0, 3.5, 6.0, 9.0])
    V = sigma + np.outer(mu, mu)
    model = ConstantMomentModel(mu=mu, V=V)
    wstar = mv_constrained_oracle(mu, sigma, 1.0, 0.0)
    omega = ff.ConstraintSet(lower_bound=0.0, p=p)
    panel = _training_panel(seed=17, p=p)
    scheme = ResampleScheme(kind="iid", B=1, seed=18)
    cfg = ff.LineSearchConfig(t_max=2.0, min_gain=1e-18)
    policy, trace, _ = ff.run_ascent(panel, model, MV, omega,
                                     BaseRule.equal_weight(), PROJECTED,
                                     30, scheme, cfg)
    errs = _iterate_errors(policy, mu, V, omega, wstar, PROJECTED)
    assert len(errs) >= 26
    ratios = errs[1:] / errs[:-1]
    assert np.all(ratios[4:25] <= 0.999)
    assert errs[-1] <= 1e-4 * errs[0]


def _iterate_errors(policy, mu, V, omega, wstar, variant):
    from funfolio.funopt import _direction, _step

    w = np.full(mu.shape[0], 1.0 / mu.shape[0])
    errs = [np.linalg.norm(w - wstar)]
    for a, b, t in zip(policy.a, policy.b, policy.t):
        d = _direction(mu, V, w, a, b)
        delta = ff.project_hyperplane(d) if variant == LINEAR_P else d
        w = _step(w, delta, t, variant, omega)
        errs.append(np.linalg.norm(w - wstar))
    return np.array(errs)


def test_projected_ascent_inequality():
    # (y_k - w_k)' (w_{k+1} - w_k) >= 0 ensemble-wide at every iteration
    panel = _training_panel(seed=19, p=6)
    model = ff.fit_ar1(panel)
    spec = ff.ObjectiveSpec(kind="mv", lam=1.28)
    omega = ff.ConstraintSet(lower_bound=-0.2, p=6)
    scheme = ResampleScheme(kind="parametric_ar1", B=20, seed=20)
    policy, _, ens = ff.run_ascent(panel, model, spec, omega,
                                   BaseRule.plug_in(spec), PROJECTED, 10, scheme)
    from funfolio.funopt import _direction, base_weights

    for b, h in enumerate(ens.histories):
        mu = model.cond_mean(h)
        V = model.cond_second_moment(h)
        w = base_weights(policy.base_rule, h, omega)
        for a, bb, t in zip(policy.a, policy.b, policy.t):
            d = _direction(mu, V, w, a, bb)
            y = w + t * d
            w_next = ff.project(omega, y)
            assert float((y - w) @ (w_next - w)) >= -1e-10
            w = w_next


def test_surrogate_moment_variant():
    panel = _training_panel(seed=21, p=5)
    model = ff.fit_ar1(panel)
    spec = ff.ObjectiveSpec(kind="mv", lam=1.0)
    omega = ff.ConstraintSet(lower_bound=-0.2, p=5)
    scheme = ResampleScheme(kind="iid", B=15, seed=22)
    policy, trace, _ = ff.run_ascent(panel, model, spec, omega,
                                     BaseRule.plug_in(spec), PROJECTED,
                                     8, scheme, surrogate_moments=True)
    # surrogate trace is monotone by the line-search acceptance rule
    assert np.all(np.diff(np.array(trace.G)) > 0.0)
