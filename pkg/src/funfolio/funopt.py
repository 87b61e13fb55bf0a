"""Bootstrap-estimated functional gradient ascent and policy replay.

The optimizer treats the weight vector as a function of the return
history. Each iteration moves every bootstrap replicate's weights along
the common ascent direction a_k * mu + 2 b_k * V w, where (a_k, b_k) is
the objective gradient at the ensemble moment estimates, and records the
scalar triple (a_k, b_k, t_k). Those triples, together with the base rule
and the moment model, are all that is needed to replay the learned weight
function on any history.

Two variants are supported: ``linear_P`` keeps iterates on the sum-to-one
hyperplane by premultiplying the direction with P = I - 11'/p, and
``projected`` projects each updated replicate onto the lower-bounded
constraint set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constraint import project, project_hyperplane
from .core import (
    EQUAL_WEIGHT,
    LINEAR_P,
    PLUG_IN,
    PROJECTED,
    STORED_CONSTANT,
    BaseRule,
    BootstrapEnsemble,
    ConstraintSet,
    FunctionalPolicy,
    ObjectiveSpec,
    ReturnPanel,
)
from .errors import DegenerateVarianceError, ValidationError
from .objectives import eval_F, grad_F
from .resample import ResampleScheme, resample
from .solvers import equal_weight, golden_max, solve_constant

__all__ = [
    "LineSearchConfig",
    "AscentTrace",
    "line_search",
    "run_ascent",
    "evaluate_policy",
    "evaluate_policy_matrix_form",
    "base_weights",
]

logger = logging.getLogger("funfolio")

STALLED = "stalled"
MAX_ITERS = "max_iters"

# Settings for the plug-in solves behind base rules. These run once per
# bootstrap replicate and once per rolling evaluation window, so they use
# a lighter tolerance than a direct solve_constant call; optimizer,
# replay and comparator all share this path, keeping replays bit-exact.
_BASE_SOLVE = {"rel_tol": 1e-9, "max_iters": 300}

# Consecutive relative gains below this level count as a stall; the
# bootstrap noise floor makes smaller gains meaningless.
_STALL_REL_GAIN = 1e-9
_STALL_RUNS = 3


@dataclass(frozen=True)
class LineSearchConfig:
    """Backtracking-plus-golden-section step selection parameters."""

    t_max: float = 10.0
    shrink: float = 0.5
    max_trials: int = 40
    min_gain: float = 1e-12

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValidationError(f"t_max must be > 0, got {self.t_max}")
        if not 0.0 < self.shrink < 1.0:
            raise ValidationError(f"shrink must lie in (0,1), got {self.shrink}")


@dataclass
class AscentTrace:
    """Scalar history of one optimizer run.

    U, V, G hold the moment estimates and objective value at step 0 and
    after each accepted step; t holds accepted step sizes; grad holds one
    (a_k, b_k) pair per attempted iteration (so it can be one longer than
    t when the run stalls after computing a gradient).
    """

    U: list = field(default_factory=list)
    V: list = field(default_factory=list)
    G: list = field(default_factory=list)
    t: list = field(default_factory=list)
    grad: list = field(default_factory=list)
    stop_reason: str = MAX_ITERS


def line_search(objective: ObjectiveSpec, U: float, V: float,
                U_delta: float, V_delta: float, V_deltadelta: float,
                cfg: Optional[LineSearchConfig] = None) -> Optional[float]:
    """Pick a step t with F(U + t U_d, V + t V_d + t^2 V_dd) > F(U, V).

    Backtracks from t_max and refines the first improving trial with one
    golden-section pass on [t/2, 2t] (capped at t_max). Trials where the
    variance proxy degenerates are skipped as non-improving. Returns None
    when no trial improves by more than ``min_gain``.
    """
    cfg = cfg or LineSearchConfig()
    if V_deltadelta < 0:
        raise ValidationError(f"V_deltadelta must be >= 0, got {V_deltadelta}")
    phi0 = eval_F(objective, U, V)

    def phi(t: float) -> Optional[float]:
        try:
            return eval_F(objective, U + t * U_delta,
                          V + t * V_delta + t * t * V_deltadelta)
        except DegenerateVarianceError:
            return None

    t_try = cfg.t_max
    found = None
    for _ in range(cfg.max_trials):
        val = phi(t_try)
        if val is not None and val > phi0 + cfg.min_gain:
            found = (t_try, val)
            break
        t_try *= cfg.shrink
    if found is None:
        return None

    lo, hi = found[0] / 2.0, min(2.0 * found[0], cfg.t_max)
    t_g, val_g = golden_max(phi, lo, hi)
    if val_g > found[1] and val_g > phi0 + cfg.min_gain:
        return t_g
    return found[0]


def _direction(mu: np.ndarray, V: np.ndarray, w: np.ndarray,
               a: float, b: float) -> np.ndarray:
    return a * mu + 2.0 * b * (V @ w)


def base_weights(rule: BaseRule, panel: ReturnPanel,
                 omega: ConstraintSet) -> np.ndarray:
    """Evaluate the base rule w0 on a history.

    plug_in solves the constant-weight problem on the history's sample
    mean and sample second moment; equal_weight and stored_constant are
    history-free.
    """
    if rule.kind == EQUAL_WEIGHT:
        return equal_weight(panel.p)
    if rule.kind == STORED_CONSTANT:
        return np.array(rule.w, dtype=np.float64)
    r = panel.values
    mu_hat = r.mean(axis=0)
    v_hat = r.T @ r / r.shape[0]
    v_hat = (v_hat + v_hat.T) / 2.0
    return solve_constant(rule.objective, mu_hat, v_hat, omega, **_BASE_SOLVE)


def _ensemble_moments(W: np.ndarray, mu: np.ndarray, V: np.ndarray) -> tuple:
    # Fixed-order reductions keep results identical across worker counts.
    Vw = np.einsum("bij,bj->bi", V, W)
    U_hat = float(np.mean(np.einsum("bi,bi->b", W, mu)))
    V_hat = float(np.mean(np.einsum("bi,bi->b", W, Vw)))
    return U_hat, V_hat


def run_ascent(panel: ReturnPanel, model, objective: ObjectiveSpec,
               omega: ConstraintSet, base_rule: BaseRule, variant: str,
               K: int, scheme: ResampleScheme,
               ls_cfg: Optional[LineSearchConfig] = None, *,
               surrogate_moments: bool = False) -> tuple:
    """Run the multi-step bootstrap gradient ascent.

    Generates the ensemble once, seeds every replicate's weights with the
    base rule, then iterates up to K accepted steps. A step proposed by
    the scalar line search is accepted only if the objective evaluated at
    the true post-update ensemble moments strictly improves; otherwise the
    step is shrunk and ultimately the run stops with ``stalled``. With
    ``surrogate_moments=True`` the moment estimates are instead advanced
    by the line-search surrogate (U + tU_d, V + tV_d + t^2 V_dd), which
    drifts from the true moments of the projected weights but matches the
    original update rule exactly; kept for fidelity comparisons.

    Returns ``(policy, trace, ensemble)`` where the ensemble carries the
    per-replicate final weights for replay-consistency checks.
    """
    if K < 1:
        raise ValidationError(f"K must be >= 1, got {K}")
    if variant not in (LINEAR_P, PROJECTED):
        raise ValidationError(f"unknown variant {variant!r}")
    cfg = ls_cfg or LineSearchConfig()

    ensemble = resample(panel, scheme, model)
    B = ensemble.B
    mu_b, V_b = ensemble.mu, ensemble.V
    W = np.stack([base_weights(base_rule, h, omega) for h in ensemble.histories])

    U_hat, V_hat = _ensemble_moments(W, mu_b, V_b)
    G = eval_F(objective, U_hat, V_hat)
    trace = AscentTrace(U=[U_hat], V=[V_hat], G=[G])
    a_seq, b_seq, t_seq = [], [], []
    warned_b_sign = False
    stall_run = 0
    trace.stop_reason = MAX_ITERS

    for _ in range(K):
        a_k, b_k = grad_F(objective, U_hat, V_hat)
        trace.grad.append((a_k, b_k))
        if b_k >= 0 and not warned_b_sign:
            # Concavity of F in the second moment is not certifiable here.
            logger.warning(
                "gradient b-component is %.3e >= 0 (U=%.3e); continuing", b_k, U_hat)
            warned_b_sign = True

        delta = np.empty_like(W)
        for b in range(B):
            d = _direction(mu_b[b], V_b[b], W[b], a_k, b_k)
            delta[b] = project_hyperplane(d) if variant == LINEAR_P else d

        dVw = np.einsum("bij,bj->bi", V_b, W)
        U_d = float(np.mean(np.einsum("bi,bi->b", delta, mu_b)))
        V_d = float(np.mean(2.0 * np.einsum("bi,bi->b", delta, dVw)))
        V_dd = float(np.mean(np.einsum("bi,bij,bj->b", delta, V_b, delta)))
        V_dd = max(V_dd, 0.0)

        t_k = line_search(objective, U_hat, V_hat, U_d, V_d, V_dd, cfg)
        if t_k is None:
            trace.stop_reason = STALLED
            break

        if surrogate_moments:
            W_new = _update_weights(W, delta, t_k, variant, omega)
            U_new = U_hat + t_k * U_d
            V_new = V_hat + t_k * V_d + t_k * t_k * V_dd
            G_new = eval_F(objective, U_new, V_new)
            accepted = True
        else:
            # Accept only if the recomputed post-update objective improves;
            # projection can spoil a step that looked good on the surrogate.
            accepted = False
            for _ in range(cfg.max_trials):
                W_new = _update_weights(W, delta, t_k, variant, omega)
                U_new, V_new = _ensemble_moments(W_new, mu_b, V_b)
                try:
                    G_new = eval_F(objective, U_new, V_new)
                except DegenerateVarianceError:
                    G_new = None
                if G_new is not None and G_new > G:
                    accepted = True
                    break
                t_k *= cfg.shrink
        if not accepted:
            trace.stop_reason = STALLED
            break

        gain = G_new - G
        W, U_hat, V_hat, G = W_new, U_new, V_new, G_new
        a_seq.append(a_k)
        b_seq.append(b_k)
        t_seq.append(t_k)
        trace.U.append(U_hat)
        trace.V.append(V_hat)
        trace.G.append(G)
        trace.t.append(t_k)

        if gain < _STALL_REL_GAIN * max(1.0, abs(G)):
            stall_run += 1
            if stall_run >= _STALL_RUNS:
                trace.stop_reason = STALLED
                break
        else:
            stall_run = 0

    ensemble.weights = W
    policy = FunctionalPolicy(base_rule=base_rule, model=model, omega=omega,
                              variant=variant, a=a_seq, b=b_seq, t=t_seq)
    return policy, trace, ensemble


def _update_weights(W: np.ndarray, delta: np.ndarray, t: float,
                    variant: str, omega: ConstraintSet) -> np.ndarray:
    out = np.empty_like(W)
    for b in range(W.shape[0]):
        out[b] = _step(W[b], delta[b], t, variant, omega)
    return out


def _step(w: np.ndarray, delta: np.ndarray, t: float, variant: str,
          omega: ConstraintSet) -> np.ndarray:
    y = w + t * delta
    if variant == PROJECTED:
        return project(omega, y)
    return y


def evaluate_policy(policy: FunctionalPolicy, panel: ReturnPanel) -> np.ndarray:
    """Replay the learned weight function on a history.

    Runs the stored recurrence: w0 from the base rule, then for each k
    w <- w + t_k * P(a_k mu(S) + 2 b_k V(S) w)            (linear_P)
    w <- project(omega, w + t_k (a_k mu(S) + 2 b_k V(S) w)) (projected)
    using the policy's moment model. The arithmetic path matches the
    optimizer's per-replicate update exactly.
    """
    model = policy.model
    mu = model.cond_mean(panel)
    V = model.cond_second_moment(panel)
    w = base_weights(policy.base_rule, panel, policy.omega)
    for a_k, b_k, t_k in zip(policy.a, policy.b, policy.t):
        d = _direction(mu, V, w, a_k, b_k)
        delta = project_hyperplane(d) if policy.variant == LINEAR_P else d
        w = _step(w, delta, t_k, policy.variant, policy.omega)
    return w


def evaluate_policy_matrix_form(policy: FunctionalPolicy,
                                panel: ReturnPanel) -> np.ndarray:
    """Closed-form product-expansion replay for the linear_P variant.

    Evaluates
    w_K = [sum_i (prod_{j>i} B_j) t_i a_i] P mu + (prod_j B_j) w0
    with B_k = I + 2 t_k b_k P V, building the matrix products explicitly.
    This is an independent arithmetic route from :func:`evaluate_policy`,
    useful for cross-checking the recurrence.
    """
    if policy.variant != LINEAR_P:
        raise ValidationError("matrix-form replay only applies to the linear_P variant")
    model = policy.model
    mu = model.cond_mean(panel)
    V = model.cond_second_moment(panel)
    p = mu.shape[0]
    PV = V - V.mean(axis=0, keepdims=True)  # (I - 11'/p) V
    Pmu = project_hyperplane(mu)
    w0 = base_weights(policy.base_rule, panel, policy.omega)

    K = policy.steps
    if K == 0:
        return w0
    bmats = [np.eye(p) + 2.0 * policy.t[k] * policy.b[k] * PV for k in range(K)]
    suffix = np.eye(p)
    coef = np.zeros((p, p))
    for i in range(K - 1, -1, -1):
        coef = coef + policy.t[i] * policy.a[i] * suffix
        suffix = suffix @ bmats[i]
    return coef @ Pmu + suffix @ w0
