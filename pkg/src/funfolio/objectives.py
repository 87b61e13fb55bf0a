"""Objective families F(U, V) and their analytic gradients.

U is the expected portfolio return E(w' mu_n) and V the expected second
moment E(w' V_n w); V - U^2 is the variance proxy. Gradients here are
closed-form; finite differences are reserved for tests.
"""

import math

from .core import MSD, MV, SHARPE, ObjectiveSpec
from .errors import DegenerateVarianceError

# Below this, the variance proxy is treated as degenerate for sharpe/msd.
VAR_EPS = 1e-12


def _variance(spec: ObjectiveSpec, U: float, V: float) -> float:
    s2 = V - U * U
    if s2 <= VAR_EPS:
        raise DegenerateVarianceError(
            f"V - U^2 = {s2:.3e} <= {VAR_EPS:.0e} for {spec.kind} objective"
        )
    return s2


def eval_F(spec: ObjectiveSpec, U: float, V: float) -> float:
    """Evaluate the objective at (U, V).

    Raises :class:`DegenerateVarianceError` for sharpe/msd when
    V - U^2 <= 1e-12; callers are expected to shrink their step rather
    than receive a silently clamped value.
    """
    if spec.kind == MV:
        return U - spec.lam * (V - U * U)
    if spec.kind == SHARPE:
        return (U - spec.r0) / math.sqrt(_variance(spec, U, V))
    s = math.sqrt(_variance(spec, U, V))
    return U - spec.lam * s


def grad_F(spec: ObjectiveSpec, U: float, V: float) -> tuple:
    """Closed-form gradient (dF/dU, dF/dV) at (U, V)."""
    if spec.kind == MV:
        return (1.0 + 2.0 * spec.lam * U, -spec.lam)
    if spec.kind == SHARPE:
        s2 = _variance(spec, U, V)
        c = s2 ** -1.5
        return (c * (V - spec.r0 * U), c * (spec.r0 - U) / 2.0)
    s = math.sqrt(_variance(spec, U, V))
    return (1.0 + spec.lam * U / s, -spec.lam / (2.0 * s))
