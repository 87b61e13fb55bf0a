"""Constant-weight solvers: equal weight, closed-form frontier, plug-in.

``solve_constant`` is the plug-in optimizer used both as a comparison
strategy and as the base rule inside the bootstrap. It is a projected
gradient ascent with backtracking plus a golden-section polish per step,
so one mechanism covers the quadratic and non-quadratic objectives alike.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from .constraint import project
from .core import ConstraintSet, ObjectiveSpec
from .errors import DegenerateDError, SingularCovarianceError, ValidationError
from .objectives import eval_F, grad_F
from .errors import DegenerateVarianceError

__all__ = ["equal_weight", "markowitz_closed_form", "solve_constant"]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(phi: Callable[[float], Optional[float]], lo: float, hi: float,
               iters: int = 40) -> tuple:
    """Golden-section maximization of phi on [lo, hi].

    ``phi`` may return None for infeasible points; those are treated as
    -inf. Returns (t_best, phi_best) over all probed points.
    """
    def safe(t):
        v = phi(t)
        return -math.inf if v is None else v

    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = safe(x1), safe(x2)
    best_t, best_v = (x1, f1) if f1 >= f2 else (x2, f2)
    for _ in range(iters):
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = safe(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = safe(x2)
        if f1 > best_v:
            best_t, best_v = x1, f1
        if f2 > best_v:
            best_t, best_v = x2, f2
    return best_t, best_v


def equal_weight(p: int) -> np.ndarray:
    """The 1/p portfolio."""
    if p < 1:
        raise ValidationError(f"p must be >= 1, got {p}")
    return np.full(p, 1.0 / p)


def markowitz_closed_form(mu: np.ndarray, sigma: np.ndarray,
                          mu_star: float) -> np.ndarray:
    """Minimum-variance weights with target mean mu_star and full budget.

    Classic two-constraint solution
    w = (B S^-1 1 - A S^-1 mu + mu_star (C S^-1 mu - A S^-1 1)) / D
    with A = mu' S^-1 1, B = mu' S^-1 mu, C = 1' S^-1 1, D = BC - A^2.
    Kept as a test oracle and CLI utility; not on the optimization path.
    """
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    p = mu.shape[0]
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise SingularCovarianceError("covariance must be positive definite") from None
    ones = np.ones(p)
    s_inv_1 = np.linalg.solve(sigma, ones)
    s_inv_mu = np.linalg.solve(sigma, mu)
    A = float(mu @ s_inv_1)
    B = float(mu @ s_inv_mu)
    C = float(ones @ s_inv_1)
    D = B * C - A * A
    if not D > 1e-12 * max(abs(B * C), 1e-300):
        raise DegenerateDError("mu is proportional to 1: D = BC - A^2 vanished")
    return (B * s_inv_1 - A * s_inv_mu + mu_star * (C * s_inv_mu - A * s_inv_1)) / D


def solve_constant(objective: ObjectiveSpec, mu_hat: np.ndarray,
                   V_hat: np.ndarray, omega: ConstraintSet, *,
                   max_iters: int = 500, rel_tol: float = 1e-10,
                   history: Optional[list] = None) -> np.ndarray:
    """Maximize F(w'mu, w'Vw) over omega by projected gradient ascent.

    Starts from equal weight (feasible for every valid lower bound) and
    ascends along a*mu + 2b*Vw with (a, b) the objective gradient at the
    current point. The trial step is seeded spectrally from the previous
    displacement/gradient-change pair and backtracked until the
    post-projection objective strictly improves. Stops once the relative
    objective gain stays below ``rel_tol`` for two consecutive accepted
    steps, or after ``max_iters`` accepted steps.

    ``history``, when given, collects the accepted objective values (a
    non-decreasing trace by construction).
    """
    mu_hat = np.asarray(mu_hat, dtype=np.float64)
    V_hat = np.asarray(V_hat, dtype=np.float64)
    p = mu_hat.shape[0]
    if V_hat.shape != (p, p):
        raise ValidationError(f"V_hat shape {V_hat.shape} does not match p={p}")
    if p == 1:
        return np.ones(1)
    if omega.p * omega.lower_bound == 1.0:
        return np.full(p, omega.lower_bound)

    w = project(omega, equal_weight(p))
    U = float(w @ mu_hat)
    V = float(w @ (V_hat @ w))
    F = eval_F(objective, U, V)
    if history is not None:
        history.append(F)

    def value_at(w_new):
        try:
            return eval_F(objective, float(w_new @ mu_hat),
                          float(w_new @ (V_hat @ w_new)))
        except DegenerateVarianceError:
            return None

    t_cur = 1.0
    small_gains = 0
    w_prev = None
    d_prev = None
    for _ in range(max_iters):
        a, b = grad_F(objective, U, V)
        d = a * mu_hat + 2.0 * b * (V_hat @ w)
        if w_prev is not None:
            s = w - w_prev
            y = d_prev - d
            sy = float(s @ y)
            if sy > 1e-300:
                t_cur = min(max(float(s @ s) / sy, 1e-10), 1e8)
        t_try, accepted = t_cur, False
        for _ in range(60):
            w_new = project(omega, w + t_try * d)
            val = value_at(w_new)
            if val is not None and val > F:
                accepted = True
                break
            t_try *= 0.5
            if t_try < 1e-18:
                break
        if not accepted:
            break
        w_prev, d_prev = w, d
        w = w_new
        U = float(w @ mu_hat)
        V = float(w @ (V_hat @ w))
        gain = val - F
        F = val
        if history is not None:
            history.append(F)
        t_cur = t_try
        if gain <= rel_tol * max(1.0, abs(F)):
            small_gains += 1
            if small_gains >= 2:
                break
        else:
            small_gains = 0
    return w
