"""Independent oracles used across the test suite.

These deliberately avoid the production code paths: brute-force
enumeration for the projection and constrained quadratic programs,
linear solves for the hyperplane optimum, central finite differences
for gradients, and a closed-form Student-t tail for df = 2.
"""

import itertools
import math

import numpy as np


def project_bruteforce(lb: float, v: np.ndarray) -> np.ndarray:
    """Exact projection onto {sum(u)=1, u>=lb} by active-set enumeration.

    For each candidate floor-active set E, the equality-constrained
    minimizer shifts the free entries uniformly; every candidate that
    respects the floor is feasible for the original problem, so the
    closest one is the true projection.
    """
    v = np.asarray(v, dtype=np.float64)
    p = v.shape[0]
    if not np.isfinite(lb):
        return v + (1.0 - v.sum()) / p
    best, best_d = None, np.inf
    for mask in itertools.product([False, True], repeat=p):
        active = np.array(mask)
        n_free = int((~active).sum())
        if n_free == 0:
            if abs(p * lb - 1.0) > 1e-12:
                continue
            cand = np.full(p, lb)
        else:
            cand = np.empty(p)
            cand[active] = lb
            shift = (1.0 - active.sum() * lb - v[~active].sum()) / n_free
            cand[~active] = v[~active] + shift
            if cand[~active].min() < lb - 1e-12:
                continue
        d = float(np.sum((cand - v) ** 2))
        if d < best_d:
            best, best_d = cand, d
    return best


def mv_hyperplane_oracle(mu: np.ndarray, sigma: np.ndarray, lam: float) -> np.ndarray:
    """argmax w'mu - lam * w' sigma w subject to sum(w) = 1, by Lagrange solve."""
    p = mu.shape[0]
    kkt = np.zeros((p + 1, p + 1))
    kkt[:p, :p] = 2.0 * lam * sigma
    kkt[:p, p] = 1.0
    kkt[p, :p] = 1.0
    rhs = np.concatenate([mu, [1.0]])
    sol = np.linalg.solve(kkt, rhs)
    return sol[:p]


def mv_constrained_oracle(mu: np.ndarray, sigma: np.ndarray, lam: float,
                          lb: float) -> np.ndarray:
    """argmax w'mu - lam * w' sigma w over {sum(w)=1, w>=lb}.

    Enumerates floor-active sets; each equality-constrained stationary
    point that respects the floor is feasible, and the best of them is
    the optimum (strict concavity).
    """
    p = mu.shape[0]
    if not np.isfinite(lb):
        return mv_hyperplane_oracle(mu, sigma, lam)
    best, best_val = None, -np.inf
    for mask in itertools.product([False, True], repeat=p):
        active = np.array(mask)
        free = ~active
        nf = int(free.sum())
        if nf == 0:
            if abs(p * lb - 1.0) > 1e-12:
                continue
            cand = np.full(p, lb)
        else:
            kkt = np.zeros((nf + 1, nf + 1))
            kkt[:nf, :nf] = 2.0 * lam * sigma[np.ix_(free, free)]
            kkt[:nf, nf] = 1.0
            kkt[nf, :nf] = 1.0
            rhs = np.concatenate([
                mu[free] - 2.0 * lam * sigma[np.ix_(free, active)].sum(axis=1) * lb,
                [1.0 - active.sum() * lb],
            ])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            cand = np.empty(p)
            cand[active] = lb
            cand[free] = sol[:nf]
            if cand[free].min() < lb - 1e-12:
                continue
        val = float(cand @ mu - lam * cand @ sigma @ cand)
        if val > best_val:
            best, best_val = cand, val
    return best


def fd_grad(f, U: float, V: float, h: float = 1e-6) -> tuple:
    """Two-sided finite differences of a scalar function of (U, V)."""
    dU = (f(U + h, V) - f(U - h, V)) / (2.0 * h)
    dV = (f(U, V + h) - f(U, V - h)) / (2.0 * h)
    return dU, dV


def student_t_sf_df2(t: float) -> float:
    """Exact upper-tail probability of Student-t with 2 degrees of freedom."""
    return 0.5 - t / (2.0 * math.sqrt(t * t + 2.0))


def sample_second_moment(values: np.ndarray) -> np.ndarray:
    v = values.T @ values / values.shape[0]
    return (v + v.T) / 2.0
