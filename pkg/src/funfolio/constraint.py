"""Exact Euclidean projection onto {w : sum(w) = 1, w >= lower_bound}.

The sum-to-one hyperplane projection is the matrix P = I - 11'/p applied
to a direction; the full lower-bounded projection uses the sorted
piecewise-linear threshold, which is exact up to float rounding and
therefore supports tight test tolerances.
"""

import numpy as np

from .core import ConstraintSet

__all__ = ["project_hyperplane", "project", "is_feasible"]


def project_hyperplane(v: np.ndarray) -> np.ndarray:
    """Apply P = I - 11'/p: remove the mean so the output sums to zero."""
    v = np.asarray(v, dtype=np.float64)
    return v - v.mean()


def project(omega: ConstraintSet, v: np.ndarray) -> np.ndarray:
    """Euclidean projection of v onto omega.

    Returns the unique u minimizing ||u - v||^2 subject to sum(u) = 1 and
    u >= lower_bound, via u_i = max(lb, v_i - tau) with tau the root of
    sum(max(lb, v_i - tau)) = 1. With lb = -inf this reduces to the
    affine projection v + (1 - sum(v))/p.
    """
    v = np.asarray(v, dtype=np.float64)
    p = v.shape[0]
    if p != omega.p:
        raise ValueError(f"vector has {p} entries, constraint set expects {omega.p}")
    lb = omega.lower_bound

    if not np.isfinite(lb):
        return v + (1.0 - v.sum()) / p

    if p * lb == 1.0:
        # Singleton feasible set.
        return np.full(p, lb)

    # Sort descending; with the m largest entries free (above the floor),
    # tau_m = (sum of those entries + (p - m) * lb - 1) / m. The correct m
    # is the largest one keeping all free entries strictly above the floor.
    u = np.sort(v)[::-1]
    csum = np.cumsum(u)
    m_arr = np.arange(1, p + 1)
    tau = (csum + (p - m_arr) * lb - 1.0) / m_arr
    # Free set condition: u[m-1] - tau_m > lb.
    feasible_m = np.nonzero(u - tau > lb)[0]
    m = feasible_m[-1] + 1
    return np.maximum(lb, v - tau[m - 1])


def is_feasible(omega: ConstraintSet, w: np.ndarray, tol: float = 1e-10) -> bool:
    """True iff |sum(w) - 1| <= tol and min(w) >= lower_bound - tol."""
    w = np.asarray(w, dtype=np.float64)
    if abs(w.sum() - 1.0) > tol:
        return False
    if np.isfinite(omega.lower_bound) and w.min() < omega.lower_bound - tol:
        return False
    return True
