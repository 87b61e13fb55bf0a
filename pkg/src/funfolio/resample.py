"""Bootstrap generation of resampled histories.

Four schemes: iid row resampling, circular moving-block, moving-block with
a data-driven block length (``double_block``), and the parametric AR(1)
residual bootstrap. Replicate b always draws from the substream
``(seed, RESAMPLE, b)``, so ensembles are bit-identical across runs and
worker counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import BootstrapEnsemble, ReturnPanel
from .errors import BadBlockLenError, MissingModelError, ValidationError
from .rng import BLOCKSEL, RESAMPLE, substream
from .tsmodel import Ar1MomentModel

__all__ = ["ResampleScheme", "resample", "select_block_length"]

IID = "iid"
MOVING_BLOCK = "moving_block"
DOUBLE_BLOCK = "double_block"
PARAMETRIC_AR1 = "parametric_ar1"

_KINDS = (IID, MOVING_BLOCK, DOUBLE_BLOCK, PARAMETRIC_AR1)

# Default number of bootstrap replicates.
DEFAULT_B = 60


@dataclass(frozen=True)
class ResampleScheme:
    """How to generate the B resampled histories.

    ``block_len`` applies to moving_block; ``block_len_grid`` (default
    1..floor(sqrt(n))) and ``inner_B`` drive the second-level selection
    for double_block; ``block_residuals`` switches the parametric scheme
    from iid residual draws to block draws with a selected length.
    """

    kind: str
    B: int = DEFAULT_B
    seed: int = 0
    block_len: Optional[int] = None
    block_len_grid: Optional[tuple] = None
    inner_B: int = 50
    block_residuals: bool = False

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown resample kind {self.kind!r}")
        if self.B < 1:
            raise ValidationError(f"B must be >= 1, got {self.B}")
        if self.kind == MOVING_BLOCK and (self.block_len is None or self.block_len < 1):
            raise BadBlockLenError(f"moving_block needs block_len >= 1, got {self.block_len}")
        if self.block_len_grid is not None:
            object.__setattr__(self, "block_len_grid",
                               tuple(int(x) for x in self.block_len_grid))


def _block_indices(rng: np.random.Generator, n: int, L: int) -> np.ndarray:
    """Circular moving-block index vector of length n."""
    n_blocks = -(-n // L)
    starts = rng.integers(0, n, size=n_blocks)
    idx = (starts[:, None] + np.arange(L)[None, :]) % n
    return idx.reshape(-1)[:n]


def select_block_length(panel: ReturnPanel, grid: Sequence[int],
                        inner_B: int = 50, seed: int = 0) -> int:
    """Choose a moving-block length from ``grid`` for the panel.

    For each candidate L the second-level bootstrap dispersion of the
    resampled sample mean around the original sample mean is estimated
    from ``inner_B`` circular-block replicates. The selected L is the one
    whose dispersion best matches a Bartlett long-run-variance benchmark
    of the sample mean, with the Bartlett bandwidth cut where sample
    autocorrelations stop clearing the 2/sqrt(n) band. Independent data
    therefore get short blocks and persistent data get long ones. Exact
    ties prefer the candidate closest to ceil(n^(1/3)).
    """
    grid = [int(L) for L in grid]
    if not grid:
        raise ValidationError("block length grid must be nonempty")
    x = panel.values
    n, p = x.shape
    for L in grid:
        if L < 1 or L > n:
            raise BadBlockLenError(f"grid value {L} outside [1, {n}]")
    if len(grid) == 1:
        return grid[0]

    xbar = x.mean(axis=0)
    xc = x - xbar
    gamma0 = (xc ** 2).mean(axis=0)
    gamma0 = np.maximum(gamma0, 1e-300)
    kmax = min(n - 2, max(max(grid), int(math.ceil(math.sqrt(n)))))
    rho = np.empty((kmax, p))
    for k in range(1, kmax + 1):
        # 1/n autocovariance convention, normalized by gamma0
        rho[k - 1] = (xc[:-k] * xc[k:]).sum(axis=0) / (n * gamma0)
    band = 2.0 / math.sqrt(n)

    target = 0.0
    for i in range(p):
        m = kmax
        for k in range(kmax - 1):
            if abs(rho[k, i]) < band and abs(rho[k + 1, i]) < band:
                m = k
                break
        lrv = 1.0
        if m > 0:
            wts = 1.0 - np.arange(1, m + 1) / (m + 1.0)
            lrv += 2.0 * float(wts @ rho[:m, i])
        target += gamma0[i] * max(lrv, 0.05)
    target /= n

    best_L, best_err = None, None
    anchor = int(math.ceil(n ** (1.0 / 3.0)))
    for L in grid:
        acc = 0.0
        for b in range(inner_B):
            rng = substream(seed, BLOCKSEL, L, b)
            idx = _block_indices(rng, n, L)
            dev = x[idx].mean(axis=0) - xbar
            acc += float(dev @ dev)
        err = abs(acc / inner_B - target)
        if (best_err is None or err < best_err
                or (err == best_err and abs(L - anchor) < abs(best_L - anchor))):
            best_L, best_err = L, err
    return best_L


def _default_grid(n: int) -> tuple:
    return tuple(range(1, max(1, int(math.isqrt(n))) + 1))


def resample(panel: ReturnPanel, scheme: ResampleScheme,
             model=None) -> BootstrapEnsemble:
    """Generate B resampled histories with cached conditional moments.

    iid draws rows with replacement; moving_block concatenates circular
    blocks of whole rows (cross-sectional dependence preserved);
    double_block first selects the block length on the panel;
    parametric_ar1 resamples fitted residual rows and rebuilds returns
    through the AR(1) recursion from r_0 = 0.

    When ``model`` is given, ``mu[b]`` / ``V[b]`` cache its conditional
    moments on each history.
    """
    n, p = panel.values.shape
    kind = scheme.kind
    seed_record = {"seed": scheme.seed, "kind": kind, "streams": "(seed, RESAMPLE, b)"}

    if kind == PARAMETRIC_AR1:
        if model is None or not isinstance(model, Ar1MomentModel):
            raise MissingModelError("parametric_ar1 requires a fitted AR(1) model")

    block_len = scheme.block_len
    if kind == MOVING_BLOCK:
        if block_len is None or not 1 <= block_len <= n:
            raise BadBlockLenError(f"block_len {block_len} outside [1, {n}]")
    elif kind == DOUBLE_BLOCK:
        grid = scheme.block_len_grid or _default_grid(n)
        block_len = select_block_length(panel, grid, scheme.inner_B, scheme.seed)
        seed_record["selected_block_len"] = block_len

    resid_block_len = None
    if kind == PARAMETRIC_AR1 and scheme.block_residuals:
        resid_panel = ReturnPanel(values=model.residuals,
                                  asset_ids=panel.asset_ids,
                                  time_ids=panel.time_ids[: model.residuals.shape[0]])
        grid = scheme.block_len_grid or _default_grid(model.residuals.shape[0])
        resid_block_len = select_block_length(resid_panel, grid,
                                              scheme.inner_B, scheme.seed)
        seed_record["residual_block_len"] = resid_block_len

    histories = []
    for b in range(scheme.B):
        rng = substream(scheme.seed, RESAMPLE, b)
        if kind == IID:
            rows = panel.values[rng.integers(0, n, size=n)]
        elif kind in (MOVING_BLOCK, DOUBLE_BLOCK):
            rows = panel.values[_block_indices(rng, n, block_len)]
        else:  # parametric_ar1
            nres = model.residuals.shape[0]
            if resid_block_len is not None:
                idx = _block_indices(rng, nres, resid_block_len)[:n]
            else:
                idx = rng.integers(0, nres, size=n)
            eps = model.residuals[idx]
            rows = np.empty((n, p))
            prev = np.zeros(p)
            for t in range(n):
                prev = model.alpha + model.beta * prev + eps[t]
                rows[t] = prev
        histories.append(ReturnPanel(values=np.ascontiguousarray(rows),
                                     asset_ids=panel.asset_ids,
                                     time_ids=panel.time_ids))

    mu = V = None
    if model is not None:
        mu = np.stack([model.cond_mean(h) for h in histories])
        V = np.stack([model.cond_second_moment(h) for h in histories])
    return BootstrapEnsemble(histories=histories, mu=mu, V=V,
                             seed_record=seed_record)
