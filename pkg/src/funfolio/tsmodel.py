"""Per-asset AR(1) return model and synthetic panel generators.

The fitted model exposes the conditional moment pair (mu(.), V(.)): given
any compatible history S, ``cond_mean`` is alpha + beta * (last row of S)
and ``cond_second_moment`` adds the pooled residual second moment to the
outer product of the conditional mean. The model object is replaceable:
anything with the same two methods (see :class:`ConstantMomentModel`)
plugs into the optimizer unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ReturnPanel, validate_panel
from .errors import DimensionMismatchError, NonStationaryError, ValidationError
from .rng import SIMULATE, substream

__all__ = [
    "Ar1MomentModel",
    "ConstantMomentModel",
    "fit_ar1",
    "cond_mean",
    "cond_second_moment",
    "GeneratorConfig",
    "simulate",
    "model_from_dict",
]

# Ridge scale for repairing tiny negative eigenvalues of the pooled
# residual second moment; downstream quadratic forms must be nonnegative.
_JITTER = 1e-10


def _jitter_psd(mat: np.ndarray) -> np.ndarray:
    mat = (mat + mat.T) / 2.0
    eigmin = np.linalg.eigvalsh(mat)[0]
    if eigmin < 0.0:
        p = mat.shape[0]
        mat = mat + _JITTER * (np.trace(mat) / p) * np.eye(p)
    return mat


@dataclass(frozen=True)
class Ar1MomentModel:
    """Least-squares AR(1) fit: r_t = alpha + beta * r_{t-1} + eps_t per asset."""

    alpha: np.ndarray              # (p,)
    beta: np.ndarray               # (p,)
    residuals: np.ndarray          # (n, p); row 0 is defined as 0
    second_moment_base: np.ndarray  # (p, p): pooled (1/n) sum eps eps'

    @property
    def p(self) -> int:
        return self.alpha.shape[0]

    def cond_mean(self, panel: ReturnPanel) -> np.ndarray:
        if panel.p != self.p:
            raise DimensionMismatchError(
                f"panel has {panel.p} assets, model has {self.p}"
            )
        return self.alpha + self.beta * panel.last_row()

    def cond_second_moment(self, panel: ReturnPanel) -> np.ndarray:
        mu = self.cond_mean(panel)
        return self.second_moment_base + np.outer(mu, mu)

    def to_dict(self) -> dict:
        return {
            "type": "ar1",
            "alpha": [float(x) for x in self.alpha],
            "beta": [float(x) for x in self.beta],
            "second_moment_base": [[float(x) for x in row]
                                   for row in self.second_moment_base],
        }


@dataclass(frozen=True)
class ConstantMomentModel:
    """Moment pair that ignores the history: mu(S) = mu, V(S) = V.

    Useful for instances where the conditional moments are known exactly,
    e.g. convergence-rate checks against closed-form optima.
    """

    mu: np.ndarray
    V: np.ndarray

    @property
    def p(self) -> int:
        return self.mu.shape[0]

    def cond_mean(self, panel: ReturnPanel) -> np.ndarray:
        if panel.p != self.p:
            raise DimensionMismatchError(
                f"panel has {panel.p} assets, model has {self.p}"
            )
        return self.mu

    def cond_second_moment(self, panel: ReturnPanel) -> np.ndarray:
        if panel.p != self.p:
            raise DimensionMismatchError(
                f"panel has {panel.p} assets, model has {self.p}"
            )
        return self.V

    def to_dict(self) -> dict:
        return {
            "type": "constant",
            "mu": [float(x) for x in self.mu],
            "V": [[float(x) for x in row] for row in self.V],
        }


def model_from_dict(obj: dict):
    kind = obj.get("type")
    if kind == "ar1":
        alpha = np.array(obj["alpha"], dtype=np.float64)
        p = alpha.shape[0]
        return Ar1MomentModel(
            alpha=alpha,
            beta=np.array(obj["beta"], dtype=np.float64),
            residuals=np.zeros((1, p)),
            second_moment_base=np.array(obj["second_moment_base"], dtype=np.float64),
        )
    if kind == "constant":
        return ConstantMomentModel(
            mu=np.array(obj["mu"], dtype=np.float64),
            V=np.array(obj["V"], dtype=np.float64),
        )
    raise ValidationError(f"unknown model type {kind!r}")


def fit_ar1(panel: ReturnPanel) -> Ar1MomentModel:
    """Fit the per-asset AR(1) model by ordinary least squares.

    Regression of r_t on (1, r_{t-1}) over t = 2..n per column. The t = 1
    residual is defined as 0 and included in the 1/n pooled averaging.
    A constant lagged series yields beta = 0 and alpha = mean of the
    responses instead of an error, keeping the pipeline total.
    """
    if panel.n < 3:
        raise ValidationError(f"AR(1) fit needs n >= 3, got {panel.n}")
    r = panel.values
    n, p = r.shape
    x = r[:-1]      # (n-1, p) lagged
    y = r[1:]       # (n-1, p) response
    xbar = x.mean(axis=0)
    ybar = y.mean(axis=0)
    sxx = ((x - xbar) ** 2).sum(axis=0)
    sxy = ((x - xbar) * (y - ybar)).sum(axis=0)

    beta = np.zeros(p)
    ok = sxx > 0.0
    beta[ok] = sxy[ok] / sxx[ok]
    alpha = ybar - beta * xbar

    residuals = np.zeros((n, p))
    residuals[1:] = y - alpha - beta * x
    base = _jitter_psd(residuals.T @ residuals / n)
    return Ar1MomentModel(alpha=alpha, beta=beta, residuals=residuals,
                          second_moment_base=base)


def cond_mean(model, panel: ReturnPanel) -> np.ndarray:
    """Conditional one-step mean given the panel's last observation."""
    return model.cond_mean(panel)


def cond_second_moment(model, panel: ReturnPanel) -> np.ndarray:
    """Conditional one-step second moment matrix; symmetric by construction."""
    return model.cond_second_moment(panel)


_SETTINGS = ("IID", "AR", "GARCH")

# Parameter presets mirror the three simulation settings: identical
# unconditional mean 0.0036 and variance 0.0016 across all of them.
_PRESETS = {
    "AR": dict(alpha=0.005, beta=-0.4, sigma=0.04),
    "IID": dict(alpha=0.0036, beta=0.0, sigma=0.04),
    "GARCH": dict(alpha=0.005, beta=-0.4, sigma=0.04,
                  gamma0=0.00096, gamma1=0.2, gamma2=0.2),
}

# Discarded leading steps that wash out the GARCH initial condition.
_GARCH_BURNIN = 200


@dataclass(frozen=True)
class GeneratorConfig:
    """Synthetic panel generator settings (IID, AR or GARCH columns)."""

    setting: str
    n: int
    p: int
    seed: int
    alpha: float = 0.0
    beta: float = 0.0
    sigma: float = 0.04
    gamma0: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0

    def __post_init__(self):
        if self.setting not in _SETTINGS:
            raise ValidationError(f"setting must be one of {_SETTINGS}, got {self.setting!r}")
        if self.n < 2 or self.p < 1:
            raise ValidationError("need n >= 2 and p >= 1")
        if self.setting == "GARCH" and not self.gamma1 + self.gamma2 < 1.0:
            raise NonStationaryError(
                f"gamma1 + gamma2 = {self.gamma1 + self.gamma2} >= 1"
            )

    @staticmethod
    def preset(setting: str, n: int, p: int, seed: int) -> "GeneratorConfig":
        key = setting.upper()
        if key not in _PRESETS:
            raise ValidationError(f"unknown setting {setting!r}")
        return GeneratorConfig(setting=key, n=n, p=p, seed=seed, **_PRESETS[key])


def simulate(config: GeneratorConfig) -> ReturnPanel:
    """Generate a panel of independent asset columns under the config.

    AR/IID: r_t = alpha + beta r_{t-1} + eps_t with eps ~ N(0, sigma^2)
    and r_0 = 0. GARCH: eps_t = sigma_t z_t with
    sigma_t^2 = gamma0 + gamma1 sigma_{t-1}^2 + gamma2 eps_{t-1}^2,
    sigma_0^2 at its stationary value, and a 200-step burn-in discarded.
    Column i draws from the substream (seed, SIMULATE, i), so panels are
    reproducible and columns could be generated in parallel.
    """
    n, p = config.n, config.p
    if config.setting == "GARCH":
        total = n + _GARCH_BURNIN
        z = np.column_stack([
            substream(config.seed, SIMULATE, i).standard_normal(total)
            for i in range(p)
        ])
        sig2 = np.full(p, config.gamma0 / (1.0 - config.gamma1 - config.gamma2))
        eps_prev = np.zeros(p)
        r_prev = np.zeros(p)
        rows = np.empty((total, p))
        for t in range(total):
            if t > 0:
                sig2 = config.gamma0 + config.gamma1 * sig2 + config.gamma2 * eps_prev ** 2
            eps = np.sqrt(sig2) * z[t]
            r_prev = config.alpha + config.beta * r_prev + eps
            rows[t] = r_prev
            eps_prev = eps
        values = rows[_GARCH_BURNIN:]
    else:
        eps = np.column_stack([
            substream(config.seed, SIMULATE, i).normal(0.0, config.sigma, n)
            for i in range(p)
        ])
        values = np.empty((n, p))
        r_prev = np.zeros(p)
        for t in range(n):
            r_prev = config.alpha + config.beta * r_prev + eps[t]
            values[t] = r_prev

    width = len(str(n))
    time_ids = [f"{t + 1:0{width}d}" for t in range(n)]
    return validate_panel(values, time_ids=time_ids)
