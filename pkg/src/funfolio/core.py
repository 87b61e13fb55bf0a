"""Domain data model: return panels, constraint sets, objectives, policies.

Everything here is an immutable value type. Panels are validated once at
construction and all downstream code works on read-only views, so objects
can be shared freely between threads and processes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DuplicateAssetError,
    InfeasibleOmegaError,
    NonFiniteError,
    TooShortError,
    ValidationError,
)

__all__ = [
    "ReturnPanel",
    "validate_panel",
    "read_panel_csv",
    "write_panel_csv",
    "ConstraintSet",
    "ObjectiveSpec",
    "parse_objective",
    "BaseRule",
    "FunctionalPolicy",
    "BootstrapEnsemble",
    "policy_to_dict",
    "policy_from_dict",
]


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ReturnPanel:
    """An n x p matrix of per-period log-returns with time and asset labels.

    Rows are time 1..n (strictly increasing labels), columns are assets.
    Use :func:`validate_panel` or :func:`read_panel_csv` to construct one;
    the constructor itself performs no checks.
    """

    values: np.ndarray
    asset_ids: tuple
    time_ids: tuple

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def window(self, start: int, stop: int) -> "ReturnPanel":
        """Sub-panel of rows [start, stop) without revalidation."""
        return ReturnPanel(
            values=_freeze(self.values[start:stop]),
            asset_ids=self.asset_ids,
            time_ids=self.time_ids[start:stop],
        )

    def last_row(self) -> np.ndarray:
        return self.values[-1]


def validate_panel(values, asset_ids: Optional[Sequence] = None,
                   time_ids: Optional[Sequence] = None) -> ReturnPanel:
    """Validate a raw matrix plus labels into a :class:`ReturnPanel`.

    Raises
    ------
    NonFiniteError
        if any entry is NaN or infinite.
    TooShortError
        if fewer than 2 rows.
    DuplicateAssetError
        if asset labels repeat.
    ValidationError
        if the matrix is not 2-D rectangular, has no columns, or time
        labels are not strictly increasing.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"panel must be a 2-D matrix, got ndim={arr.ndim}")
    n, p = arr.shape
    if n < 2:
        raise TooShortError(f"panel needs at least 2 rows, got {n}")
    if p < 1:
        raise ValidationError("panel needs at least 1 asset column")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise NonFiniteError(f"non-finite entry at row {bad[0]}, col {bad[1]}")

    if asset_ids is None:
        width = len(str(p))
        asset_ids = tuple(f"A{i + 1:0{width}d}" for i in range(p))
    else:
        asset_ids = tuple(str(a) for a in asset_ids)
    if len(asset_ids) != p:
        raise ValidationError(f"{len(asset_ids)} asset labels for {p} columns")
    if len(set(asset_ids)) != p:
        raise DuplicateAssetError("asset labels must be unique")

    if time_ids is None:
        width = len(str(n))
        time_ids = tuple(f"{t + 1:0{width}d}" for t in range(n))
    else:
        time_ids = tuple(time_ids)
    if len(time_ids) != n:
        raise ValidationError(f"{len(time_ids)} time labels for {n} rows")
    for i in range(n - 1):
        if not time_ids[i] < time_ids[i + 1]:
            raise ValidationError(
                f"time labels must be strictly increasing, got "
                f"{time_ids[i]!r} before {time_ids[i + 1]!r}"
            )

    return ReturnPanel(values=_freeze(arr), asset_ids=asset_ids, time_ids=time_ids)


def read_panel_csv(path) -> ReturnPanel:
    """Read a panel from CSV with header ``date,<asset1>,...,<assetp>``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip().lower() != "date" or len(header) < 2:
            raise ValidationError("panel CSV must start with header 'date,<asset>,...'")
        asset_ids = [h.strip() for h in header[1:]]
        time_ids, rows = [], []
        for line in reader:
            if not line:
                continue
            if len(line) != len(header):
                raise ValidationError(f"ragged CSV row for date {line[0]!r}")
            time_ids.append(line[0])
            try:
                rows.append([float(x) for x in line[1:]])
            except ValueError as exc:
                raise NonFiniteError(f"unparseable value in row {line[0]!r}: {exc}") from None
    if not rows:
        raise TooShortError("panel CSV has no data rows")
    return validate_panel(np.array(rows), asset_ids, time_ids)


def write_panel_csv(panel: ReturnPanel, path) -> None:
    """Write a panel as ``date,<asset1>,...``; floats use shortest round-trip form."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", *panel.asset_ids])
        for t, row in zip(panel.time_ids, panel.values):
            writer.writerow([t, *(repr(float(x)) for x in row)])


@dataclass(frozen=True)
class ConstraintSet:
    """The feasible set {w : sum(w) = 1, w_i >= lower_bound}.

    ``lower_bound = -inf`` means only the budget constraint applies.
    Feasibility requires ``p * lower_bound <= 1``, checked at construction.
    """

    lower_bound: float
    p: int

    def __post_init__(self):
        if self.p < 1:
            raise InfeasibleOmegaError(f"p must be >= 1, got {self.p}")
        lb = float(self.lower_bound)
        object.__setattr__(self, "lower_bound", lb)
        if np.isnan(lb):
            raise InfeasibleOmegaError("lower_bound must not be NaN")
        if self.p * lb > 1.0:
            raise InfeasibleOmegaError(
                f"infeasible constraint set: {self.p} * {lb} > 1"
            )


MV = "mv"
SHARPE = "sharpe"
MSD = "msd"


@dataclass(frozen=True)
class ObjectiveSpec:
    """One of the three objective families over (U, V).

    mv:     U - lam * (V - U^2)
    sharpe: (U - r0) / sqrt(V - U^2)
    msd:    U - lam * sqrt(V - U^2)
    """

    kind: str
    lam: Optional[float] = None
    r0: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (MV, SHARPE, MSD):
            raise ValidationError(f"unknown objective kind {self.kind!r}")
        if self.kind in (MV, MSD):
            if self.lam is None or not self.lam > 0:
                raise ValidationError(f"{self.kind} requires lambda > 0, got {self.lam}")
        if self.kind == SHARPE and self.r0 is None:
            object.__setattr__(self, "r0", 0.0)

    def spec_string(self) -> str:
        """The CLI form, e.g. ``mv:lambda=1.2816``."""
        if self.kind == SHARPE:
            return f"sharpe:r0={self.r0!r}"
        return f"{self.kind}:lambda={self.lam!r}"


def parse_objective(text: str) -> ObjectiveSpec:
    """Parse a CLI objective string: ``mv:lambda=1.2816``, ``sharpe:r0=0``, ``msd:lambda=0.12816``."""
    head, _, tail = text.strip().partition(":")
    kind = head.strip().lower()
    params = {}
    if tail:
        for piece in tail.split(","):
            key, _, val = piece.partition("=")
            if not val:
                raise ValidationError(f"bad objective parameter {piece!r} in {text!r}")
            params[key.strip().lower()] = float(val)
    if kind == SHARPE:
        return ObjectiveSpec(kind=SHARPE, r0=params.get("r0", 0.0))
    if kind in (MV, MSD):
        if "lambda" not in params:
            raise ValidationError(f"{kind} objective needs lambda=, got {text!r}")
        return ObjectiveSpec(kind=kind, lam=params["lambda"])
    raise ValidationError(f"unknown objective {text!r} (use mv:, sharpe: or msd:)")


PLUG_IN = "plug_in"
EQUAL_WEIGHT = "equal_weight"
STORED_CONSTANT = "stored_constant"


@dataclass(frozen=True)
class BaseRule:
    """Initial weight rule w0 applied to a return history.

    ``plug_in`` re-solves the constant-weight problem on the history's
    sample moments and therefore carries the objective it optimizes;
    ``stored_constant`` replays a fixed vector; ``equal_weight`` is 1/p.
    """

    kind: str
    w: Optional[np.ndarray] = None
    objective: Optional[ObjectiveSpec] = None

    def __post_init__(self):
        if self.kind not in (PLUG_IN, EQUAL_WEIGHT, STORED_CONSTANT):
            raise ValidationError(f"unknown base rule {self.kind!r}")
        if self.kind == STORED_CONSTANT:
            if self.w is None:
                raise ValidationError("stored_constant base rule needs a weight vector")
            object.__setattr__(self, "w", _freeze(np.asarray(self.w, dtype=np.float64)))
        if self.kind == PLUG_IN and self.objective is None:
            raise ValidationError("plug_in base rule needs an objective")

    @staticmethod
    def plug_in(objective: ObjectiveSpec) -> "BaseRule":
        return BaseRule(kind=PLUG_IN, objective=objective)

    @staticmethod
    def equal_weight() -> "BaseRule":
        return BaseRule(kind=EQUAL_WEIGHT)

    @staticmethod
    def stored_constant(w) -> "BaseRule":
        return BaseRule(kind=STORED_CONSTANT, w=np.asarray(w, dtype=np.float64))


LINEAR_P = "linear_P"
PROJECTED = "projected"


@dataclass(frozen=True)
class FunctionalPolicy:
    """A replayable weight function.

    The policy is fully determined by the base rule, the fitted moment
    model, the constraint set, the update variant and the three scalar
    sequences (a, b, t) recorded by the ascent. Replaying it on any
    history reproduces the learned weight function.
    """

    base_rule: BaseRule
    model: object
    omega: ConstraintSet
    variant: str
    a: tuple
    b: tuple
    t: tuple

    def __post_init__(self):
        if self.variant not in (LINEAR_P, PROJECTED):
            raise ValidationError(f"unknown variant {self.variant!r}")
        a = tuple(float(x) for x in self.a)
        b = tuple(float(x) for x in self.b)
        t = tuple(float(x) for x in self.t)
        if not (len(a) == len(b) == len(t)):
            raise ValidationError(
                f"a, b, t must have equal length, got {len(a)}, {len(b)}, {len(t)}"
            )
        if any(x < 0 for x in t):
            raise ValidationError("step sizes must be >= 0")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "t", t)

    @property
    def steps(self) -> int:
        return len(self.a)


@dataclass
class BootstrapEnsemble:
    """B resampled histories with cached moments and current weights.

    ``mu[b]`` and ``V[b]`` are the conditional moment functions evaluated
    on history b; ``weights[b]`` is the current weight function value and
    is filled in by the optimizer. ``seed_record`` documents how each
    replicate's stream was derived.
    """

    histories: list
    mu: Optional[np.ndarray] = None        # (B, p)
    V: Optional[np.ndarray] = None         # (B, p, p)
    weights: Optional[np.ndarray] = None   # (B, p)
    seed_record: dict = field(default_factory=dict)

    @property
    def B(self) -> int:
        return len(self.histories)

    def __post_init__(self):
        if not self.histories:
            raise ValidationError("ensemble needs at least one history")
        n0, p0 = self.histories[0].values.shape
        for h in self.histories:
            if h.values.shape != (n0, p0):
                raise ValidationError("all histories must share n and p")
        if self.V is not None:
            asym = np.max(np.abs(self.V - np.swapaxes(self.V, 1, 2)))
            if asym > 1e-12:
                raise ValidationError(f"ensemble V asymmetric by {asym:.2e}")
            self.V = (self.V + np.swapaxes(self.V, 1, 2)) / 2.0


# --- JSON serialization -------------------------------------------------

def _base_rule_to_dict(rule: BaseRule) -> object:
    if rule.kind == EQUAL_WEIGHT:
        return EQUAL_WEIGHT
    if rule.kind == PLUG_IN:
        return {"kind": PLUG_IN, "objective": rule.objective.spec_string()}
    return {"kind": STORED_CONSTANT, "w": [float(x) for x in rule.w]}


def _base_rule_from_dict(obj) -> BaseRule:
    if isinstance(obj, str):
        if obj == EQUAL_WEIGHT:
            return BaseRule.equal_weight()
        raise ValidationError(f"unknown base rule {obj!r}")
    kind = obj.get("kind")
    if kind == PLUG_IN:
        return BaseRule.plug_in(parse_objective(obj["objective"]))
    if kind == STORED_CONSTANT:
        return BaseRule.stored_constant(np.array(obj["w"], dtype=np.float64))
    if kind == EQUAL_WEIGHT:
        return BaseRule.equal_weight()
    raise ValidationError(f"unknown base rule {obj!r}")


def policy_to_dict(policy: FunctionalPolicy) -> dict:
    """JSON-ready dict with fields base_rule, variant, lower_bound, a, b, t, model."""
    return {
        "base_rule": _base_rule_to_dict(policy.base_rule),
        "variant": policy.variant,
        "lower_bound": policy.omega.lower_bound,
        "a": list(policy.a),
        "b": list(policy.b),
        "t": list(policy.t),
        "model": policy.model.to_dict(),
    }


def policy_from_dict(obj: dict) -> FunctionalPolicy:
    from .tsmodel import model_from_dict

    model = model_from_dict(obj["model"])
    p = model.p
    return FunctionalPolicy(
        base_rule=_base_rule_from_dict(obj["base_rule"]),
        model=model,
        omega=ConstraintSet(lower_bound=float(obj["lower_bound"]), p=p),
        variant=obj["variant"],
        a=obj["a"],
        b=obj["b"],
        t=obj["t"],
    )


def policy_to_json(policy: FunctionalPolicy, path) -> None:
    with open(path, "w") as fh:
        json.dump(policy_to_dict(policy), fh, indent=2)


def policy_from_json(path) -> FunctionalPolicy:
    with open(path) as fh:
        return policy_from_dict(json.load(fh))
