"""Per-operator degree-2 polynomial cost models and sub-plan selection."""

from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12
RIDGE_LAMBDA = 1e-8


class CostModelError(ValueError):
    pass


class RankDeficiencyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CalibrationSample:
    operator_name: str
    features: tuple[float, ...]
    measured_time: float

    def __post_init__(self):
        if not self.measured_time > 0:
            raise CostModelError(f"{self.operator_name}: measured time must be positive")


def weight_count(n: int) -> int:
    return 1 + n + n + n * (n - 1) // 2


def expand(features: Sequence[float]) -> np.ndarray:
    """Intercept, linear terms, squares, then pairwise products i < j."""
    f = np.asarray(features, dtype=float)
    pairs = [f[i] * f[j] for i, j in combinations(range(len(f)), 2)]
    return np.concatenate(([1.0], f, f * f, pairs))


@dataclass(frozen=True)
class OperatorCostModel:
    operator_name: str
    n: int
    weights: tuple[float, ...]
    regularized: bool = False

    def __post_init__(self):
        if len(self.weights) != weight_count(self.n):
            raise CostModelError(
                f"{self.operator_name}: expected {weight_count(self.n)} weights, got {len(self.weights)}"
            )

    @property
    def intercept(self) -> float:
        return self.weights[0]

    @property
    def linear(self) -> tuple[float, ...]:
        return self.weights[1 : 1 + self.n]

    @property
    def squares(self) -> tuple[float, ...]:
        return self.weights[1 + self.n : 1 + 2 * self.n]

    @property
    def pairwise(self) -> dict[tuple[int, int], float]:
        keys = combinations(range(self.n), 2)
        return dict(zip(keys, self.weights[1 + 2 * self.n :]))

    def to_dict(self) -> dict:
        return {"operator": self.operator_name, "n": self.n, "weights": list(self.weights)}

    @classmethod
    def from_dict(cls, doc: Mapping) -> OperatorCostModel:
        return cls(str(doc["operator"]), int(doc["n"]), tuple(float(w) for w in doc["weights"]))


def fit(samples: Iterable[CalibrationSample]) -> OperatorCostModel:
    """Least-squares fit of the polynomial cost through the normal equations.

    Falls back to a tiny ridge penalty (and flags the model) when the Gram
    matrix is too ill-conditioned to invert reliably.
    """
    samples = list(dict.fromkeys(samples))
    if not samples:
        raise CostModelError("no calibration samples")
    names = {s.operator_name for s in samples}
    if len(names) != 1:
        raise CostModelError(f"samples mix operators: {sorted(names)}")
    name = samples[0].operator_name
    widths = {len(s.features) for s in samples}
    if len(widths) != 1:
        raise CostModelError(f"{name}: feature vectors of differing length {sorted(widths)}")
    n = widths.pop()
    k = weight_count(n)
    if len(samples) < k:
        raise CostModelError(f"{name}: {len(samples)} distinct samples, need at least {k}")

    X = np.vstack([expand(s.features) for s in samples])
    y = np.array([s.measured_time for s in samples], dtype=float)
    gram = X.T @ X
    rhs = X.T @ y
    regularized = False
    if not np.isfinite(cond := np.linalg.cond(gram)) or cond > CONDITION_LIMIT:
        regularized = True
        warnings.warn(
            f"{name}: design is rank deficient or ill-conditioned (cond={cond:.3g}); "
            f"using ridge lambda={RIDGE_LAMBDA}",
            RankDeficiencyWarning,
            stacklevel=2,
        )
        gram = gram + RIDGE_LAMBDA * np.eye(k)
    w = np.linalg.solve(gram, rhs)
    return OperatorCostModel(name, n, tuple(float(v) for v in w), regularized)


def predict(model: OperatorCostModel, features: Sequence[float]) -> float:
    if len(features) != model.n:
        raise CostModelError(
            f"{model.operator_name}: expected {model.n} features, got {len(features)}"
        )
    value = float(np.dot(model.weights, expand(features)))
    if value < 0:
        log.warning("%s: negative predicted cost %.6g for %s", model.operator_name, value, list(features))
    return value


SubPlan = Sequence[tuple[str, Sequence[float]]]


def subplan_cost(models: Mapping[str, OperatorCostModel], subplan: SubPlan) -> float:
    """Sum of per-operator predictions (operators of a sub-plan run one after another)."""
    total = 0.0
    for name, features in subplan:
        if name not in models:
            raise CostModelError(f"no cost model for operator {name!r}")
        total += predict(models[name], features)
    return total


def select_plan(models: Mapping[str, OperatorCostModel], candidates: Sequence[SubPlan]) -> int:
    if not candidates:
        raise CostModelError("no candidate sub-plans")
    costs = [subplan_cost(models, c) for c in candidates]
    return min(range(len(costs)), key=lambda i: (costs[i], i))


def holdout_mse(model: OperatorCostModel, samples: Iterable[CalibrationSample]) -> float:
    errs = [(predict(model, s.features) - s.measured_time) ** 2 for s in samples]
    if not errs:
        raise CostModelError("empty holdout set")
    return float(np.mean(errs))


# --------------------------------------------------------------------------
# I/O


def read_calibration_csv(text: str) -> dict[str, list[CalibrationSample]]:
    """Parse ``operator,f1,...,fn,time_s`` rows, grouped by operator."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CostModelError("empty calibration file") from None
    header = [h.strip() for h in header]
    if len(header) < 2 or header[0] != "operator" or header[-1] != "time_s":
        raise CostModelError("header must be 'operator,f1,...,fn,time_s'")
    groups: dict[str, list[CalibrationSample]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise CostModelError(f"line {lineno}: expected {len(header)} columns, got {len(row)}")
        try:
            feats = tuple(float(c) for c in row[1:-1])
            t = float(row[-1])
        except ValueError as exc:
            raise CostModelError(f"line {lineno}: {exc}") from None
        if t <= 0:
            raise CostModelError(f"line {lineno}: measured time must be positive")
        name = row[0].strip()
        groups.setdefault(name, []).append(CalibrationSample(name, feats, t))
    return groups


def load_model(text: str) -> OperatorCostModel:
    return OperatorCostModel.from_dict(json.loads(text))


def dump_model(model: OperatorCostModel) -> str:
    return json.dumps(model.to_dict(), indent=2)
