"""Accuracy and demographic-parity gap, per sensitive attribute and decision
point, with k-fold aggregation into mean +/- population std summaries.

The parity gap compares the rate of a configured positive prediction between
two demographic groups; when a group is empty in scope the result is an
explicit undefined marker, never a silent zero.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .eventlog import ABSENT


@dataclass(frozen=True)
class FairnessSpec:
    """Two demographic groups plus the prediction counted as positive.

    ``grouping`` is ("categorical", (value_a, value_b)) or ("threshold", t)
    for numeric attributes (group 1: value <= t, group 2: value > t).
    ``decision_scope`` optionally restricts which prefixes the decision
    applies to; None means all prefixes.
    """

    name: str
    attribute: str
    grouping: tuple
    positive_outcome: frozenset
    decision_scope: object = None  # None | {"last_activity_in": [...]} | callable

    def __post_init__(self):
        object.__setattr__(self, "positive_outcome", frozenset(self.positive_outcome))
        if not self.positive_outcome:
            raise ValueError("positive_outcome must be non-empty")
        kind = self.grouping[0]
        if kind == "categorical":
            if len(self.grouping[1]) != 2:
                raise ValueError("categorical grouping needs exactly two values")
        elif kind != "threshold":
            raise ValueError(f"unknown grouping kind {kind!r}")

    def group_of(self, prefix):
        """0 or 1 for the prefix's demographic group, None if out of domain."""
        value = prefix.case_attributes.get(self.attribute, ABSENT)
        if value is ABSENT:
            return None
        kind, arg = self.grouping
        if kind == "categorical":
            a, b = arg
            if value == a:
                return 0
            if value == b:
                return 1
            return None
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            return None
        return 0 if value <= arg else 1

    def in_scope(self, prefix):
        scope = self.decision_scope
        if scope is None:
            return True
        if callable(scope):
            return bool(scope(prefix))
        acts = scope.get("last_activity_in", ())
        return prefix.events[-1].activity in acts

    def group_names(self):
        kind, arg = self.grouping
        if kind == "categorical":
            return (str(arg[0]), str(arg[1]))
        return (f"{self.attribute}<={arg}", f"{self.attribute}>{arg}")

    def to_dict(self):
        scope = self.decision_scope
        if callable(scope):
            raise ValueError("callable decision scopes are not serializable")
        kind, arg = self.grouping
        return {"name": self.name, "attribute": self.attribute,
                "grouping": [kind, list(arg) if kind == "categorical" else arg],
                "positive_outcome": sorted(self.positive_outcome),
                "decision_scope": scope}

    @classmethod
    def from_dict(cls, doc):
        kind, arg = doc["grouping"]
        grouping = (kind, tuple(arg) if kind == "categorical" else arg)
        return cls(name=doc["name"], attribute=doc["attribute"], grouping=grouping,
                   positive_outcome=frozenset(doc["positive_outcome"]),
                   decision_scope=doc.get("decision_scope"))


@dataclass(frozen=True)
class DeltaDpResult:
    spec_name: str
    delta: float | None  # None: undefined (an empty group in scope)
    p1: float | None
    p2: float | None
    n1: int
    n2: int

    @property
    def undefined(self):
        return self.delta is None


@dataclass(frozen=True)
class FoldReport:
    fold_id: int
    accuracy: float
    results: tuple  # DeltaDpResult per spec
    avg_delta: float | None  # mean over defined deltas

    def delta_for(self, spec_name):
        for r in self.results:
            if r.spec_name == spec_name:
                return r
        raise KeyError(spec_name)


@dataclass(frozen=True)
class AggregateReport:
    n_folds: int
    accuracy_mean: float
    accuracy_std: float
    per_spec: dict  # name -> (mean, std, n_defined)
    avg_delta_mean: float | None
    avg_delta_std: float | None


def accuracy(predictions, targets) -> float:
    """Fraction of predictions matching the expected next activity."""
    predictions = list(predictions)
    targets = list(targets)
    if len(predictions) != len(targets):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs "
                         f"{len(targets)} targets")
    if not predictions:
        raise ValueError("accuracy of zero predictions is undefined")
    hits = sum(1 for p, t in zip(predictions, targets) if p == t)
    return hits / len(predictions)


def delta_dp(predictions, prefixes, spec: FairnessSpec) -> DeltaDpResult:
    """|P1 - P2| where Pi is the positive-prediction rate of group i,
    estimated from the model's predictions over the in-scope prefixes."""
    predictions = list(predictions)
    prefixes = list(prefixes)
    if len(predictions) != len(prefixes):
        raise ValueError("predictions are not aligned with prefixes")
    pos = [0, 0]
    n = [0, 0]
    for pred, prefix in zip(predictions, prefixes):
        if not spec.in_scope(prefix):
            continue
        g = spec.group_of(prefix)
        if g is None:
            continue
        n[g] += 1
        if pred in spec.positive_outcome:
            pos[g] += 1
    if n[0] == 0 or n[1] == 0:
        return DeltaDpResult(spec_name=spec.name, delta=None,
                             p1=pos[0] / n[0] if n[0] else None,
                             p2=pos[1] / n[1] if n[1] else None,
                             n1=n[0], n2=n[1])
    p1, p2 = pos[0] / n[0], pos[1] / n[1]
    return DeltaDpResult(spec_name=spec.name, delta=abs(p1 - p2),
                         p1=p1, p2=p2, n1=n[0], n2=n[1])


def evaluate(predict_fn, prefixes, schema, specs, fold_id: int = 0) -> FoldReport:
    """Accuracy over all prefixes plus one parity result per spec.

    ``predict_fn`` maps an encoded (n, width) matrix to n activity labels,
    so neural, tree, and constant predictors evaluate identically.
    """
    from .encoding import encode_batch

    prefixes = list(prefixes)
    if not prefixes:
        raise ValueError("cannot evaluate zero prefixes")
    X = encode_batch(prefixes, schema)
    predictions = list(predict_fn(X))
    targets = [p.target_activity for p in prefixes]
    acc = accuracy(predictions, targets)
    results = tuple(delta_dp(predictions, prefixes, spec) for spec in specs)
    defined = [r.delta for r in results if r.delta is not None]
    avg = float(np.mean(defined)) if defined else None
    return FoldReport(fold_id=fold_id, accuracy=acc, results=results, avg_delta=avg)


def aggregate_folds(fragments) -> AggregateReport:
    """Mean and population standard deviation across fold reports."""
    fragments = list(fragments)
    if len(fragments) < 2:
        raise ValueError("aggregation needs at least two folds")
    names = [tuple(r.spec_name for r in f.results) for f in fragments]
    if any(n != names[0] for n in names):
        raise ValueError("fold reports carry different spec sets")
    accs = np.array([f.accuracy for f in fragments])
    per_spec = {}
    for spec_name in names[0]:
        values = [f.delta_for(spec_name).delta for f in fragments]
        defined = np.array([v for v in values if v is not None])
        if len(defined):
            per_spec[spec_name] = (float(defined.mean()),
                                   float(defined.std()), len(defined))
        else:
            per_spec[spec_name] = (None, None, 0)
    avgs = np.array([f.avg_delta for f in fragments if f.avg_delta is not None])
    return AggregateReport(
        n_folds=len(fragments),
        accuracy_mean=float(accs.mean()), accuracy_std=float(accs.std()),
        per_spec=per_spec,
        avg_delta_mean=float(avgs.mean()) if len(avgs) else None,
        avg_delta_std=float(avgs.std()) if len(avgs) else None,
    )


def report_to_dict(report: AggregateReport) -> dict:
    return {
        "n_folds": report.n_folds,
        "accuracy": {"mean": report.accuracy_mean, "std": report.accuracy_std},
        "delta_dp": {
            name: {"mean": m, "std": s, "n_defined": k}
            for name, (m, s, k) in report.per_spec.items()
        },
        "avg_delta_dp": {"mean": report.avg_delta_mean,
                         "std": report.avg_delta_std},
    }


def report_to_json(report: AggregateReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True)


def reports_to_csv(rows) -> str:
    """Results-table CSV: one row per (log, model) with mu +/- sigma cells.

    ``rows`` is a sequence of (log_name, model_name, AggregateReport).
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["log", "model", "accuracy_mean", "accuracy_std",
                     "delta_dp_mean", "delta_dp_std"])
    for log_name, model_name, report in rows:
        writer.writerow([
            log_name, model_name,
            f"{report.accuracy_mean:.3f}", f"{report.accuracy_std:.3f}",
            "" if report.avg_delta_mean is None else f"{report.avg_delta_mean:.3f}",
            "" if report.avg_delta_std is None else f"{report.avg_delta_std:.3f}",
        ])
    return buf.getvalue()
