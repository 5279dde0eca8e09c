"""Surrogate decision tree: CART-style growth on teacher-labelled vectors.

The tree imitates the neural predictor (hard labels from the teacher's
argmax) and is the interface a reviewer edits. Splits carry schema indices
plus readable text so they render as attribute conditions. Numeric splits
route x <= threshold to the left; one-hot membership splits test whether the
group's selected value equals the split's category (non-members go left).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .encoding import FeatureSchema, describe_field
from .mlp import MlpModel, predict_index


@dataclass(frozen=True)
class DistillConfig:
    max_depth: int = 8
    min_samples_leaf: int = 20
    criterion: str = "gini"
    excluded_fields: frozenset = frozenset()
    min_gain: float = 0.0  # minimum impurity decrease to accept a split

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.criterion != "gini":
            raise ValueError("only the gini criterion is supported")
        object.__setattr__(self, "excluded_fields", frozenset(self.excluded_fields))


@dataclass(frozen=True)
class LeafNode:
    distribution: tuple  # class counts over the prediction alphabet
    prediction: int  # argmax of distribution, ties to the lowest index
    n_samples: int


@dataclass(frozen=True)
class InnerNode:
    feature: int
    threshold: float  # 0.5 for membership splits
    kind: str  # "numeric" | "membership"
    text: str
    sensitive: bool
    n_samples: int
    left: object
    right: object
    category: str | None = None


@dataclass(frozen=True)
class DecisionTree:
    root: object
    n_classes: int
    config: DistillConfig
    schema: FeatureSchema | None = None

    def depth(self):
        def d(node):
            if isinstance(node, LeafNode):
                return 0
            return 1 + max(d(node.left), d(node.right))
        return d(self.root)

    def n_nodes(self):
        return sum(1 for _ in iter_nodes(self))


def iter_nodes(tree: DecisionTree):
    """Preorder traversal yielding (path, node); path is a tuple of 'L'/'R'."""
    stack = [((), tree.root)]
    while stack:
        path, node = stack.pop()
        yield path, node
        if isinstance(node, InnerNode):
            stack.append((path + ("R",), node.right))
            stack.append((path + ("L",), node.left))


def grow_tree(X, y, config: DistillConfig = DistillConfig(),
              schema: FeatureSchema | None = None,
              n_classes: int | None = None) -> DecisionTree:
    """Fit a tree directly on (vectors, class indices); used by distillation
    and available for direct white-box training."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("cannot grow a tree from zero samples")
    if y.shape[0] != X.shape[0]:
        raise ValueError("label count does not match sample count")
    if n_classes is None:
        n_classes = int(y.max()) + 1 if len(y) else 1
    membership = _membership_columns(X.shape[1], schema)
    excluded = set(config.excluded_fields)
    root = _grow(X, y, np.arange(X.shape[0]), 0, config, n_classes,
                 membership, excluded, schema)
    return DecisionTree(root=root, n_classes=n_classes, config=config,
                        schema=schema)


def distill(teacher: MlpModel, vectors,
            config: DistillConfig = DistillConfig()) -> DecisionTree:
    """Label every vector with the teacher's prediction, then grow the tree."""
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("cannot distill from zero vectors")
    labels = predict_index(teacher, X)
    return grow_tree(X, labels, config, schema=teacher.schema,
                     n_classes=teacher.n_classes)


def fidelity(tree: DecisionTree, teacher: MlpModel, vectors) -> float:
    """Fraction of vectors on which student and teacher predict alike."""
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("fidelity over zero vectors is undefined")
    return float(np.mean(predict_tree_index(tree, X) == predict_index(teacher, X)))


def predict_tree_index(tree: DecisionTree, x) -> np.ndarray:
    """Route vector(s) down the tree; returns class index (or index array)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    out = np.empty(X.shape[0], dtype=np.int64)
    _route(tree.root, X, np.arange(X.shape[0]), out)
    return out[0] if single else out


def predict_tree(tree: DecisionTree, x):
    """Predicted activity label(s); requires a schema-carrying tree."""
    if tree.schema is None:
        raise ValueError("tree carries no schema; use predict_tree_index")
    idx = predict_tree_index(tree, x)
    alphabet = tree.schema.prediction_alphabet
    if np.ndim(idx) == 0:
        return alphabet[int(idx)]
    return [alphabet[int(i)] for i in idx]


def _route(node, X, idx, out):
    if isinstance(node, LeafNode):
        out[idx] = node.prediction
        return
    go_left = X[idx, node.feature] <= node.threshold
    _route(node.left, X, idx[go_left], out)
    _route(node.right, X, idx[~go_left], out)


def route_indices(tree: DecisionTree, X, path) -> np.ndarray:
    """Sample indices (into X) routed to the node addressed by path."""
    X = np.asarray(X, dtype=np.float64)
    idx = np.arange(X.shape[0])
    node = tree.root
    for step in path:
        if isinstance(node, LeafNode):
            raise ValueError(f"path {path!r} walks past a leaf")
        go_left = X[idx, node.feature] <= node.threshold
        idx = idx[go_left] if step == "L" else idx[~go_left]
        node = node.left if step == "L" else node.right
    return idx


# -- growth ---------------------------------------------------------------

def _membership_columns(width, schema):
    if schema is None:
        return np.zeros(width, dtype=bool)
    return np.array([f.encoding == "onehot" for f in schema.fields])


def _gini_from_counts(counts, n):
    if n == 0:
        return 0.0
    p = counts / n
    return 1.0 - float((p * p).sum())


def _leaf(y_idx_counts, n):
    counts = y_idx_counts
    return LeafNode(distribution=tuple(int(c) for c in counts),
                    prediction=int(np.argmax(counts)), n_samples=int(n))


def _grow(X, y, idx, depth, config, n_classes, membership, excluded, schema):
    n = len(idx)
    counts = np.bincount(y[idx], minlength=n_classes)
    if (depth >= config.max_depth or n < 2 * config.min_samples_leaf
            or np.count_nonzero(counts) <= 1):
        return _leaf(counts, n)

    best = _best_split(X, y, idx, counts, n, config, n_classes, membership,
                       excluded)
    if best is None:
        return _leaf(counts, n)
    feature, threshold = best

    go_left = X[idx, feature] <= threshold
    left_idx, right_idx = idx[go_left], idx[~go_left]
    left = _grow(X, y, left_idx, depth + 1, config, n_classes, membership,
                 excluded, schema)
    right = _grow(X, y, right_idx, depth + 1, config, n_classes, membership,
                  excluded, schema)
    kind = "membership" if membership[feature] else "numeric"
    return InnerNode(feature=int(feature), threshold=float(threshold), kind=kind,
                     text=_split_text(schema, feature, threshold, kind),
                     sensitive=_is_sensitive(schema, feature),
                     n_samples=int(n), left=left, right=right,
                     category=_split_category(schema, feature, kind))


def _best_split(X, y, idx, parent_counts, n, config, n_classes, membership,
                excluded):
    parent_gini = _gini_from_counts(parent_counts, n)
    msl = config.min_samples_leaf
    best_gain = max(config.min_gain, 0.0)
    best = None
    y_sub = y[idx]
    onehot_rows = np.zeros((n, n_classes))
    onehot_rows[np.arange(n), y_sub] = 1.0

    for f in range(X.shape[1]):
        if f in excluded:
            continue
        col = X[idx, f]
        if membership[f]:
            gain, threshold = _membership_gain(col, y_sub, parent_counts, n,
                                               parent_gini, msl, n_classes)
        else:
            gain, threshold = _numeric_gain(col, onehot_rows, n, parent_gini,
                                            msl)
        if gain is not None and gain > best_gain:
            best_gain = gain
            best = (f, threshold)
    return best


def _membership_gain(col, y_sub, parent_counts, n, parent_gini, msl, n_classes):
    # members (value == category, i.e. 1.0) route right
    right_mask = col > 0.5
    n_right = int(right_mask.sum())
    n_left = n - n_right
    if n_left < msl or n_right < msl:
        return None, None
    right_counts = np.bincount(y_sub[right_mask], minlength=n_classes)
    left_counts = parent_counts - right_counts
    child = (n_left * _gini_from_counts(left_counts, n_left)
             + n_right * _gini_from_counts(right_counts, n_right)) / n
    return parent_gini - child, 0.5


def _numeric_gain(col, onehot_rows, n, parent_gini, msl):
    order = np.argsort(col, kind="stable")
    sorted_vals = col[order]
    changes = np.nonzero(sorted_vals[:-1] != sorted_vals[1:])[0]
    if len(changes) == 0:
        return None, None
    cum = np.cumsum(onehot_rows[order], axis=0)
    n_left = changes + 1
    valid = (n_left >= msl) & (n - n_left >= msl)
    if not valid.any():
        return None, None
    changes = changes[valid]
    n_left = n_left[valid].astype(np.float64)
    left_counts = cum[changes]
    right_counts = cum[-1] - left_counts
    n_right = n - n_left
    gini_left = 1.0 - ((left_counts / n_left[:, None]) ** 2).sum(axis=1)
    gini_right = 1.0 - ((right_counts / n_right[:, None]) ** 2).sum(axis=1)
    child = (n_left * gini_left + n_right * gini_right) / n
    gains = parent_gini - child
    pos = int(np.argmax(gains))  # first max = lowest threshold
    threshold = (sorted_vals[changes[pos]] + sorted_vals[changes[pos] + 1]) / 2.0
    return float(gains[pos]), float(threshold)


def _split_text(schema, feature, threshold, kind):
    if schema is None:
        base = f"x[{feature}]"
        return base if kind == "membership" else f"{base} <= {threshold:.6g}"
    if kind == "membership":
        return describe_field(schema, feature)
    f = schema.fields[feature]
    # display thresholds in raw attribute units, not the scaled encoding
    raw = f.lo + threshold * (f.hi - f.lo) if f.hi > f.lo else threshold
    return f"{describe_field(schema, feature)} <= {raw:.6g}"


def _split_category(schema, feature, kind):
    if schema is None or kind != "membership":
        return None
    return schema.fields[feature].category


def _is_sensitive(schema, feature):
    return bool(schema.fields[feature].sensitive) if schema is not None else False


# -- serialization ----------------------------------------------------------

def _node_to_dict(node, alphabet):
    if isinstance(node, LeafNode):
        label = alphabet[node.prediction] if alphabet else str(node.prediction)
        return {
            "kind": "leaf",
            "distribution": list(node.distribution),
            "prediction": node.prediction,
            "prediction_label": label,
            "n_samples": node.n_samples,
        }
    return {
        "kind": "split",
        "feature": node.feature,
        "split_kind": node.kind,
        "threshold": node.threshold,
        "category": node.category,
        "text": node.text,
        "sensitive": node.sensitive,
        "n_samples": node.n_samples,
        "left": _node_to_dict(node.left, alphabet),
        "right": _node_to_dict(node.right, alphabet),
    }


def tree_to_dict(tree: DecisionTree) -> dict:
    alphabet = tree.schema.prediction_alphabet if tree.schema else None
    return {
        "format": "fairpm-tree/1",
        "n_classes": tree.n_classes,
        "config": {
            "max_depth": tree.config.max_depth,
            "min_samples_leaf": tree.config.min_samples_leaf,
            "criterion": tree.config.criterion,
            "excluded_fields": sorted(tree.config.excluded_fields),
            "min_gain": tree.config.min_gain,
        },
        "root": _node_to_dict(tree.root, alphabet),
    }


def tree_to_json(tree: DecisionTree) -> str:
    return json.dumps(tree_to_dict(tree), indent=2, sort_keys=True)


def _node_from_dict(doc):
    if doc["kind"] == "leaf":
        return LeafNode(distribution=tuple(doc["distribution"]),
                        prediction=doc["prediction"],
                        n_samples=doc["n_samples"])
    return InnerNode(feature=doc["feature"], threshold=doc["threshold"],
                     kind=doc["split_kind"], text=doc["text"],
                     sensitive=doc["sensitive"], n_samples=doc["n_samples"],
                     left=_node_from_dict(doc["left"]),
                     right=_node_from_dict(doc["right"]),
                     category=doc.get("category"))


def tree_from_json(text, schema: FeatureSchema | None = None) -> DecisionTree:
    doc = json.loads(text)
    if doc.get("format") != "fairpm-tree/1":
        raise ValueError(f"unsupported tree format {doc.get('format')!r}")
    cfg = DistillConfig(max_depth=doc["config"]["max_depth"],
                        min_samples_leaf=doc["config"]["min_samples_leaf"],
                        criterion=doc["config"]["criterion"],
                        excluded_fields=frozenset(doc["config"]["excluded_fields"]),
                        min_gain=doc["config"]["min_gain"])
    return DecisionTree(root=_node_from_dict(doc["root"]),
                        n_classes=doc["n_classes"], config=cfg, schema=schema)


def tree_hash(tree: DecisionTree) -> str:
    return hashlib.sha256(tree_to_json(tree).encode("utf-8")).hexdigest()
