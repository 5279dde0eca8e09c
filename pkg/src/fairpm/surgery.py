"""Expert alterations on distilled trees: locate sensitive splits, discard
or retrain them, and diff the resulting predictions.

All operations are pure: input trees are never mutated, so alternative
edits can be evaluated concurrently and histories replay deterministically.
Node addressing uses root paths (sequences of "L"/"R" steps).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .tree import (DecisionTree, DistillConfig, InnerNode, LeafNode, grow_tree,
                   iter_nodes, predict_tree_index, route_indices)


@dataclass(frozen=True)
class SensitiveSplit:
    node_path: tuple  # steps from the root, each "L" or "R"
    text: str
    attribute: str | None
    n_samples: int
    depth: int


@dataclass(frozen=True)
class Alteration:
    node_path: tuple
    strategy: str  # "discard" | "retrain"
    keep: str | None = None  # discard: which child survives
    exclude: tuple = ()  # retrain: attribute names barred from the regrown subtree

    def to_dict(self):
        return {"node_path": list(self.node_path), "strategy": self.strategy,
                "keep": self.keep, "exclude": list(self.exclude)}

    @classmethod
    def from_dict(cls, doc):
        return cls(node_path=tuple(doc["node_path"]), strategy=doc["strategy"],
                   keep=doc.get("keep"), exclude=tuple(doc.get("exclude") or ()))


def find_sensitive_splits(tree: DecisionTree, schema=None) -> list:
    """Exhaustive preorder report of inner nodes splitting on sensitive fields.

    An empty report means the tree uses no sensitive attribute, in which case
    the review terminates and the original model stays unchanged.
    """
    schema = schema if schema is not None else tree.schema
    report = []
    for path, node in iter_nodes(tree):
        if isinstance(node, InnerNode) and _node_sensitive(node, schema):
            attribute = (schema.fields[node.feature].attribute
                         if schema is not None else None)
            report.append(SensitiveSplit(node_path=path, text=node.text,
                                         attribute=attribute,
                                         n_samples=node.n_samples,
                                         depth=len(path)))
    return report


def _node_sensitive(node, schema):
    if schema is not None:
        return bool(schema.fields[node.feature].sensitive)
    return node.sensitive


def node_at(tree: DecisionTree, path):
    node = tree.root
    for step in path:
        if isinstance(node, LeafNode):
            raise ValueError(f"path {tuple(path)!r} walks past a leaf")
        if step == "L":
            node = node.left
        elif step == "R":
            node = node.right
        else:
            raise ValueError(f"bad path step {step!r}")
    return node


def apply_discard(tree: DecisionTree, node_path, keep, samples) -> DecisionTree:
    """Replace the addressed inner node by one of its children.

    The kept subtree's split structure survives; routed counts and leaf class
    distributions are recomputed by re-routing the original distillation
    samples through the new tree (a leaf that ends up with zero samples keeps
    its previous prediction).
    """
    node = node_at(tree, node_path)
    if not isinstance(node, InnerNode):
        raise ValueError(f"path {tuple(node_path)!r} addresses a leaf; "
                         "discard needs an inner node")
    if keep not in ("left", "right"):
        raise ValueError("keep must be 'left' or 'right'")
    kept_child = node.left if keep == "left" else node.right
    new_root = _replace_at(tree.root, tuple(node_path), kept_child)
    X, y = _as_samples(samples)
    refit_root = _refit(new_root, X, y, np.arange(X.shape[0]), tree.n_classes)
    return replace(tree, root=refit_root)


def apply_retrain(tree: DecisionTree, node_path, exclude, samples,
                  config: DistillConfig | None = None) -> DecisionTree:
    """Regrow the subtree under the addressed node without the excluded
    attributes, on exactly the samples the original tree routes there.

    The remaining depth budget is the tree's max_depth minus the node depth.
    A node that routes zero samples becomes a leaf predicting its parent's
    majority class (reported as a warning).
    """
    node_path = tuple(node_path)
    node = node_at(tree, node_path)
    if not isinstance(node, InnerNode):
        raise ValueError(f"path {node_path!r} addresses a leaf; "
                         "retrain needs an inner node")
    exclude = tuple(exclude)
    if not exclude:
        raise ValueError("retrain needs at least one excluded attribute")
    if tree.schema is None:
        raise ValueError("retrain requires a schema-carrying tree")
    config = config if config is not None else tree.config
    X, y = _as_samples(samples)

    excluded_fields = frozenset(config.excluded_fields
                                | tree.schema.indices_for_attributes(exclude))
    budget = max(config.max_depth - len(node_path), 1)
    routed = route_indices(tree, X, node_path)
    if len(routed) == 0:
        warnings.warn(f"retrain at {node_path!r}: no routed samples; "
                      "falling back to the parent's majority leaf")
        majority = _parent_majority(tree, node_path, X, y)
        counts = tuple(0 for _ in range(tree.n_classes))
        subtree_root = LeafNode(distribution=counts, prediction=majority,
                                n_samples=0)
    else:
        sub_config = replace(config, max_depth=budget,
                             excluded_fields=excluded_fields)
        subtree = grow_tree(X[routed], y[routed], sub_config,
                            schema=tree.schema, n_classes=tree.n_classes)
        subtree_root = subtree.root
    new_root = _replace_at(tree.root, node_path, subtree_root)
    return replace(tree, root=new_root)


def diff_predictions(d_old: DecisionTree, d_new: DecisionTree, vectors) -> np.ndarray:
    """Indices of vectors on which the two trees disagree (sorted)."""
    X = np.asarray(vectors, dtype=np.float64)
    if X.shape[0] == 0:
        return np.array([], dtype=np.int64)
    return np.nonzero(predict_tree_index(d_old, X)
                      != predict_tree_index(d_new, X))[0]


def apply_alteration(tree: DecisionTree, alteration: Alteration, samples,
                     config: DistillConfig | None = None) -> DecisionTree:
    if alteration.strategy == "discard":
        keep = alteration.keep
        if keep is None:
            node = node_at(tree, alteration.node_path)
            if not isinstance(node, InnerNode):
                raise ValueError("discard needs an inner node")
            # default: keep the child that carries more of the data
            keep = "left" if node.left.n_samples >= node.right.n_samples else "right"
        return apply_discard(tree, alteration.node_path, keep, samples)
    if alteration.strategy == "retrain":
        return apply_retrain(tree, alteration.node_path, alteration.exclude,
                             samples, config)
    raise ValueError(f"unknown alteration strategy {alteration.strategy!r}")


def node_window_context(tree: DecisionTree, X, path, slot=None) -> str | None:
    """Plurality activity at a window slot among samples routed to a node.

    Defaults to the last window slot, which identifies the decision point a
    split belongs to; returns None when nothing routes there.
    """
    schema = tree.schema
    if schema is None:
        raise ValueError("context lookup requires a schema-carrying tree")
    slot = schema.window - 1 if slot is None else slot
    columns = [(i, f.category) for i, f in enumerate(schema.fields)
               if f.source == "activity" and f.slot == slot]
    routed = route_indices(tree, np.asarray(X, dtype=np.float64), path)
    if len(routed) == 0:
        return None
    block = np.asarray(X, dtype=np.float64)[routed][:, [i for i, _ in columns]]
    votes = block.sum(axis=0)
    return columns[int(np.argmax(votes))][1]


# -- internals ---------------------------------------------------------------

def _as_samples(samples):
    X, y = samples
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ValueError("samples must be a non-empty (vectors, labels) pair")
    return X, y


def _replace_at(node, path, replacement):
    if not path:
        return replacement
    if isinstance(node, LeafNode):
        raise ValueError("path walks past a leaf")
    step, rest = path[0], path[1:]
    if step == "L":
        return replace(node, left=_replace_at(node.left, rest, replacement))
    if step == "R":
        return replace(node, right=_replace_at(node.right, rest, replacement))
    raise ValueError(f"bad path step {step!r}")


def _refit(node, X, y, idx, n_classes):
    """Rebuild a subtree with counts/distributions from re-routed samples."""
    counts = np.bincount(y[idx], minlength=n_classes) if len(idx) else \
        np.zeros(n_classes, dtype=np.int64)
    if isinstance(node, LeafNode):
        if len(idx) == 0:
            return replace(node, distribution=tuple(int(c) for c in counts),
                           n_samples=0)
        return LeafNode(distribution=tuple(int(c) for c in counts),
                        prediction=int(np.argmax(counts)), n_samples=len(idx))
    go_left = X[idx, node.feature] <= node.threshold
    return replace(node,
                   n_samples=len(idx),
                   left=_refit(node.left, X, y, idx[go_left], n_classes),
                   right=_refit(node.right, X, y, idx[~go_left], n_classes))


def _parent_majority(tree, node_path, X, y):
    path = tuple(node_path)
    while path:
        path = path[:-1]
        routed = route_indices(tree, X, path)
        if len(routed):
            return int(np.argmax(np.bincount(y[routed], minlength=tree.n_classes)))
    return 0
