import numpy as np
import pytest

from fairpm.mlp import MlpModel, TrainConfig, init_weights
from fairpm.tree import (DistillConfig, InnerNode, LeafNode, distill, fidelity,
                         grow_tree, iter_nodes, predict_tree, predict_tree_index,
                         tree_from_json, tree_hash, tree_to_json)


def constant_teacher(width, n_classes):
    weights = tuple((np.zeros_like(W), np.zeros_like(b))
                    for W, b in init_weights(width, n_classes, 0,
                                             hidden_sizes=(4,)))
    return MlpModel(weights=weights, seed=0, config=TrainConfig(),
                    hidden_sizes=(4,))


def brute_force_best_split(X, y, min_leaf=1):
    """Exhaustive split search oracle: every feature, every midpoint."""
    def gini(labels):
        if len(labels) == 0:
            return 0.0
        _, counts = np.unique(labels, return_counts=True)
        p = counts / len(labels)
        return 1.0 - np.sum(p * p)

    n = len(y)
    parent = gini(y)
    best = (-1.0, None, None)
    for f in range(X.shape[1]):
        values = np.unique(X[:, f])
        for lo, hi in zip(values[:-1], values[1:]):
            t = (lo + hi) / 2
            mask = X[:, f] <= t
            if mask.sum() < min_leaf or (~mask).sum() < min_leaf:
                continue
            child = (mask.sum() * gini(y[mask])
                     + (~mask).sum() * gini(y[~mask])) / n
            gain = parent - child
            if gain > best[0]:
                best = (gain, f, t)
    return best


def test_constant_teacher_gives_single_leaf(rng):
    teacher = constant_teacher(4, 3)
    X = rng.uniform(size=(50, 4))
    tree = distill(teacher, X)
    assert isinstance(tree.root, LeafNode)
    assert tree.root.prediction == 0
    assert fidelity(tree, teacher, X) == 1.0


def test_threshold_function_recovered(rng):
    # teacher behaviour: class 0 iff x0 < 0.5; oracle confirms the best
    # split by exhaustive search, the grown tree must match it
    X = rng.uniform(size=(200, 3))
    y = (X[:, 0] >= 0.5).astype(int)
    gain, feature, threshold = brute_force_best_split(X, y)
    assert feature == 0 and abs(threshold - 0.5) < 0.05

    tree = grow_tree(X, y, DistillConfig(max_depth=1, min_samples_leaf=1))
    assert isinstance(tree.root, InnerNode)
    assert tree.root.feature == 0
    assert abs(tree.root.threshold - threshold) < 1e-12
    assert np.mean(predict_tree_index(tree, X) == y) == 1.0


def test_distill_matches_brute_force_at_root(rng):
    X = rng.uniform(size=(120, 4))
    y = ((X[:, 2] > 0.3) & (X[:, 1] > 0.6)).astype(int)
    tree = grow_tree(X, y, DistillConfig(max_depth=1, min_samples_leaf=1))
    gain, feature, threshold = brute_force_best_split(X, y)
    assert isinstance(tree.root, InnerNode)
    assert tree.root.feature == feature
    assert tree.root.threshold == pytest.approx(threshold)


def test_random_tree_fidelity_near_chance(rng):
    # a tree grown on one teacher evaluated against an unrelated teacher's
    # labels lands near 1/k on random data
    k = 4
    X = rng.uniform(size=(4000, 6))
    y_other = rng.integers(0, k, size=4000)
    tree = grow_tree(X, y_other, DistillConfig(max_depth=3, min_samples_leaf=50))
    teacher_labels = rng.integers(0, k, size=4000)
    agreement = np.mean(predict_tree_index(tree, X) == teacher_labels)
    assert abs(agreement - 1 / k) < 0.05


def test_fidelity_at_least_stump(cs_model, cs_encoded):
    X, _ = cs_encoded
    full = distill(cs_model, X, DistillConfig(max_depth=8, min_samples_leaf=5))
    stump = distill(cs_model, X, DistillConfig(max_depth=1, min_samples_leaf=5))
    assert fidelity(full, cs_model, X) >= fidelity(stump, cs_model, X)


def test_cs_distillation_fidelity(cs_model, cs_encoded):
    X, _ = cs_encoded
    tree = distill(cs_model, X, DistillConfig(max_depth=10, min_samples_leaf=5))
    assert fidelity(tree, cs_model, X) >= 0.95


def test_predict_single_leaf_tree(rng):
    tree = grow_tree(np.zeros((10, 2)), np.full(10, 2), n_classes=3)
    assert isinstance(tree.root, LeafNode)
    X = rng.normal(size=(20, 2))
    assert np.all(predict_tree_index(tree, X) == 2)


def test_boundary_routes_left(rng):
    X = np.array([[0.0], [1.0], [0.0], [1.0]] * 5)
    y = (X[:, 0] > 0.5).astype(int)
    tree = grow_tree(X, y, DistillConfig(max_depth=1, min_samples_leaf=1))
    t = tree.root.threshold
    assert predict_tree_index(tree, np.array([t])) == tree.root.left.prediction


def reference_evaluate(node, x):
    """Straightforward recursive-descent oracle."""
    if isinstance(node, LeafNode):
        return node.prediction
    if x[node.feature] <= node.threshold:
        return reference_evaluate(node.left, x)
    return reference_evaluate(node.right, x)


def test_routing_matches_reference_evaluator(cs_model, cs_encoded, rng):
    X, _ = cs_encoded
    tree = distill(cs_model, X, DistillConfig(max_depth=8, min_samples_leaf=10))
    probe = rng.uniform(size=(1000, X.shape[1]))
    fast = predict_tree_index(tree, probe)
    slow = np.array([reference_evaluate(tree.root, x) for x in probe])
    assert np.array_equal(fast, slow)


def test_distill_deterministic(cs_model, cs_encoded):
    X, _ = cs_encoded
    cfg = DistillConfig(max_depth=6, min_samples_leaf=10)
    assert tree_hash(distill(cs_model, X, cfg)) == \
        tree_hash(distill(cs_model, X, cfg))


def test_routed_counts_conserved(cs_model, cs_encoded):
    X, _ = cs_encoded
    tree = distill(cs_model, X, DistillConfig(max_depth=8, min_samples_leaf=10))
    assert tree.root.n_samples == len(X)
    for _, node in iter_nodes(tree):
        if isinstance(node, InnerNode):
            assert node.left.n_samples + node.right.n_samples == node.n_samples


def test_leaf_prediction_is_argmax(cs_model, cs_encoded):
    X, _ = cs_encoded
    tree = distill(cs_model, X, DistillConfig(max_depth=8, min_samples_leaf=10))
    for _, node in iter_nodes(tree):
        if isinstance(node, LeafNode) and node.n_samples:
            assert node.prediction == int(np.argmax(node.distribution))


def test_excluded_fields_never_split(cs_model, cs_encoded, cs_schema):
    X, _ = cs_encoded
    excluded = frozenset(cs_schema.sensitive_indices())
    tree = distill(cs_model, X, DistillConfig(max_depth=8, min_samples_leaf=10,
                                              excluded_fields=excluded))
    for _, node in iter_nodes(tree):
        if isinstance(node, InnerNode):
            assert node.feature not in excluded
            assert not node.sensitive


def test_max_depth_and_leaf_size_honored(cs_model, cs_encoded):
    X, _ = cs_encoded
    tree = distill(cs_model, X, DistillConfig(max_depth=4, min_samples_leaf=40))
    assert tree.depth() <= 4
    for _, node in iter_nodes(tree):
        if isinstance(node, LeafNode):
            assert node.n_samples >= 40 or tree.root is node


def test_membership_split_semantics(cs_model, cs_encoded, cs_schema):
    X, _ = cs_encoded
    tree = distill(cs_model, X, DistillConfig(max_depth=8, min_samples_leaf=10))
    saw_membership = False
    for _, node in iter_nodes(tree):
        if isinstance(node, InnerNode) and node.kind == "membership":
            saw_membership = True
            assert cs_schema.fields[node.feature].encoding == "onehot"
            assert node.threshold == 0.5
            assert node.category == cs_schema.fields[node.feature].category
    assert saw_membership


def test_json_round_trip(cs_model, cs_encoded, cs_schema, rng):
    X, _ = cs_encoded
    tree = distill(cs_model, X, DistillConfig(max_depth=6, min_samples_leaf=10))
    again = tree_from_json(tree_to_json(tree), schema=cs_schema)
    assert tree_hash(again) == tree_hash(tree)
    probe = rng.uniform(size=(200, X.shape[1]))
    assert np.array_equal(predict_tree_index(tree, probe),
                          predict_tree_index(again, probe))
    assert predict_tree(tree, probe[0]) == predict_tree(again, probe[0])


def test_empty_inputs_rejected(cs_model):
    with pytest.raises(ValueError):
        distill(cs_model, np.zeros((0, cs_model.input_width)))
    with pytest.raises(ValueError):
        fidelity(grow_tree(np.zeros((3, 2)), np.zeros(3, dtype=int)),
                 cs_model, np.zeros((0, 2)))


def test_no_ancestor_pruned_variant_beats_training_fidelity(cs_model,
                                                            cs_encoded):
    # collapsing any inner node to its majority leaf can only lower (or tie)
    # agreement with the teacher on the distillation set
    from dataclasses import replace

    from fairpm.mlp import predict_index
    from fairpm.surgery import _replace_at
    from fairpm.tree import route_indices

    X, _ = cs_encoded
    labels = predict_index(cs_model, X)
    tree = distill(cs_model, X, DistillConfig(max_depth=6, min_samples_leaf=20))
    base = np.mean(predict_tree_index(tree, X) == labels)
    for path, node in iter_nodes(tree):
        if isinstance(node, LeafNode):
            continue
        routed = route_indices(tree, X, path)
        counts = np.bincount(labels[routed], minlength=tree.n_classes)
        pruned_root = _replace_at(
            tree.root, path,
            LeafNode(distribution=tuple(int(c) for c in counts),
                     prediction=int(np.argmax(counts)),
                     n_samples=len(routed)))
        pruned = replace(tree, root=pruned_root)
        assert np.mean(predict_tree_index(pruned, X) == labels) <= base + 1e-12
