import numpy as np
import pytest

from fairpm.finetune import (MODE_ALL, MODE_DIFF, FineTuneConfig,
                             build_targets_all, build_targets_diff,
                             finetune_and_select, _select, CandidateResult)
from fairpm.mlp import TrainConfig, predict_index
from fairpm.surgery import apply_retrain, find_sensitive_splits
from fairpm.tree import DistillConfig, LeafNode, DecisionTree, distill, \
    predict_tree_index


@pytest.fixture(scope="module")
def distilled(cs_model, cs_encoded):
    X, _ = cs_encoded
    tree = distill(cs_model, X, DistillConfig(max_depth=8, min_samples_leaf=10))
    return tree, X


def test_build_targets_all_single_leaf(cs_model, cs_encoded):
    X, _ = cs_encoded
    leaf_tree = DecisionTree(
        root=LeafNode(distribution=(0, len(X)) + (0,) * (cs_model.n_classes - 2),
                      prediction=1, n_samples=len(X)),
        n_classes=cs_model.n_classes, config=DistillConfig(),
        schema=cs_model.schema)
    Xo, Y = build_targets_all(leaf_tree, X)
    assert len(Xo) == len(X)
    assert np.all(Y.argmax(axis=1) == 1)


def test_build_targets_all_pointwise(distilled):
    tree, X = distilled
    Xo, Y = build_targets_all(tree, X)
    assert Y.shape == (len(X), tree.n_classes)
    assert np.array_equal(Y.argmax(axis=1), predict_tree_index(tree, X))
    assert np.all(Y.sum(axis=1) == 1.0)


def test_build_targets_diff_empty_when_equal(distilled):
    tree, X = distilled
    Xd, Yd, idx = build_targets_diff(tree, tree, X)
    assert len(Xd) == len(Yd) == len(idx) == 0


def test_build_targets_diff_pointwise(distilled, cs_model, cs_encoded):
    tree, X = distilled
    y = predict_index(cs_model, X)
    report = find_sensitive_splits(tree)
    edited = apply_retrain(tree, report[0].node_path, (report[0].attribute,),
                           (X, y))
    Xd, Yd, idx = build_targets_diff(tree, edited, X)
    old = predict_tree_index(tree, X)
    new = predict_tree_index(edited, X)
    assert set(idx.tolist()) == {i for i in range(len(X)) if old[i] != new[i]}
    assert len(Xd) == len(idx)
    assert np.array_equal(Yd.argmax(axis=1), new[idx])
    assert np.all(Yd.argmax(axis=1) != old[idx])


def test_fast_path_returns_model_unchanged(distilled, cs_model, cs_prefixes):
    tree, X = distilled
    outcome = finetune_and_select(cs_model, tree, tree, X, cs_prefixes[:300],
                                  [], FineTuneConfig())
    assert outcome.chosen_mode == MODE_DIFF
    assert outcome.model is cs_model
    for (Wa, ba), (Wb, bb) in zip(outcome.model.weights, cs_model.weights):
        assert np.array_equal(Wa, Wb) and np.array_equal(ba, bb)
    assert set(outcome.candidates) == {MODE_ALL, MODE_DIFF}


def test_finetune_and_select_records_both_candidates(distilled, cs_model,
                                                     cs_prefixes, cs_encoded):
    from fairpm.experiment import cs_fairness_specs
    tree, X = distilled
    y = predict_index(cs_model, X)
    report = find_sensitive_splits(tree)
    edited = apply_retrain(tree, report[0].node_path, ("gender", "age"), (X, y))
    specs = cs_fairness_specs()
    outcome = finetune_and_select(
        cs_model, tree, edited, X, cs_prefixes[:400], specs,
        FineTuneConfig(train=TrainConfig(epochs=2), seed=4))
    assert set(outcome.candidates) == {MODE_ALL, MODE_DIFF}
    for cand in outcome.candidates.values():
        assert 0.0 <= cand.accuracy <= 1.0
        assert cand.n_targets > 0
    assert outcome.chosen_mode in (MODE_ALL, MODE_DIFF)
    doc = outcome.to_dict()
    assert doc["chosen_mode"] == outcome.chosen_mode
    assert set(doc["candidates"]) == {MODE_ALL, MODE_DIFF}


def make_candidate(mode, acc, delta):
    return CandidateResult(mode=mode, accuracy=acc, max_delta=delta,
                           report=None, n_targets=1)


@pytest.mark.parametrize("all_c,diff_c,expected", [
    # both pass the threshold: accuracy decides
    ((0.9, 0.01), (0.8, 0.01), MODE_ALL),
    ((0.8, 0.01), (0.9, 0.01), MODE_DIFF),
    # only one passes: it wins even with lower accuracy
    ((0.9, 0.30), (0.8, 0.01), MODE_DIFF),
    ((0.8, 0.01), (0.9, 0.30), MODE_ALL),
    # neither passes: lower unfairness wins
    ((0.9, 0.40), (0.8, 0.20), MODE_DIFF),
    ((0.8, 0.20), (0.9, 0.40), MODE_ALL),
    # exact tie resolves to the smaller intervention
    ((0.9, 0.01), (0.9, 0.01), MODE_DIFF),
])
def test_selection_rule(all_c, diff_c, expected):
    chosen = _select(make_candidate(MODE_ALL, *all_c),
                     make_candidate(MODE_DIFF, *diff_c), tau=0.05)
    assert chosen == expected


@pytest.mark.parametrize("all_c,diff_c", [
    ((0.9, 0.01), (0.8, 0.02)),
    ((0.85, 0.2), (0.8, 0.3)),
    ((0.8, 0.01), (0.81, 0.30)),
])
def test_selection_never_dominated(all_c, diff_c):
    cand_all = make_candidate(MODE_ALL, *all_c)
    cand_diff = make_candidate(MODE_DIFF, *diff_c)
    chosen = _select(cand_all, cand_diff, tau=0.05)
    winner = cand_all if chosen == MODE_ALL else cand_diff
    loser = cand_diff if chosen == MODE_ALL else cand_all
    dominated = (winner.accuracy < loser.accuracy
                 and winner.max_delta > loser.max_delta)
    assert not dominated
