"""Fine-tuning the neural model from the revised tree, and selecting between
the two target-construction modes (all prefixes vs only changed ones).

Targets come from the edited tree's predictions. The all-prefixes mode
re-labels everything; the differing-prefixes mode touches only inputs where
the edited tree disagrees with the original distillate, optionally mixed
with a small replay sample of unchanged inputs to counter forgetting.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import metrics as fm
from .mlp import MlpModel, TrainConfig, fine_tune, predict
from .surgery import diff_predictions
from .tree import DecisionTree, predict_tree_index

MODE_ALL = "all-prefixes"
MODE_DIFF = "differing-prefixes"


@dataclass(frozen=True)
class FineTuneConfig:
    train: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=5))
    replay_fraction: float = 0.1  # unchanged-prefix replay for the diff mode
    fairness_threshold: float = 0.05  # tau on validation delta-DP
    seed: int = 0


@dataclass(frozen=True)
class CandidateResult:
    mode: str
    accuracy: float
    max_delta: float  # 0.0 when every spec is undefined
    report: fm.FoldReport
    n_targets: int


@dataclass(frozen=True)
class FineTuneOutcome:
    chosen_mode: str
    model: MlpModel
    candidates: dict  # mode -> CandidateResult

    def to_dict(self):
        return {
            "chosen_mode": self.chosen_mode,
            "candidates": {
                mode: {
                    "accuracy": c.accuracy,
                    "max_delta_dp": c.max_delta,
                    "n_targets": c.n_targets,
                    "delta_dp": {
                        r.spec_name: r.delta for r in c.report.results
                    },
                }
                for mode, c in self.candidates.items()
            },
        }


def build_targets_all(d_star: DecisionTree, vectors):
    """One training example per vector, target = the edited tree's prediction."""
    X = np.asarray(vectors, dtype=np.float64)
    labels = predict_tree_index(d_star, X)
    return X, _one_hot(labels, d_star.n_classes)


def build_targets_diff(d: DecisionTree, d_star: DecisionTree, vectors):
    """Examples only where the original and edited trees disagree; may be
    empty, which signals that no fine-tuning is needed."""
    X = np.asarray(vectors, dtype=np.float64)
    diff = diff_predictions(d, d_star, X)
    labels = predict_tree_index(d_star, X[diff]) if len(diff) else \
        np.array([], dtype=np.int64)
    return X[diff], _one_hot(labels, d_star.n_classes), diff


def finetune_and_select(model: MlpModel, d: DecisionTree, d_star: DecisionTree,
                        train_vectors, selection_prefixes, specs,
                        config: FineTuneConfig = FineTuneConfig()) -> FineTuneOutcome:
    """Fine-tune one candidate per target mode and pick the better tradeoff.

    Among candidates whose worst parity gap stays within the threshold, the
    more accurate one wins; if neither passes, the lower-gap one does. Ties
    resolve toward the differing-prefixes mode (the smaller intervention).
    When the trees agree on every training vector the model is returned
    bit-identical, with its own metrics recorded for both modes.
    """
    X = np.asarray(train_vectors, dtype=np.float64)
    schema = model.schema
    if schema is None:
        raise ValueError("selection needs a schema-carrying model")

    X_diff, Y_diff, diff_idx = build_targets_diff(d, d_star, X)
    if len(diff_idx) == 0:
        base = _evaluate_candidate(model, MODE_DIFF, selection_prefixes, specs, 0)
        return FineTuneOutcome(chosen_mode=MODE_DIFF, model=model,
                               candidates={MODE_ALL: base, MODE_DIFF: base})

    X_all, Y_all = build_targets_all(d_star, X)
    model_all = fine_tune(model, (X_all, Y_all), config.train)
    cand_all = _evaluate_candidate(model_all, MODE_ALL, selection_prefixes,
                                   specs, len(X_all))

    X_ft, Y_ft = _with_replay(X, X_diff, Y_diff, diff_idx, d_star, config)
    model_diff = fine_tune(model, (X_ft, Y_ft), config.train)
    cand_diff = _evaluate_candidate(model_diff, MODE_DIFF, selection_prefixes,
                                    specs, len(X_ft))

    chosen = _select(cand_all, cand_diff, config.fairness_threshold)
    winner = model_all if chosen == MODE_ALL else model_diff
    return FineTuneOutcome(chosen_mode=chosen, model=winner,
                           candidates={MODE_ALL: cand_all, MODE_DIFF: cand_diff})


def _with_replay(X, X_diff, Y_diff, diff_idx, d_star, config):
    if config.replay_fraction <= 0:
        return X_diff, Y_diff
    unchanged = np.setdiff1d(np.arange(X.shape[0]), diff_idx)
    n_replay = int(round(config.replay_fraction * len(unchanged)))
    if n_replay == 0:
        return X_diff, Y_diff
    rng = np.random.default_rng([config.seed, 9182])
    picked = rng.choice(unchanged, size=n_replay, replace=False)
    X_rep = X[picked]
    labels = predict_tree_index(d_star, X_rep)
    Y_rep = _one_hot(labels, d_star.n_classes)
    return np.vstack([X_diff, X_rep]), np.vstack([Y_diff, Y_rep])


def _evaluate_candidate(model, mode, prefixes, specs, n_targets):
    report = fm.evaluate(lambda X: predict(model, X), prefixes, model.schema,
                         specs)
    defined = [r.delta for r in report.results if r.delta is not None]
    return CandidateResult(mode=mode, accuracy=report.accuracy,
                           max_delta=max(defined) if defined else 0.0,
                           report=report, n_targets=n_targets)


def _select(cand_all, cand_diff, tau):
    passing = [c for c in (cand_all, cand_diff) if c.max_delta <= tau]
    if passing:
        # ties resolve to the differing-prefixes candidate
        best = max(passing, key=lambda c: (c.accuracy, c.mode == MODE_DIFF))
        return best.mode
    best = min((cand_all, cand_diff),
               key=lambda c: (c.max_delta, -c.accuracy, c.mode != MODE_DIFF))
    return best.mode


def _one_hot(labels, n_classes):
    Y = np.zeros((len(labels), n_classes), dtype=np.float64)
    if len(labels):
        Y[np.arange(len(labels)), labels] = 1.0
    return Y
