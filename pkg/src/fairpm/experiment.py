"""End-to-end experiment pipeline.

Per validation fold: train the full model and the sensitive-free baseline,
distill the surrogate tree, let a scripted reviewer remove every split that
ground-truth annotations mark unfair, fine-tune, and evaluate all models.
Scripted review stands in for the interactive expert in batch runs; the
review service exposes the same machinery interactively.

Determinism: a master seed fans out to (stage, fold) sub-seeds by stable
hashing, and each fold worker regenerates its dataset from the config, so
results are identical bytes no matter how folds are scheduled.
"""
from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics as fm
from .encoding import build_schema, encode_batch, encode_targets_batch
from .eventlog import extract_prefixes, parse_csv, parse_xes, split_folds
from .finetune import FineTuneConfig, finetune_and_select
from .metrics import FairnessSpec, aggregate_folds
from .mlp import TrainConfig, predict, save_model, train
from .surgery import (Alteration, apply_alteration, find_sensitive_splits,
                      node_window_context)
from .synthesis import (AnnotatedLog, enrich_bpi, enrich_hb, generate_ablation_attrs,
                        generate_ablation_decisions, generate_ablation_strength,
                        generate_bpi_like, generate_cs, generate_hb_like,
                        annotations_to_json)
from .tree import DistillConfig, distill, fidelity, predict_tree, tree_hash, tree_to_json

MODEL_F = "F"
MODEL_M = "M"
MODEL_M_STAR = "M*"
MODEL_TREE = "D*-direct"


class StageError(RuntimeError):
    """Pipeline failure tagged with the stage it happened in."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage


def seed_for(master_seed, *parts) -> int:
    """Stable sub-seed derivation from a master seed and labels."""
    text = json.dumps([int(master_seed), *[str(p) for p in parts]])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    dataset: dict  # {"kind": ..., **params}
    seed: int = 7
    folds: int = 5
    window: int = 3
    min_prefix_length: int = 1
    selection_fraction: float = 0.1  # train-fold slice held out for selection
    alteration_strategy: str = "retrain"  # scripted reviewer default
    max_alterations: int = 64
    train: TrainConfig = field(default_factory=TrainConfig)
    finetune_train: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=10))
    distill: DistillConfig = field(default_factory=lambda: DistillConfig(
        max_depth=10, min_gain=0.01))
    replay_fraction: float = 0.25
    fairness_threshold: float = 0.05
    n_jobs: int = 0  # 0: use the CPU count

    def to_dict(self):
        return {
            "name": self.name, "dataset": self.dataset, "seed": self.seed,
            "folds": self.folds, "window": self.window,
            "min_prefix_length": self.min_prefix_length,
            "selection_fraction": self.selection_fraction,
            "alteration_strategy": self.alteration_strategy,
            "max_alterations": self.max_alterations,
            "train": {"epochs": self.train.epochs,
                      "batch_size": self.train.batch_size,
                      "learning_rate": self.train.learning_rate},
            "finetune_train": {"epochs": self.finetune_train.epochs,
                               "batch_size": self.finetune_train.batch_size,
                               "learning_rate": self.finetune_train.learning_rate},
            "distill": {"max_depth": self.distill.max_depth,
                        "min_samples_leaf": self.distill.min_samples_leaf,
                        "min_gain": self.distill.min_gain},
            "replay_fraction": self.replay_fraction,
            "fairness_threshold": self.fairness_threshold,
        }

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        train = TrainConfig(**doc.pop("train", {}))
        ft = TrainConfig(**{"epochs": 10, **doc.pop("finetune_train", {})})
        distill_cfg = DistillConfig(**{"max_depth": 10, "min_gain": 0.01,
                                       **doc.pop("distill", {})})
        doc.pop("n_jobs", None)
        return cls(train=train, finetune_train=ft, distill=distill_cfg, **doc)

    def digest(self):
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


# -- datasets -----------------------------------------------------------------

def load_dataset(spec, seed):
    """Materialize (AnnotatedLog, fairness specs) from a dataset spec dict."""
    kind = spec["kind"]
    if kind == "cs":
        annotated = generate_cs(spec["n_cases"], seed,
                                gender_strength=spec.get("gender_strength", 0.73),
                                age_strength=spec.get("age_strength", 0.70))
        return annotated, cs_fairness_specs()
    if kind == "ablation-strength":
        annotated = generate_ablation_strength(spec["b"], spec["n_cases"], seed)
        return annotated, cs_fairness_specs()
    if kind == "ablation-attrs":
        annotated = generate_ablation_attrs(spec["k"], spec["n_cases"], seed)
        return annotated, attrs_fairness_specs(annotated)
    if kind == "ablation-decisions":
        annotated = generate_ablation_decisions(spec["d"], spec["n_cases"], seed)
        return annotated, decisions_fairness_specs(annotated)
    if kind == "bpi":
        if "path" in spec:
            log = _read_log(spec)
        else:
            log = generate_bpi_like(spec.get("n_cases", 13087), seed_for(seed, "gen"))
        annotated = enrich_bpi(log, seed_for(seed, "enrich"))
        return annotated, bpi_fairness_specs()
    if kind == "hb":
        scenario = spec["scenario"]
        if "path" in spec:
            log = _read_log(spec)
            take = spec.get("take_last", 20000)
            log = type(log).from_traces(log.traces[-take:])
        else:
            log = generate_hb_like(spec.get("n_cases", 20000), seed_for(seed, "gen"))
        annotated = enrich_hb(log, scenario, seed_for(seed, "enrich"))
        return annotated, hb_fairness_specs()
    raise ValueError(f"unknown dataset kind {kind!r}")


def _read_log(spec):
    with open(spec["path"], "rb") as fh:
        data = fh.read()
    if spec["path"].endswith(".csv"):
        from .eventlog import CsvMapping
        return parse_csv(data, CsvMapping(**spec["csv_mapping"]))
    return parse_xes(data)


def cs_fairness_specs():
    from .synthesis import CS_PRIORITY, CS_REGISTER
    return [FairnessSpec(
        name="gender@consultation", attribute="gender",
        grouping=("categorical", ("female", "male")),
        positive_outcome=frozenset({CS_PRIORITY}),
        decision_scope={"last_activity_in": [CS_REGISTER]})]


def bpi_fairness_specs():
    from .synthesis import A_PARTLY, A_PREACCEPTED
    return [FairnessSpec(
        name="gender@preaccept", attribute="gender",
        grouping=("categorical", ("female", "male")),
        positive_outcome=frozenset({A_PREACCEPTED}),
        decision_scope={"last_activity_in": [A_PARTLY]})]


def hb_fairness_specs():
    from .synthesis import HB_FIN, HB_RELEASE
    return [
        FairnessSpec(name="age@route", attribute="age",
                     grouping=("threshold", 50.0),
                     positive_outcome=frozenset({HB_RELEASE}),
                     decision_scope={"last_activity_in": [HB_FIN]}),
        FairnessSpec(name="gender@route", attribute="gender",
                     grouping=("categorical", ("female", "male")),
                     positive_outcome=frozenset({HB_RELEASE}),
                     decision_scope={"last_activity_in": [HB_FIN]}),
    ]


def attrs_fairness_specs(annotated: AnnotatedLog):
    from .synthesis import CS_PRIORITY, CS_REGISTER
    return [FairnessSpec(
        name=f"{attr}@consultation", attribute=attr,
        grouping=("categorical", ("pos", "neg")),
        positive_outcome=frozenset({CS_PRIORITY}),
        decision_scope={"last_activity_in": [CS_REGISTER]})
        for attr in annotated.sensitive_attributes]


def decisions_fairness_specs(annotated: AnnotatedLog):
    specs = []
    for ann in annotated.annotations:
        if ann.label != "unfair":
            continue
        stage = ann.name.split("-")[-1]
        specs.append(FairnessSpec(
            name=f"{ann.attributes[0]}@{ann.name}", attribute=ann.attributes[0],
            grouping=("categorical", ("pos", "neg")),
            positive_outcome=frozenset({f"stage{stage} expedited"}),
            decision_scope={"last_activity_in": list(ann.context_activities)}))
    return specs


# -- per-fold pipeline ---------------------------------------------------------

@dataclass(frozen=True)
class FoldOutcome:
    fold_id: int
    reports: dict  # model name -> FoldReport
    fidelity: float
    n_sensitive_splits: int  # in the distillate, before any alteration
    chosen_mode: str
    alterations: tuple  # serialized alteration dicts
    review_log: tuple  # human-readable lines
    tree_before_hash: str
    tree_after_hash: str
    candidates: dict


@dataclass(frozen=True)
class PipelineResult:
    config: ExperimentConfig
    fold_outcomes: tuple
    aggregates: dict  # model name -> AggregateReport

    def to_dict(self):
        return {
            "name": self.config.name,
            "config_digest": self.config.digest(),
            "seed": self.config.seed,
            "folds": self.config.folds,
            "models": {name: fm.report_to_dict(rep)
                       for name, rep in sorted(self.aggregates.items())},
            "fold_details": [
                {
                    "fold": fo.fold_id,
                    "accuracy": {name: rep.accuracy
                                 for name, rep in sorted(fo.reports.items())},
                    "avg_delta_dp": {name: rep.avg_delta
                                     for name, rep in sorted(fo.reports.items())},
                    "fidelity": fo.fidelity,
                    "n_sensitive_splits": fo.n_sensitive_splits,
                    "chosen_mode": fo.chosen_mode,
                    "n_alterations": len(fo.alterations),
                    "alterations": list(fo.alterations),
                    "tree_before": fo.tree_before_hash,
                    "tree_after": fo.tree_after_hash,
                }
                for fo in self.fold_outcomes
            ],
        }


def run_fold(config: ExperimentConfig, fold_id: int, keep_artifacts=False):
    """Execute one fold end to end; returns a FoldOutcome (plus artifacts)."""
    try:
        annotated, specs = load_dataset(config.dataset, config.seed)
    except Exception as exc:
        raise StageError("dataset", exc) from exc

    folds = split_folds(annotated.log, config.folds, seed_for(config.seed, "folds"))
    train_log, val_log = folds[fold_id]

    # hold out a trace-level slice of the training fold for tradeoff selection
    rng = np.random.default_rng(seed_for(config.seed, "selection", fold_id))
    n_sel = max(1, int(round(config.selection_fraction * len(train_log.traces))))
    sel_idx = set(int(i) for i in
                  rng.choice(len(train_log.traces), size=n_sel, replace=False))
    fit_traces = [t for i, t in enumerate(train_log.traces) if i not in sel_idx]
    sel_traces = [t for i, t in enumerate(train_log.traces) if i in sel_idx]
    fit_log = type(train_log).from_traces(fit_traces)
    sel_log = type(train_log).from_traces(sel_traces)

    def prefixes_of(log):
        ps = extract_prefixes(log, config.window)
        if config.min_prefix_length > 1:
            ps = [p for p in ps if p.length >= config.min_prefix_length]
        return ps

    fit_prefixes = prefixes_of(fit_log)
    sel_prefixes = prefixes_of(sel_log)
    val_prefixes = prefixes_of(val_log)
    if not fit_prefixes or not sel_prefixes or not val_prefixes:
        raise StageError("prefix-extraction", "a partition produced no prefixes")

    sensitive = annotated.sensitive_attributes
    try:
        schema_full = build_schema(fit_prefixes, sensitive, include_sensitive=True)
        schema_free = build_schema(fit_prefixes, sensitive, include_sensitive=False)
        if schema_free.sensitive_indices():
            raise AssertionError("baseline schema still carries sensitive fields")
        X_full = encode_batch(fit_prefixes, schema_full)
        X_free = encode_batch(fit_prefixes, schema_free)
        targets = [p.target_activity for p in fit_prefixes]
        Y_full = encode_targets_batch(targets, schema_full)
        Y_free = encode_targets_batch(targets, schema_free)
    except Exception as exc:
        raise StageError("encoding", exc) from exc

    try:
        model_m = train((X_full, Y_full), config.train,
                        seed_for(config.seed, "train-M", fold_id), schema_full)
        model_f = train((X_free, Y_free), config.train,
                        seed_for(config.seed, "train-F", fold_id), schema_free)
    except Exception as exc:
        raise StageError("training", exc) from exc

    try:
        d_tree = distill(model_m, X_full, config.distill)
        fid = fidelity(d_tree, model_m, X_full)
    except Exception as exc:
        raise StageError("distillation", exc) from exc

    try:
        from .mlp import predict_index
        teacher_labels = predict_index(model_m, X_full)
        d_star, alterations, review_log = scripted_review(
            d_tree, (X_full, teacher_labels), annotated.annotations,
            strategy=config.alteration_strategy,
            max_alterations=config.max_alterations,
            config=config.distill)
    except Exception as exc:
        raise StageError("alteration", exc) from exc

    try:
        ft_config = FineTuneConfig(train=config.finetune_train,
                                   replay_fraction=config.replay_fraction,
                                   fairness_threshold=config.fairness_threshold,
                                   seed=seed_for(config.seed, "finetune", fold_id))
        outcome = finetune_and_select(model_m, d_tree, d_star, X_full,
                                      sel_prefixes, specs, ft_config)
    except Exception as exc:
        raise StageError("fine-tuning", exc) from exc

    try:
        reports = {
            MODEL_F: fm.evaluate(lambda X: predict(model_f, X), val_prefixes,
                                 schema_free, specs, fold_id),
            MODEL_M: fm.evaluate(lambda X: predict(model_m, X), val_prefixes,
                                 schema_full, specs, fold_id),
            MODEL_M_STAR: fm.evaluate(lambda X: predict(outcome.model, X),
                                      val_prefixes, schema_full, specs, fold_id),
            MODEL_TREE: fm.evaluate(lambda X: predict_tree(d_star, X),
                                    val_prefixes, schema_full, specs, fold_id),
        }
    except Exception as exc:
        raise StageError("evaluation", exc) from exc

    fold_outcome = FoldOutcome(
        fold_id=fold_id, reports=reports, fidelity=fid,
        n_sensitive_splits=len(find_sensitive_splits(d_tree)),
        chosen_mode=outcome.chosen_mode,
        alterations=tuple(a.to_dict() for a in alterations),
        review_log=tuple(review_log),
        tree_before_hash=tree_hash(d_tree), tree_after_hash=tree_hash(d_star),
        candidates={mode: {"accuracy": c.accuracy, "max_delta_dp": c.max_delta}
                    for mode, c in outcome.candidates.items()},
    )
    if keep_artifacts:
        artifacts = {
            "model_m": model_m, "model_f": model_f, "model_m_star": outcome.model,
            "tree_d": d_tree, "tree_d_star": d_star,
            "schema_full": schema_full, "schema_free": schema_free,
            "annotated": annotated, "specs": specs,
            "fit_prefixes": fit_prefixes, "val_prefixes": val_prefixes,
            "sel_prefixes": sel_prefixes, "X_full": X_full,
            "teacher_labels": teacher_labels,
        }
        return fold_outcome, artifacts
    return fold_outcome


def scripted_review(d_tree, samples, annotations, strategy="retrain",
                    max_alterations=64, config=None):
    """Batch stand-in for the expert.

    A sensitive split survives only when the ground truth marks its
    (attribute, decision context) pair as a fair use; every other sensitive
    split is altered, first preorder hit first, re-scanning after each
    alteration so proxies introduced by a retrain get caught in the next
    round. Retrains exclude the matching unfair annotation's full attribute
    set (or just the split's attribute for un-annotated strays).
    """
    X, _ = samples
    fair = [a for a in annotations if a.label == "fair"]
    unfair = [a for a in annotations if a.label == "unfair"]
    current = d_tree
    applied = []
    log = []
    while len(applied) < max_alterations:
        marked = None
        for entry in find_sensitive_splits(current):
            context = node_window_context(current, X, entry.node_path)
            if any(entry.attribute in a.attributes
                   and context in a.context_activities for a in fair):
                continue  # justified use, keep
            ann = next((a for a in unfair if entry.attribute in a.attributes
                        and context in a.context_activities), None)
            marked = (entry, ann, context)
            break
        if marked is None:
            break
        entry, ann, context = marked
        name = ann.name if ann else "unannotated"
        if strategy == "retrain":
            # exclude every attribute any unfair annotation names for this
            # context, so the regrown subtree cannot hop between co-annotated
            # sensitive attributes
            exclude = {entry.attribute}
            for a in unfair:
                if context in a.context_activities:
                    exclude.update(a.attributes)
            alteration = Alteration(node_path=entry.node_path, strategy="retrain",
                                    exclude=tuple(sorted(exclude)))
        else:
            alteration = Alteration(node_path=entry.node_path, strategy="discard")
        current = apply_alteration(current, alteration, samples, config)
        applied.append(alteration)
        log.append(f"{name}: {strategy} at {'/'.join(entry.node_path) or 'root'}"
                   f" ({entry.text}; context {context})")
    return current, applied, log


# -- full runs ------------------------------------------------------------------

def _fold_worker(config_doc, fold_id):
    config = ExperimentConfig.from_dict(config_doc)
    return run_fold(config, fold_id)


def run_pipeline(config: ExperimentConfig, n_jobs=None) -> PipelineResult:
    """All folds of one experiment; fold workers run in parallel processes."""
    jobs = n_jobs if n_jobs is not None else config.n_jobs
    if jobs == 0:
        jobs = min(config.folds, os.cpu_count() or 1)
    fold_ids = list(range(config.folds))
    if jobs <= 1:
        outcomes = [run_fold(config, i) for i in fold_ids]
    else:
        doc = config.to_dict()
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_fold_worker, [doc] * len(fold_ids), fold_ids))
    aggregates = {}
    for model in (MODEL_F, MODEL_M, MODEL_M_STAR, MODEL_TREE):
        aggregates[model] = aggregate_folds([o.reports[model] for o in outcomes])
    return PipelineResult(config=config, fold_outcomes=tuple(outcomes),
                          aggregates=aggregates)


def run_ablation(study, grid, base_config: ExperimentConfig, n_jobs=None):
    """Run one pipeline per grid point; failures are recorded, not fatal.

    Studies: ``attrs`` (k sensitive markers), ``strength`` (bias probability),
    ``decisions`` (decision-chain length), ``no-finetune`` (compares the
    edited tree as a direct predictor against the fine-tuned model on the
    base config's dataset grid).
    """
    results = []
    for point in grid:
        if study == "attrs":
            dataset = {"kind": "ablation-attrs", "k": point,
                       "n_cases": base_config.dataset.get("n_cases", 10000)}
        elif study == "strength":
            dataset = {"kind": "ablation-strength", "b": point,
                       "n_cases": base_config.dataset.get("n_cases", 10000)}
        elif study == "decisions":
            dataset = {"kind": "ablation-decisions", "d": point,
                       "n_cases": base_config.dataset.get("n_cases", 10000)}
        elif study == "no-finetune":
            dataset = point  # a full dataset spec per grid entry
        else:
            raise ValueError(f"unknown ablation study {study!r}")
        config = replace(base_config, dataset=dataset,
                         name=f"{base_config.name}-{study}-{_point_label(point)}")
        try:
            results.append((point, run_pipeline(config, n_jobs=n_jobs), None))
        except Exception as exc:  # record and continue with the next point
            results.append((point, None, f"{type(exc).__name__}: {exc}"))
    return results


def _point_label(point):
    if isinstance(point, dict):
        return point.get("kind", "point")
    return str(point)


# -- result emission --------------------------------------------------------------

REPORT_JSON_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["name", "config_digest", "seed", "folds", "models",
                 "fold_details"],
    "properties": {
        "name": {"type": "string"},
        "config_digest": {"type": "string"},
        "seed": {"type": "integer"},
        "folds": {"type": "integer", "minimum": 2},
        "models": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["n_folds", "accuracy", "delta_dp", "avg_delta_dp"],
                "properties": {
                    "n_folds": {"type": "integer"},
                    "accuracy": {
                        "type": "object",
                        "required": ["mean", "std"],
                        "properties": {"mean": {"type": "number"},
                                       "std": {"type": "number"}},
                    },
                    "delta_dp": {"type": "object"},
                    "avg_delta_dp": {"type": "object"},
                },
            },
        },
        "fold_details": {"type": "array", "items": {"type": "object"}},
    },
}


def emit_results(results, out_dir, formats=("json", "csv", "plotdata")):
    """Write deterministic result files for a list of PipelineResults."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    results = list(results)
    if "json" in formats:
        for result in results:
            path = os.path.join(out_dir, f"{_slug(result.config.name)}.json")
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
            written.append(path)
    if "csv" in formats:
        rows = []
        for result in results:
            for model in (MODEL_F, MODEL_M_STAR, MODEL_M):
                rows.append((result.config.name, model,
                             result.aggregates[model]))
        path = os.path.join(out_dir, "results_table.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(fm.reports_to_csv(rows))
        written.append(path)
    if "plotdata" in formats:
        path = os.path.join(out_dir, "plotdata.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("log,model,fold,accuracy,avg_delta_dp\n")
            for result in results:
                for fo in result.fold_outcomes:
                    for model in (MODEL_F, MODEL_M_STAR, MODEL_M):
                        rep = fo.reports[model]
                        avg = "" if rep.avg_delta is None else f"{rep.avg_delta:.6f}"
                        fh.write(f"{result.config.name},{model},{fo.fold_id},"
                                 f"{rep.accuracy:.6f},{avg}\n")
        written.append(path)
    return written


def write_fold_artifacts(config: ExperimentConfig, fold_id, out_dir):
    """Persist one fold's checkpoints, trees, schemas, and session log."""
    outcome, artifacts = run_fold(config, fold_id, keep_artifacts=True)
    os.makedirs(out_dir, exist_ok=True)
    save_model(artifacts["model_m"], os.path.join(out_dir, "model_m.json"))
    save_model(artifacts["model_f"], os.path.join(out_dir, "model_f.json"))
    save_model(artifacts["model_m_star"], os.path.join(out_dir, "model_m_star.json"))
    for name, tree in (("tree_d", artifacts["tree_d"]),
                       ("tree_d_star", artifacts["tree_d_star"])):
        with open(os.path.join(out_dir, f"{name}.json"), "w") as fh:
            fh.write(tree_to_json(tree))
    with open(os.path.join(out_dir, "schema_full.json"), "w") as fh:
        fh.write(artifacts["schema_full"].to_json())
    with open(os.path.join(out_dir, "schema_free.json"), "w") as fh:
        fh.write(artifacts["schema_free"].to_json())
    with open(os.path.join(out_dir, "annotations.json"), "w") as fh:
        fh.write(annotations_to_json(artifacts["annotated"]))
    with open(os.path.join(out_dir, "session.json"), "w") as fh:
        json.dump({"fold": fold_id, "alterations": list(outcome.alterations),
                   "review_log": list(outcome.review_log),
                   "chosen_mode": outcome.chosen_mode}, fh, indent=2,
                  sort_keys=True)
    return outcome, artifacts


def _slug(name):
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name)
