"""HTTP review service: serves the distilled tree to the reviewer UI,
accepts alterations, evaluates what-if edits, runs fine-tuning, and reports
before/after metrics.

Sessions persist as an append-only JSON event log plus immutable snapshot
files, so crash recovery and audits replay the same alteration history onto
the same tree. Mutating requests on one session are serialized; a session
is only ever advanced by one writer at a time.
"""
from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import metrics as fm
from .encoding import FeatureSchema
from .finetune import FineTuneConfig, finetune_and_select
from .metrics import FairnessSpec
from .mlp import MlpModel, predict
from .surgery import Alteration, apply_alteration, find_sensitive_splits
from .tree import (DecisionTree, predict_tree, tree_from_json, tree_hash,
                   tree_to_dict, tree_to_json)

STATUS_REVIEWING = "reviewing"
STATUS_FINE_TUNING = "fine-tuning"
STATUS_DONE = "done"


@dataclass
class ReviewSession:
    """One reviewer's working state over an immutable snapshot."""

    session_id: str
    schema: FeatureSchema
    model: MlpModel
    tree: DecisionTree  # the distillate D; never changes
    samples: tuple  # (X, teacher labels) the tree was grown on
    val_prefixes: list
    specs: list
    working_tree: DecisionTree = None
    history: list = field(default_factory=list)
    status: str = STATUS_REVIEWING
    outcome: object = None
    model_star: MlpModel = None
    finetune_config: FineTuneConfig = field(default_factory=FineTuneConfig)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def __post_init__(self):
        if self.working_tree is None:
            self.working_tree = self.tree

    def baseline_report(self):
        return fm.evaluate(lambda X: predict(self.model, X), self.val_prefixes,
                           self.schema, self.specs)

    def current_report(self):
        model = self.model_star if self.model_star is not None else self.model
        return fm.evaluate(lambda X: predict(model, X), self.val_prefixes,
                           self.schema, self.specs)


class SessionStore:
    """In-memory registry backed by per-session persistence directories."""

    def __init__(self, data_dir=None):
        self.data_dir = data_dir
        self.sessions: dict[str, ReviewSession] = {}
        self._lock = threading.Lock()

    def add(self, session: ReviewSession):
        with self._lock:
            self.sessions[session.session_id] = session
        if self.data_dir:
            _persist_snapshot(self.data_dir, session)

    def get(self, session_id) -> ReviewSession:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"unknown session {session_id!r}") from None

    def append_event(self, session: ReviewSession, event: dict):
        if self.data_dir:
            path = os.path.join(self.data_dir, session.session_id, "events.jsonl")
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, sort_keys=True) + "\n")


def create_session(store: SessionStore, schema, model, tree, samples,
                   val_prefixes, specs, session_id=None,
                   finetune_config=None) -> ReviewSession:
    session = ReviewSession(
        session_id=session_id or uuid.uuid4().hex[:12],
        schema=schema, model=model, tree=tree, samples=samples,
        val_prefixes=val_prefixes, specs=specs,
        finetune_config=finetune_config or FineTuneConfig())
    store.add(session)
    return session


def reload_session(store: SessionStore, data_dir, session_id,
                   val_prefixes, model, model_loader=None) -> ReviewSession:
    """Rebuild a session by replaying its persisted alteration history."""
    base = os.path.join(data_dir, session_id)
    with open(os.path.join(base, "schema.json"), encoding="utf-8") as fh:
        schema = FeatureSchema.from_json(fh.read())
    with open(os.path.join(base, "tree.json"), encoding="utf-8") as fh:
        tree = tree_from_json(fh.read(), schema=schema)
    data = np.load(os.path.join(base, "samples.npz"))
    samples = (data["X"], data["y"])
    with open(os.path.join(base, "specs.json"), encoding="utf-8") as fh:
        specs = [FairnessSpec.from_dict(d) for d in json.load(fh)]
    session = ReviewSession(session_id=session_id, schema=schema, model=model,
                            tree=tree, samples=samples,
                            val_prefixes=val_prefixes, specs=specs)
    events_path = os.path.join(base, "events.jsonl")
    if os.path.exists(events_path):
        with open(events_path, encoding="utf-8") as fh:
            for line in fh:
                event = json.loads(line)
                if event["kind"] != "alteration":
                    continue
                alteration = Alteration.from_dict(event["alteration"])
                session.working_tree = apply_alteration(
                    session.working_tree, alteration, session.samples,
                    session.tree.config)
                session.history.append(alteration)
    store.sessions[session_id] = session
    return session


def _persist_snapshot(data_dir, session: ReviewSession):
    base = os.path.join(data_dir, session.session_id)
    os.makedirs(base, exist_ok=True)
    with open(os.path.join(base, "schema.json"), "w", encoding="utf-8") as fh:
        fh.write(session.schema.to_json())
    with open(os.path.join(base, "tree.json"), "w", encoding="utf-8") as fh:
        fh.write(tree_to_json(session.tree))
    X, y = session.samples
    np.savez_compressed(os.path.join(base, "samples.npz"), X=X, y=y)
    with open(os.path.join(base, "specs.json"), "w", encoding="utf-8") as fh:
        json.dump([s.to_dict() for s in session.specs], fh, indent=2,
                  sort_keys=True)


# -- payloads -----------------------------------------------------------------

class AlterationBody(BaseModel):
    node_path: list[str]
    strategy: str
    keep: str | None = None
    exclude: list[str] | None = None


def _report_payload(report: fm.FoldReport) -> dict:
    return {
        "accuracy": report.accuracy,
        "avg_delta_dp": report.avg_delta,
        "delta_dp": {
            r.spec_name: {"delta": r.delta, "p1": r.p1, "p2": r.p2,
                          "n1": r.n1, "n2": r.n2}
            for r in report.results
        },
    }


def _splits_payload(tree: DecisionTree) -> list:
    return [
        {"node_path": list(s.node_path), "text": s.text,
         "attribute": s.attribute, "n_samples": s.n_samples, "depth": s.depth}
        for s in find_sensitive_splits(tree)
    ]


def _tree_payload(session: ReviewSession) -> dict:
    return {
        "session_id": session.session_id,
        "status": session.status,
        "tree": tree_to_dict(session.working_tree),
        "tree_hash": tree_hash(session.working_tree),
        "sensitive_splits": _splits_payload(session.working_tree),
        "n_alterations": len(session.history),
    }


def _alteration_from_body(body: AlterationBody) -> Alteration:
    if body.strategy not in ("discard", "retrain"):
        raise HTTPException(status_code=422,
                            detail=f"unknown strategy {body.strategy!r}")
    return Alteration(node_path=tuple(body.node_path), strategy=body.strategy,
                      keep=body.keep, exclude=tuple(body.exclude or ()))


def _apply_or_422(session, alteration):
    try:
        return apply_alteration(session.working_tree, alteration,
                                session.samples, session.tree.config)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def create_app(store: SessionStore, cors_origins=("*",)) -> FastAPI:
    app = FastAPI(title="fairpm review service")
    app.add_middleware(CORSMiddleware, allow_origins=list(cors_origins),
                       allow_methods=["*"], allow_headers=["*"])
    app.state.store = store

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": [
            {"session_id": s.session_id, "status": s.status,
             "n_alterations": len(s.history)}
            for s in store.sessions.values()
        ]}

    @app.get("/session/{session_id}/tree")
    def get_tree(session_id: str):
        session = store.get(session_id)
        return _tree_payload(session)

    @app.get("/session/{session_id}/status")
    def get_status(session_id: str):
        session = store.get(session_id)
        return {"session_id": session.session_id, "status": session.status,
                "n_alterations": len(session.history),
                "outcome_ready": session.outcome is not None}

    @app.post("/session/{session_id}/alterations")
    def post_alteration(session_id: str, body: AlterationBody):
        session = store.get(session_id)
        alteration = _alteration_from_body(body)
        with session.lock:
            if session.status != STATUS_REVIEWING:
                raise HTTPException(status_code=409,
                                    detail=f"session is {session.status}")
            new_tree = _apply_or_422(session, alteration)
            session.working_tree = new_tree
            session.history.append(alteration)
            store.append_event(session, {"kind": "alteration",
                                         "alteration": alteration.to_dict()})
        return _tree_payload(session)

    @app.post("/session/{session_id}/whatif")
    def post_whatif(session_id: str, body: AlterationBody):
        session = store.get(session_id)
        alteration = _alteration_from_body(body)
        if session.status != STATUS_REVIEWING:
            raise HTTPException(status_code=409,
                                detail=f"session is {session.status}")
        candidate = _apply_or_422(session, alteration)
        # tree-level preview only; the session itself is untouched
        before = fm.evaluate(lambda X: predict_tree(session.working_tree, X),
                             session.val_prefixes, session.schema, session.specs)
        after = fm.evaluate(lambda X: predict_tree(candidate, X),
                            session.val_prefixes, session.schema, session.specs)
        return {
            "before": _report_payload(before),
            "after": _report_payload(after),
            "accuracy_delta": after.accuracy - before.accuracy,
            "avg_delta_dp_delta": (
                None if before.avg_delta is None or after.avg_delta is None
                else after.avg_delta - before.avg_delta),
            "candidate_sensitive_splits": _splits_payload(candidate),
            "tree_hash": tree_hash(session.working_tree),
        }

    @app.post("/session/{session_id}/finetune")
    def post_finetune(session_id: str):
        session = store.get(session_id)
        if not session.lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="fine-tune in progress")
        try:
            if session.status != STATUS_REVIEWING:
                raise HTTPException(status_code=409,
                                    detail=f"session is {session.status}")
            session.status = STATUS_FINE_TUNING
            try:
                X, _ = session.samples
                outcome = finetune_and_select(
                    session.model, session.tree, session.working_tree, X,
                    session.val_prefixes, session.specs, session.finetune_config)
                session.outcome = outcome
                session.model_star = outcome.model
            finally:
                session.status = STATUS_REVIEWING
            store.append_event(session, {"kind": "finetune",
                                         "chosen_mode": outcome.chosen_mode})
        finally:
            session.lock.release()
        return {"session_id": session.session_id,
                "status": session.status, **outcome.to_dict()}

    @app.post("/session/{session_id}/close")
    def post_close(session_id: str):
        session = store.get(session_id)
        with session.lock:
            session.status = STATUS_DONE
            store.append_event(session, {"kind": "close"})
        return {"session_id": session.session_id, "status": session.status}

    @app.get("/session/{session_id}/report")
    def get_report(session_id: str):
        session = store.get(session_id)
        return {
            "session_id": session.session_id,
            "status": session.status,
            "before": _report_payload(session.baseline_report()),
            "after": _report_payload(session.current_report()),
            "chosen_mode": (session.outcome.chosen_mode
                            if session.outcome else None),
            "audit_log": [a.to_dict() for a in session.history],
        }

    return app


def session_from_fold(store: SessionStore, config, fold_id) -> ReviewSession:
    """Build a live session from one pipeline fold's artifacts."""
    from .experiment import run_fold

    _, artifacts = run_fold(config, fold_id, keep_artifacts=True)
    ft = FineTuneConfig(train=config.finetune_train,
                        replay_fraction=config.replay_fraction,
                        fairness_threshold=config.fairness_threshold,
                        seed=config.seed)
    return create_session(
        store, schema=artifacts["schema_full"], model=artifacts["model_m"],
        tree=artifacts["tree_d"],
        samples=(artifacts["X_full"], artifacts["teacher_labels"]),
        val_prefixes=artifacts["val_prefixes"], specs=artifacts["specs"],
        session_id=f"{config.name}-fold{fold_id}", finetune_config=ft)
