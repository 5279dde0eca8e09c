"""A scripted tour of the review service's HTTP API.

The same flow the browser UI drives: inspect the tree and its sensitive
splits, preview an edit, commit it, fine-tune, and read the before/after
report. Here the service runs in-process; `fairpm review --config ...`
serves the identical API over the network for the real UI.
"""
from fastapi.testclient import TestClient

from fairpm.experiment import ExperimentConfig, run_fold
from fairpm.service import SessionStore, create_app, create_session

print("preparing one fold's artifacts (train + distill) ...")
config = ExperimentConfig(name="svc-demo", dataset={"kind": "cs", "n_cases": 600},
                          seed=7, folds=5)
_, artifacts = run_fold(config, 0, keep_artifacts=True)

store = SessionStore()
session = create_session(
    store, schema=artifacts["schema_full"], model=artifacts["model_m"],
    tree=artifacts["tree_d"],
    samples=(artifacts["X_full"], artifacts["teacher_labels"]),
    val_prefixes=artifacts["val_prefixes"], specs=artifacts["specs"],
    session_id="demo")
client = TestClient(create_app(store))

# ---------------------------------------------------------------------------
payload = client.get("/session/demo/tree").json()
print(f"\nGET /session/demo/tree -> status={payload['status']}, "
      f"hash={payload['tree_hash'][:12]}")
print("sensitive splits flagged for review:")
from fairpm.surgery import node_window_context

contexts = {}
for split in payload["sensitive_splits"]:
    ctx = node_window_context(session.tree, artifacts["X_full"],
                              tuple(split["node_path"]))
    contexts[tuple(split["node_path"])] = ctx
    print(f"  {'/'.join(split['node_path']) or 'root':16s} {split['text']} "
          f"({split['n_samples']} samples, decision context: {ctx})")

# the reviewer judges context: gender at the consultation-priority decision
# is the unjustified use (screening by gender is medically warranted)
unfair = next(s for s in payload["sensitive_splits"]
              if contexts[tuple(s["node_path"])] == "register patient")

# ---------------------------------------------------------------------------
print("\nPOST /session/demo/whatif (preview, nothing committed)")
preview = client.post("/session/demo/whatif", json={
    "node_path": unfair["node_path"], "strategy": "retrain",
    "exclude": ["gender", "age"]}).json()
print(f"  accuracy delta {preview['accuracy_delta']:+.4f}, "
      f"parity-gap delta {preview['avg_delta_dp_delta']}")

print("\nPOST /session/demo/alterations (commit the retrain)")
committed = client.post("/session/demo/alterations", json={
    "node_path": unfair["node_path"], "strategy": "retrain",
    "exclude": ["gender", "age"]}).json()
print(f"  alterations on record: {committed['n_alterations']}, "
      f"remaining sensitive splits: {len(committed['sensitive_splits'])}")

# ---------------------------------------------------------------------------
print("\n(the age-based prevention advice is also annotated unfair; "
      "remove those splits too, re-reading the tree after every edit)")
while True:
    age_splits = [s for s in committed["sensitive_splits"]
                  if s["attribute"] == "age"]
    if not age_splits:
        break
    committed = client.post("/session/demo/alterations", json={
        "node_path": age_splits[0]["node_path"], "strategy": "retrain",
        "exclude": ["age"]}).json()
print(f"  alterations on record: {committed['n_alterations']}, "
      f"remaining sensitive splits: {len(committed['sensitive_splits'])}")

print("\nPOST /session/demo/finetune (rebuild the predictor from the edit)")
outcome = client.post("/session/demo/finetune").json()
print(f"  chosen target mode: {outcome['chosen_mode']}")
for mode, cand in outcome["candidates"].items():
    print(f"  {mode}: accuracy={cand['accuracy']:.3f} "
          f"max parity gap={cand['max_delta_dp']:.3f}")

report = client.get("/session/demo/report").json()
b, a = report["before"], report["after"]
print("\nGET /session/demo/report (before vs after)")
print(f"  accuracy   {b['accuracy']:.3f} -> {a['accuracy']:.3f}")
print(f"  parity gap {b['avg_delta_dp']:.3f} -> {a['avg_delta_dp']:.3f}")
print(f"  audit log: {len(report['audit_log'])} alteration(s)")
