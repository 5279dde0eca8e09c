"""Live review-service fixture for the end-to-end UI test.

Trains one small fold, opens a session named "e2e", and serves the API on
the port given by the PORT environment variable (default 8377).
"""
import os

import uvicorn

from fairpm.experiment import ExperimentConfig
from fairpm.mlp import TrainConfig
from fairpm.service import SessionStore, create_app, create_session
from fairpm.finetune import FineTuneConfig
from fairpm.experiment import run_fold

config = ExperimentConfig(name="e2e", dataset={"kind": "cs", "n_cases": 240},
                          folds=2, seed=8,
                          finetune_train=TrainConfig(epochs=3))
_, artifacts = run_fold(config, 0, keep_artifacts=True)
store = SessionStore()
create_session(
    store, schema=artifacts["schema_full"], model=artifacts["model_m"],
    tree=artifacts["tree_d"],
    samples=(artifacts["X_full"], artifacts["teacher_labels"]),
    val_prefixes=artifacts["val_prefixes"][:400], specs=artifacts["specs"],
    session_id="e2e",
    finetune_config=FineTuneConfig(train=TrainConfig(epochs=3)))

port = int(os.environ.get("PORT", "8377"))
print(f"READY e2e {port}", flush=True)
uvicorn.run(create_app(store), host="127.0.0.1", port=port, log_level="error")
