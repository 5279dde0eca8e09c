"""fairpm: debias next-activity predictors through expert-edited surrogate trees.

Workflow: ingest or synthesize an event log, train the neural predictor,
distill it into a reviewable decision tree, remove unfairly biased splits
(interactively via the review service or scripted from ground-truth
annotations), fine-tune the predictor from the edited tree, and compare
accuracy and demographic-parity gaps against the untouched model and a
sensitive-attribute-free baseline.
"""

from .encoding import (FeatureField, FeatureSchema, build_schema, describe_field,
                       encode, encode_batch, encode_target, encode_targets_batch)
from .eventlog import (ABSENT, PAD_ACTIVITY, CsvMapping, Event, EventLog,
                       LogValidationError, Prefix, Trace, XesParseError,
                       extract_prefixes, parse_csv, parse_xes, split_folds,
                       write_xes)
from .finetune import (FineTuneConfig, FineTuneOutcome, build_targets_all,
                       build_targets_diff, finetune_and_select)
from .metrics import (AggregateReport, DeltaDpResult, FairnessSpec, FoldReport,
                      accuracy, aggregate_folds, delta_dp, evaluate)
from .mlp import (MlpModel, TrainConfig, fine_tune, load_model, predict,
                  predict_index, predict_proba, save_model, train)
from .surgery import (Alteration, SensitiveSplit, apply_discard, apply_retrain,
                      diff_predictions, find_sensitive_splits)
from .synthesis import (AnnotatedLog, DecisionAnnotation, EnrichmentRule,
                        enrich_bpi, enrich_hb, generate_ablation_attrs,
                        generate_ablation_decisions, generate_ablation_strength,
                        generate_bpi_like, generate_cs, generate_hb_like)
from .tree import (DecisionTree, DistillConfig, distill, fidelity, grow_tree,
                   predict_tree, predict_tree_index, tree_from_json, tree_to_json)

__version__ = "0.1.0"
