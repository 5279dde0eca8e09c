"""Teacher training, tree distillation, and manual surgery on one fold.

This walks the core loop by hand: encode prefixes, train the predictor,
distill it into a reviewable tree, locate splits on sensitive attributes,
remove an unfair one, and inspect what changed.
"""
import numpy as np

from fairpm import (build_targets_diff, build_schema, distill, encode_batch,
                    encode_targets_batch, extract_prefixes, fidelity,
                    find_sensitive_splits, generate_cs, predict_index, train)
from fairpm.mlp import TrainConfig
from fairpm.surgery import apply_retrain, node_window_context
from fairpm.tree import DistillConfig, LeafNode

annotated = generate_cs(n_cases=1200, seed=7)
prefixes = extract_prefixes(annotated.log, window=3)
schema = build_schema(prefixes, sensitive_attrs=annotated.sensitive_attributes)
X = encode_batch(prefixes, schema)
Y = encode_targets_batch([p.target_activity for p in prefixes], schema)
print(f"{len(prefixes)} prefixes encoded into {X.shape[1]} features")

# ---------------------------------------------------------------------------
# The teacher: a feedforward net on the full schema (sensitive attrs included).
model = train((X, Y), TrainConfig(), seed=0, schema=schema)
train_acc = np.mean(predict_index(model, X) == Y.argmax(axis=1))
print(f"teacher training accuracy: {train_acc:.3f}")

# ---------------------------------------------------------------------------
# Distill into a decision tree the reviewer can actually read.
config = DistillConfig(max_depth=10, min_samples_leaf=20, min_gain=0.01)
tree = distill(model, X, config)
print(f"surrogate tree: {tree.n_nodes()} nodes, depth {tree.depth()}, "
      f"fidelity to the teacher {fidelity(tree, model, X):.3f}")


def show(node, indent=0):
    pad = "  " * indent
    if isinstance(node, LeafNode):
        label = tree.schema.prediction_alphabet[node.prediction]
        print(f"{pad}-> {label}  ({node.n_samples} samples)")
        return
    print(f"{pad}[{node.text}]  ({node.n_samples} samples)")
    if indent < 2:
        show(node.left, indent + 1)
        show(node.right, indent + 1)
    else:
        print(f"{pad}  ...")


print("\ntop of the tree:")
show(tree.root)

# ---------------------------------------------------------------------------
# Where does the tree consult demographics?
teacher_labels = predict_index(model, X)
print("\nsensitive splits (candidate review items):")
for entry in find_sensitive_splits(tree):
    context = node_window_context(tree, X, entry.node_path)
    print(f"  depth {entry.depth}, {entry.n_samples} samples: {entry.text} "
          f"(decision context: {context})")

# ---------------------------------------------------------------------------
# The consultation-priority decision is annotated unfair; regrow that subtree
# without gender and see which predictions change.
target = next(e for e in find_sensitive_splits(tree)
              if node_window_context(tree, X, e.node_path) == "register patient")
edited = apply_retrain(tree, target.node_path, ("gender",), (X, teacher_labels),
                       config)
print(f"\nafter retraining at {'/'.join(target.node_path) or 'root'} "
      f"without gender:")
print(f"  sensitive splits left: {len(find_sensitive_splits(edited))} "
      f"(the mammary-screening split is a justified use and stays)")

_, _, changed = build_targets_diff(tree, edited, X)
by_gender = {"female": 0, "male": 0}
for i in changed:
    by_gender[prefixes[i].case_attributes["gender"]] += 1
print(f"  predictions changed on {len(changed)} prefixes: {by_gender}")
print("  (the edit only touches one demographic group, as expected for a "
      "decision that gated on gender)")
