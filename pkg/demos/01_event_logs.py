"""Event logs end to end: synthesize, serialize, re-ingest, and window.

The screening simulator produces traces whose demographic case attributes
drive some decisions fairly and others unfairly; everything downstream
(training, distillation, review) consumes the prefix windows built here.
"""
import collections

from fairpm import extract_prefixes, generate_cs, parse_xes, split_folds, write_xes

# ---------------------------------------------------------------------------
# Generate a small screening log. Everything is seeded: the same call
# reproduces the same log byte for byte.
annotated = generate_cs(n_cases=500, seed=7)
log = annotated.log
print(f"{len(log.traces)} traces, alphabet of {len(log.activity_alphabet)}:")
for activity in log.activity_alphabet:
    print(f"  - {activity}")

print("\nGround-truth decision annotations:")
for ann in annotated.annotations:
    print(f"  {ann.name}: {ann.label} use of {ann.attributes} "
          f"(strength {ann.strength}) at {ann.context_activities}")

# ---------------------------------------------------------------------------
# One trace in detail.
trace = log.traces[0]
print(f"\ncase {trace.case_id} "
      f"(gender={trace.case_attributes['gender']}, "
      f"age={trace.case_attributes['age']}):")
for event in trace.events:
    print(f"  {event.timestamp.isoformat()}  {event.activity}")

# ---------------------------------------------------------------------------
# Round trip through the XES serialization.
payload = write_xes(log)
again = parse_xes(payload)
print(f"\nXES round trip: {len(payload)} bytes, "
      f"field-equal after reparse: {again == log}")

# ---------------------------------------------------------------------------
# Prefix windows are the model inputs: every trace of length n yields n-1
# windows, left-padded to the configured width.
prefixes = extract_prefixes(log, window=3)
print(f"\n{len(prefixes)} prefixes "
      f"(= sum of trace lengths minus one per trace)")
targets = collections.Counter(p.target_activity for p in prefixes)
print("next-activity target distribution:")
for activity, count in targets.most_common(5):
    print(f"  {count:5d}  {activity}")

# ---------------------------------------------------------------------------
# Trace-level validation folds.
folds = split_folds(log, k=5, seed=1)
sizes = [(len(train.traces), len(val.traces)) for train, val in folds]
print(f"\n5-fold split sizes (train, validation): {sizes}")
