"""Deterministic encoding of prefix windows into fixed-width numeric vectors.

The same schema feeds the neural predictor and the surrogate decision tree,
so every vector column maps back to a named, human-readable condition.
Feature vectors are plain float64 numpy arrays aligned to a FeatureSchema.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np

from .eventlog import ABSENT, PAD_ACTIVITY


@dataclass(frozen=True)
class FeatureField:
    """One vector column.

    source is one of:
      ``activity``  - one-hot slot for a window position's activity
      ``elapsed``   - scaled time delta at a window position
      ``case``      - case attribute (one-hot slot or scaled numeric)
      ``payload``   - event payload attribute at a window position
    """

    name: str
    source: str
    encoding: str  # "onehot" | "minmax"
    slot: int | None = None
    attribute: str | None = None
    category: str | None = None
    lo: float = 0.0
    hi: float = 1.0
    sensitive: bool = False


@dataclass(frozen=True)
class FeatureSchema:
    window: int
    fields: tuple
    prediction_alphabet: tuple  # activities the model may predict (no PAD)
    elapsed_mode: str = "delta"  # or "since_case_start"

    @property
    def width(self):
        return len(self.fields)

    def field_names(self):
        return [f.name for f in self.fields]

    def sensitive_indices(self):
        return [i for i, f in enumerate(self.fields) if f.sensitive]

    def indices_for_attributes(self, attributes) -> set:
        """Schema indices of every field sourced from one of the attributes."""
        wanted = set(attributes)
        return {i for i, f in enumerate(self.fields) if f.attribute in wanted}

    def to_json(self) -> str:
        doc = {
            "format": "fairpm-schema/1",
            "window": self.window,
            "elapsed_mode": self.elapsed_mode,
            "prediction_alphabet": list(self.prediction_alphabet),
            "fields": [
                {
                    "name": f.name, "source": f.source, "encoding": f.encoding,
                    "slot": f.slot, "attribute": f.attribute,
                    "category": f.category, "lo": f.lo, "hi": f.hi,
                    "sensitive": f.sensitive,
                }
                for f in self.fields
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text) -> "FeatureSchema":
        doc = json.loads(text)
        fields = tuple(
            FeatureField(name=d["name"], source=d["source"], encoding=d["encoding"],
                         slot=d["slot"], attribute=d["attribute"],
                         category=d["category"], lo=d["lo"], hi=d["hi"],
                         sensitive=d["sensitive"])
            for d in doc["fields"]
        )
        return cls(window=doc["window"], fields=fields,
                   prediction_alphabet=tuple(doc["prediction_alphabet"]),
                   elapsed_mode=doc["elapsed_mode"])

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


def build_schema(train_prefixes, sensitive_attrs=(), include_sensitive=True,
                 include_elapsed=True, elapsed_mode="delta",
                 payload_attrs=()) -> FeatureSchema:
    """Derive a schema from training prefixes only.

    Per window slot: an activity one-hot group (full training alphabet plus
    PAD) and, when include_elapsed, a min-max scaled time delta. Case
    attributes become one-hot groups (categorical) or scaled numerics.
    With include_sensitive=False every field sourced from a sensitive
    attribute is omitted, which is how the sensitive-free baseline schema
    is built.
    """
    prefixes = list(train_prefixes)
    if not prefixes:
        raise ValueError("cannot build a schema from zero prefixes")
    window = len(prefixes[0].events)
    sensitive = set(sensitive_attrs)

    activities = set()
    for p in prefixes:
        activities.update(e.activity for e in p.events)
        activities.add(p.target_activity)
    activities.discard(PAD_ACTIVITY)
    prediction_alphabet = tuple(sorted(activities))
    slot_values = tuple(sorted(activities | {PAD_ACTIVITY}))

    elapsed_bounds = None
    if include_elapsed:
        deltas = _elapsed_matrix(prefixes, window, elapsed_mode)
        elapsed_bounds = (float(deltas.min()), float(deltas.max()))

    fields = []
    for slot in range(window):
        for value in slot_values:
            fields.append(FeatureField(
                name=f"event[{slot}].activity={value}", source="activity",
                encoding="onehot", slot=slot, category=value))
        if include_elapsed:
            lo, hi = elapsed_bounds
            fields.append(FeatureField(
                name=f"event[{slot}].elapsed", source="elapsed",
                encoding="minmax", slot=slot, lo=lo, hi=hi))

    for name, kind, values, lo, hi in _case_attribute_specs(prefixes):
        is_sensitive = name in sensitive
        if is_sensitive and not include_sensitive:
            continue
        if kind == "categorical":
            for value in values:
                fields.append(FeatureField(
                    name=f"case.{name}={value}", source="case", encoding="onehot",
                    attribute=name, category=value, sensitive=is_sensitive))
        else:
            fields.append(FeatureField(
                name=f"case.{name}", source="case", encoding="minmax",
                attribute=name, lo=lo, hi=hi, sensitive=is_sensitive))

    for attr in payload_attrs:
        if attr in sensitive and not include_sensitive:
            continue
        spec = _payload_attribute_spec(prefixes, window, attr)
        if spec is None:
            continue
        kind, values, lo, hi = spec
        is_sensitive = attr in sensitive
        for slot in range(window):
            if kind == "categorical":
                for value in values:
                    fields.append(FeatureField(
                        name=f"event[{slot}].{attr}={value}", source="payload",
                        encoding="onehot", slot=slot, attribute=attr,
                        category=value, sensitive=is_sensitive))
            else:
                fields.append(FeatureField(
                    name=f"event[{slot}].{attr}", source="payload",
                    encoding="minmax", slot=slot, attribute=attr,
                    lo=lo, hi=hi, sensitive=is_sensitive))

    return FeatureSchema(window=window, fields=tuple(fields),
                         prediction_alphabet=prediction_alphabet,
                         elapsed_mode=elapsed_mode)


def encode(prefix, schema: FeatureSchema) -> np.ndarray:
    """Encode one prefix; pure and total on valid prefixes."""
    return encode_batch([prefix], schema)[0]


def encode_batch(prefixes, schema: FeatureSchema) -> np.ndarray:
    """Vectorized encoding of many prefixes into an (n, width) matrix.

    PAD slots select the PAD one-hot and zero elapsed time; categorical
    values unseen at schema-build time yield an all-zero group; numerics
    are min-max scaled and clamped to [0, 1].
    """
    prefixes = list(prefixes)
    n = len(prefixes)
    X = np.zeros((n, schema.width), dtype=np.float64)
    if n == 0:
        return X
    for p in prefixes:
        if len(p.events) != schema.window:
            raise ValueError(
                f"prefix window {len(p.events)} does not match schema "
                f"window {schema.window}")

    col = 0
    elapsed = None
    for field_group in _grouped_fields(schema):
        kind = field_group[0].source
        if kind == "activity":
            slot = field_group[0].slot
            index = {f.category: col + j for j, f in enumerate(field_group)}
            rows = np.arange(n)
            cols = np.array([index.get(p.events[slot].activity, -1)
                             for p in prefixes])
            mask = cols >= 0
            X[rows[mask], cols[mask]] = 1.0
        elif kind == "elapsed":
            if elapsed is None:
                elapsed = _elapsed_matrix(prefixes, schema.window,
                                          schema.elapsed_mode)
            f = field_group[0]
            X[:, col] = _scale(elapsed[:, f.slot], f.lo, f.hi)
        elif kind == "case" and field_group[0].encoding == "onehot":
            attr = field_group[0].attribute
            index = {f.category: col + j for j, f in enumerate(field_group)}
            rows = np.arange(n)
            cols = np.array([index.get(_as_category(p.case_attributes.get(attr, ABSENT)), -1)
                             for p in prefixes])
            mask = cols >= 0
            X[rows[mask], cols[mask]] = 1.0
        elif kind == "case":
            f = field_group[0]
            raw = np.array([_as_number(p.case_attributes.get(f.attribute, ABSENT))
                            for p in prefixes])
            X[:, col] = _scale_with_absent(raw, f.lo, f.hi)
        elif kind == "payload" and field_group[0].encoding == "onehot":
            attr, slot = field_group[0].attribute, field_group[0].slot
            index = {f.category: col + j for j, f in enumerate(field_group)}
            rows = np.arange(n)
            cols = np.array([index.get(_as_category(p.events[slot].attr(attr)), -1)
                             for p in prefixes])
            mask = cols >= 0
            X[rows[mask], cols[mask]] = 1.0
        else:  # payload numeric
            f = field_group[0]
            raw = np.array([_as_number(p.events[f.slot].attr(f.attribute))
                            for p in prefixes])
            X[:, col] = _scale_with_absent(raw, f.lo, f.hi)
        col += len(field_group)
    return X


def encode_target(activity, schema: FeatureSchema) -> np.ndarray:
    """One-hot over the prediction alphabet; unknown activities are an error."""
    y = np.zeros(len(schema.prediction_alphabet), dtype=np.float64)
    y[target_index(activity, schema)] = 1.0
    return y


def encode_targets_batch(activities, schema: FeatureSchema) -> np.ndarray:
    idx = np.array([target_index(a, schema) for a in activities])
    Y = np.zeros((len(idx), len(schema.prediction_alphabet)), dtype=np.float64)
    if len(idx):
        Y[np.arange(len(idx)), idx] = 1.0
    return Y


def target_index(activity, schema: FeatureSchema) -> int:
    try:
        return schema.prediction_alphabet.index(activity)
    except ValueError:
        raise ValueError(f"activity {activity!r} is not in the prediction "
                         f"alphabet") from None


def decode_target(index, schema: FeatureSchema) -> str:
    return schema.prediction_alphabet[int(index)]


def describe_field(schema: FeatureSchema, index: int) -> str:
    """Human-readable condition text for a vector column, e.g.
    ``case.gender = female`` or ``event[2].activity = A_PREACCEPTED``.
    Sensitive fields are marked."""
    if not 0 <= index < schema.width:
        raise IndexError(f"field index {index} out of range 0..{schema.width - 1}")
    f = schema.fields[index]
    if f.source == "activity":
        text = f"event[{f.slot}].activity = {f.category}"
    elif f.source == "elapsed":
        text = f"event[{f.slot}].elapsed"
    elif f.source == "case" and f.encoding == "onehot":
        text = f"case.{f.attribute} = {f.category}"
    elif f.source == "case":
        text = f"case.{f.attribute}"
    elif f.encoding == "onehot":
        text = f"event[{f.slot}].{f.attribute} = {f.category}"
    else:
        text = f"event[{f.slot}].{f.attribute}"
    if f.sensitive:
        text += " [sensitive]"
    return text


def strip_sensitive(schema: FeatureSchema) -> FeatureSchema:
    """Schema with every sensitive-flagged field removed (baseline view)."""
    kept = tuple(f for f in schema.fields if not f.sensitive)
    return replace(schema, fields=kept)


# -- internals ---------------------------------------------------------------

def _grouped_fields(schema):
    """Consecutive fields that form one logical group (one-hot runs)."""
    groups = []
    current = []
    key = None
    for f in schema.fields:
        k = (f.source, f.encoding, f.slot, f.attribute)
        if f.encoding == "onehot" and k == key:
            current.append(f)
            continue
        if current:
            groups.append(current)
        current = [f]
        key = k if f.encoding == "onehot" else None
    if current:
        groups.append(current)
    return groups


def _elapsed_matrix(prefixes, window, mode):
    out = np.zeros((len(prefixes), window), dtype=np.float64)
    for r, p in enumerate(prefixes):
        events = p.events
        for i in range(window):
            if events[i].activity == PAD_ACTIVITY:
                continue
            if mode == "since_case_start":
                out[r, i] = (events[i].timestamp - p.case_start).total_seconds()
            elif i > 0 and events[i - 1].activity != PAD_ACTIVITY:
                out[r, i] = (events[i].timestamp
                             - events[i - 1].timestamp).total_seconds()
    return out


def _case_attribute_specs(prefixes):
    """(name, kind, categories, lo, hi) per case attribute, sorted by name."""
    values: dict[str, list] = {}
    for p in prefixes:
        for name, v in p.case_attributes.items():
            values.setdefault(name, []).append(v)
    specs = []
    for name in sorted(values):
        vs = [v for v in values[name] if v is not ABSENT]
        if not vs:
            continue
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vs):
            arr = np.asarray(vs, dtype=np.float64)
            specs.append((name, "numeric", (), float(arr.min()), float(arr.max())))
        else:
            cats = tuple(sorted({_as_category(v) for v in vs}))
            specs.append((name, "categorical", cats, 0.0, 1.0))
    return specs


def _payload_attribute_spec(prefixes, window, attr):
    vs = []
    for p in prefixes:
        for e in p.events:
            if e.activity == PAD_ACTIVITY:
                continue
            v = e.attr(attr)
            if v is not ABSENT:
                vs.append(v)
    if not vs:
        return None
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vs):
        arr = np.asarray(vs, dtype=np.float64)
        return ("numeric", (), float(arr.min()), float(arr.max()))
    return ("categorical", tuple(sorted({_as_category(v) for v in vs})), 0.0, 1.0)


def _as_category(value):
    if value is ABSENT:
        return None
    return value if isinstance(value, str) else str(value)


def _as_number(value):
    # absent values are marked with nan and forced to 0 after scaling
    if value is ABSENT or not isinstance(value, (int, float)) or isinstance(value, bool):
        return np.nan
    return float(value)


def _scale(values, lo, hi):
    if hi <= lo:
        return np.zeros_like(values)
    return np.clip((values - lo) / (hi - lo), 0.0, 1.0)


def _scale_with_absent(values, lo, hi):
    scaled = _scale(values, lo, hi)
    scaled[np.isnan(values)] = 0.0
    return scaled
