"""Seeded benchmark-log construction.

Three families, all deterministic for a fixed seed via per-case RNG streams
derived from (seed, case index):

* a simulated cancer-screening process whose demographic case attributes
  drive three decisions (one medically justified, two not),
* enrichment rules that attach demographic attributes to loan-application
  and hospital-billing style logs so that existing routing decisions become
  (partially) explainable, plus structural surrogate generators for both
  log shapes so the full pipeline can run without the original datasets,
* parameterized variants (attribute count, bias strength, decision count)
  for sensitivity studies.

Every generated log ships ground-truth decision annotations: which decision
is driven by which attributes, at which strength, and whether that use is
considered fair. Scripted review sessions consume these annotations in
place of a human expert.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from .eventlog import Event, EventLog, Trace, as_utc_ms

_EPOCH = datetime(2024, 1, 5, 8, 0, tzinfo=timezone.utc)


@dataclass(frozen=True)
class DecisionAnnotation:
    """Ground truth for one decision point of a generated process."""

    name: str
    context_activities: tuple  # last-activity labels at the decision point
    attributes: tuple  # sensitive attributes driving the decision
    label: str  # "fair" | "unfair"
    strength: float  # probability the outcome follows the attributes

    def to_dict(self):
        return {"name": self.name,
                "context_activities": list(self.context_activities),
                "attributes": list(self.attributes),
                "label": self.label, "strength": self.strength}

    @classmethod
    def from_dict(cls, doc):
        return cls(name=doc["name"],
                   context_activities=tuple(doc["context_activities"]),
                   attributes=tuple(doc["attributes"]),
                   label=doc["label"], strength=doc["strength"])


@dataclass(frozen=True)
class AnnotatedLog:
    log: EventLog
    annotations: tuple
    sensitive_attributes: tuple

    def unfair(self):
        return tuple(a for a in self.annotations if a.label == "unfair")


def annotations_to_json(annotated: AnnotatedLog) -> str:
    return json.dumps({
        "sensitive_attributes": list(annotated.sensitive_attributes),
        "decisions": [a.to_dict() for a in annotated.annotations],
    }, indent=2, sort_keys=True)


def annotations_from_json(text):
    doc = json.loads(text)
    return (tuple(DecisionAnnotation.from_dict(d) for d in doc["decisions"]),
            tuple(doc["sensitive_attributes"]))


@dataclass(frozen=True)
class EnrichmentRule:
    """Assign ``attribute=value`` with probability p (complement otherwise)
    when the trigger matches; rules apply in declared order, first match
    wins per attribute."""

    name: str
    attribute: str
    value: str
    complement: str
    p: float
    trigger: object  # callable(Trace) -> bool

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("rule probability must lie in [0, 1]")


def apply_enrichment(log: EventLog, rules, defaults, seed) -> EventLog:
    """Run an ordered ruleset over every trace; ``defaults`` maps attribute
    to a callable(rng) used when no rule matches."""
    attributes = sorted({r.attribute for r in rules} | set(defaults))
    traces = []
    for i, trace in enumerate(log.traces):
        rng = np.random.default_rng([seed, i])
        attrs = dict(trace.case_attributes)
        for attribute in attributes:
            hit = None
            for rule in rules:
                if rule.attribute == attribute and rule.trigger(trace):
                    hit = rule
                    break
            if hit is not None:
                chosen = hit.value if rng.random() < hit.p else hit.complement
            else:
                chosen = defaults[attribute](rng)
            attrs[attribute] = chosen
        traces.append(Trace(case_id=trace.case_id, events=trace.events,
                            case_attributes=attrs))
    return EventLog.from_traces(traces)


# -- cancer screening --------------------------------------------------------

CS_REGISTER = "register patient"
CS_PRIORITY = "priority consultation"
CS_STANDARD = "standard consultation"
CS_MAMMARY = "mammary cancer screening"
CS_GENERAL = "general cancer screening"
CS_LAB = "laboratory analysis"
CS_PREVENTION = "inform prevention measures"
CS_DIAGNOSIS = "discuss diagnosis and treatment"
CS_LETTER = "send summary letter"
CS_CALL = "schedule follow-up call"
CS_REPORT = "compile final report"
CS_ARCHIVE = "archive case"
CS_CLOSE = "close case"

#: Default strength of the unfair consultation-priority decision. Together
#: with the deterministic screening step and the 70/30 prevention advice it
#: reproduces the reference accuracy spread between the three models.
CS_GENDER_STRENGTH = 0.73
CS_AGE_STRENGTH = 0.70
#: Prevention-advice probability for patients below the age threshold.
CS_AGE_LOW_RATE = 0.20
CS_AGE_THRESHOLD = 50.0
#: Median of the sum of two exponential service delays (mean 3600 s each);
#: the contact decision flips its preferred branch at this workload level.
CS_SLA_SECONDS = 6042.0
CS_SLA_STRENGTH = 0.85


def sample_age(rng, mu=45.0, sigma=10.0, lo=20.0, hi=85.0):
    """Normal draw constrained to [lo, hi] by rejection (no boundary spikes)."""
    while True:
        age = rng.normal(mu, sigma)
        if lo <= age <= hi:
            return float(age)


def generate_cs(n_cases, seed, gender_strength=CS_GENDER_STRENGTH,
                age_strength=CS_AGE_STRENGTH,
                age_low_rate=CS_AGE_LOW_RATE) -> AnnotatedLog:
    """Simulate the screening process.

    Per case: age ~ Normal(45, 10) resampled into [20, 85], gender uniform.
    Decisions: (1) consultation priority follows gender at
    ``gender_strength`` (unfair), (2) gender=female always routes to mammary
    screening (fair, medically justified), (3) patients aged >= 50 receive
    prevention advice with probability ``age_strength``, younger ones with
    probability ``age_low_rate`` (unfair). A fourth, demographics-free
    contact decision depends on the combined service delay of the two
    preceding steps (an SLA-style diagonal rule, which favors models that
    can combine numeric features over axis-aligned splits), and three
    deterministic wrap-up steps close every case.
    """
    traces = []
    for i in range(n_cases):
        rng = np.random.default_rng([seed, i])
        age = round(sample_age(rng), 2)  # decisions use the recorded value
        gender = "female" if rng.random() < 0.5 else "male"

        builder = _TraceBuilder(f"cs-{i:06d}", i, rng,
                                {"gender": gender, "age": age})
        builder.add(CS_REGISTER)
        aligned = rng.random() < gender_strength
        if gender == "male":
            builder.add(CS_PRIORITY if aligned else CS_STANDARD)
        else:
            builder.add(CS_STANDARD if aligned else CS_PRIORITY)
        builder.add(CS_MAMMARY if gender == "female" else CS_GENERAL)
        builder.add(CS_LAB)
        p_advice = age_strength if age >= CS_AGE_THRESHOLD else age_low_rate
        builder.add(CS_PREVENTION if rng.random() < p_advice else CS_DIAGNOSIS)
        # demographics-free contact decision on cumulative recent workload
        backlog = builder.delay(-2) + builder.delay(-1)
        p_letter = CS_SLA_STRENGTH if backlog < CS_SLA_SECONDS \
            else 1.0 - CS_SLA_STRENGTH
        builder.add(CS_LETTER if rng.random() < p_letter else CS_CALL)
        builder.add(CS_REPORT)
        builder.add(CS_ARCHIVE)
        builder.add(CS_CLOSE)
        traces.append(builder.trace())

    annotations = (
        DecisionAnnotation("consultation-priority", (CS_REGISTER,),
                           ("gender",), "unfair", gender_strength),
        DecisionAnnotation("screening-selection", (CS_PRIORITY, CS_STANDARD),
                           ("gender",), "fair", 1.0),
        DecisionAnnotation("prevention-advice", (CS_LAB,),
                           ("age",), "unfair", age_strength),
    )
    return AnnotatedLog(log=EventLog.from_traces(traces),
                        annotations=annotations,
                        sensitive_attributes=("age", "gender"))


# -- sensitivity-study variants ----------------------------------------------

def generate_ablation_strength(b, n_cases, seed) -> AnnotatedLog:
    """Screening process with both unfair decisions following their attribute
    with probability b (0.5 = independent, 1.0 = deterministic)."""
    if not 0.5 <= b <= 1.0:
        raise ValueError("bias strength must lie in [0.5, 1.0]")
    return generate_cs(n_cases, seed, gender_strength=b, age_strength=b,
                       age_low_rate=1.0 - b)


def generate_ablation_attrs(k, n_cases, seed) -> AnnotatedLog:
    """k sensitive markers jointly drive one unfair and one fair decision.

    A latent binary profile decides both branches; each marker equals the
    profile with probability 0.9 (exactly, for k = 1), so every marker
    correlates with both decisions and removing one leaves proxies behind.
    """
    if not 1 <= k <= 10:
        raise ValueError("attribute count must lie in 1..10")
    copy_p = 1.0 if k == 1 else 0.9
    names = tuple(f"marker_{j:02d}" for j in range(k))
    traces = []
    for i in range(n_cases):
        rng = np.random.default_rng([seed, i])
        profile = rng.random() < 0.5
        attrs = {}
        for name in names:
            match = rng.random() < copy_p
            attrs[name] = ("pos" if profile else "neg") if match else \
                ("neg" if profile else "pos")
        builder = _TraceBuilder(f"ab-{i:06d}", i, rng, attrs)
        builder.add(CS_REGISTER)
        aligned = rng.random() < CS_GENDER_STRENGTH
        if profile:
            builder.add(CS_PRIORITY if aligned else CS_STANDARD)
        else:
            builder.add(CS_STANDARD if aligned else CS_PRIORITY)
        builder.add("extended screening" if profile else "basic screening")
        builder.add(CS_LAB)
        builder.add(CS_REPORT)
        builder.add(CS_CLOSE)
        traces.append(builder.trace())

    annotations = (
        DecisionAnnotation("consultation-priority", (CS_REGISTER,),
                           names, "unfair", CS_GENDER_STRENGTH),
        DecisionAnnotation("screening-selection", (CS_PRIORITY, CS_STANDARD),
                           names, "fair", 1.0),
    )
    return AnnotatedLog(log=EventLog.from_traces(traces),
                        annotations=annotations, sensitive_attributes=names)


def generate_ablation_decisions(d, n_cases, seed) -> AnnotatedLog:
    """A chain of d decisions alternating unfair (strength 0.73) and fair
    (deterministic), each driven by its own binary sensitive factor."""
    if d < 2 or d % 2 != 0:
        raise ValueError("decision count must be an even integer >= 2")
    names = tuple(f"factor_{j:02d}" for j in range(1, d + 1))
    traces = []
    for i in range(n_cases):
        rng = np.random.default_rng([seed, i])
        attrs = {name: ("pos" if rng.random() < 0.5 else "neg")
                 for name in names}
        builder = _TraceBuilder(f"dc-{i:06d}", i, rng, attrs)
        builder.add("intake")
        for j, name in enumerate(names, start=1):
            unfair = j % 2 == 1
            strength = 0.73 if unfair else 1.0
            aligned = rng.random() < strength
            positive = attrs[name] == "pos"
            expedite = positive if aligned else not positive
            builder.add(f"stage{j:02d} {'expedited' if expedite else 'standard'}")
        builder.add("closure")
        traces.append(builder.trace())

    annotations = []
    for j, name in enumerate(names, start=1):
        context = ("intake",) if j == 1 else (
            f"stage{j - 1:02d} expedited", f"stage{j - 1:02d} standard")
        annotations.append(DecisionAnnotation(
            name=f"stage-{j:02d}", context_activities=context,
            attributes=(name,), label="unfair" if j % 2 == 1 else "fair",
            strength=0.73 if j % 2 == 1 else 1.0))
    return AnnotatedLog(log=EventLog.from_traces(traces),
                        annotations=tuple(annotations),
                        sensitive_attributes=names)


# -- loan applications (bpi shape) --------------------------------------------

A_SUBMITTED = "A_SUBMITTED"
A_PARTLY = "A_PARTLYSUBMITTED"
A_PREACCEPTED = "A_PREACCEPTED"
A_DECLINED = "A_DECLINED"
A_ACCEPTED = "A_ACCEPTED"
A_FINALIZED = "A_FINALIZED"
A_APPROVED = "A_APPROVED"
A_REGISTERED = "A_REGISTERED"
A_ACTIVATED = "A_ACTIVATED"
A_CANCELLED = "A_CANCELLED"

_BPI_REQUIRED = (A_SUBMITTED, A_PARTLY)


def _first_after(trace, activity):
    acts = [e.activity for e in trace.events]
    try:
        pos = acts.index(activity)
    except ValueError:
        return None
    return acts[pos + 1] if pos + 1 < len(acts) else None


def _has(activity):
    return lambda trace: any(e.activity == activity for e in trace.events)


def _first_decision_is(value):
    return lambda trace: _first_after(trace, A_PARTLY) == value


def bpi_ruleset():
    """The gender assignment rules for loan-application logs.

    The final approve/cancel outcome (treated as a fair, explainable
    correlation) takes precedence over the earlier pre-accept/decline
    decision (treated as unfair); untriggered cases draw uniformly.
    """
    return (
        EnrichmentRule("approved->female", "gender", "female", "male", 0.7,
                       _has(A_APPROVED)),
        EnrichmentRule("cancelled->male", "gender", "female", "male", 0.3,
                       _has(A_CANCELLED)),
        EnrichmentRule("preaccepted->female", "gender", "female", "male", 0.7,
                       _first_decision_is(A_PREACCEPTED)),
        EnrichmentRule("declined->male", "gender", "male", "female", 0.7,
                       _first_decision_is(A_DECLINED)),
    )


def enrich_bpi(log: EventLog, seed) -> AnnotatedLog:
    """Attach the gender attribute to a loan-application log via the ruleset."""
    missing = [a for a in _BPI_REQUIRED if a not in log.activity_alphabet]
    if missing or not ({A_PREACCEPTED, A_DECLINED} & set(log.activity_alphabet)):
        raise ValueError(f"log lacks required loan-application activities: "
                         f"{missing or [A_PREACCEPTED, A_DECLINED]}")
    enriched = apply_enrichment(
        log, bpi_ruleset(),
        {"gender": lambda rng: "female" if rng.random() < 0.5 else "male"},
        seed)
    annotations = (
        DecisionAnnotation("preaccept-or-decline", (A_PARTLY,),
                           ("gender",), "unfair", 0.7),
        DecisionAnnotation("approve-or-cancel", (A_FINALIZED,),
                           ("gender",), "fair", 0.7),
    )
    return AnnotatedLog(log=enriched, annotations=annotations,
                        sensitive_attributes=("gender",))


def generate_bpi_like(n_cases, seed) -> EventLog:
    """Structural surrogate for the loan-application subprocess.

    Requested amounts influence the pre-accept decision (56.3% pre-accepted
    overall): small requests are pre-accepted at 0.84, mid-sized ones at
    0.55 (the band where the enriched gender attribute genuinely tips the
    decision), large ones at 0.30. Pre-accepted cases are approved (35%),
    cancelled (40.5%), or declined late. Carries no gender attribute;
    ``enrich_bpi`` adds it.
    """
    bands = ((12875.0, 0.84), (37625.0, 0.55), (float("inf"), 0.30))
    traces = []
    for i in range(n_cases):
        rng = np.random.default_rng([seed, i])
        amount = round(float(rng.uniform(500.0, 50000.0)), 2)
        p_pre = next(p for limit, p in bands if amount < limit)
        builder = _TraceBuilder(f"bpi-{i:06d}", i, rng,
                                {"AMOUNT_REQ": amount})
        builder.add(A_SUBMITTED)
        builder.add(A_PARTLY)
        if rng.random() < p_pre:
            builder.add(A_PREACCEPTED)
            builder.add(A_ACCEPTED)
            builder.add(A_FINALIZED)
            roll = rng.random()
            if roll < 0.35:
                builder.add(A_APPROVED)
                builder.add(A_REGISTERED)
                builder.add(A_ACTIVATED)
            elif roll < 0.35 + 0.405:
                builder.add(A_CANCELLED)
            else:
                builder.add(A_DECLINED)
        else:
            builder.add(A_DECLINED)
        traces.append(builder.trace())
    return EventLog.from_traces(traces)


# -- hospital billing (hb shape) ----------------------------------------------

HB_NEW = "NEW"
HB_FIN = "FIN"
HB_RELEASE = "RELEASE"
HB_CHANGE = "CHANGE DIAGN"
HB_CODE_OK = "CODE OK"
HB_BILLED = "BILLED"
HB_REJECT = "REJECT"
HB_CLOSE = "CLOSE"

HB_SCENARIOS = ("-age-gender", "-age+gender", "+age-gender", "+age+gender")

# per-attribute pull toward the routing (unfair) and review (fair) decisions;
# calibrated so P(attr aligned | branch) = 0.7 at 60/40 branch priors
_HB_PULL = 1.0 / 6.0


def generate_hb_like(n_cases, seed) -> EventLog:
    """Structural surrogate for a billing process: a dominant path with a
    routing decision after FIN (60% RELEASE / 40% CHANGE DIAGN) and a review
    decision after CODE OK (60% BILLED / 40% REJECT)."""
    traces = []
    for i in range(n_cases):
        rng = np.random.default_rng([seed, i])
        builder = _TraceBuilder(f"hb-{i:06d}", i, rng, {})
        builder.add(HB_NEW)
        builder.add(HB_FIN)
        if rng.random() < 0.6:
            builder.add(HB_RELEASE)
        else:
            builder.add(HB_CHANGE)
            builder.add(HB_RELEASE)
        builder.add(HB_CODE_OK)
        builder.add(HB_BILLED if rng.random() < 0.6 else HB_REJECT)
        builder.add(HB_CLOSE)
        traces.append(builder.trace())
    return EventLog.from_traces(traces)


def enrich_hb(log: EventLog, scenario, seed) -> AnnotatedLog:
    """Add age (continuous) and gender (categorical) under one of four
    scenarios controlling which attribute unfairly explains the routing
    decision.

    A biased attribute is assigned correlated (at 0.7) with both the routing
    decision after FIN, annotated unfair, and the review decision after
    CODE OK, annotated fair; an unbiased attribute is sampled independently
    of the trace's path.
    """
    if scenario not in HB_SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of "
                         f"{HB_SCENARIOS}")
    required = (HB_NEW, HB_FIN, HB_RELEASE, HB_CODE_OK)
    missing = [a for a in required if a not in log.activity_alphabet]
    if missing:
        raise ValueError(f"log lacks required billing activities: {missing}")
    age_biased = scenario.startswith("+age")
    gender_biased = scenario.endswith("+gender")

    traces = []
    for i, trace in enumerate(log.traces):
        rng = np.random.default_rng([seed, i, 77])
        sgn_u = 1.0 if _first_after(trace, HB_FIN) == HB_RELEASE else -1.0
        sgn_y = 1.0 if _first_after(trace, HB_CODE_OK) == HB_BILLED else -1.0
        attrs = dict(trace.case_attributes)
        if gender_biased:
            p_female = 0.5 + _HB_PULL * (sgn_u + sgn_y)
            attrs["gender"] = "female" if rng.random() < p_female else "male"
        else:
            attrs["gender"] = "female" if rng.random() < 0.5 else "male"
        if age_biased:
            p_old = 0.5 + _HB_PULL * (sgn_u + sgn_y)
            if rng.random() < p_old:
                attrs["age"] = round(float(rng.uniform(50.0, 85.0)), 2)
            else:
                attrs["age"] = round(float(rng.uniform(20.0, 49.99)), 2)
        else:
            attrs["age"] = round(sample_age(rng), 2)
        traces.append(Trace(case_id=trace.case_id, events=trace.events,
                            case_attributes=attrs))

    annotations = []
    for attr, biased in (("age", age_biased), ("gender", gender_biased)):
        if biased:
            annotations.append(DecisionAnnotation(
                f"billing-route[{attr}]", (HB_FIN,), (attr,), "unfair", 0.7))
            annotations.append(DecisionAnnotation(
                f"billing-review[{attr}]", (HB_CODE_OK,), (attr,), "fair", 0.7))
    return AnnotatedLog(log=EventLog.from_traces(traces),
                        annotations=tuple(annotations),
                        sensitive_attributes=("age", "gender"))


# -- shared trace machinery ----------------------------------------------------

class _TraceBuilder:
    """Appends events with exponential service delays (mean one hour)."""

    def __init__(self, case_id, case_index, rng, case_attributes,
                 mean_delay=3600.0):
        self.case_id = case_id
        self.rng = rng
        self.case_attributes = case_attributes
        self.mean_delay = mean_delay
        self._t = _EPOCH + timedelta(seconds=137.0 * case_index)
        self._delays = []
        self.events = []

    def add(self, activity):
        if self.events:
            delay = float(self.rng.exponential(self.mean_delay))
            self._delays.append(delay)
            self._t = self._t + timedelta(seconds=delay)
        else:
            self._delays.append(0.0)
        self.events.append(Event(case_id=self.case_id, activity=activity,
                                 timestamp=as_utc_ms(self._t)))

    def delay(self, index):
        """Service delay before the event at ``index`` (supports negatives)."""
        return self._delays[index]

    def trace(self):
        return Trace(case_id=self.case_id, events=tuple(self.events),
                     case_attributes=dict(self.case_attributes))
