"""Assertion classification, COVID-target filtering, patient aggregation.

A mention's assertion is decided from its linked attributes with negation
taking precedence: negated beats possible beats positive. Uncertainty, a
condition, or a non-patient subject each downgrade an otherwise positive
mention to possible, and a non-patient subject additionally keeps the
mention out of the patient's own summary.

Patient aggregation unions positive mentions across a patient's notes
inside an admission window: a symptom denied in one note and affirmed in
another counts as positive for the stay. Notes dated more than
window_hours from admission are excluded; notes missing either timestamp
are included and counted as a warning. The result is independent of
input order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .attributes import Relation
from .errors import ParseError
from .extraction import Mention
from .lexicon import Lexicon
from .omop import MentionRecord

ASSERTION_VALUES = ("negated", "possible", "positive")


@dataclass(frozen=True)
class PositiveConcept:
    cui: str
    preferred_term: str
    evidence_note_ids: tuple[str, ...]


@dataclass(frozen=True)
class PatientSummary:
    patient_id: str
    window_hours: int
    notes_considered: int
    positive: tuple[PositiveConcept, ...]


@dataclass
class AggregateStats:
    patients: int = 0
    notes_in_window: int = 0
    notes_out_of_window: int = 0
    undated_notes: int = 0
    records_without_patient: int = 0


def filter_covid(mentions: list, lexicon: Lexicon) -> list:
    """Keep only items whose CUI is a covid_target concept.

    Works on anything with a ``cui`` attribute (Mention, MentionRecord).
    Idempotent: filtering a filtered list changes nothing.
    """
    kept = []
    for mention in mentions:
        entry = lexicon.entry(mention.cui)
        if entry is not None and entry.covid_target:
            kept.append(mention)
    return kept


def classify_assertion(mention: Mention, relations: list[Relation]) -> str:
    """negated > possible > positive, from the mention's linked attributes."""
    negated = False
    possible = False
    for relation in relations:
        if relation.target != mention:
            continue
        attribute = relation.attribute
        if attribute.kind == "negation" and attribute.normalized_value == "negated":
            negated = True
        elif attribute.kind == "uncertainty" and (
            attribute.normalized_value == "uncertain"
        ):
            possible = True
        elif attribute.kind == "condition":
            possible = True
        elif attribute.kind == "subject" and attribute.normalized_value != "patient":
            possible = True
    if negated:
        return "negated"
    if possible:
        return "possible"
    return "positive"


def _in_window(record: MentionRecord, window_hours: int) -> bool | None:
    """True/False when both timestamps exist; None when undated."""
    if record.note_datetime is None or record.admit_datetime is None:
        return None
    delta = record.note_datetime - record.admit_datetime
    return abs(delta.total_seconds()) <= window_hours * 3600


def aggregate_patient(
    records: list[MentionRecord], window_hours: int
) -> tuple[list[PatientSummary], AggregateStats]:
    """Union positive findings per patient across in-window notes."""
    stats = AggregateStats()
    by_patient: dict[str, list[MentionRecord]] = {}
    undated: set[str] = set()
    excluded: set[str] = set()
    included: set[str] = set()
    for record in records:
        if not record.patient_id:
            stats.records_without_patient += 1
            continue
        status = _in_window(record, window_hours)
        if status is None:
            undated.add(record.note_id)
        elif not status:
            excluded.add(record.note_id)
            continue
        included.add(record.note_id)
        by_patient.setdefault(record.patient_id, []).append(record)
    stats.undated_notes = len(undated)
    stats.notes_out_of_window = len(excluded)
    stats.notes_in_window = len(included)
    summaries = []
    for patient_id in sorted(by_patient):
        patient_records = by_patient[patient_id]
        evidence: dict[str, set[str]] = {}
        names: dict[str, str] = {}
        for record in patient_records:
            if record.assertion != "positive":
                continue
            if any(a.kind == "subject" for a in record.attributes):
                continue
            evidence.setdefault(record.cui, set()).add(record.note_id)
            names[record.cui] = record.preferred_term
        summaries.append(
            PatientSummary(
                patient_id=patient_id,
                window_hours=window_hours,
                notes_considered=len({r.note_id for r in patient_records}),
                positive=tuple(
                    PositiveConcept(
                        cui=cui,
                        preferred_term=names[cui],
                        evidence_note_ids=tuple(sorted(evidence[cui])),
                    )
                    for cui in sorted(evidence)
                ),
            )
        )
    stats.patients = len(summaries)
    return summaries, stats


def write_patient_summaries(
    summaries: list[PatientSummary], path: str | Path
) -> int:
    with open(path, "w", encoding="utf-8") as handle:
        for summary in summaries:
            handle.write(
                json.dumps(
                    {
                        "patient_id": summary.patient_id,
                        "window_hours": summary.window_hours,
                        "notes_considered": summary.notes_considered,
                        "positive": [
                            {
                                "cui": concept.cui,
                                "preferred_term": concept.preferred_term,
                                "evidence_note_ids": list(concept.evidence_note_ids),
                            }
                            for concept in summary.positive
                        ],
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return len(summaries)


def read_patient_summaries(path: str | Path) -> list[PatientSummary]:
    summaries = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                summaries.append(
                    PatientSummary(
                        patient_id=data["patient_id"],
                        window_hours=data["window_hours"],
                        notes_considered=data.get("notes_considered", 0),
                        positive=tuple(
                            PositiveConcept(
                                cui=item["cui"],
                                preferred_term=item["preferred_term"],
                                evidence_note_ids=tuple(item["evidence_note_ids"]),
                            )
                            for item in data["positive"]
                        ),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"{path}:{line_no}: bad patient summary: {exc}")
    return summaries
