"""Mention records and export writers (OMOP CDM Note_NLP TSV, JSON Lines).

MentionRecord is the pipeline's final per-mention result: the resolved
concept, the assertion status, the linked attributes, and enough note
metadata (patient id, timestamps, containing sentence) to aggregate and
export without re-reading the corpus.

The Note_NLP writer emits one tab-separated row per mention in the OMOP
CDM Note_NLP column layout. Output is deterministic: rows sort by
(note_id, start offset), ids are sequential, and the timestamp comes from
an injected clock, so identical inputs produce identical bytes. Tabs and
newlines inside field values are replaced with single spaces; the file
opens with a comment line saying so.

The JSONL writer is lossless: read_mentions_jsonl(write_mentions_jsonl(x))
returns records equal to x.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from .errors import ParseError
from .version import __version__

NLP_SYSTEM = f"covid19-signsym-engine {__version__}"

NOTE_NLP_COLUMNS = (
    "note_nlp_id",
    "note_id",
    "section_concept_id",
    "snippet",
    "offset",
    "lexical_variant",
    "note_nlp_concept_id",
    "note_nlp_source_concept_id",
    "nlp_system",
    "nlp_date",
    "nlp_datetime",
    "term_exists",
    "term_temporal",
    "term_modifiers",
)

SNIPPET_LIMIT = 250

_SANITIZE_NOTE = (
    "# tab and newline characters inside field values are replaced with "
    "single spaces"
)

# term_modifiers key order; the first three are always present.
_MODIFIER_KINDS = ("condition", "body_location", "severity", "temporal", "course")


@dataclass(frozen=True)
class AttributeRecord:
    kind: str
    start: int
    end: int
    text: str
    normalized_value: str


@dataclass(frozen=True)
class MentionRecord:
    note_id: str
    start: int
    end: int
    text: str
    matched_synonym: str
    source: str
    cui: str
    preferred_term: str
    omop_concept_id: int
    method: str
    similarity_score: float
    assertion: str
    sentence_index: int
    snippet: str
    patient_id: str | None = None
    note_datetime: datetime | None = None
    admit_datetime: datetime | None = None
    attributes: tuple[AttributeRecord, ...] = ()


def _sanitize(value: str) -> str:
    return (
        value.replace("\t", " ").replace("\r\n", " ").replace("\n", " ").replace("\r", " ")
    )


def _first_attribute(record: MentionRecord, kind: str) -> AttributeRecord | None:
    for attribute in sorted(record.attributes, key=lambda a: (a.start, a.end)):
        if attribute.kind == kind:
            return attribute
    return None


def term_modifiers(record: MentionRecord) -> str:
    """Semicolon-joined key=value attribute summary in fixed key order."""
    negated = record.assertion == "negated"
    subject = _first_attribute(record, "subject")
    parts = [
        f"negation={'negated' if negated else 'affirmed'}",
        f"certainty={'uncertain' if record.assertion == 'possible' else 'certain'}",
        f"subject={subject.normalized_value if subject else 'patient'}",
    ]
    for kind in _MODIFIER_KINDS:
        attribute = _first_attribute(record, kind)
        if attribute is not None:
            parts.append(f"{kind}={attribute.normalized_value}")
    return ";".join(parts)


def write_note_nlp(
    records: list[MentionRecord], path: str | Path, now: datetime
) -> int:
    """Write records as an OMOP Note_NLP TSV; returns the row count.

    ``now`` stamps nlp_date/nlp_datetime; inject a fixed value for
    reproducible output.
    """
    ordered = sorted(records, key=lambda r: (r.note_id, r.start, r.end))
    lines = [_SANITIZE_NOTE, "\t".join(NOTE_NLP_COLUMNS)]
    nlp_date = now.strftime("%Y-%m-%d")
    nlp_datetime = now.strftime("%Y-%m-%dT%H:%M:%S")
    for row_id, record in enumerate(ordered, start=1):
        temporal = _first_attribute(record, "temporal")
        snippet = _sanitize(record.snippet)
        if len(snippet) > SNIPPET_LIMIT:
            snippet = snippet[:SNIPPET_LIMIT]
        lines.append(
            "\t".join(
                (
                    str(row_id),
                    record.note_id,
                    "0",
                    snippet,
                    f"{record.start}-{record.end}",
                    _sanitize(record.text),
                    str(record.omop_concept_id),
                    "0",
                    NLP_SYSTEM,
                    nlp_date,
                    nlp_datetime,
                    "N" if record.assertion == "negated" else "Y",
                    _sanitize(temporal.text) if temporal else "",
                    term_modifiers(record),
                )
            )
        )
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return len(ordered)


def read_note_nlp(path: str | Path) -> list[dict[str, str]]:
    """Parse a Note_NLP TSV back into one dict per row (testing aid)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    rows = [line for line in lines if not line.startswith("#")]
    if not rows or tuple(rows[0].split("\t")) != NOTE_NLP_COLUMNS:
        raise ParseError(f"{path}: missing Note_NLP header")
    result = []
    for line in rows[1:]:
        values = line.split("\t")
        if len(values) != len(NOTE_NLP_COLUMNS):
            raise ParseError(f"{path}: row has {len(values)} columns")
        result.append(dict(zip(NOTE_NLP_COLUMNS, values)))
    return result


# =========================================================================
# JSON Lines round trip
# =========================================================================

def _record_to_json(record: MentionRecord) -> dict:
    return {
        "note_id": record.note_id,
        "patient_id": record.patient_id,
        "note_datetime": (
            record.note_datetime.isoformat() if record.note_datetime else None
        ),
        "admit_datetime": (
            record.admit_datetime.isoformat() if record.admit_datetime else None
        ),
        "sentence_index": record.sentence_index,
        "snippet": record.snippet,
        "start": record.start,
        "end": record.end,
        "text": record.text,
        "matched_synonym": record.matched_synonym,
        "source": record.source,
        "cui": record.cui,
        "preferred_term": record.preferred_term,
        "omop_concept_id": record.omop_concept_id,
        "method": record.method,
        "similarity_score": record.similarity_score,
        "assertion": record.assertion,
        "attributes": [
            {
                "kind": a.kind,
                "start": a.start,
                "end": a.end,
                "text": a.text,
                "normalized_value": a.normalized_value,
            }
            for a in record.attributes
        ],
    }


def write_mentions_jsonl(records: list[MentionRecord], path: str | Path) -> int:
    ordered = sorted(records, key=lambda r: (r.note_id, r.start, r.end))
    with open(path, "w", encoding="utf-8") as handle:
        for record in ordered:
            handle.write(
                json.dumps(_record_to_json(record), ensure_ascii=False) + "\n"
            )
    return len(ordered)


def read_mentions_jsonl(path: str | Path) -> list[MentionRecord]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{line_no}: invalid JSON: {exc}")
            try:
                records.append(
                    MentionRecord(
                        note_id=data["note_id"],
                        patient_id=data.get("patient_id"),
                        note_datetime=(
                            datetime.fromisoformat(data["note_datetime"])
                            if data.get("note_datetime")
                            else None
                        ),
                        admit_datetime=(
                            datetime.fromisoformat(data["admit_datetime"])
                            if data.get("admit_datetime")
                            else None
                        ),
                        sentence_index=data["sentence_index"],
                        snippet=data["snippet"],
                        start=data["start"],
                        end=data["end"],
                        text=data["text"],
                        matched_synonym=data["matched_synonym"],
                        source=data["source"],
                        cui=data["cui"],
                        preferred_term=data["preferred_term"],
                        omop_concept_id=data["omop_concept_id"],
                        method=data["method"],
                        similarity_score=data["similarity_score"],
                        assertion=data["assertion"],
                        attributes=tuple(
                            AttributeRecord(
                                kind=a["kind"],
                                start=a["start"],
                                end=a["end"],
                                text=a["text"],
                                normalized_value=a["normalized_value"],
                            )
                            for a in data.get("attributes", ())
                        ),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{line_no}: bad mention record: {exc}")
    return records
