"""Document loading, repair, segmentation, tokenization, and gold-standard I/O.

All character offsets in this package are 0-based, end-exclusive, and count
Unicode code points of ``Document.text``. Sentence and token spans always
index into the owning document, never into a local substring, so downstream
consumers can slice the document text directly.

Segmentation is deliberately simple: sentences end at runs of ``. ! ?``
followed by whitespace (guarded by an editable abbreviation list) and at
hard line breaks. Tokenization splits on whitespace and punctuation
boundaries, with every punctuation character becoming its own single-char
token, e.g. ``"February 29th—diarrhea"`` yields
``["February", "29th", "—", "diarrhea"]``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from .errors import ParseError, ValidationError

SOURCE_KINDS = ("clinical_note", "dialogue")

# The one concept type plus the eight attribute kinds used in gold standoff files.
ATTRIBUTE_KINDS = (
    "body_location",
    "severity",
    "temporal",
    "subject",
    "condition",
    "uncertainty",
    "negation",
    "course",
)
ENTITY_TYPES = ("sign_symptom",) + ATTRIBUTE_KINDS

_RESOURCE_DIR = Path(__file__).parent / "resources"


@dataclass(frozen=True)
class Document:
    note_id: str
    text: str
    patient_id: str | None = None
    note_datetime: datetime | None = None
    admit_datetime: datetime | None = None
    source_kind: str = "clinical_note"


@dataclass(frozen=True)
class Sentence:
    doc_note_id: str
    index: int
    start: int
    end: int


@dataclass(frozen=True)
class Token:
    start: int
    end: int
    surface: str
    normalized: str


@dataclass(frozen=True, eq=True)
class GoldEntity:
    note_id: str
    entity_type: str
    start: int
    end: int
    text: str
    attributes: tuple[tuple[str, str], ...] = ()
    cui: str | None = None

    def attribute_map(self) -> dict[str, str]:
        return dict(self.attributes)


# =========================================================================
# Document loading and repair
# =========================================================================

def _parse_datetime(value, path: Path, line_no: int, key: str) -> datetime | None:
    if value is None or value == "":
        return None
    try:
        return datetime.fromisoformat(value)
    except (TypeError, ValueError):
        raise ParseError(f"{path}:{line_no}: invalid ISO-8601 {key}: {value!r}")


def load_documents(path: str | Path, format: str = "jsonl") -> list[Document]:
    """Load a corpus from JSON Lines or from a directory of *.txt files.

    note_id values must be unique across the corpus; a duplicate raises
    ValidationError. Malformed records raise ParseError naming the line.
    """
    path = Path(path)
    if format == "jsonl":
        docs = _load_jsonl(path)
    elif format == "plain_text_dir":
        docs = _load_text_dir(path)
    else:
        raise ValidationError(f"unknown corpus format: {format!r}")
    seen: set[str] = set()
    for doc in docs:
        if doc.note_id in seen:
            raise ValidationError(f"duplicate note_id: {doc.note_id!r}")
        seen.add(doc.note_id)
    return docs


def _load_jsonl(path: Path) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{line_no}: invalid JSON: {exc}")
            if not isinstance(record, dict):
                raise ParseError(f"{path}:{line_no}: record is not an object")
            note_id = record.get("note_id")
            text = record.get("text")
            if not isinstance(note_id, str) or not note_id:
                raise ParseError(f"{path}:{line_no}: missing or empty note_id")
            if not isinstance(text, str) or not text:
                raise ParseError(f"{path}:{line_no}: missing or empty text")
            source_kind = record.get("source_kind") or "clinical_note"
            if source_kind not in SOURCE_KINDS:
                raise ParseError(
                    f"{path}:{line_no}: invalid source_kind: {source_kind!r}"
                )
            patient_id = record.get("patient_id")
            if patient_id is not None and not isinstance(patient_id, str):
                raise ParseError(f"{path}:{line_no}: patient_id is not a string")
            docs.append(
                Document(
                    note_id=note_id,
                    text=text,
                    patient_id=patient_id,
                    note_datetime=_parse_datetime(
                        record.get("note_datetime"), path, line_no, "note_datetime"
                    ),
                    admit_datetime=_parse_datetime(
                        record.get("admit_datetime"), path, line_no, "admit_datetime"
                    ),
                    source_kind=source_kind,
                )
            )
    return docs


def _load_text_dir(path: Path) -> list[Document]:
    if not path.is_dir():
        raise ParseError(f"not a directory: {path}")
    docs = []
    for file in sorted(path.glob("*.txt")):
        text = file.read_text(encoding="utf-8")
        if not text:
            raise ParseError(f"{file}: empty document")
        docs.append(Document(note_id=file.stem, text=text))
    return docs


def restore_note_structure(
    fragments: list[tuple[str, int, str]],
) -> list[Document]:
    """Reassemble notes stored as (note_id, fragment_index, text) pieces.

    Fragments of a note are concatenated in fragment_index order with a
    line break inserted at each boundary unless the preceding fragment
    already ends with one. Indices must be contiguous from 0; a gap raises
    ValidationError naming the note. Single-fragment notes pass through
    unchanged, so the operation is idempotent on complete documents.
    """
    by_note: dict[str, list[tuple[int, str]]] = {}
    for note_id, fragment_index, text in fragments:
        by_note.setdefault(note_id, []).append((fragment_index, text))
    docs = []
    for note_id, parts in by_note.items():
        parts.sort(key=lambda item: item[0])
        indices = [index for index, _ in parts]
        if indices != list(range(len(parts))):
            raise ValidationError(
                f"note {note_id!r}: fragment indices {indices} are not "
                f"contiguous from 0"
            )
        pieces = [parts[0][1]]
        for _, text in parts[1:]:
            if not pieces[-1].endswith("\n"):
                pieces.append("\n")
            pieces.append(text)
        docs.append(Document(note_id=note_id, text="".join(pieces)))
    return docs


# =========================================================================
# Sentence splitting
# =========================================================================

_TERMINATOR_RUN = re.compile(r"[.!?]+")
_LINE = re.compile(r"[^\n]+")
_ABBREV_TAIL = re.compile(r"[\w.]+\.\Z")

_default_abbreviations: frozenset[str] | None = None


def load_abbreviations(path: str | Path | None = None) -> frozenset[str]:
    """Read the abbreviation guard list (one lowercase token per line)."""
    if path is None:
        path = _RESOURCE_DIR / "abbreviations.txt"
    terms = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            terms.add(line)
    return frozenset(terms)


def _abbreviations() -> frozenset[str]:
    global _default_abbreviations
    if _default_abbreviations is None:
        _default_abbreviations = load_abbreviations()
    return _default_abbreviations


def _is_abbreviation(text: str, period_pos: int, abbreviations: frozenset[str]) -> bool:
    # Word (possibly dotted, e.g. "b.i.d.") ending at this period.
    match = _ABBREV_TAIL.search(text, max(0, period_pos - 14), period_pos + 1)
    if not match:
        return False
    word = match.group(0).lower()
    if word in abbreviations:
        return True
    # Single-letter initials such as "J." never end a sentence.
    return len(word) == 2 and word[0].isalpha()


def split_sentences(
    doc: Document, abbreviations: frozenset[str] | None = None
) -> list[Sentence]:
    """Split a document into sentences with document-level spans.

    Sentences end at a run of terminator characters followed by whitespace
    or end of line, and always at hard line breaks. Spans are trimmed to
    the first/last non-whitespace character, include the terminators, and
    partition the non-whitespace portion of the text.
    """
    if abbreviations is None:
        abbreviations = _abbreviations()
    text = doc.text
    sentences: list[Sentence] = []

    def close(seg_start: int, seg_end: int) -> None:
        while seg_start < seg_end and text[seg_start].isspace():
            seg_start += 1
        while seg_end > seg_start and text[seg_end - 1].isspace():
            seg_end -= 1
        if seg_start < seg_end:
            sentences.append(
                Sentence(doc.note_id, len(sentences), seg_start, seg_end)
            )

    for line in _LINE.finditer(text):
        start = line.start()
        for run in _TERMINATOR_RUN.finditer(text, line.start(), line.end()):
            if run.end() < line.end() and not text[run.end()].isspace():
                continue
            if run.group(0) == "." and _is_abbreviation(
                text, run.start(), abbreviations
            ):
                continue
            close(start, run.end())
            start = run.end()
        close(start, line.end())
    return sentences


# =========================================================================
# Tokenization
# =========================================================================

_TOKEN = re.compile(r"\w+|[^\w\s]")


def tokenize_text(text: str, base: int = 0) -> list[Token]:
    """Tokenize a raw string; spans are offset by ``base``."""
    return [
        Token(
            start=base + match.start(),
            end=base + match.end(),
            surface=match.group(0),
            normalized=match.group(0).lower(),
        )
        for match in _TOKEN.finditer(text)
    ]


def tokenize(doc: Document, sentence: Sentence) -> list[Token]:
    """Tokenize one sentence of a document with document-level spans."""
    return tokenize_text(doc.text[sentence.start : sentence.end], sentence.start)


# =========================================================================
# Gold standard standoff I/O
# =========================================================================

def _parse_attributes(cell: str, where: str) -> tuple[tuple[str, str], ...]:
    if not cell:
        return ()
    pairs = []
    for item in cell.split(";"):
        if not item:
            continue
        if "=" not in item:
            raise ParseError(f"{where}: malformed attribute {item!r}")
        key, _, value = item.partition("=")
        pairs.append((key, value))
    return tuple(pairs)


def load_gold(
    path: str | Path, documents: list[Document] | None = None
) -> list[GoldEntity]:
    """Read gold annotations from headerless TSV standoff.

    Columns: note_id, entity_type, start, end, text, attributes
    (semicolon-joined key=value, may be empty), cui (optional). When
    documents are supplied, each entity's text must equal the document
    slice at its span.
    """
    path = Path(path)
    by_id = {doc.note_id: doc for doc in documents} if documents else {}
    entities = []
    with open(path, encoding="utf-8", newline="") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            where = f"{path}:{line_no}"
            cols = line.split("\t")
            if len(cols) not in (6, 7):
                raise ParseError(f"{where}: expected 6 or 7 columns, got {len(cols)}")
            note_id, entity_type, start_s, end_s, text, attrs = cols[:6]
            cui = cols[6] if len(cols) == 7 and cols[6] else None
            if entity_type not in ENTITY_TYPES:
                raise ParseError(f"{where}: unknown entity_type {entity_type!r}")
            try:
                start, end = int(start_s), int(end_s)
            except ValueError:
                raise ParseError(f"{where}: non-integer span {start_s!r}..{end_s!r}")
            if start < 0 or end <= start:
                raise ValidationError(f"{where}: invalid span [{start}, {end})")
            if documents is not None:
                doc = by_id.get(note_id)
                if doc is None:
                    raise ValidationError(f"{where}: unknown note_id {note_id!r}")
                if doc.text[start:end] != text:
                    raise ValidationError(
                        f"{where}: note {note_id!r} span [{start}, {end}) reads "
                        f"{doc.text[start:end]!r}, annotation says {text!r}"
                    )
            entities.append(
                GoldEntity(
                    note_id=note_id,
                    entity_type=entity_type,
                    start=start,
                    end=end,
                    text=text,
                    attributes=_parse_attributes(attrs, where),
                    cui=cui,
                )
            )
    return entities


def write_gold(entities: list[GoldEntity], path: str | Path) -> int:
    """Write entities in the standoff format accepted by load_gold."""
    lines = []
    for entity in entities:
        attrs = ";".join(f"{key}={value}" for key, value in entity.attributes)
        cols = [
            entity.note_id,
            entity.entity_type,
            str(entity.start),
            str(entity.end),
            entity.text,
            attrs,
        ]
        if entity.cui is not None:
            cols.append(entity.cui)
        lines.append("\t".join(cols))
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return len(lines)
