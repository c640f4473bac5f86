import random

import pytest

from signsym.corpus import (
    Document,
    GoldEntity,
    load_documents,
    load_gold,
    restore_note_structure,
    split_sentences,
    tokenize,
    tokenize_text,
    write_gold,
)
from signsym.errors import ParseError, ValidationError


def make_doc(text, note_id="n1"):
    return Document(note_id=note_id, text=text)


# -------------------------------------------------------------------------
# Document loading
# -------------------------------------------------------------------------

def test_load_jsonl_roundtrip(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text(
        '{"note_id": "a", "text": "Fever.", "patient_id": "p1", '
        '"note_datetime": "2020-03-01T08:00:00"}\n'
        '{"note_id": "b", "text": "Cough."}\n',
        encoding="utf-8",
    )
    docs = load_documents(path)
    assert [d.note_id for d in docs] == ["a", "b"]
    assert docs[0].patient_id == "p1"
    assert docs[0].note_datetime.hour == 8
    assert docs[1].patient_id is None
    assert docs[1].source_kind == "clinical_note"


def test_load_jsonl_duplicate_note_id(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text(
        '{"note_id": "a", "text": "x"}\n{"note_id": "a", "text": "y"}\n',
        encoding="utf-8",
    )
    with pytest.raises(ValidationError, match="duplicate note_id"):
        load_documents(path)


def test_load_jsonl_bad_datetime(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text(
        '{"note_id": "a", "text": "x", "note_datetime": "03/01/2020"}\n',
        encoding="utf-8",
    )
    with pytest.raises(ParseError, match="ISO-8601"):
        load_documents(path)


def test_load_jsonl_malformed_line_numbered(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text('{"note_id": "a", "text": "x"}\nnot json\n', encoding="utf-8")
    with pytest.raises(ParseError, match=":2"):
        load_documents(path)


def test_load_plain_text_dir(tmp_path):
    (tmp_path / "n2.txt").write_text("Cough.", encoding="utf-8")
    (tmp_path / "n1.txt").write_text("Fever.", encoding="utf-8")
    docs = load_documents(tmp_path, format="plain_text_dir")
    assert [d.note_id for d in docs] == ["n1", "n2"]
    assert docs[0].text == "Fever."


def test_load_unknown_format(tmp_path):
    with pytest.raises(ValidationError):
        load_documents(tmp_path, format="xml")


def test_restore_note_structure_joins_fragments():
    docs = restore_note_structure(
        [("a", 1, "second line"), ("a", 0, "first line"), ("b", 0, "whole")]
    )
    by_id = {d.note_id: d for d in docs}
    assert by_id["a"].text == "first line\nsecond line"
    assert by_id["b"].text == "whole"


def test_restore_note_structure_keeps_existing_breaks():
    docs = restore_note_structure([("a", 0, "first\n"), ("a", 1, "second")])
    assert docs[0].text == "first\nsecond"


def test_restore_note_structure_gap():
    with pytest.raises(ValidationError, match="contiguous"):
        restore_note_structure([("a", 0, "x"), ("a", 2, "y")])


# -------------------------------------------------------------------------
# Sentence splitting
# -------------------------------------------------------------------------

def sentence_texts(doc):
    return [doc.text[s.start : s.end] for s in split_sentences(doc)]


def test_split_basic():
    doc = make_doc("Patient has fever. Cough started yesterday.")
    assert sentence_texts(doc) == [
        "Patient has fever.",
        "Cough started yesterday.",
    ]


def test_split_terminator_runs_and_questions():
    doc = make_doc("Fever? Cough? No symptoms!! Done.")
    assert sentence_texts(doc) == ["Fever?", "Cough?", "No symptoms!!", "Done."]


def test_split_hard_newlines():
    doc = make_doc("Fever: no\nCough: yes\nno terminator at all")
    assert sentence_texts(doc) == [
        "Fever: no",
        "Cough: yes",
        "no terminator at all",
    ]


def test_split_abbreviations_do_not_break():
    doc = make_doc("Seen by Dr. Smith for fever. Follow up q.d. as needed.")
    assert sentence_texts(doc) == [
        "Seen by Dr. Smith for fever.",
        "Follow up q.d. as needed.",
    ]


def test_split_single_initials():
    doc = make_doc("Seen by J. Smith today. No fever.")
    assert sentence_texts(doc) == ["Seen by J. Smith today.", "No fever."]


def test_split_decimal_point_not_a_boundary():
    doc = make_doc("Temp 38.5 this morning. Improving.")
    assert sentence_texts(doc) == ["Temp 38.5 this morning.", "Improving."]


def test_split_spans_cover_non_whitespace():
    """Every non-whitespace character belongs to exactly one sentence."""
    rng = random.Random(11)
    words = ["fever", "cough", "Dr.", "no", "x3", "days", "38.5", "b.i.d."]
    ends = [". ", "? ", "! ", "\n", "... ", " "]
    for _ in range(200):
        text = "".join(
            rng.choice(words) + rng.choice(ends) for _ in range(rng.randint(1, 30))
        )
        doc = make_doc(text)
        sentences = split_sentences(doc)
        covered = set()
        for sentence in sentences:
            assert not doc.text[sentence.start].isspace()
            assert not doc.text[sentence.end - 1].isspace()
            span = set(range(sentence.start, sentence.end))
            assert not covered & span
            covered |= span
        outside = set(range(len(text))) - covered
        assert all(text[i].isspace() for i in outside)


def test_sentence_indices_sequential():
    doc = make_doc("One. Two. Three.")
    assert [s.index for s in split_sentences(doc)] == [0, 1, 2]


# -------------------------------------------------------------------------
# Tokenization
# -------------------------------------------------------------------------

def test_tokenize_offsets_and_normalization():
    tokens = tokenize_text("Fever, x3 days!")
    assert [t.surface for t in tokens] == ["Fever", ",", "x3", "days", "!"]
    assert [t.normalized for t in tokens] == ["fever", ",", "x3", "days", "!"]
    assert tokens[0].start == 0 and tokens[0].end == 5
    assert tokens[1].start == 5 and tokens[1].end == 6


def test_tokenize_base_offset():
    tokens = tokenize_text("no fever", base=100)
    assert tokens[0].start == 100
    assert tokens[1].start == 103


def test_tokenize_sentence_uses_document_spans():
    doc = make_doc("First one. Second has fever.")
    second = split_sentences(doc)[1]
    tokens = tokenize(doc, second)
    assert doc.text[tokens[0].start : tokens[0].end] == "Second"
    assert tokens[-1].surface == "."


def test_tokenize_surfaces_slice_back():
    rng = random.Random(23)
    alphabet = "ab3.,!? \nC-"
    for _ in range(300):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 60)))
        for token in tokenize_text(text):
            assert text[token.start : token.end] == token.surface
            assert token.surface.strip()


# -------------------------------------------------------------------------
# Gold standoff I/O
# -------------------------------------------------------------------------

def test_gold_roundtrip(tmp_path):
    entities = [
        GoldEntity("n1", "sign_symptom", 15, 20, "fever", (("assertion", "negated"),), "C0015967"),
        GoldEntity("n1", "negation", 8, 14, "denies"),
        GoldEntity("n2", "sign_symptom", 0, 5, "cough", (), None),
    ]
    path = tmp_path / "gold.tsv"
    assert write_gold(entities, path) == 3
    assert load_gold(path) == entities


def test_gold_attribute_map():
    entity = GoldEntity(
        "n1", "sign_symptom", 0, 5, "cough", (("severity", "severe"), ("course", "improving"))
    )
    assert entity.attribute_map() == {"severity": "severe", "course": "improving"}


def test_gold_span_text_checked_against_documents(tmp_path):
    doc = Document(note_id="n1", text="Patient denies fever.")
    path = tmp_path / "gold.tsv"
    write_gold([GoldEntity("n1", "sign_symptom", 15, 20, "fever")], path)
    assert load_gold(path, documents=[doc])[0].text == "fever"
    write_gold([GoldEntity("n1", "sign_symptom", 14, 19, "fever")], path)
    with pytest.raises(ValidationError, match="annotation says"):
        load_gold(path, documents=[doc])


def test_gold_unknown_entity_type(tmp_path):
    path = tmp_path / "gold.tsv"
    path.write_text("n1\tdiagnosis\t0\t5\tcough\t\n", encoding="utf-8")
    with pytest.raises(ParseError, match="entity_type"):
        load_gold(path)


def test_gold_invalid_span(tmp_path):
    path = tmp_path / "gold.tsv"
    path.write_text("n1\tsign_symptom\t5\t5\t\t\n", encoding="utf-8")
    with pytest.raises(ValidationError, match="invalid span"):
        load_gold(path)
