import random

import pytest

from signsym.errors import ParseError, ValidationError
from signsym.lexicon import (
    ConceptEntry,
    Lexicon,
    compile_lexicon,
    family_key,
    lexicon_stats,
    load_lexicon,
    merge_lexicons,
    normalize_term,
    normalized_tokens,
    validate_lexicon,
    write_lexicon,
)

from conftest import DATA_DIR

HEADER = "cui\tomop_concept_id\tpreferred_term\tsemantic_type\tcovid_target\tprevalence_rank\tsynonym\n"


def entry(cui, preferred, synonyms, omop=100, rank=1, target=True):
    return ConceptEntry(
        cui=cui,
        preferred_term=preferred,
        omop_concept_id=omop,
        semantic_type="sign_or_symptom",
        covid_target=target,
        prevalence_rank=rank,
        synonyms=(preferred, *synonyms),
    )


def write_rows(path, rows):
    path.write_text(HEADER + "".join("\t".join(r) + "\n" for r in rows), encoding="utf-8")
    return path


# -------------------------------------------------------------------------
# Term normalization and families
# -------------------------------------------------------------------------

def test_normalize_term_case_and_punctuation():
    assert normalize_term("Short of Breath") == "short of breath"
    assert normalize_term("  sore   throat ") == "sore throat"
    assert normalize_term("cough, dry") == "cough , dry"


def test_normalized_tokens():
    assert normalized_tokens("Loss of smell") == ("loss", "of", "smell")


def test_family_key_strips_qualifier():
    assert family_key("Productive cough—green sputum") == "productive cough"
    assert family_key("Productive cough - yellow sputum") == "productive cough"
    assert family_key("Fever") == "fever"


# -------------------------------------------------------------------------
# Loading and validation
# -------------------------------------------------------------------------

def test_load_groups_rows_by_cui(tmp_path):
    path = write_rows(
        tmp_path / "lex.tsv",
        [
            ("C0000001", "10", "Fever", "sign_or_symptom", "1", "1", "Fever"),
            ("C0000001", "10", "Fever", "sign_or_symptom", "1", "1", "pyrexia"),
            ("C0000002", "20", "Cough", "sign_or_symptom", "1", "2", "Cough"),
        ],
    )
    lexicon = load_lexicon(path)
    assert len(lexicon) == 2
    assert lexicon.entry("C0000001").synonyms == ("Fever", "pyrexia")
    assert lexicon.entry("C0000002").prevalence_rank == 2
    assert lexicon.version == "lex.tsv"


def test_load_adds_missing_preferred_and_dedupes(tmp_path):
    # Preferred term is implied even when no row repeats it; duplicate
    # synonyms collapse on their normalized form.
    path = write_rows(
        tmp_path / "lex.tsv",
        [
            ("C0000001", "10", "Fever", "sign_or_symptom", "1", "1", "pyrexia"),
            ("C0000001", "10", "Fever", "sign_or_symptom", "1", "1", "Pyrexia"),
        ],
    )
    assert load_lexicon(path).entry("C0000001").synonyms == ("Fever", "pyrexia")


def test_load_rejects_conflicting_metadata(tmp_path):
    path = write_rows(
        tmp_path / "lex.tsv",
        [
            ("C0000001", "10", "Fever", "sign_or_symptom", "1", "1", "fever"),
            ("C0000001", "11", "Fever", "sign_or_symptom", "1", "1", "pyrexia"),
        ],
    )
    with pytest.raises(ValidationError, match="conflicting metadata"):
        load_lexicon(path)


def test_load_rejects_shared_synonym(tmp_path):
    path = write_rows(
        tmp_path / "lex.tsv",
        [
            ("C0000001", "10", "Fever", "sign_or_symptom", "1", "1", "hot"),
            ("C0000002", "20", "Chills", "sign_or_symptom", "1", "2", "hot"),
        ],
    )
    with pytest.raises(ValidationError) as excinfo:
        load_lexicon(path)
    assert "C0000001" in str(excinfo.value) and "C0000002" in str(excinfo.value)


def test_load_rejects_bad_header(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("cui\tterm\nC0000001\tfever\n", encoding="utf-8")
    with pytest.raises(ParseError, match="expected header"):
        load_lexicon(path)


def test_load_rejects_bad_cui(tmp_path):
    path = write_rows(
        tmp_path / "lex.tsv",
        [("X123", "10", "Fever", "sign_or_symptom", "1", "1", "fever")],
    )
    with pytest.raises(ValidationError, match="invalid CUI"):
        load_lexicon(path)


def test_validate_reports_all_problems():
    lexicon = Lexicon(
        [
            ConceptEntry("bad", "Fever", -1, "sign_or_symptom", True, 0, ("Fever",)),
        ]
    )
    problems = validate_lexicon(lexicon)
    assert any("invalid CUI" in p for p in problems)
    assert any("negative omop_concept_id" in p for p in problems)
    assert any("prevalence_rank" in p for p in problems)


# -------------------------------------------------------------------------
# Merging
# -------------------------------------------------------------------------

def test_merge_unions_synonyms_first_source_wins_scalars():
    a = Lexicon([entry("C0000001", "Fever", ("pyrexia",), omop=10)], version="a")
    b = Lexicon(
        [
            entry("C0000001", "High fever", ("febrile",), omop=99),
            entry("C0000002", "Cough", ()),
        ],
        version="b",
    )
    merged = merge_lexicons([a, b])
    fever = merged.entry("C0000001")
    assert fever.preferred_term == "Fever"
    assert fever.omop_concept_id == 10
    assert set(fever.synonyms) == {"Fever", "pyrexia", "High fever", "febrile"}
    assert merged.entry("C0000002") is not None
    assert merged.version == "a+b"


def test_merge_idempotent():
    a = Lexicon([entry("C0000001", "Fever", ("pyrexia",))], version="a")
    once = merge_lexicons([a])
    twice = merge_lexicons([once, once])
    assert twice.entries[0].synonyms == once.entries[0].synonyms


def test_merge_cross_source_synonym_collision():
    a = Lexicon([entry("C0000001", "Fever", ("hot",))], version="a")
    b = Lexicon([entry("C0000002", "Chills", ("hot",))], version="b")
    with pytest.raises(ValidationError) as excinfo:
        merge_lexicons([a, b])
    message = str(excinfo.value)
    assert "'a'" in message and "'b'" in message


def test_merge_empty_list():
    with pytest.raises(ValidationError):
        merge_lexicons([])


# -------------------------------------------------------------------------
# Writing and stats
# -------------------------------------------------------------------------

def test_write_lexicon_roundtrip(tmp_path, lexicon):
    path = tmp_path / "out.tsv"
    rows = write_lexicon(lexicon, path)
    reloaded = load_lexicon(path)
    assert rows == sum(len(e.synonyms) for e in lexicon.entries)
    assert reloaded.entries == lexicon.entries


def test_stats_counts_families_and_extra_synonyms(tmp_path):
    path = write_rows(
        tmp_path / "lex.tsv",
        [
            ("C0000001", "10", "Cough—dry", "sign_or_symptom", "1", "1", "dry cough"),
            ("C0000002", "11", "Cough—wet", "sign_or_symptom", "1", "2", "wet cough"),
            ("C0000003", "12", "Fever", "sign_or_symptom", "1", "3", "Fever"),
        ],
    )
    # Two cough qualifiers form one family; each qualifier entry carries
    # one synonym beyond its preferred term, the fever entry none.
    assert lexicon_stats(load_lexicon(path)) == (2, 3, 2)


def test_stats_on_common_symptom_table():
    lexicon = load_lexicon(DATA_DIR / "table2_lexicon.tsv")
    assert lexicon_stats(lexicon) == (10, 10, 20)


def test_stats_on_shipped_lexicon(lexicon):
    assert lexicon_stats(lexicon) == (20, 22, 55)


# -------------------------------------------------------------------------
# Compilation
# -------------------------------------------------------------------------

def test_compiled_matcher_accepts_every_synonym(lexicon, matcher):
    expected = set()
    for concept in lexicon.entries:
        for synonym in concept.synonyms:
            expected.add((normalized_tokens(synonym), concept.cui))
    accepted = {(tokens, cui) for tokens, cui, _ in matcher.enumerate_sequences()}
    assert accepted == expected
    assert matcher.pattern_count == len(expected)


def test_match_longest_prefers_longer(matcher):
    tokens = ["severe", "dry", "cough", "today"]
    hit = matcher.match_longest(tokens, 1)
    assert hit is not None
    length, cui, synonym = hit
    assert length == 2
    assert cui == "C0850149"
    assert matcher.match_longest(tokens, 2) == (1, "C0010200", "Cough")
    assert matcher.match_longest(tokens, 0) is None


def test_match_longest_random_positions(matcher):
    """match_longest never reads outside the list and length is in range."""
    rng = random.Random(7)
    vocabulary = ["fever", "dry", "cough", "of", "breath", "short", "xyz", ","]
    for _ in range(300):
        tokens = [rng.choice(vocabulary) for _ in range(rng.randint(0, 12))]
        for start in range(len(tokens)):
            hit = matcher.match_longest(tokens, start)
            if hit is not None:
                assert 1 <= hit[0] <= len(tokens) - start
