import random

import pytest

from signsym.corpus import tokenize_text
from signsym.errors import ParseError, ValidationError
from signsym.extraction import (
    ContextSuppressionRule,
    Mention,
    load_suppression_rules,
    match_mentions,
    merge_plugin_mentions,
    suppress_false_contexts,
)
from signsym.lexicon import normalized_tokens


def match(matcher, text, note_id="n1"):
    return match_mentions(matcher, tokenize_text(text), text, note_id)


def brute_force_matches(sequences, normalized):
    """Independent leftmost-longest reference: scan every span, longest
    match at the leftmost open position wins, then continue after it."""
    by_sequence = dict(sequences)
    spans = []
    index = 0
    while index < len(normalized):
        best = None
        for end in range(len(normalized), index, -1):
            candidate = tuple(normalized[index:end])
            if candidate in by_sequence:
                best = (index, end, by_sequence[candidate])
                break
        if best is None:
            index += 1
        else:
            spans.append(best)
            index = best[1]
    return spans


# -------------------------------------------------------------------------
# Dictionary matching
# -------------------------------------------------------------------------

def test_match_simple_sentence(matcher):
    mentions = match(matcher, "Patient reports sore throat and headache.")
    assert [(m.text, m.cui) for m in mentions] == [
        ("sore throat", "C0242429"),
        ("headache", "C0018681"),
    ]
    assert all(m.source == "dictionary" for m in mentions)


def test_match_prefers_longest(matcher):
    mentions = match(matcher, "Complains of dry cough since Monday.")
    assert [(m.text, m.cui) for m in mentions] == [("dry cough", "C0850149")]


def test_match_case_insensitive_keeps_surface(matcher):
    mentions = match(matcher, "FEVER and Shortness Of Breath.")
    assert [m.text for m in mentions] == ["FEVER", "Shortness Of Breath"]
    assert [m.cui for m in mentions] == ["C0015967", "C0013404"]


def test_match_spans_slice_source_text(matcher):
    text = "History: fever, chills, muscle aches."
    for mention in match(matcher, text):
        assert text[mention.start : mention.end] == mention.text


def test_match_none(matcher):
    assert match(matcher, "Unremarkable visit, no complaints recorded.") == []


def test_match_agrees_with_brute_force(matcher):
    """Trie vs exhaustive scan on random token soup."""
    sequences = [(tokens, cui) for tokens, cui, _ in matcher.enumerate_sequences()]
    vocabulary = sorted({token for tokens, _ in sequences for token in tokens})
    filler = ["the", "patient", "notes", "zzz", ",", "."]
    rng = random.Random(4242)
    for _ in range(150):
        words = [
            rng.choice(vocabulary if rng.random() < 0.7 else filler)
            for _ in range(rng.randint(0, 40))
        ]
        text = " ".join(words)
        tokens = tokenize_text(text)
        normalized = [t.normalized for t in tokens]
        expected = brute_force_matches(sequences, normalized)
        got = [
            (low, high, mention.cui)
            for mention in match_mentions(matcher, tokens, text, "n")
            for low in [next(i for i, t in enumerate(tokens) if t.start == mention.start)]
            for high in [next(i for i, t in enumerate(tokens) if t.end == mention.end) + 1]
        ]
        assert got == expected


# -------------------------------------------------------------------------
# Suppression rules
# -------------------------------------------------------------------------

def test_load_suppression_rules(suppression_rules):
    by_id = {rule.id: rule for rule in suppression_rules}
    assert by_id["flu-shot"].direction == "following"
    assert by_id["flu-shot"].applies_to_cuis == frozenset({"C0021400"})
    assert by_id["family-history"].direction == "preceding"
    assert by_id["vaccine-after"].applies_to_cuis == frozenset()


def test_load_suppression_rejects_bad_direction(tmp_path):
    path = tmp_path / "rules.tsv"
    path.write_text(
        "id\tdirection\ttrigger_phrase\twindow_tokens\tapplies_to_cuis\n"
        "r1\tsideways\tshot\t1\t\n",
        encoding="utf-8",
    )
    with pytest.raises(ValidationError, match="direction"):
        load_suppression_rules(path)


def test_load_suppression_rejects_bad_cui(tmp_path):
    path = tmp_path / "rules.tsv"
    path.write_text(
        "id\tdirection\ttrigger_phrase\twindow_tokens\tapplies_to_cuis\n"
        "r1\tfollowing\tshot\t1\tnot-a-cui\n",
        encoding="utf-8",
    )
    with pytest.raises(ParseError, match="CUI"):
        load_suppression_rules(path)


def suppress(matcher, rules, text):
    tokens = tokenize_text(text)
    mentions = match_mentions(matcher, tokens, text, "n1")
    return [m.text for m in suppress_false_contexts(mentions, tokens, rules)]


def test_suppress_flu_shot(matcher, suppression_rules):
    assert suppress(matcher, suppression_rules, "He got a flu shot in October.") == []


def test_suppress_keeps_real_flu(matcher, suppression_rules):
    kept = suppress(matcher, suppression_rules, "Patient has the flu.")
    assert kept == ["flu"]


def test_suppress_vaccine_window(matcher, suppression_rules):
    # window 2: one intervening token still suppresses, two do not
    assert suppress(matcher, suppression_rules, "influenza vaccine due") == []
    assert suppress(matcher, suppression_rules, "flu season vaccine") == []
    assert suppress(matcher, suppression_rules, "flu early this vaccine") == ["flu"]


def test_suppress_family_history(matcher, suppression_rules):
    text = "Family history of fever and cardiac disease."
    kept = suppress(matcher, suppression_rules, text)
    assert kept == []
    # plain history stays reportable
    assert suppress(matcher, suppression_rules, "History of fever last year.") == ["fever"]


def test_suppress_cui_scope(matcher):
    rules = [
        ContextSuppressionRule(
            id="shot",
            direction="following",
            trigger_phrase="shot",
            window_tokens=1,
            applies_to_cuis=frozenset({"C0021400"}),
        )
    ]
    # rule names influenza only, fever is untouched by the same trigger
    assert suppress(matcher, rules, "flu shot given") == []
    assert suppress(matcher, rules, "fever shot up overnight") == ["fever"]


def test_suppress_window_boundaries():
    rule = ContextSuppressionRule(
        id="r", direction="following", trigger_phrase="screen", window_tokens=1
    )
    text = "flu screen"
    tokens = tokenize_text(text)
    mention = Mention("n1", 0, 3, "flu", "flu", "C0021400")
    assert suppress_false_contexts([mention], tokens, [rule]) == []
    gap_text = "flu rapid screen"
    gap_tokens = tokenize_text(gap_text)
    assert suppress_false_contexts([mention], gap_tokens, [rule]) == [mention]


def test_suppress_preceding_direction():
    rule = ContextSuppressionRule(
        id="r", direction="preceding", trigger_phrase="no charge for", window_tokens=1
    )
    text = "no charge for flu"
    tokens = tokenize_text(text)
    mention = Mention("n1", 14, 17, "flu", "flu", "C0021400")
    assert suppress_false_contexts([mention], tokens, [rule]) == []


def test_suppress_invalid_window():
    with pytest.raises(ValidationError, match="window_tokens"):
        ContextSuppressionRule(
            id="r", direction="following", trigger_phrase="x", window_tokens=0
        )


# -------------------------------------------------------------------------
# Plugin merging
# -------------------------------------------------------------------------

def plugin_mention(start, end, text, cui="", note_id="n1"):
    return Mention(note_id, start, end, text, text, cui, source="plugin")


def dictionary_mention(start, end, text, cui, note_id="n1"):
    return Mention(note_id, start, end, text, text, cui, source="dictionary")


def test_merge_equal_span_prefers_dictionary():
    a = dictionary_mention(0, 5, "fever", "C0015967")
    b = plugin_mention(0, 5, "fever")
    assert merge_plugin_mentions([a], [b]) == [a]


def test_merge_longer_plugin_wins():
    short = dictionary_mention(4, 9, "cough", "C0010200")
    long = plugin_mention(0, 20, "cough lasting a week")
    assert merge_plugin_mentions([short], [long]) == [long]


def test_merge_disjoint_keeps_both_sorted():
    a = plugin_mention(10, 15, "later")
    b = dictionary_mention(0, 5, "fever", "C0015967")
    assert merge_plugin_mentions([b], [a]) == [b, a]


def test_merge_never_overlaps():
    rng = random.Random(99)
    for _ in range(200):
        pool = []
        for source in ("dictionary", "plugin"):
            for _ in range(rng.randint(0, 6)):
                start = rng.randint(0, 40)
                end = start + rng.randint(1, 10)
                pool.append(
                    Mention("n1", start, end, "t", "t", "C0000001", source=source)
                )
        merged = merge_plugin_mentions(
            [m for m in pool if m.source == "dictionary"],
            [m for m in pool if m.source == "plugin"],
        )
        ordered = sorted(merged, key=lambda m: m.start)
        assert merged == ordered
        for left, right in zip(ordered, ordered[1:]):
            assert left.end <= right.start
