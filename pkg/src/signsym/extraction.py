"""Dictionary mention matching, false-context suppression, and plugin merge.

Matching is leftmost-longest and non-overlapping within a sentence: scan
token positions left to right, take the longest dictionary match at each
position, and resume after it, so "dry cough" always beats "cough".

Suppression removes mentions whose nearby context marks them as something
other than a patient finding, e.g. "flu" in "flu shot" or "Influenza" in
"Influenza vaccine". A rule names a trigger phrase, a direction relative
to the mention, a token window, and optionally the CUIs it applies to
(empty set = all CUIs).

External recognizers (e.g. a learned NER model) can contribute candidate
mentions through the RecognizerPlugin seam; merge_plugin_mentions resolves
span conflicts in favor of the dictionary on equal spans and the longer
span otherwise. The default build registers no plugin.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .corpus import Token
from .errors import ParseError, ValidationError
from .lexicon import CUI_PATTERN, CompiledMatcher, normalized_tokens

MENTION_SOURCES = ("dictionary", "plugin")
SUPPRESSION_DIRECTIONS = ("following", "preceding")

SUPPRESSION_COLUMNS = (
    "id",
    "direction",
    "trigger_phrase",
    "window_tokens",
    "applies_to_cuis",
)

_RESOURCE_DIR = Path(__file__).parent / "resources"
DEFAULT_SUPPRESSION_PATH = _RESOURCE_DIR / "suppression_rules.tsv"


@dataclass(frozen=True)
class Mention:
    note_id: str
    start: int
    end: int
    text: str
    matched_synonym: str
    cui: str
    source: str = "dictionary"

    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class ContextSuppressionRule:
    id: str
    direction: str  # "following" | "preceding"
    trigger_phrase: str
    window_tokens: int
    applies_to_cuis: frozenset[str] = frozenset()  # empty = all CUIs

    def __post_init__(self) -> None:
        if self.direction not in SUPPRESSION_DIRECTIONS:
            raise ValidationError(
                f"rule {self.id!r}: invalid direction {self.direction!r}"
            )
        if self.window_tokens < 1:
            raise ValidationError(f"rule {self.id!r}: window_tokens below 1")


class RecognizerPlugin(Protocol):
    """Sentence-level candidate recognizer.

    Returns (start, end, label) triples with document-level character
    spans; label is either a CUI or raw text left for normalization.
    """

    def __call__(self, tokens: list[Token]) -> list[tuple[int, int, str]]: ...


def match_mentions(
    matcher: CompiledMatcher, tokens: list[Token], text: str, note_id: str
) -> list[Mention]:
    """Leftmost-longest non-overlapping dictionary matches in one sentence."""
    normalized = [token.normalized for token in tokens]
    mentions = []
    index = 0
    while index < len(tokens):
        hit = matcher.match_longest(normalized, index)
        if hit is None:
            index += 1
            continue
        length, cui, synonym = hit
        start = tokens[index].start
        end = tokens[index + length - 1].end
        mentions.append(
            Mention(
                note_id=note_id,
                start=start,
                end=end,
                text=text[start:end],
                matched_synonym=synonym,
                cui=cui,
                source="dictionary",
            )
        )
        index += length
    return mentions


def load_suppression_rules(path: str | Path) -> list[ContextSuppressionRule]:
    path = Path(path)
    rules = []
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle, delimiter="\t")
        header = next(reader, None)
        if header is None or tuple(header) != SUPPRESSION_COLUMNS:
            raise ParseError(
                f"{path}: expected header {list(SUPPRESSION_COLUMNS)}, got {header}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) == len(SUPPRESSION_COLUMNS) - 1:
                row = [*row, ""]  # editors strip the trailing tab of an empty CUI set
            if len(row) != len(SUPPRESSION_COLUMNS):
                raise ParseError(
                    f"{path}:{line_no}: expected {len(SUPPRESSION_COLUMNS)} "
                    f"columns, got {len(row)}"
                )
            rule_id, direction, phrase, window_s, cuis_s = row
            try:
                window = int(window_s)
            except ValueError:
                raise ParseError(f"{path}:{line_no}: non-integer window_tokens")
            cuis = frozenset(c.strip() for c in cuis_s.split(",") if c.strip())
            for cui in cuis:
                if not CUI_PATTERN.match(cui):
                    raise ParseError(f"{path}:{line_no}: invalid CUI {cui!r}")
            rules.append(
                ContextSuppressionRule(
                    id=rule_id,
                    direction=direction,
                    trigger_phrase=phrase,
                    window_tokens=window,
                    applies_to_cuis=cuis,
                )
            )
    return rules


def _phrase_occurrences(
    normalized: list[str], phrase_tokens: tuple[str, ...]
) -> list[tuple[int, int]]:
    """Token index spans where the phrase occurs."""
    width = len(phrase_tokens)
    if width == 0:
        return []
    return [
        (index, index + width)
        for index in range(len(normalized) - width + 1)
        if tuple(normalized[index : index + width]) == phrase_tokens
    ]


def suppress_false_contexts(
    mentions: list[Mention],
    tokens: list[Token],
    rules: list[ContextSuppressionRule],
) -> list[Mention]:
    """Drop mentions with a suppression trigger inside the rule's window.

    The window counts tokens between the mention and the trigger phrase:
    a "following" rule with window 1 fires only on an immediately
    adjacent trigger, window 2 allows one intervening token, and so on.
    """
    if not mentions or not rules:
        return list(mentions)
    normalized = [token.normalized for token in tokens]
    starts = [token.start for token in tokens]
    occurrences = {
        rule.id: _phrase_occurrences(normalized, normalized_tokens(rule.trigger_phrase))
        for rule in rules
    }

    def token_range(mention: Mention) -> tuple[int, int]:
        left = 0
        while left < len(tokens) and tokens[left].end <= mention.start:
            left += 1
        right = left
        while right < len(tokens) and starts[right] < mention.end:
            right += 1
        return left, right

    kept = []
    for mention in mentions:
        m_start, m_end = token_range(mention)
        suppressed = False
        for rule in rules:
            if rule.applies_to_cuis and mention.cui not in rule.applies_to_cuis:
                continue
            for t_start, t_end in occurrences[rule.id]:
                if rule.direction == "following":
                    hit = t_start >= m_end and t_start - m_end < rule.window_tokens
                else:
                    hit = t_end <= m_start and m_start - t_end < rule.window_tokens
                if hit:
                    suppressed = True
                    break
            if suppressed:
                break
        if not suppressed:
            kept.append(mention)
    return kept


def merge_plugin_mentions(
    dictionary_mentions: list[Mention], plugin_mentions: list[Mention]
) -> list[Mention]:
    """Resolve span conflicts between dictionary and plugin candidates.

    On equal spans the dictionary mention wins; otherwise the longer span
    wins; remaining ties go to the earlier start. Winners never overlap.
    """
    pool = sorted(
        list(dictionary_mentions) + list(plugin_mentions),
        key=lambda m: (-m.length(), m.start, 0 if m.source == "dictionary" else 1),
    )
    accepted: list[Mention] = []
    for candidate in pool:
        if all(
            candidate.end <= other.start or candidate.start >= other.end
            for other in accepted
        ):
            accepted.append(candidate)
    return sorted(accepted, key=lambda m: (m.start, m.end))
