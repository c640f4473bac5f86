"""Attribute detection and attribute-to-mention linking.

Eight attribute kinds qualify a sign/symptom mention: body_location,
severity, temporal, subject, condition, uncertainty, negation, course.
Most kinds are driven by an editable trigger table: a rule carries the
trigger phrases, the direction they modify (pre = text after the trigger,
post = text before it), a token scope, terminator tokens that cut the
scope, the normalized value the attribute contributes, and pseudo phrases
that block a trigger when they match at the same position ("no increase
in cough" must not negate the cough).

Temporal expressions, unanswered question marks, non-patient subjects,
and semi-structured symptom lists ("Fever: no", "[x] headache") each get
a dedicated detector because a flat phrase table cannot express them.

Linking connects an attribute to the nearest mention in its direction,
measured in tokens, stopping at terminators and at the scope limit. A
pre trigger extends across coordinated mentions ("denies fever and
cough" negates both) joined only by "and" or commas.
"""

from __future__ import annotations

import csv
import re
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import ATTRIBUTE_KINDS, Token
from .errors import ParseError, ValidationError
from .extraction import Mention, match_mentions
from .lexicon import CompiledMatcher, normalized_tokens

TRIGGER_DIRECTIONS = ("pre", "post", "bidirectional")

TRIGGER_COLUMNS = (
    "kind",
    "phrase",
    "direction",
    "scope_tokens",
    "terminators",
    "normalized_value",
    "is_pseudo",
)

_RESOURCE_DIR = Path(__file__).parent / "resources"
DEFAULT_TRIGGER_PATH = _RESOURCE_DIR / "trigger_rules.tsv"

COORDINATION_TOKENS = frozenset({"and", ","})
ANSWER_TOKENS = frozenset({"yes", "no", "denies", "positive", "negative"})

DEFAULT_SUBJECT_TERMS = (
    "wife",
    "husband",
    "daughter",
    "son",
    "mother",
    "father",
    "brother",
    "sister",
    "family member",
    "roommate",
)


@dataclass(frozen=True)
class TriggerRule:
    kind: str
    phrases: tuple[str, ...]
    direction: str  # "pre" | "post" | "bidirectional"
    scope_tokens: int
    terminators: tuple[str, ...]
    normalized_value: str
    pseudo_phrases: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ATTRIBUTE_KINDS:
            raise ValidationError(f"unknown attribute kind {self.kind!r}")
        if self.direction not in TRIGGER_DIRECTIONS:
            raise ValidationError(f"invalid trigger direction {self.direction!r}")
        if self.scope_tokens < 1:
            raise ValidationError("scope_tokens below 1")


@dataclass(frozen=True)
class AttributeMention:
    kind: str
    start: int
    end: int
    text: str
    normalized_value: str
    rule: TriggerRule | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Relation:
    attribute: AttributeMention
    target: Mention


# Synthetic rules for detectors that are not table-driven.
_TEMPORAL_RULE = TriggerRule(
    kind="temporal",
    phrases=(),
    direction="bidirectional",
    scope_tokens=10,
    terminators=(),
    normalized_value="",
)
_QUESTION_RULE = TriggerRule(
    kind="uncertainty",
    phrases=("?",),
    direction="post",
    scope_tokens=12,
    terminators=(),
    normalized_value="uncertain",
)
_SUBJECT_RULE_SCOPE = 15

DEFAULT_LINK_RULE = TriggerRule(
    kind="negation",
    phrases=(),
    direction="bidirectional",
    scope_tokens=8,
    terminators=(),
    normalized_value="",
)


# =========================================================================
# Trigger table loading
# =========================================================================

def load_trigger_rules(path: str | Path) -> list[TriggerRule]:
    """Load the trigger table: one phrase per row, grouped into rules.

    Rows sharing (kind, direction, scope_tokens, terminators,
    normalized_value) become one rule. Pseudo rows (is_pseudo=1) pool per
    kind and block every rule of that kind.
    """
    path = Path(path)
    grouped: dict[tuple, list[str]] = {}
    pseudo_by_kind: dict[str, list[str]] = {}
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle, delimiter="\t")
        header = next(reader, None)
        if header is None or tuple(header) != TRIGGER_COLUMNS:
            raise ParseError(
                f"{path}: expected header {list(TRIGGER_COLUMNS)}, got {header}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            where = f"{path}:{line_no}"
            if len(row) != len(TRIGGER_COLUMNS):
                raise ParseError(
                    f"{where}: expected {len(TRIGGER_COLUMNS)} columns, got {len(row)}"
                )
            kind, phrase, direction, scope_s, terminators_s, value, pseudo_s = row
            if not phrase.strip():
                raise ParseError(f"{where}: empty phrase")
            if pseudo_s not in ("0", "1"):
                raise ParseError(f"{where}: is_pseudo must be 0 or 1")
            if pseudo_s == "1":
                if kind not in ATTRIBUTE_KINDS:
                    raise ValidationError(f"{where}: unknown attribute kind {kind!r}")
                pseudo_by_kind.setdefault(kind, []).append(phrase)
                continue
            try:
                scope = int(scope_s)
            except ValueError:
                raise ParseError(f"{where}: non-integer scope_tokens")
            terminators = tuple(
                t.strip() for t in terminators_s.split(",") if t.strip()
            )
            key = (kind, direction, scope, terminators, value)
            grouped.setdefault(key, []).append(phrase)
    rules = []
    for (kind, direction, scope, terminators, value), phrases in grouped.items():
        rules.append(
            TriggerRule(
                kind=kind,
                phrases=tuple(dict.fromkeys(phrases)),
                direction=direction,
                scope_tokens=scope,
                terminators=terminators,
                normalized_value=value,
                pseudo_phrases=tuple(dict.fromkeys(pseudo_by_kind.get(kind, ()))),
            )
        )
    for kind, phrases in pseudo_by_kind.items():
        trigger_phrases = {
            normalized_tokens(p)
            for rule in rules
            if rule.kind == kind
            for p in rule.phrases
        }
        for phrase in phrases:
            if normalized_tokens(phrase) in trigger_phrases:
                raise ValidationError(
                    f"{path}: {kind} phrase {phrase!r} is both trigger and pseudo"
                )
    return rules


# =========================================================================
# Table-driven detection
# =========================================================================

_HIT = None  # reserved trie key; token keys are always strings


class TriggerIndex:
    """Compiled trigger table: one token trie shared by every kind."""

    def __init__(self, rules: list[TriggerRule]):
        root: dict = {}
        inserted: set[tuple[str, tuple[str, ...], bool]] = set()

        def insert(kind: str, tokens: tuple[str, ...], rule: TriggerRule | None):
            pseudo = rule is None
            if not tokens or (kind, tokens, pseudo) in inserted:
                return
            inserted.add((kind, tokens, pseudo))
            node = root
            for token in tokens:
                node = node.setdefault(token, {})
            node.setdefault(_HIT, []).append((kind, rule))

        for rule in rules:
            for phrase in rule.phrases:
                insert(rule.kind, normalized_tokens(phrase), rule)
            for phrase in rule.pseudo_phrases:
                insert(rule.kind, normalized_tokens(phrase), None)
        self._root = root
        self.rules = list(rules)

    def detect(self, tokens: list[Token], text: str) -> list[AttributeMention]:
        """Leftmost-longest trigger matches per kind, pseudo-blocked."""
        normalized = [token.normalized for token in tokens]
        count = len(tokens)
        # kind -> position -> longest (length, rule) / longest pseudo length
        triggers: dict[str, dict[int, tuple[int, TriggerRule]]] = {}
        pseudos: dict[str, dict[int, int]] = {}
        for position in range(count):
            node = self._root
            index = position
            while index < count:
                node = node.get(normalized[index])
                if node is None:
                    break
                index += 1
                for kind, rule in node.get(_HIT, ()):
                    length = index - position
                    if rule is None:
                        seen = pseudos.setdefault(kind, {})
                        if length > seen.get(position, 0):
                            seen[position] = length
                    else:
                        seen = triggers.setdefault(kind, {})
                        if position not in seen or length > seen[position][0]:
                            seen[position] = (length, rule)
        attributes = []
        for kind in sorted(set(triggers) | set(pseudos)):
            kind_triggers = triggers.get(kind, {})
            kind_pseudos = pseudos.get(kind, {})
            next_free = 0
            for position in sorted(set(kind_triggers) | set(kind_pseudos)):
                if position < next_free:
                    continue
                hit = kind_triggers.get(position)
                pseudo_len = kind_pseudos.get(position, 0)
                if pseudo_len and (hit is None or pseudo_len >= hit[0]):
                    next_free = position + pseudo_len
                    continue
                if hit is None:
                    continue
                length, rule = hit
                start = tokens[position].start
                end = tokens[position + length - 1].end
                attributes.append(
                    AttributeMention(
                        kind=kind,
                        start=start,
                        end=end,
                        text=text[start:end],
                        normalized_value=rule.normalized_value,
                        rule=rule,
                    )
                )
                next_free = position + length
        attributes.sort(key=lambda a: (a.start, a.end, a.kind))
        return attributes


def detect_attributes(
    tokens: list[Token], rules: list[TriggerRule], text: str
) -> list[AttributeMention]:
    return TriggerIndex(rules).detect(tokens, text)


# =========================================================================
# Temporal expressions
# =========================================================================

_MONTH = (
    r"(?:january|february|march|april|may|june|july|august|september|"
    r"october|november|december|jan|feb|mar|apr|jun|jul|aug|sep|sept|oct|"
    r"nov|dec)"
)
_WEEKDAY = (
    r"(?:monday|tuesday|wednesday|thursday|friday|saturday|sunday|"
    r"mon|tue|tues|wed|thu|thur|thurs|fri|sat|sun)"
)
_UNIT = r"(?:days?|weeks?|months?|years?|hours?|hrs?|nights?)"
_DAY = r"\d{1,2}(?:st|nd|rd|th)?"

_TEMPORAL = re.compile(
    r"\b(?:"
    + "|".join(
        [
            rf"{_WEEKDAY}[,\s]+{_MONTH}\s+{_DAY}(?:,?\s+\d{{4}})?",
            rf"{_MONTH}\s+{_DAY}(?:,?\s+\d{{4}})?",
            r"\d{4}-\d{2}-\d{2}",
            r"\d{1,2}[/-]\d{1,2}(?:[/-]\d{2,4})?",
            rf"x\s?\d+\s?{_UNIT}",
            rf"for\s+(?:the\s+(?:last|past)\s+)?\d+\s+{_UNIT}",
            rf"\d+\s+{_UNIT}\s+ago",
            rf"since\s+(?:yesterday|last\s+(?:night|week|month|year)|{_WEEKDAY}|{_MONTH})",
            r"yesterday|today|tonight",
            r"this\s+(?:morning|afternoon|evening|week)",
            r"last\s+(?:night|week|month|year)",
        ]
    )
    + r")\b",
    re.IGNORECASE,
)


def detect_temporal(text: str, base: int = 0) -> list[AttributeMention]:
    """Date, duration, and relative time expressions in one sentence.

    The matched surface becomes the normalized value; no calendar
    resolution is attempted. ``text`` is the sentence string; ``base``
    shifts spans to document offsets.
    """
    return [
        AttributeMention(
            kind="temporal",
            start=base + match.start(),
            end=base + match.end(),
            text=match.group(0),
            normalized_value=match.group(0),
            rule=_TEMPORAL_RULE,
        )
        for match in _TEMPORAL.finditer(text)
    ]


# =========================================================================
# Question marks, subjects, semi-structured lists
# =========================================================================

def detect_question_uncertainty(
    tokens: list[Token], following_tokens: list[Token] | None = None
) -> list[AttributeMention]:
    """Unanswered question marks signal uncertainty ("Fever? Cough?").

    A question mark is answered, and therefore silent, when an answer
    token (yes/no/denies/positive/negative) follows it in the same
    sentence or opens the following sentence.
    """
    attributes = []
    for index, token in enumerate(tokens):
        if token.normalized != "?":
            continue
        answered = any(
            later.normalized in ANSWER_TOKENS for later in tokens[index + 1 :]
        )
        if not answered and following_tokens:
            answered = following_tokens[0].normalized in ANSWER_TOKENS
        if not answered:
            attributes.append(
                AttributeMention(
                    kind="uncertainty",
                    start=token.start,
                    end=token.end,
                    text=token.surface,
                    normalized_value="uncertain",
                    rule=_QUESTION_RULE,
                )
            )
    return attributes


def subject_rules(terms: tuple[str, ...] = DEFAULT_SUBJECT_TERMS) -> list[TriggerRule]:
    return [
        TriggerRule(
            kind="subject",
            phrases=(term,),
            direction="bidirectional",
            scope_tokens=_SUBJECT_RULE_SCOPE,
            terminators=(),
            normalized_value=term.lower(),
        )
        for term in terms
    ]


def detect_subject(
    tokens: list[Token],
    text: str,
    relation_terms: tuple[str, ...] = DEFAULT_SUBJECT_TERMS,
) -> list[AttributeMention]:
    """Mentions of a person other than the patient ("per his wife ...").

    Emits the relation term itself; sentences about the patient yield
    nothing, the patient being the default subject.
    """
    return TriggerIndex(subject_rules(relation_terms)).detect(tokens, text)


_NEGATIVE_VALUES = frozenset({"no", "n", "neg", "negative", "denies"})
_POSITIVE_VALUES = frozenset({"yes", "y", "pos", "positive"})


def _classify_marker(normalized: list[str], index: int) -> tuple[str, int] | None:
    """Checkbox marker starting at token index: ("pos"|"neg", token width)."""
    rest = normalized[index : index + 3]
    if rest[:2] == ["[", "]"]:
        return ("neg", 2)
    if len(rest) == 3 and rest[0] == "[" and rest[1] == "x" and rest[2] == "]":
        return ("pos", 3)
    if len(rest) == 3 and rest[0] == "(" and rest[2] == ")":
        if rest[1] == "+":
            return ("pos", 3)
        if rest[1] == "-":
            return ("neg", 3)
    return None


def _classify_value(normalized: list[str], index: int) -> tuple[str, int] | None:
    marker = _classify_marker(normalized, index)
    if marker:
        return marker
    value = normalized[index]
    if value in _NEGATIVE_VALUES:
        return ("neg", 1)
    if value in _POSITIVE_VALUES:
        return ("pos", 1)
    return ("neutral", 1)


def has_list_structure(tokens: list[Token], mentions: list[Mention]) -> bool:
    """True when the sentence looks like a symptom list: a dictionary term
    in key position ("Fever: ...") or any checkbox marker."""
    normalized = [token.normalized for token in tokens]
    for index in range(len(normalized)):
        if _classify_marker(normalized, index):
            return True
    ends = {token.end: position for position, token in enumerate(tokens)}
    for mention in mentions:
        position = ends.get(mention.end)
        if (
            position is not None
            and position + 1 < len(normalized)
            and normalized[position + 1] == ":"
        ):
            return True
    return False


def parse_semistructured_list(
    tokens: list[Token],
    matcher: CompiledMatcher,
    text: str,
    note_id: str,
) -> list[tuple[Mention, AttributeMention | None]]:
    """Pair dictionary terms with their list values.

    "Fever: no Cough: yes" yields fever with a negation attribute and
    cough with none; "[ ] diarrhea" negates via its unchecked box; a
    neutral value such as "38.5C" asserts nothing.
    """
    mentions = match_mentions(matcher, tokens, text, note_id)
    normalized = [token.normalized for token in tokens]
    starts = {token.start: position for position, token in enumerate(tokens)}
    ends = {token.end: position for position, token in enumerate(tokens)}
    pairs: list[tuple[Mention, AttributeMention | None]] = []
    for mention in mentions:
        first = starts.get(mention.start)
        last = ends.get(mention.end)
        if first is None or last is None:
            continue
        verdict = None
        span = None
        after = last + 1
        if after < len(normalized) and normalized[after] == ":" and after + 1 < len(
            normalized
        ):
            verdict, width = _classify_value(normalized, after + 1)
            span = (tokens[after + 1].start, tokens[after + width].end)
        else:
            for width in (3, 2):
                if first - width >= 0:
                    marker = _classify_marker(normalized, first - width)
                    if marker and marker[1] == width:
                        verdict = marker[0]
                        span = (tokens[first - width].start, tokens[first - 1].end)
                        break
        if verdict is None:
            continue
        attribute = None
        if verdict == "neg":
            attribute = AttributeMention(
                kind="negation",
                start=span[0],
                end=span[1],
                text=text[span[0] : span[1]],
                normalized_value="negated",
                rule=None,
            )
        pairs.append((mention, attribute))
    return pairs


# =========================================================================
# Linking
# =========================================================================

def _token_range(tokens: list[Token], start: int, end: int) -> tuple[int, int]:
    """Indices of tokens covered by a character span."""
    starts = [token.start for token in tokens]
    ends = [token.end for token in tokens]
    low = bisect_right(ends, start)
    high = bisect_left(starts, end)
    return low, high


def link_attributes(
    mentions: list[Mention],
    attributes: list[AttributeMention],
    tokens: list[Token],
) -> list[Relation]:
    """Link each attribute to mentions per its rule's direction and scope.

    The nearest eligible mention wins; terminator tokens between the
    trigger and a mention block it and everything beyond. From the first
    linked mention the link extends across coordination ("and", ",") to
    further mentions, which lets one pre trigger cover a conjoined list.
    """
    if not mentions or not attributes:
        return []
    normalized = [token.normalized for token in tokens]
    spans = sorted(
        ((_token_range(tokens, m.start, m.end), m) for m in mentions),
        key=lambda pair: pair[0],
    )

    def chain(
        ordered: list[tuple[tuple[int, int], Mention]],
        attr_low: int,
        attr_high: int,
        rule: TriggerRule,
        forward: bool,
    ) -> list[Mention] | None:
        terminators = set(rule.terminators)
        linked: list[Mention] = []
        previous: tuple[int, int] | None = None
        for (m_low, m_high), mention in ordered:
            if not linked:
                gap = m_low - attr_high if forward else attr_low - m_high
                if gap < 0 or gap >= rule.scope_tokens:
                    break
                between = (
                    normalized[attr_high:m_low]
                    if forward
                    else normalized[m_high:attr_low]
                )
                if terminators.intersection(between):
                    break
                linked.append(mention)
                previous = (m_low, m_high)
            else:
                between = (
                    normalized[previous[1] : m_low]
                    if forward
                    else normalized[m_high : previous[0]]
                )
                if not between or any(t not in COORDINATION_TOKENS for t in between):
                    break
                linked.append(mention)
                previous = (m_low, m_high)
        return linked or None

    relations = []
    for attribute in attributes:
        rule = attribute.rule or DEFAULT_LINK_RULE
        attr_low, attr_high = _token_range(tokens, attribute.start, attribute.end)
        forward_candidates = [
            ((m_low, m_high), m) for (m_low, m_high), m in spans if m_low >= attr_high
        ]
        backward_candidates = [
            ((m_low, m_high), m)
            for (m_low, m_high), m in reversed(spans)
            if m_high <= attr_low
        ]
        linked: list[Mention] | None = None
        if rule.direction == "pre":
            linked = chain(forward_candidates, attr_low, attr_high, rule, True)
        elif rule.direction == "post":
            linked = chain(backward_candidates, attr_low, attr_high, rule, False)
        else:
            ahead = chain(forward_candidates, attr_low, attr_high, rule, True)
            behind = chain(backward_candidates, attr_low, attr_high, rule, False)
            if ahead and behind:
                gap_ahead = _token_range(tokens, ahead[0].start, ahead[0].end)[0] - attr_high
                gap_behind = attr_low - _token_range(tokens, behind[0].start, behind[0].end)[1]
                linked = ahead if gap_ahead <= gap_behind else behind
            else:
                linked = ahead or behind
        for mention in linked or ():
            relations.append(Relation(attribute=attribute, target=mention))
    relations.sort(
        key=lambda r: (r.attribute.start, r.attribute.end, r.target.start)
    )
    return relations
