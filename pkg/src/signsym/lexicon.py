"""Concept dictionary: loading, validation, merging, and compilation.

A lexicon row maps one (CUI, synonym) pair; rows sharing a CUI form one
ConceptEntry. Synonyms are compared after normalization: lowercase the
text, tokenize it with the corpus tokenizer (punctuation splits), and
join the tokens with single spaces. The preferred term always counts as
a synonym of its own entry, and a normalized synonym may belong to only
one CUI; a cross-CUI collision is a hard error because it would make
dictionary matching ambiguous.

Some concepts fan out into several fine-grained CUIs that differ only by
a qualifier, written as a suffix of the preferred term after " - " or an
en/em dash (e.g. green/clear/yellow sputum variants of productive cough).
Concept counting groups such entries into one concept family.

CompiledMatcher is an immutable token trie over normalized synonym token
sequences. Walking the trie from a start token and remembering the last
accepting depth yields the longest dictionary match at that position,
which is exactly what leftmost-longest mention matching needs.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import tokenize_text
from .errors import ParseError, ValidationError

log = logging.getLogger(__name__)

CUI_PATTERN = re.compile(r"^C\d{7}$")

LEXICON_COLUMNS = (
    "cui",
    "omop_concept_id",
    "preferred_term",
    "semantic_type",
    "covid_target",
    "prevalence_rank",
    "synonym",
)

_RESOURCE_DIR = Path(__file__).parent / "resources"
DEFAULT_LEXICON_PATH = _RESOURCE_DIR / "lexicon_seed.tsv"

_QUALIFIER_SPLIT = re.compile(r"\s+-\s+|—|–")


def normalize_term(text: str) -> str:
    """Canonical form used for synonym identity and exact matching."""
    return " ".join(token.normalized for token in tokenize_text(text))


def normalized_tokens(text: str) -> tuple[str, ...]:
    return tuple(token.normalized for token in tokenize_text(text))


def family_key(preferred_term: str) -> str:
    """Concept family of a preferred term, qualifier suffix stripped."""
    return normalize_term(_QUALIFIER_SPLIT.split(preferred_term)[0])


@dataclass(frozen=True)
class ConceptEntry:
    cui: str
    preferred_term: str
    omop_concept_id: int
    semantic_type: str
    covid_target: bool
    prevalence_rank: int
    synonyms: tuple[str, ...]  # original strings, normalized-deduplicated


@dataclass
class Lexicon:
    entries: list[ConceptEntry]
    version: str = "0"
    _by_cui: dict[str, ConceptEntry] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._by_cui = {entry.cui: entry for entry in self.entries}

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, cui: str) -> ConceptEntry | None:
        return self._by_cui.get(cui)


def _dedupe_synonyms(preferred_term: str, synonyms: list[str]) -> tuple[str, ...]:
    # Preferred term is always a synonym of its own entry.
    result: list[str] = []
    seen: set[str] = set()
    for synonym in [preferred_term, *synonyms]:
        key = normalize_term(synonym)
        if key and key not in seen:
            seen.add(key)
            result.append(synonym)
    return tuple(result)


def validate_lexicon(lexicon: Lexicon) -> list[str]:
    """Return a list of violated constraints; empty means valid."""
    problems: list[str] = []
    if not lexicon.entries:
        problems.append("lexicon has no entries")
    seen_cuis: set[str] = set()
    synonym_owner: dict[str, str] = {}
    for entry in lexicon.entries:
        if not CUI_PATTERN.match(entry.cui):
            problems.append(f"invalid CUI format: {entry.cui!r}")
        if entry.cui in seen_cuis:
            problems.append(f"duplicate CUI: {entry.cui}")
        seen_cuis.add(entry.cui)
        if entry.omop_concept_id < 0:
            problems.append(f"{entry.cui}: negative omop_concept_id")
        if entry.prevalence_rank < 1:
            problems.append(f"{entry.cui}: prevalence_rank below 1")
        if not entry.synonyms:
            problems.append(f"{entry.cui}: no synonyms")
        keys = {normalize_term(s) for s in entry.synonyms}
        if normalize_term(entry.preferred_term) not in keys:
            problems.append(f"{entry.cui}: preferred term missing from synonyms")
        for synonym in entry.synonyms:
            key = normalize_term(synonym)
            if not key:
                problems.append(f"{entry.cui}: empty synonym")
                continue
            owner = synonym_owner.setdefault(key, entry.cui)
            if owner != entry.cui:
                problems.append(
                    f"synonym {synonym!r} maps to both {owner} and {entry.cui}"
                )
    return problems


def _parse_bool(cell: str, where: str) -> bool:
    if cell in ("1", "true", "True"):
        return True
    if cell in ("0", "false", "False"):
        return False
    raise ParseError(f"{where}: invalid covid_target flag {cell!r}")


def load_lexicon(path: str | Path, version: str | None = None) -> Lexicon:
    """Load a lexicon TSV (header row required, one row per CUI/synonym)."""
    path = Path(path)
    order: list[str] = []
    scalars: dict[str, tuple] = {}
    synonyms: dict[str, list[str]] = {}
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle, delimiter="\t")
        header = next(reader, None)
        if header is None or tuple(header) != LEXICON_COLUMNS:
            raise ParseError(
                f"{path}: expected header {list(LEXICON_COLUMNS)}, got {header}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            where = f"{path}:{line_no}"
            if len(row) != len(LEXICON_COLUMNS):
                raise ParseError(
                    f"{where}: expected {len(LEXICON_COLUMNS)} columns, got {len(row)}"
                )
            cui, omop_s, preferred, semantic_type, covid_s, rank_s, synonym = row
            if not synonym.strip():
                raise ParseError(f"{where}: empty synonym")
            try:
                fields = (
                    preferred,
                    int(omop_s),
                    semantic_type,
                    _parse_bool(covid_s, where),
                    int(rank_s),
                )
            except ValueError:
                raise ParseError(f"{where}: non-integer numeric column")
            if cui not in scalars:
                scalars[cui] = fields
                synonyms[cui] = []
                order.append(cui)
            elif scalars[cui] != fields:
                raise ValidationError(
                    f"{where}: conflicting metadata for {cui} "
                    f"(earlier rows say {scalars[cui]!r})"
                )
            synonyms[cui].append(synonym)
    entries = []
    for cui in order:
        preferred, omop_id, semantic_type, covid_target, rank = scalars[cui]
        entries.append(
            ConceptEntry(
                cui=cui,
                preferred_term=preferred,
                omop_concept_id=omop_id,
                semantic_type=semantic_type,
                covid_target=covid_target,
                prevalence_rank=rank,
                synonyms=_dedupe_synonyms(preferred, synonyms[cui]),
            )
        )
    lexicon = Lexicon(entries, version=version or path.name)
    problems = validate_lexicon(lexicon)
    if problems:
        raise ValidationError(f"{path}: " + "; ".join(problems))
    return lexicon


def merge_lexicons(lexicons: list[Lexicon]) -> Lexicon:
    """Union lexicons by CUI; the first source listing a CUI supplies its
    scalar fields, synonym sets are unioned, and a normalized synonym
    claimed by different CUIs in different sources is an error."""
    if not lexicons:
        raise ValidationError("nothing to merge")
    order: list[str] = []
    merged: dict[str, ConceptEntry] = {}
    synonym_source: dict[str, tuple[str, str]] = {}  # norm synonym -> (cui, version)
    duplicates = 0
    for lexicon in lexicons:
        for entry in lexicon.entries:
            for synonym in entry.synonyms:
                key = normalize_term(synonym)
                claimed = synonym_source.setdefault(key, (entry.cui, lexicon.version))
                if claimed[0] != entry.cui:
                    raise ValidationError(
                        f"synonym {synonym!r} maps to {claimed[0]} in source "
                        f"{claimed[1]!r} but to {entry.cui} in source "
                        f"{lexicon.version!r}"
                    )
            if entry.cui not in merged:
                merged[entry.cui] = entry
                order.append(entry.cui)
            else:
                base = merged[entry.cui]
                before = len(base.synonyms)
                combined = _dedupe_synonyms(
                    base.preferred_term, [*base.synonyms, *entry.synonyms]
                )
                duplicates += before + len(entry.synonyms) - len(combined)
                merged[entry.cui] = ConceptEntry(
                    cui=base.cui,
                    preferred_term=base.preferred_term,
                    omop_concept_id=base.omop_concept_id,
                    semantic_type=base.semantic_type,
                    covid_target=base.covid_target,
                    prevalence_rank=base.prevalence_rank,
                    synonyms=combined,
                )
    if duplicates:
        log.info("merge removed %d duplicate synonyms", duplicates)
    version = "+".join(lexicon.version for lexicon in lexicons)
    return Lexicon([merged[cui] for cui in order], version=version)


def write_lexicon(lexicon: Lexicon, path: str | Path) -> int:
    """Write one row per (CUI, synonym); inverse of load_lexicon."""
    path = Path(path)
    rows = 0
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(LEXICON_COLUMNS)
        for entry in lexicon.entries:
            for synonym in entry.synonyms:
                writer.writerow(
                    [
                        entry.cui,
                        entry.omop_concept_id,
                        entry.preferred_term,
                        entry.semantic_type,
                        int(entry.covid_target),
                        entry.prevalence_rank,
                        synonym,
                    ]
                )
                rows += 1
    return rows


def lexicon_stats(lexicon: Lexicon) -> tuple[int, int, int]:
    """(concept_count, cui_count, synonym_count).

    Concepts group CUIs by family key, so qualifier variants of one term
    count once. The synonym count excludes each entry's preferred term,
    mirroring how source vocabularies report "N terms with M synonyms".
    """
    families = {family_key(entry.preferred_term) for entry in lexicon.entries}
    synonym_count = 0
    for entry in lexicon.entries:
        preferred_key = normalize_term(entry.preferred_term)
        synonym_count += sum(
            1 for s in entry.synonyms if normalize_term(s) != preferred_key
        )
    return (len(families), len(lexicon.entries), synonym_count)


# =========================================================================
# Compilation
# =========================================================================

_ACCEPT = None  # reserved trie key; token keys are always strings


class CompiledMatcher:
    """Immutable token trie recognizing exactly the lexicon's synonyms.

    Matching never needs the original lexicon: each accepting node stores
    the owning CUI and the synonym string that produced it.
    """

    def __init__(self, lexicon: Lexicon):
        root: dict = {}
        count = 0
        max_len = 0
        for entry in lexicon.entries:
            for synonym in entry.synonyms:
                tokens = normalized_tokens(synonym)
                if not tokens:
                    continue
                node = root
                for token in tokens:
                    node = node.setdefault(token, {})
                node[_ACCEPT] = (entry.cui, synonym)
                count += 1
                max_len = max(max_len, len(tokens))
        self._root = root
        self.pattern_count = count
        self.max_pattern_tokens = max_len
        self.lexicon = lexicon

    def match_longest(
        self, tokens: list[str], start: int
    ) -> tuple[int, str, str] | None:
        """Longest synonym starting at tokens[start], as (length, cui, synonym)."""
        node = self._root
        best = None
        index = start
        limit = len(tokens)
        while index < limit:
            node = node.get(tokens[index])
            if node is None:
                break
            index += 1
            accept = node.get(_ACCEPT)
            if accept is not None:
                best = (index - start, accept[0], accept[1])
        return best

    def enumerate_sequences(self) -> list[tuple[tuple[str, ...], str, str]]:
        """All accepted (token_sequence, cui, synonym), sorted."""
        result: list[tuple[tuple[str, ...], str, str]] = []

        def walk(node: dict, prefix: tuple[str, ...]) -> None:
            accept = node.get(_ACCEPT)
            if accept is not None:
                result.append((prefix, accept[0], accept[1]))
            for token in sorted(key for key in node if key is not _ACCEPT):
                walk(node[token], prefix + (token,))

        walk(self._root, ())
        return result


def compile_lexicon(lexicon: Lexicon) -> CompiledMatcher:
    return CompiledMatcher(lexicon)
