"""Mapping mention text to lexicon concepts and attribute values to codes.

Normalization is two-staged. Stage one looks the normalized mention text
up among the normalized synonyms; a hit is an exact match with score 1.
Stage two falls back to token-set similarity: Jaccard overlap between the
mention's token set and each synonym's token set, so "breathing harder"
still reaches a synonym "harder breathing" with score 1.0. The best
entry wins when its score clears the threshold (default 0.5); score ties
break deterministically by lower prevalence rank, then lexicographically
smaller CUI.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .attributes import AttributeMention
from .errors import ValidationError
from .lexicon import Lexicon, normalize_term, normalized_tokens

log = logging.getLogger(__name__)

DEFAULT_SIMILARITY_THRESHOLD = 0.5

NORMALIZATION_METHODS = ("exact", "similarity")

_CLOSED_VALUE_SETS = {
    "negation": frozenset({"negated", "affirmed"}),
    "uncertainty": frozenset({"uncertain", "certain"}),
    "severity": frozenset({"mild", "moderate", "severe"}),
}


@dataclass(frozen=True)
class NormalizedConcept:
    cui: str
    preferred_term: str
    omop_concept_id: int
    similarity_score: float
    method: str  # "exact" | "similarity"


class Normalizer:
    """Reusable normalization index over one lexicon."""

    def __init__(
        self, lexicon: Lexicon, threshold: float = DEFAULT_SIMILARITY_THRESHOLD
    ):
        if not 0.0 < threshold <= 1.0:
            raise ValidationError(f"similarity threshold {threshold} not in (0, 1]")
        self.lexicon = lexicon
        self.threshold = threshold
        self._exact: dict[str, NormalizedConcept] = {}
        self._token_sets: list[tuple[frozenset[str], int, str]] = []
        for entry in lexicon.entries:
            concept = NormalizedConcept(
                cui=entry.cui,
                preferred_term=entry.preferred_term,
                omop_concept_id=entry.omop_concept_id,
                similarity_score=1.0,
                method="exact",
            )
            for synonym in entry.synonyms:
                self._exact.setdefault(normalize_term(synonym), concept)
                tokens = frozenset(normalized_tokens(synonym))
                if tokens:
                    self._token_sets.append(
                        (tokens, entry.prevalence_rank, entry.cui)
                    )

    def normalize(self, text: str) -> NormalizedConcept | None:
        exact = self._exact.get(normalize_term(text))
        if exact is not None:
            return exact
        mention_tokens = frozenset(normalized_tokens(text))
        if not mention_tokens:
            return None
        best: tuple[float, int, str] | None = None
        for synonym_tokens, rank, cui in self._token_sets:
            overlap = len(mention_tokens & synonym_tokens)
            if not overlap:
                continue
            score = overlap / len(mention_tokens | synonym_tokens)
            if (
                best is None
                or score > best[0]
                or (score == best[0] and (rank, cui) < (best[1], best[2]))
            ):
                best = (score, rank, cui)
        if best is None or best[0] < self.threshold:
            return None
        entry = self.lexicon.entry(best[2])
        return NormalizedConcept(
            cui=entry.cui,
            preferred_term=entry.preferred_term,
            omop_concept_id=entry.omop_concept_id,
            similarity_score=best[0],
            method="similarity",
        )


def normalize_mention(
    text: str, lexicon: Lexicon, threshold: float = DEFAULT_SIMILARITY_THRESHOLD
) -> NormalizedConcept | None:
    return Normalizer(lexicon, threshold).normalize(text)


def map_to_omop(cui: str, lexicon: Lexicon) -> int:
    """OMOP concept id for a CUI; 0 means unmapped."""
    entry = lexicon.entry(cui)
    if entry is None:
        log.warning("no OMOP mapping for %s", cui)
        return 0
    return entry.omop_concept_id


def normalize_attribute_value(attribute: AttributeMention) -> str:
    """Canonical value an attribute contributes to its target.

    Negation, uncertainty, and severity draw from closed value sets; the
    remaining kinds pass their surface (or table value) through lowercased.
    """
    value = attribute.normalized_value or attribute.text
    closed = _CLOSED_VALUE_SETS.get(attribute.kind)
    if closed is not None:
        value = value.lower()
        if value not in closed:
            raise ValidationError(
                f"{attribute.kind} value {value!r} not in {sorted(closed)}"
            )
        return value
    return value.lower()
