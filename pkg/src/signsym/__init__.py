"""COVID-19 sign/symptom extraction over clinical text.

Dictionary-based entity recognition with attribute detection (negation,
uncertainty, severity, and five more), UMLS/OMOP concept normalization,
patient-level aggregation, Note_NLP export, and an evaluation harness.
"""

from .aggregate import PatientSummary, aggregate_patient, classify_assertion
from .attributes import AttributeMention, Relation, TriggerRule, link_attributes
from .corpus import (
    Document,
    GoldEntity,
    Sentence,
    Token,
    load_documents,
    load_gold,
    split_sentences,
    tokenize,
)
from .errors import InputError, ParseError, ValidationError
from .evaluation import (
    EvalReport,
    OverlapReport,
    evaluate_exact,
    evaluate_normalization,
    evaluate_patient_level,
    f_measure,
    lexicon_overlap,
)
from .extraction import Mention, match_mentions, suppress_false_contexts
from .lexicon import (
    ConceptEntry,
    Lexicon,
    compile_lexicon,
    lexicon_stats,
    load_lexicon,
    merge_lexicons,
)
from .normalization import NormalizedConcept, Normalizer
from .omop import MentionRecord, write_mentions_jsonl, write_note_nlp
from .pipeline import ExtractionSummary, Pipeline, PipelineConfig
from .version import __version__

__all__ = [
    "AttributeMention",
    "ConceptEntry",
    "Document",
    "EvalReport",
    "ExtractionSummary",
    "GoldEntity",
    "InputError",
    "Lexicon",
    "Mention",
    "MentionRecord",
    "NormalizedConcept",
    "Normalizer",
    "OverlapReport",
    "ParseError",
    "PatientSummary",
    "Pipeline",
    "PipelineConfig",
    "Relation",
    "Sentence",
    "Token",
    "TriggerRule",
    "ValidationError",
    "__version__",
    "aggregate_patient",
    "classify_assertion",
    "compile_lexicon",
    "evaluate_exact",
    "evaluate_normalization",
    "evaluate_patient_level",
    "f_measure",
    "lexicon_overlap",
    "lexicon_stats",
    "link_attributes",
    "load_documents",
    "load_gold",
    "load_lexicon",
    "match_mentions",
    "merge_lexicons",
    "split_sentences",
    "suppress_false_contexts",
    "tokenize",
    "write_mentions_jsonl",
    "write_note_nlp",
]
