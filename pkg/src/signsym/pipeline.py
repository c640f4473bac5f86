"""End-to-end document processing.

Per sentence the stages run in a fixed order: dictionary matching (plus
optional plugin candidates), false-context suppression, attribute
detection, attribute-to-mention linking, concept normalization,
COVID-target filtering, and assertion classification. The result is one
MentionRecord per surviving mention, carrying everything the exporters
and the aggregator need.

Sentences that look like symptom checklists ("Fever: no Cough: yes",
"[x] headache") switch to the list parser for negation pairing, because
list values sitting after the term would otherwise be read as forward
negation triggers for the next item. Attribute spans falling entirely
inside a mention (the "throat" in "sore throat") are part of the entity,
not modifiers of it, and are discarded before linking.

Processing is document-parallel behind a worker-count knob; results are
reassembled in input order, so output is identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .aggregate import classify_assertion
from .attributes import (
    DEFAULT_TRIGGER_PATH,
    AttributeMention,
    Relation,
    TriggerIndex,
    detect_question_uncertainty,
    detect_temporal,
    has_list_structure,
    link_attributes,
    load_trigger_rules,
    parse_semistructured_list,
)
from .corpus import SOURCE_KINDS, Document, split_sentences, tokenize
from .errors import InputError, ValidationError
from .extraction import (
    DEFAULT_SUPPRESSION_PATH,
    Mention,
    match_mentions,
    merge_plugin_mentions,
    suppress_false_contexts,
    load_suppression_rules,
)
from .lexicon import (
    CUI_PATTERN,
    DEFAULT_LEXICON_PATH,
    compile_lexicon,
    load_lexicon,
)
from .normalization import (
    DEFAULT_SIMILARITY_THRESHOLD,
    NormalizedConcept,
    Normalizer,
    normalize_attribute_value,
)
from .omop import AttributeRecord, MentionRecord

OUTPUT_FORMATS = ("note_nlp", "jsonl", "both")


@dataclass
class PipelineConfig:
    lexicon_path: Path = DEFAULT_LEXICON_PATH
    trigger_rules_path: Path = DEFAULT_TRIGGER_PATH
    suppression_rules_path: Path = DEFAULT_SUPPRESSION_PATH
    similarity_threshold: float = DEFAULT_SIMILARITY_THRESHOLD
    window_hours: int = 72
    output_format: str = "both"
    source_kind: str = "clinical_note"
    workers: int = 1

    def validate(self) -> None:
        if not 0.0 < self.similarity_threshold <= 1.0:
            raise ValidationError(
                f"similarity threshold {self.similarity_threshold} not in (0, 1]"
            )
        if self.window_hours < 1:
            raise ValidationError(f"window_hours {self.window_hours} below 1")
        if self.output_format not in OUTPUT_FORMATS:
            raise ValidationError(f"unknown output format {self.output_format!r}")
        if self.source_kind not in SOURCE_KINDS:
            raise ValidationError(f"unknown source kind {self.source_kind!r}")
        if self.workers < 1:
            raise ValidationError(f"workers {self.workers} below 1")
        for path in (
            self.lexicon_path,
            self.trigger_rules_path,
            self.suppression_rules_path,
        ):
            if not Path(path).is_file():
                raise ValidationError(f"missing resource file: {path}")


@dataclass
class ExtractionSummary:
    documents: int = 0
    sentences: int = 0
    mentions: int = 0
    relations: int = 0
    suppressed_mentions: int = 0
    filtered_non_target: int = 0
    unlinked_attributes: int = 0
    dropped_plugin_candidates: int = 0
    undated_notes: int = 0

    def warning_lines(self) -> list[str]:
        lines = []
        if self.undated_notes:
            lines.append(
                f"{self.undated_notes} notes lack note or admission timestamps"
            )
        if self.unlinked_attributes:
            lines.append(
                f"{self.unlinked_attributes} attributes had no mention in scope"
            )
        if self.dropped_plugin_candidates:
            lines.append(
                f"{self.dropped_plugin_candidates} plugin candidates could not "
                f"be normalized"
            )
        return lines


@dataclass
class _DocResult:
    records: list[MentionRecord] = field(default_factory=list)
    sentences: int = 0
    mentions: int = 0
    relations: int = 0
    suppressed: int = 0
    filtered: int = 0
    unlinked: int = 0
    dropped_plugin: int = 0


class Pipeline:
    def __init__(self, config: PipelineConfig | None = None, plugin=None):
        self.config = config or PipelineConfig()
        self.config.validate()
        self.lexicon = load_lexicon(self.config.lexicon_path)
        self.matcher = compile_lexicon(self.lexicon)
        self.trigger_index = TriggerIndex(
            load_trigger_rules(self.config.trigger_rules_path)
        )
        self.suppression_rules = load_suppression_rules(
            self.config.suppression_rules_path
        )
        self.normalizer = Normalizer(
            self.lexicon, self.config.similarity_threshold
        )
        self.plugin = plugin

    # ------------------------------------------------------------------

    def _plugin_mentions(
        self, tokens, text: str, note_id: str, result: _DocResult
    ) -> list[Mention]:
        candidates = []
        for start, end, label in self.plugin(tokens):
            if start < 0 or end <= start or end > len(text):
                result.dropped_plugin += 1
                continue
            if CUI_PATTERN.match(label):
                cui, synonym = label, text[start:end]
            else:
                cui, synonym = "", label
            candidates.append(
                Mention(
                    note_id=note_id,
                    start=start,
                    end=end,
                    text=text[start:end],
                    matched_synonym=synonym,
                    cui=cui,
                    source="plugin",
                )
            )
        return candidates

    def _resolve_concept(
        self, mention: Mention, result: _DocResult
    ) -> tuple[Mention, NormalizedConcept] | None:
        if mention.source == "dictionary" or (
            mention.cui and self.lexicon.entry(mention.cui)
        ):
            entry = self.lexicon.entry(mention.cui)
            if entry is None:
                result.dropped_plugin += 1
                return None
            concept = NormalizedConcept(
                cui=entry.cui,
                preferred_term=entry.preferred_term,
                omop_concept_id=entry.omop_concept_id,
                similarity_score=1.0,
                method="exact",
            )
            return mention, concept
        concept = self.normalizer.normalize(mention.matched_synonym or mention.text)
        if concept is None:
            result.dropped_plugin += 1
            return None
        return replace(mention, cui=concept.cui), concept

    def process_document(self, doc: Document) -> _DocResult:
        result = _DocResult()
        sentences = split_sentences(doc)
        token_lists = [tokenize(doc, sentence) for sentence in sentences]
        result.sentences = len(sentences)
        for position, (sentence, tokens) in enumerate(zip(sentences, token_lists)):
            if not tokens:
                continue
            mentions = match_mentions(self.matcher, tokens, doc.text, doc.note_id)
            if self.plugin is not None:
                mentions = merge_plugin_mentions(
                    mentions,
                    self._plugin_mentions(tokens, doc.text, doc.note_id, result),
                )
            before = len(mentions)
            mentions = suppress_false_contexts(
                mentions, tokens, self.suppression_rules
            )
            result.suppressed += before - len(mentions)

            sentence_text = doc.text[sentence.start : sentence.end]
            direct_relations: list[Relation] = []
            if has_list_structure(tokens, mentions):
                kept = {(m.start, m.end) for m in mentions}
                for mention, attribute in parse_semistructured_list(
                    tokens, self.matcher, doc.text, doc.note_id
                ):
                    if attribute is not None and (mention.start, mention.end) in kept:
                        direct_relations.append(
                            Relation(attribute=attribute, target=mention)
                        )
                attributes = detect_temporal(sentence_text, base=sentence.start)
            else:
                attributes = self.trigger_index.detect(tokens, doc.text)
                attributes.extend(
                    detect_temporal(sentence_text, base=sentence.start)
                )
                following = (
                    token_lists[position + 1]
                    if position + 1 < len(token_lists)
                    else None
                )
                attributes.extend(detect_question_uncertainty(tokens, following))
            attributes = [
                attribute
                for attribute in attributes
                if not any(
                    attribute.start >= m.start and attribute.end <= m.end
                    for m in mentions
                )
            ]
            attributes.sort(key=lambda a: (a.start, a.end, a.kind))
            relations = link_attributes(mentions, attributes, tokens)
            relations.extend(direct_relations)
            linked = {
                (r.attribute.kind, r.attribute.start, r.attribute.end)
                for r in relations
            }
            result.unlinked += sum(
                1
                for attribute in attributes
                if (attribute.kind, attribute.start, attribute.end) not in linked
            )
            self._emit_records(
                doc, sentence, position, mentions, relations, result
            )
        return result

    def _emit_records(
        self, doc, sentence, sentence_index, mentions, relations, result
    ) -> None:
        snippet = doc.text[sentence.start : sentence.end]
        for mention in mentions:
            resolved = self._resolve_concept(mention, result)
            if resolved is None:
                continue
            mention, concept = resolved
            entry = self.lexicon.entry(concept.cui)
            if entry is None or not entry.covid_target:
                result.filtered += 1
                continue
            mention_relations = [r for r in relations if r.target == mention]
            assertion = classify_assertion(mention, mention_relations)
            attributes = tuple(
                AttributeRecord(
                    kind=r.attribute.kind,
                    start=r.attribute.start,
                    end=r.attribute.end,
                    text=r.attribute.text,
                    normalized_value=normalize_attribute_value(r.attribute),
                )
                for r in sorted(
                    mention_relations,
                    key=lambda r: (r.attribute.start, r.attribute.end, r.attribute.kind),
                )
            )
            result.mentions += 1
            result.relations += len(mention_relations)
            result.records.append(
                MentionRecord(
                    note_id=doc.note_id,
                    patient_id=doc.patient_id,
                    note_datetime=doc.note_datetime,
                    admit_datetime=doc.admit_datetime,
                    sentence_index=sentence_index,
                    snippet=snippet,
                    start=mention.start,
                    end=mention.end,
                    text=mention.text,
                    matched_synonym=mention.matched_synonym,
                    source=mention.source,
                    cui=concept.cui,
                    preferred_term=concept.preferred_term,
                    omop_concept_id=concept.omop_concept_id,
                    method=concept.method,
                    similarity_score=concept.similarity_score,
                    assertion=assertion,
                    attributes=attributes,
                )
            )

    # ------------------------------------------------------------------

    def _process(self, doc: Document) -> _DocResult:
        # Errors must name the note they came from; type is preserved so
        # input problems and internal bugs keep distinct exit codes.
        try:
            return self.process_document(doc)
        except InputError as exc:
            raise type(exc)(f"note {doc.note_id}: {exc}") from exc
        except Exception as exc:
            raise RuntimeError(f"note {doc.note_id}: {exc}") from exc

    def run(
        self, docs: list[Document], workers: int | None = None
    ) -> tuple[list[MentionRecord], ExtractionSummary]:
        """Process a corpus; records come back in input document order."""
        workers = workers or self.config.workers
        if workers > 1 and len(docs) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(self._process, docs))
        else:
            results = [self._process(doc) for doc in docs]
        summary = ExtractionSummary(documents=len(docs))
        records: list[MentionRecord] = []
        for doc, result in zip(docs, results):
            records.extend(result.records)
            summary.sentences += result.sentences
            summary.mentions += result.mentions
            summary.relations += result.relations
            summary.suppressed_mentions += result.suppressed
            summary.filtered_non_target += result.filtered
            summary.unlinked_attributes += result.unlinked
            summary.dropped_plugin_candidates += result.dropped_plugin
            if doc.note_datetime is None and doc.admit_datetime is None:
                summary.undated_notes += 1
        return records, summary
