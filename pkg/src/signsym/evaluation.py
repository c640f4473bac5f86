"""Scoring: exact-span P/R/F1, CUI accuracy, patient-level F1, set overlap.

Exact-span evaluation counts a predicted entity as a true positive only
when (note_id, entity_type, start, end) all match a gold entity, with
greedy one-to-one pairing; an off-by-one span therefore costs both a
false positive and a false negative. Zero-denominator precision or
recall is reported as 0 with an explicit undefined flag rather than
being silently folded into the averages.

lexicon_overlap computes the full Venn decomposition of 2 to 4 term
sets: each exclusive region, every intersection, and per-source counts
of terms shared with any other source.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

from .aggregate import PatientSummary
from .corpus import GoldEntity
from .errors import ValidationError


def f_measure(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class TypeScore:
    entity_type: str
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    precision_undefined: bool
    recall_undefined: bool


@dataclass(frozen=True)
class EvalReport:
    per_type: tuple[TypeScore, ...]
    micro: TypeScore


def _score(entity_type: str, tp: int, fp: int, fn: int) -> TypeScore:
    precision_undefined = tp + fp == 0
    recall_undefined = tp + fn == 0
    precision = 0.0 if precision_undefined else tp / (tp + fp)
    recall = 0.0 if recall_undefined else tp / (tp + fn)
    return TypeScore(
        entity_type=entity_type,
        tp=tp,
        fp=fp,
        fn=fn,
        precision=precision,
        recall=recall,
        f1=f_measure(precision, recall),
        precision_undefined=precision_undefined,
        recall_undefined=recall_undefined,
    )


def evaluate_exact(
    gold: list[GoldEntity], predicted: list[GoldEntity]
) -> EvalReport:
    """Per-type and micro scores under exact (note_id, type, span) match."""
    remaining: dict[tuple, int] = {}
    for entity in gold:
        key = (entity.note_id, entity.entity_type, entity.start, entity.end)
        remaining[key] = remaining.get(key, 0) + 1
    tp: dict[str, int] = {}
    fp: dict[str, int] = {}
    for entity in predicted:
        key = (entity.note_id, entity.entity_type, entity.start, entity.end)
        if remaining.get(key, 0) > 0:
            remaining[key] -= 1
            tp[entity.entity_type] = tp.get(entity.entity_type, 0) + 1
        else:
            fp[entity.entity_type] = fp.get(entity.entity_type, 0) + 1
    fn: dict[str, int] = {}
    for (_, entity_type, _, _), count in remaining.items():
        if count:
            fn[entity_type] = fn.get(entity_type, 0) + count
    types = sorted(set(tp) | set(fp) | set(fn))
    per_type = tuple(
        _score(t, tp.get(t, 0), fp.get(t, 0), fn.get(t, 0)) for t in types
    )
    micro = _score(
        "micro",
        sum(tp.values()),
        sum(fp.values()),
        sum(fn.values()),
    )
    return EvalReport(per_type=per_type, micro=micro)


def evaluate_normalization(
    pairs: list[tuple[str, str | None]]
) -> float | None:
    """Exact-CUI accuracy over (gold, predicted) pairs; None when empty."""
    if not pairs:
        return None
    return sum(1 for gold, predicted in pairs if gold == predicted) / len(pairs)


def evaluate_patient_level(
    gold: dict[str, set[str]], summaries: list[PatientSummary]
) -> EvalReport:
    """Score positive (patient, cui) pairs; per-patient rows plus micro."""
    predicted: dict[str, set[str]] = {}
    for summary in summaries:
        cuis = predicted.setdefault(summary.patient_id, set())
        cuis.update(concept.cui for concept in summary.positive)
    unknown = sorted(set(predicted) - set(gold))
    if unknown:
        raise ValidationError(
            f"predictions reference patients missing from gold: {unknown[:5]}"
        )
    rows = []
    total_tp = total_fp = total_fn = 0
    for patient_id in sorted(gold):
        gold_cuis = gold[patient_id]
        predicted_cuis = predicted.get(patient_id, set())
        tp = len(gold_cuis & predicted_cuis)
        fp = len(predicted_cuis - gold_cuis)
        fn = len(gold_cuis - predicted_cuis)
        rows.append(_score(patient_id, tp, fp, fn))
        total_tp += tp
        total_fp += fp
        total_fn += fn
    return EvalReport(
        per_type=tuple(rows),
        micro=_score("micro", total_tp, total_fp, total_fn),
    )


# =========================================================================
# Term-set overlap
# =========================================================================

@dataclass(frozen=True)
class OverlapReport:
    source_names: tuple[str, ...]
    sizes: dict[str, int]
    exclusive_regions: dict[tuple[str, ...], int]
    intersections: dict[tuple[str, ...], int]
    overlapped: dict[str, int]


def lexicon_overlap(sources: dict[str, set[str]]) -> OverlapReport:
    """Venn decomposition of 2-4 named term sets.

    exclusive_regions holds the cardinality of every region of the Venn
    diagram (terms in exactly that set combination); intersections holds
    plain set intersections; overlapped counts, per source, the terms
    shared with at least one other source.
    """
    if not 2 <= len(sources) <= 4:
        raise ValidationError(
            f"overlap needs 2 to 4 sources, got {len(sources)}"
        )
    names = tuple(sources)
    universe: dict[str, set[str]] = {}
    for name, terms in sources.items():
        for term in terms:
            universe.setdefault(term, set()).add(name)
    exclusive: dict[tuple[str, ...], int] = {}
    for size in range(1, len(names) + 1):
        for combo in combinations(names, size):
            exclusive[combo] = 0
    for members in universe.values():
        combo = tuple(name for name in names if name in members)
        exclusive[combo] += 1
    intersections = {}
    for size in range(2, len(names) + 1):
        for combo in combinations(names, size):
            shared = set.intersection(*(sources[name] for name in combo))
            intersections[combo] = len(shared)
    overlapped = {}
    for name in names:
        others = set().union(*(sources[o] for o in names if o != name))
        overlapped[name] = len(sources[name] & others)
    return OverlapReport(
        source_names=names,
        sizes={name: len(sources[name]) for name in names},
        exclusive_regions=exclusive,
        intersections=intersections,
        overlapped=overlapped,
    )


def share(part: int, whole: int) -> str:
    """Render a fraction the way overlap statistics are usually quoted."""
    percent = 100.0 * part / whole if whole else 0.0
    return f"{percent:.1f}% ({part}/{whole})"


# =========================================================================
# Report rendering
# =========================================================================

EVAL_COLUMNS = ("type", "tp", "fp", "fn", "precision", "recall", "f1")


def _eval_rows(report: EvalReport) -> list[TypeScore]:
    return [*report.per_type, report.micro]


def write_eval_report_tsv(report: EvalReport, path: str | Path) -> None:
    lines = ["\t".join(EVAL_COLUMNS)]
    for row in _eval_rows(report):
        lines.append(
            "\t".join(
                (
                    row.entity_type,
                    str(row.tp),
                    str(row.fp),
                    str(row.fn),
                    f"{row.precision:.4f}",
                    f"{row.recall:.4f}",
                    f"{row.f1:.4f}",
                )
            )
        )
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def format_eval_report(report: EvalReport) -> str:
    lines = []
    for row in _eval_rows(report):
        notes = []
        if row.precision_undefined:
            notes.append("precision undefined: no predictions")
        if row.recall_undefined:
            notes.append("recall undefined: no gold entities")
        suffix = f"  [{'; '.join(notes)}]" if notes else ""
        lines.append(
            f"{row.entity_type}: P={row.precision:.3f} R={row.recall:.3f} "
            f"F1={row.f1:.3f} (tp={row.tp} fp={row.fp} fn={row.fn}){suffix}"
        )
    return "\n".join(lines)


OVERLAP_COLUMNS = ("metric", "members", "count", "share")


def write_overlap_tsv(report: OverlapReport, path: str | Path) -> None:
    lines = ["\t".join(OVERLAP_COLUMNS)]
    for name in report.source_names:
        lines.append(f"size\t{name}\t{report.sizes[name]}\t")
    regions = sorted(report.exclusive_regions, key=lambda c: (len(c), c))
    for combo in regions:
        lines.append(f"exclusive\t{'+'.join(combo)}\t{report.exclusive_regions[combo]}\t")
    for combo in sorted(report.intersections, key=lambda c: (len(c), c)):
        lines.append(f"intersection\t{'+'.join(combo)}\t{report.intersections[combo]}\t")
    for name in report.source_names:
        lines.append(
            "overlapped\t{}\t{}\t{}".format(
                name,
                report.overlapped[name],
                share(report.overlapped[name], report.sizes[name]),
            )
        )
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def format_overlap_report(report: OverlapReport) -> str:
    lines = []
    for name in report.source_names:
        lines.append(
            f"{name}: {report.sizes[name]} terms, "
            f"{share(report.overlapped[name], report.sizes[name])} shared with "
            f"another source"
        )
    full = tuple(report.source_names)
    lines.append(f"in all sources: {report.intersections.get(full, 0)}")
    return "\n".join(lines)
