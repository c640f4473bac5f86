"""Command-line entry points.

Subcommands: `lexicon {validate|compile|stats|overlap}`, `extract`,
`eval`, `aggregate`. Settings come from flags, falling back to a
key=value config file (--config, or the SIGNSYM_CONFIG environment
variable), falling back to built-in defaults. Flags win over the file.

Exit codes: 0 success, 1 input or validation error, 2 internal error.

The eval and overlap commands print a text summary; with --out they also
write the TSV report and, unless --no-figures, render a chart next to it.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from dataclasses import replace
from datetime import datetime
from pathlib import Path

from .aggregate import aggregate_patient, read_patient_summaries, write_patient_summaries
from .corpus import load_documents, load_gold
from .errors import InputError, ParseError, ValidationError
from .evaluation import (
    evaluate_exact,
    evaluate_normalization,
    evaluate_patient_level,
    format_eval_report,
    format_overlap_report,
    lexicon_overlap,
    write_eval_report_tsv,
    write_overlap_tsv,
)
from .lexicon import (
    compile_lexicon,
    lexicon_stats,
    load_lexicon,
    merge_lexicons,
    normalize_term,
    write_lexicon,
)
from .omop import write_mentions_jsonl, write_note_nlp, read_mentions_jsonl
from .pipeline import OUTPUT_FORMATS, Pipeline, PipelineConfig
from .version import __version__

CONFIG_ENV = "SIGNSYM_CONFIG"

# config key -> (attribute, parser); flags use the same attribute names
_CONFIG_KEYS = {
    "lexicon": ("lexicon", str),
    "rules": ("rules", str),
    "suppress": ("suppress", str),
    "input": ("input", str),
    "out": ("out", str),
    "format": ("format", str),
    "input_format": ("input_format", str),
    "tau": ("tau", float),
    "window_hours": ("window_hours", int),
    "workers": ("workers", int),
    "source_kind": ("source_kind", str),
    "nlp_datetime": ("nlp_datetime", str),
}


def read_config(path: str | Path) -> dict[str, object]:
    """Parse a key = value config file; quotes around values are optional."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    values: dict[str, object] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ParseError(f"{path}:{line_no}: expected key = value")
            key = key.strip()
            value = value.strip()
            if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
                value = value[1:-1]
            if key not in _CONFIG_KEYS:
                raise ValidationError(f"{path}:{line_no}: unknown key {key!r}")
            attribute, parse = _CONFIG_KEYS[key]
            try:
                values[attribute] = parse(value)
            except ValueError:
                raise ParseError(f"{path}:{line_no}: bad value for {key}: {value!r}")
    return values


_DEFAULTS = {
    "lexicon": None,  # PipelineConfig supplies the shipped resource paths
    "rules": None,
    "suppress": None,
    "format": "both",
    "input_format": "jsonl",
    "tau": None,
    "window_hours": 72,
    "workers": 1,
    "source_kind": "clinical_note",
    "nlp_datetime": None,
}


def apply_config(args: argparse.Namespace) -> None:
    """Fill unset flags from the config file, then from defaults."""
    config_path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV)
    values = read_config(config_path) if config_path else {}
    for attribute, value in values.items():
        if getattr(args, attribute, None) is None:
            setattr(args, attribute, value)
    for attribute, value in _DEFAULTS.items():
        if getattr(args, attribute, None) is None and hasattr(args, attribute):
            setattr(args, attribute, value)


def _pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig()
    if args.lexicon:
        config.lexicon_path = Path(args.lexicon)
    if args.rules:
        config.trigger_rules_path = Path(args.rules)
    if args.suppress:
        config.suppression_rules_path = Path(args.suppress)
    if args.tau is not None:
        config.similarity_threshold = args.tau
    config.window_hours = args.window_hours
    config.output_format = args.format
    config.source_kind = args.source_kind
    config.workers = args.workers
    return config


def _parse_clock(value: str | None) -> datetime:
    if value is None:
        return datetime.now()
    try:
        return datetime.fromisoformat(value)
    except ValueError:
        raise ValidationError(f"bad --nlp-datetime value: {value!r}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _load_merged(paths: list[str]):
    lexicons = [load_lexicon(path) for path in paths]
    return lexicons[0] if len(lexicons) == 1 else merge_lexicons(lexicons)


def cmd_lexicon(args: argparse.Namespace) -> int:
    if args.action == "validate":
        failures = 0
        loaded = []
        for path in args.lexicon:
            try:
                lexicon = load_lexicon(path)
            except InputError as exc:
                print(f"{path}: {exc}", file=sys.stderr)
                failures += 1
                continue
            loaded.append(lexicon)
            print(f"{path}: ok ({len(lexicon)} CUIs)")
        if not failures and len(loaded) > 1:
            try:
                merge_lexicons(loaded)
            except ValidationError as exc:
                print(f"merge conflict: {exc}", file=sys.stderr)
                failures += 1
        return 1 if failures else 0

    if args.action == "overlap":
        if len(args.lexicon) < 2:
            raise ValidationError("overlap needs at least two --lexicon files")
        sources: dict[str, set[str]] = {}
        for path in args.lexicon:
            name = Path(path).stem
            while name in sources:
                name += "+"
            lexicon = load_lexicon(path)
            sources[name] = {
                normalize_term(synonym)
                for entry in lexicon.entries
                for synonym in entry.synonyms
            }
        report = lexicon_overlap(sources)
        print(format_overlap_report(report))
        if args.out:
            write_overlap_tsv(report, args.out)
            if not args.no_figures:
                from .figures import render_overlap

                render_overlap(report, Path(args.out).with_suffix(".png"))
        return 0

    lexicon = _load_merged(args.lexicon)
    if args.action == "stats":
        concepts, cuis, synonyms = lexicon_stats(lexicon)
        print(f"{concepts} concepts, {cuis} CUIs, {synonyms} synonyms")
        return 0

    # compile
    matcher = compile_lexicon(lexicon)
    print(
        f"compiled {matcher.pattern_count} patterns "
        f"(longest {matcher.max_pattern_tokens} tokens) from {len(lexicon)} CUIs"
    )
    if args.out:
        rows = write_lexicon(lexicon, args.out)
        print(f"wrote {rows} rows to {args.out}")
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    apply_config(args)
    if not args.input:
        raise ValidationError("extract needs --input")
    if not args.out:
        raise ValidationError("extract needs --out")
    config = _pipeline_config(args)
    pipeline = Pipeline(config)
    docs = load_documents(args.input, format=args.input_format)
    if args.input_format == "plain_text_dir":
        docs = [replace(doc, source_kind=config.source_kind) for doc in docs]
    records, summary = pipeline.run(docs)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if config.output_format in ("note_nlp", "both"):
        write_note_nlp(records, out_dir / "note_nlp.tsv", now=_parse_clock(args.nlp_datetime))
    if config.output_format in ("jsonl", "both"):
        write_mentions_jsonl(records, out_dir / "mentions.jsonl")
    print(
        f"documents={summary.documents} sentences={summary.sentences} "
        f"mentions={summary.mentions} relations={summary.relations}"
    )
    print(
        f"suppressed={summary.suppressed_mentions} "
        f"non_target={summary.filtered_non_target} "
        f"unlinked={summary.unlinked_attributes}"
    )
    for line in summary.warning_lines():
        print(f"warning: {line}")
    return 0


def _read_cui_column(path: str | Path) -> list[str]:
    cuis = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                cuis.append(line.split("\t")[0])
    return cuis


def _read_patient_gold(path: str | Path) -> dict[str, set[str]]:
    gold: dict[str, set[str]] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(
                    f"{path}:{line_no}: expected patient_id<TAB>cui, got {line!r}"
                )
            gold.setdefault(parts[0], set()).add(parts[1])
    return gold


def cmd_eval(args: argparse.Namespace) -> int:
    if args.mode == "normalization":
        gold = _read_cui_column(args.gold)
        pred = _read_cui_column(args.pred)
        if len(gold) != len(pred):
            raise ValidationError(
                f"gold has {len(gold)} CUIs but predictions have {len(pred)}"
            )
        accuracy = evaluate_normalization(list(zip(gold, pred)))
        if accuracy is None:
            print("normalization accuracy undefined (no pairs)")
        else:
            print(f"normalization accuracy {accuracy:.4f} ({len(gold)} pairs)")
        if args.out:
            with open(args.out, "w", encoding="utf-8") as handle:
                handle.write("metric\tvalue\n")
                value = "undefined" if accuracy is None else f"{accuracy:.4f}"
                handle.write(f"pairs\t{len(gold)}\n")
                handle.write(f"accuracy\t{value}\n")
        return 0

    if args.mode == "patient":
        report = evaluate_patient_level(
            _read_patient_gold(args.gold), read_patient_summaries(args.pred)
        )
    else:
        gold = load_gold(args.gold)
        pred = load_gold(args.pred)
        unknown = {e.note_id for e in pred} - {e.note_id for e in gold}
        if unknown:
            raise ValidationError(
                "predictions reference note ids absent from gold: "
                + ", ".join(sorted(unknown))
            )
        report = evaluate_exact(gold, pred)
    print(format_eval_report(report))
    if args.out:
        write_eval_report_tsv(report, args.out)
        if not args.no_figures:
            from .figures import render_eval_report

            render_eval_report(report, Path(args.out).with_suffix(".png"))
    return 0


def cmd_aggregate(args: argparse.Namespace) -> int:
    apply_config(args)
    if not args.input:
        raise ValidationError("aggregate needs --input")
    if not args.out:
        raise ValidationError("aggregate needs --out")
    records = read_mentions_jsonl(args.input)
    summaries, stats = aggregate_patient(records, window_hours=args.window_hours)
    write_patient_summaries(summaries, args.out)
    print(
        f"patients={stats.patients} notes_in_window={stats.notes_in_window} "
        f"notes_out_of_window={stats.notes_out_of_window} "
        f"undated_notes={stats.undated_notes}"
    )
    if stats.undated_notes:
        print(f"warning: {stats.undated_notes} undated notes kept in every window")
    if stats.records_without_patient:
        print(
            f"warning: {stats.records_without_patient} records lack a patient id",
        )
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="signsym",
        description="COVID-19 sign/symptom extraction, normalization, and evaluation",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    lex = sub.add_parser("lexicon", help="validate, merge, or inspect lexicons")
    lex.add_argument("action", choices=("validate", "compile", "stats", "overlap"))
    lex.add_argument(
        "--lexicon",
        action="append",
        required=True,
        help="lexicon TSV path; repeat to merge or compare",
    )
    lex.add_argument("--out", help="merged lexicon TSV (compile) or report TSV (overlap)")
    lex.add_argument("--no-figures", action="store_true", help="skip chart rendering")
    lex.set_defaults(func=cmd_lexicon)

    ext = sub.add_parser("extract", help="run the extraction pipeline over a corpus")
    ext.add_argument("--input", help="corpus path (JSONL file or text directory)")
    ext.add_argument("--out", help="output directory")
    ext.add_argument("--config", help=f"key=value config file (or ${CONFIG_ENV})")
    ext.add_argument("--lexicon", help="lexicon TSV")
    ext.add_argument("--rules", help="attribute trigger rules TSV")
    ext.add_argument("--suppress", help="false-context suppression rules TSV")
    ext.add_argument("--format", choices=OUTPUT_FORMATS, help="output format")
    ext.add_argument(
        "--input-format",
        dest="input_format",
        choices=("jsonl", "plain_text_dir"),
        help="corpus layout (default jsonl)",
    )
    ext.add_argument("--tau", type=float, help="similarity threshold in (0, 1]")
    ext.add_argument(
        "--window-hours", dest="window_hours", type=int, help="admission window"
    )
    ext.add_argument("--workers", type=int, help="parallel document workers")
    ext.add_argument(
        "--source-kind",
        dest="source_kind",
        choices=("clinical_note", "dialogue"),
        help="kind stamped on plain-text corpora",
    )
    ext.add_argument(
        "--nlp-datetime",
        dest="nlp_datetime",
        help="fixed ISO timestamp for Note_NLP rows (default: now)",
    )
    ext.set_defaults(func=cmd_extract)

    ev = sub.add_parser("eval", help="score predictions against gold")
    ev.add_argument("gold", help="gold file (standoff TSV, patient TSV, or CUI column)")
    ev.add_argument("pred", help="prediction file matching the mode")
    ev.add_argument(
        "--mode",
        choices=("mention", "patient", "normalization"),
        default="mention",
    )
    ev.add_argument("--out", help="report TSV path")
    ev.add_argument("--no-figures", action="store_true", help="skip chart rendering")
    ev.set_defaults(func=cmd_eval)

    agg = sub.add_parser("aggregate", help="roll mention JSONL up to patients")
    agg.add_argument("--input", help="mention JSONL from extract")
    agg.add_argument("--out", help="patient summary JSONL path")
    agg.add_argument("--config", help=f"key=value config file (or ${CONFIG_ENV})")
    agg.add_argument(
        "--window-hours", dest="window_hours", type=int, help="admission window"
    )
    agg.set_defaults(func=cmd_aggregate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        print("internal error", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
