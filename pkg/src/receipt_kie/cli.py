"""Command-line interface.

Four subcommands::

    receipt-kie decode  <ocr files/dirs> --out DIR [--tagger ...]
    receipt-kie eval    --results DIR --truth DIR [--mode ...]
    receipt-kie synth   --out DIR --seed N [corruption flags]
    receipt-kie render  RESULT_FILE OCR_FILE --out FILE.svg

Log verbosity is controlled by the ``RECEIPT_KIE_LOG`` environment
variable (error|warn|info|debug; default warn). All outputs are
deterministic: running the same command twice produces byte-identical
files.

Exit codes: 0 success; 1 input/processing failure; 2 flag validation
errors (argparse's convention) and ``eval --min-f1`` threshold misses.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from . import __version__
from .corrections import NumericParseConfig, apply_corrections
from .errors import CorpusMismatchError, ReceiptKieError
from .evaluation import (
    ENTITY_ORDER,
    DocPrediction,
    EvalReport,
    MatchMode,
    TruthEntry,
    build_report,
)
from .ingest import canonical_json, parse_ground_truth, parse_ocr, parse_result, serialize_result
from .layout import GroupingConfig, detect_lines_geometric, group_product_lines
from .model import Document
from .render import render_svg
from .synth import CorpusSpec, CorruptionSpec, write_corpus
from .tagging import HeuristicTagger, PredictionImportTagger, TagRuleConfig

log = logging.getLogger("receipt_kie.cli")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "warning": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

_RESERVED_SUFFIXES = (".truth.json", ".pred.json", ".result.json")


def _configure_logging() -> None:
    raw = os.environ.get("RECEIPT_KIE_LOG", "warn").lower()
    level = _LOG_LEVELS.get(raw)
    if level is None:
        level = logging.WARNING
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    if raw not in _LOG_LEVELS:
        log.warning("unknown RECEIPT_KIE_LOG value %r; using warn", raw)


def _is_ocr_input(path: Path) -> bool:
    if path.suffix != ".json" or path.name == "manifest.json":
        return False
    return not any(path.name.endswith(sfx) for sfx in _RESERVED_SUFFIXES)


def _collect_inputs(raw_paths: Sequence[str]) -> list[Path]:
    files: list[Path] = []
    for raw in raw_paths:
        path = Path(raw)
        if path.is_dir():
            files.extend(sorted(p for p in path.iterdir() if _is_ocr_input(p)))
        else:
            files.append(path)
    return files


def _parse_rate_flags(pairs: Sequence[str], allowed: dict[str, str], flag: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for pair in pairs:
        name, sep, raw_value = pair.partition("=")
        key = allowed.get(name.strip().lower())
        if not sep or key is None:
            choices = ", ".join(sorted(set(allowed)))
            raise argparse.ArgumentTypeError(
                f"{flag} expects NAME=VALUE with NAME one of: {choices} (got {pair!r})"
            )
        try:
            value = float(raw_value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag}: {raw_value!r} is not a number") from None
        out[key] = value
    return out


# --------------------------------------------------------------------------
# decode


def _decode_one(
    path: Path,
    tagger: HeuristicTagger | PredictionImportTagger,
    grouping: GroupingConfig,
    parse_cfg: NumericParseConfig,
    corrections_enabled: bool,
) -> tuple[str, str, list]:
    doc = parse_ocr(path.read_bytes())
    tagged = tagger.tag(doc)
    lines = detect_lines_geometric(tagged, grouping)
    groups = group_product_lines(tagged, lines)
    records: list = []
    if corrections_enabled:
        tagged, records = apply_corrections(tagged, groups, parse_cfg)
    return doc.doc_id, serialize_result(tagged, groups), records


def _load_prediction_payloads(predictions: Path, inputs: Sequence[Path]) -> dict[str, bytes]:
    """Map doc ids to prediction payloads.

    ``predictions`` may be a single file (applied to the single input) or
    a directory holding ``<doc_id>.pred.json`` files.
    """
    payloads: dict[str, bytes] = {}
    if predictions.is_dir():
        for path in sorted(predictions.glob("*.pred.json")):
            doc_id = path.name[: -len(".pred.json")]
            payloads[doc_id] = path.read_bytes()
        return payloads
    raw = json.loads(predictions.read_text(encoding="utf-8"))
    payloads[str(raw.get("doc_id"))] = predictions.read_bytes()
    return payloads


def cmd_decode(args: argparse.Namespace) -> int:
    inputs = _collect_inputs(args.inputs)
    if not inputs:
        log.warning("no OCR input files found under %s", ", ".join(args.inputs))
        return 0
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.tagger == "import":
        if not args.predictions:
            log.error("--tagger import requires --predictions")
            return 1
        payloads = _load_prediction_payloads(Path(args.predictions), inputs)
        tagger: HeuristicTagger | PredictionImportTagger = PredictionImportTagger(payloads)
    else:
        tagger = HeuristicTagger(TagRuleConfig())

    grouping = GroupingConfig(y_overlap_threshold=args.y_overlap)
    parse_cfg = NumericParseConfig(decimal_separators=tuple(args.decimal_separators))
    corrections_enabled = not args.no_corrections

    def work(path: Path) -> tuple[Path, str | None, str, list, Exception | None]:
        try:
            doc_id, payload, records = _decode_one(
                path, tagger, grouping, parse_cfg, corrections_enabled
            )
            return path, doc_id, payload, records, None
        except (ReceiptKieError, OSError, ValueError) as exc:
            return path, None, "", [], exc

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(work, inputs))
    else:
        outcomes = [work(path) for path in inputs]

    failures = 0
    seen: dict[str, Path] = {}
    audit_entries: list[tuple[str, list]] = []
    for path, doc_id, payload, records, exc in outcomes:
        if exc is not None:
            failures += 1
            log.error("%s: %s", path, exc)
            if args.fail_fast:
                return 1
            continue
        assert doc_id is not None
        if doc_id in seen:
            failures += 1
            log.error("%s: duplicate doc_id %r (already decoded from %s)", path, doc_id, seen[doc_id])
            if args.fail_fast:
                return 1
            continue
        seen[doc_id] = path
        (out_dir / f"{doc_id}.result.json").write_text(payload, encoding="utf-8")
        audit_entries.append((doc_id, records))
        log.info("decoded %s -> %s.result.json (%d corrections)", path, doc_id, len(records))

    audit_path = Path(args.audit) if args.audit else out_dir / "corrections.jsonl"
    audit_entries.sort(key=lambda e: e[0])
    with audit_path.open("w", encoding="utf-8") as fh:
        for doc_id, records in audit_entries:
            for rec in records:
                fh.write(
                    json.dumps(
                        {
                            "doc_id": doc_id,
                            "group_id": rec.group_id,
                            "entity": rec.entity.value,
                            "token_id": rec.token_id,
                            "parsed_value": rec.parsed_value,
                        },
                        sort_keys=True,
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    return 1 if failures else 0


# --------------------------------------------------------------------------
# eval


def _load_results(results: Sequence[str]) -> dict[str, DocPrediction]:
    paths: list[Path] = []
    for raw in results:
        path = Path(raw)
        if path.is_dir():
            paths.extend(sorted(path.glob("*.result.json")))
        else:
            paths.append(path)
    predictions: dict[str, DocPrediction] = {}
    for path in paths:
        doc, groups = parse_result(path.read_bytes())
        predictions[doc.doc_id] = DocPrediction.from_groups(doc, groups)
    return predictions


def _load_truth(truth_dir: Path) -> dict[str, TruthEntry]:
    truth: dict[str, TruthEntry] = {}
    for path in sorted(truth_dir.glob("*.truth.json")):
        doc_id = path.name[: -len(".truth.json")]
        ocr_path = truth_dir / f"{doc_id}.json"
        if not ocr_path.exists():
            raise CorpusMismatchError(f"no OCR file next to {path.name}")
        doc = parse_ocr(ocr_path.read_bytes())
        products = parse_ground_truth(path.read_bytes(), doc)
        truth[doc_id] = (doc, products)
    return truth


_MIN_F1_NAMES = {
    "description": "descriptions",
    "descriptions": "descriptions",
    "code": "codes",
    "codes": "codes",
    "quantity": "quantities",
    "quantities": "quantities",
    "price": "prices",
    "prices": "prices",
    "whole": "whole_products",
    "whole_products": "whole_products",
    "whole-products": "whole_products",
}


def _report_f1(report: EvalReport, key: str) -> float:
    if key == "whole_products":
        return report.whole_products.f1
    for label in ENTITY_ORDER:
        if key == {"description": "descriptions", "code": "codes",
                   "quantity": "quantities", "price": "prices"}[label.value]:
            return report.entities[label].f1
    raise KeyError(key)


def _comparison_table(rows: list[tuple[str, EvalReport]]) -> str:
    headers = ["run", "descriptions", "codes", "quantities", "prices", "whole products"]
    table = [headers]
    for name, report in rows:
        cells = [name]
        for label in ENTITY_ORDER:
            cells.append(f"{report.entities[label].f1:.3f}")
        cells.append(f"{report.whole_products.f1:.3f}")
        table.append(cells)
    widths = [max(len(row[col]) for row in table) for col in range(len(headers))]
    out = []
    for row in table:
        out.append(
            "  ".join(
                row[col].ljust(widths[col]) if col == 0 else row[col].rjust(widths[col])
                for col in range(len(row))
            )
        )
    return "\n".join(out)


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        thresholds = _parse_rate_flags(args.min_f1 or [], _MIN_F1_NAMES, "--min-f1")
    except argparse.ArgumentTypeError as exc:
        log.error("%s", exc)
        return 2

    mode = MatchMode.STRICT_OCR if args.mode == "strict" else MatchMode.TAG_ONLY
    try:
        truth = _load_truth(Path(args.truth))
        predictions = _load_results(args.results)
        report = build_report(predictions, truth, mode)
    except (ReceiptKieError, OSError) as exc:
        log.error("%s", exc)
        return 1

    if args.compare:
        try:
            other = build_report(_load_results([args.compare]), truth, mode)
        except (ReceiptKieError, OSError) as exc:
            log.error("%s", exc)
            return 1
        primary_name = Path(args.results[0]).name or "results"
        other_name = Path(args.compare).name or "compare"
        print(_comparison_table([(primary_name, report), (other_name, other)]))
    else:
        print(f"mode: {mode.value}   documents: {report.corpus_size}")
        print(report.format_table())

    if args.json_out:
        Path(args.json_out).write_text(canonical_json(report.as_dict()), encoding="utf-8")

    exit_code = 0
    for key in sorted(thresholds):
        achieved = _report_f1(report, key)
        if achieved < thresholds[key]:
            print(f"FAIL --min-f1 {key}: {achieved:.3f} < {thresholds[key]:.3f}")
            exit_code = 2
    return exit_code


# --------------------------------------------------------------------------
# synth


_FN_RATE_NAMES = {
    "description": "description_fn_rate",
    "descriptions": "description_fn_rate",
    "code": "code_fn_rate",
    "codes": "code_fn_rate",
    "quantity": "quantity_fn_rate",
    "quantities": "quantity_fn_rate",
    "price": "price_fn_rate",
    "prices": "price_fn_rate",
}


def cmd_synth(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    if out_dir.exists() and any(out_dir.iterdir()) and not args.force:
        log.error("output directory %s is not empty (pass --force to overwrite)", out_dir)
        return 1

    try:
        lo, _, hi = args.products.partition(":")
        products_range = (int(lo), int(hi or lo))
        spec = CorpusSpec(
            seed=args.seed,
            n_docs=args.docs,
            products_per_doc=products_range,
            multiline_description_prob=args.multiline_prob,
            code_presence_prob=args.code_prob,
            adversarial_rate=args.adversarial_rate,
        )
        fn_rates = _parse_rate_flags(args.fn_rate or [], _FN_RATE_NAMES, "--fn-rate")
        corruption = None
        if fn_rates or args.ocr_noise > 0.0:
            corruption = CorruptionSpec(ocr_noise_rate=args.ocr_noise, **fn_rates)
    except (ValueError, argparse.ArgumentTypeError) as exc:
        log.error("%s", exc)
        return 2

    manifest = write_corpus(spec, out_dir, corruption)
    print(
        f"wrote {manifest['n_docs']} documents to {out_dir}"
        + (" (with pred/)" if corruption is not None else "")
    )
    return 0


# --------------------------------------------------------------------------
# render


def cmd_render(args: argparse.Namespace) -> int:
    try:
        doc, groups = parse_result(Path(args.result).read_bytes())
        ocr_doc = parse_ocr(Path(args.ocr).read_bytes())
    except (ReceiptKieError, OSError) as exc:
        log.error("%s", exc)
        return 1
    if doc.doc_id != ocr_doc.doc_id:
        log.error(
            "result is for doc_id %r but OCR file is %r", doc.doc_id, ocr_doc.doc_id
        )
        return 1
    svg = render_svg(doc, groups)
    if args.out:
        Path(args.out).write_text(svg, encoding="utf-8")
    else:
        sys.stdout.write(svg)
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="receipt-kie",
        description="Key information extraction for purchase documents.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="OCR JSON in, product groups out")
    p.add_argument("inputs", nargs="+", help="OCR JSON files or directories")
    p.add_argument("--out", required=True, help="directory for result files")
    p.add_argument("--tagger", choices=("heuristic", "import"), default="heuristic")
    p.add_argument("--predictions", help="prediction file or directory (for --tagger import)")
    p.add_argument("--no-corrections", action="store_true", help="skip the correction rules")
    p.add_argument("--y-overlap", type=float, default=0.4, help="line clustering threshold")
    p.add_argument("--decimal-separators", default=".,", help="accepted decimal separators")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.add_argument("--fail-fast", action="store_true", help="stop at the first bad input")
    p.add_argument("--audit", help="corrections audit log path (default OUT/corrections.jsonl)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="score results against ground truth")
    p.add_argument("--results", nargs="+", required=True, help="result files or directory")
    p.add_argument("--truth", required=True, help="directory with *.truth.json + OCR files")
    p.add_argument("--mode", choices=("tag", "strict"), default="tag")
    p.add_argument("--compare", help="second results directory for a side-by-side table")
    p.add_argument("--min-f1", action="append", metavar="NAME=F1",
                   help="fail (exit 2) if an entity's f1 is below the bar; repeatable")
    p.add_argument("--json-out", help="also write the report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--docs", type=int, default=200)
    p.add_argument("--products", default="1:5", metavar="MIN:MAX")
    p.add_argument("--multiline-prob", type=float, default=0.35)
    p.add_argument("--code-prob", type=float, default=0.8)
    p.add_argument("--adversarial-rate", type=float, default=0.05)
    p.add_argument("--fn-rate", action="append", metavar="NAME=RATE",
                   help="per-entity false-negative rate; enables pred/ output")
    p.add_argument("--ocr-noise", type=float, default=0.0)
    p.add_argument("--force", action="store_true", help="overwrite a non-empty directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("render", help="render a result file to SVG")
    p.add_argument("result", help="a *.result.json file")
    p.add_argument("ocr", help="the matching OCR input file")
    p.add_argument("--out", help="SVG output path (default: stdout)")
    p.set_defaults(func=cmd_render)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
