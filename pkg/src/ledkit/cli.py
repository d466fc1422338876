"""``led`` command line interface.

Exit codes: 0 success, 1 validation failure, 2 I/O failure, 3 config error.
Global flags may also be set through ``LED_SEED``, ``LED_JOBS``,
``LED_CONFIG`` and ``LED_QUIET``.
"""

from __future__ import annotations

import argparse
import os
import sys
from collections import Counter
from pathlib import Path

import yaml

from . import dataset_io, metrics
from .detector import classify_document
from .injector import ConfigError, InjectionConfig
from .layout import DOCLAYNET_CATEGORIES, ERROR_TYPES, validate_record
from .pipeline import default_jobs, generate_tree
from .render import RenderError, RenderStyle, render_overlay, save_png
from .synthetic import random_corpus
from .validation import LayoutMismatchError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_CONFIG = 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _env_int(name: str) -> int | None:
    v = os.environ.get(name)
    if v is None or v == "":
        return None
    try:
        return int(v)
    except ValueError:
        raise CliError(f"{name} must be an integer, got {v!r}", EXIT_CONFIG) from None


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


def _color(text: str) -> tuple[int, int, int]:
    named = {"red": (255, 0, 0), "green": (0, 255, 0), "blue": (0, 0, 255), "black": (0, 0, 0)}
    if text.lower() in named:
        return named[text.lower()]
    t = text.lstrip("#")
    if len(t) != 6:
        raise argparse.ArgumentTypeError(f"colour must be a name or #rrggbb, got {text!r}")
    return tuple(int(t[k : k + 2], 16) for k in (0, 2, 4))


def load_config(path: str | None, seed: int | None) -> InjectionConfig:
    data = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise CliError(f"cannot read config {path}: {exc}", EXIT_CONFIG) from None
        except yaml.YAMLError as exc:
            raise CliError(f"config {path} is not valid YAML: {exc}", EXIT_CONFIG) from None
        if not isinstance(data, dict):
            raise CliError(f"config {path} must be a key-value mapping", EXIT_CONFIG)
    if seed is not None:
        data["master_seed"] = seed
    try:
        return InjectionConfig.from_mapping(data)
    except (ConfigError, TypeError, ValueError) as exc:
        raise CliError(f"invalid config: {exc}", EXIT_CONFIG) from None


def _say(args, *lines: str) -> None:
    if not args.quiet:
        for line in lines:
            print(line)


def _load_corpus(path: str):
    try:
        return dataset_io.load_coco(path)
    except dataset_io.LoadError as exc:
        raise CliError(str(exc), EXIT_IO) from None


def cmd_generate(args) -> int:
    cfg = load_config(args.config, args.seed)
    cats, pages = _load_corpus(args.corpus)
    if not pages:
        raise CliError(f"{args.corpus}: corpus has no pages", EXIT_VALIDATION)
    out = Path(args.out)
    if out.exists() and any(out.iterdir()):
        raise CliError(f"{out}: output directory is not empty", EXIT_IO)
    summary = generate_tree(
        pages,
        cats,
        cfg,
        out,
        n_jobs=args.jobs,
        render=not args.no_render,
        image_root=args.image_root,
        manifest_meta={"corpus": Path(args.corpus).name},
    )
    mix = summary.realized_mixture()
    lines = [
        f"pages: {summary.n_pages}  elements: {summary.n_elements}  "
        f"documents with errors: {summary.n_error_documents}  injected slots: {summary.n_slots}",
        f"{'type':<20}{'slots':>8}{'realized':>10}{'configured':>12}",
    ]
    for t in ERROR_TYPES:
        lines.append(f"{t.value:<20}{summary.slot_counts[t]:>8}{mix[t]:>10.2%}{cfg.mixture[t]:>12.2%}")
    _say(args, *lines)
    return EXIT_OK


def cmd_detect(args) -> int:
    _, gts = _load_corpus(args.gt)
    _, preds = _load_corpus(args.pred)
    pred_by_id = {p.page_id: p for p in preds}
    missing = [g.page_id for g in gts if g.page_id not in pred_by_id]
    if missing or len(preds) != len(gts):
        raise CliError(f"gt and pred files cover different pages (unmatched gt pages: {missing})", EXIT_VALIDATION)
    try:
        results = [(g.page_id, classify_document(g, pred_by_id[g.page_id])) for g in gts]
    except LayoutMismatchError as exc:
        raise CliError(str(exc), EXIT_VALIDATION) from None
    out = Path(args.out)
    if len(results) == 1:
        page_id, ann = results[0]
        dataset_io._write(out, dataset_io.dumps(dataset_io.errors_dict(ann, page_id)))
    else:
        for page_id, ann in results:
            path = out / dataset_io.page_dir_name(page_id) / "errors.led"
            dataset_io._write(path, dataset_io.dumps(dataset_io.errors_dict(ann, page_id)))
    flagged = sum(a.has_error for _, a in results)
    _say(args, f"diagnosed {len(results)} page(s); {flagged} with structural errors")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    try:
        keys = metrics.parse_keys(dataset_io.read_jsonl(args.keys))
        rows = dataset_io.read_jsonl(args.preds)
    except OSError as exc:
        raise CliError(str(exc), EXIT_IO) from None
    except (dataset_io.LoadError, KeyError, ValueError) as exc:
        raise CliError(f"cannot parse inputs: {exc}", EXIT_VALIDATION) from None
    try:
        reports = metrics.evaluate(rows, keys)
    except (KeyError, ValueError) as exc:
        raise CliError(f"malformed prediction rows: {exc}", EXIT_VALIDATION) from None
    body = {
        "schema_version": "led-report/1",
        "n_documents": len(keys),
        "reports": [r.as_dict() for r in reports],
        "table": metrics.summary_table(reports),
    }
    dataset_io._write(Path(args.report), dataset_io.dumps(body))
    _say(args, metrics.format_table(reports).rstrip("\n"))
    for r in reports:
        cov = ", ".join(f"{t} {c:.1%}" for t, c in sorted(r.coverage.items()))
        _say(args, f"coverage {r.model}/{r.prompt}: {cov}")
    return EXIT_OK


def _load_tree(path: str):
    try:
        return dataset_io.load_records(path)
    except dataset_io.LoadError as exc:
        raise CliError(str(exc), EXIT_IO) from None


def cmd_export_bench(args) -> int:
    _, records = _load_tree(args.records)
    bad = [(r.page_id, v) for r in records for v in validate_record(r)]
    if bad:
        raise CliError(f"invalid records: {bad[:5]}", EXIT_VALIDATION)
    try:
        bundle = dataset_io.export_bench_bundle(
            records, args.task, args.prompt, args.out, image_root=args.image_root
        )
    except dataset_io.BundleError as exc:
        raise CliError(str(exc), EXIT_IO) from None
    _say(args, f"wrote {len(bundle.documents)} {args.task}/{args.prompt} documents to {args.out}")
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        rec = dataset_io.load_led_record(args.record)
    except (dataset_io.LoadError, OSError) as exc:
        raise CliError(str(exc), EXIT_IO) from None
    try:
        style = RenderStyle(
            gt_color=args.gt_color,
            pred_color=args.pred_color,
            stroke_width=args.stroke,
            labels=not args.no_labels,
            scale=args.scale,
        )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    base = None
    if args.image_root and rec.image_ref:
        base = Path(args.image_root) / rec.image_ref
    try:
        img = render_overlay(rec.gt, rec.pred, style, image=base, categories=rec.categories, palette=True)
    except RenderError as exc:
        raise CliError(str(exc), EXIT_IO) from None
    save_png(img, args.out)
    _say(args, f"wrote {args.out}")
    return EXIT_OK


def cmd_stats(args) -> int:
    path = Path(args.path)
    if path.is_dir():
        _, records = _load_tree(str(path))
        n_el = sum(len(r.gt) for r in records)
        docs = Counter(t for r in records for t in r.annotation.types)
        slots = Counter(i.error_type for r in records for i in r.provenance or ())
        n_slots = sum(slots.values())
        lines = [
            f"documents: {len(records)}  layout elements: {n_el}  "
            f"documents with errors: {sum(r.annotation.has_error for r in records)}",
            f"{'type':<20}{'documents':>10}{'slots':>8}{'share':>9}",
        ]
        for t in ERROR_TYPES:
            share = slots[t] / n_slots if n_slots else 0.0
            lines.append(f"{t.value:<20}{docs[t]:>10}{slots[t]:>8}{share:>9.2%}")
    else:
        cats, pages = _load_corpus(str(path))
        per_cat = Counter(e.category_id for p in pages for e in p.elements)
        lines = [f"pages: {len(pages)}  layout elements: {sum(per_cat.values())}"]
        lines += [f"{name:<20}{per_cat[i]:>8}" for i, name in cats]
    _say(args, *lines)
    return EXIT_OK


def cmd_synth(args) -> int:
    seed = args.seed if args.seed is not None else 0
    pages = random_corpus(args.pages, seed=seed, n_elements=(args.min_elements, args.max_elements))
    dataset_io.save_coco(args.out, DOCLAYNET_CATEGORIES, pages)
    _say(args, f"wrote {len(pages)} synthetic pages to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    common.add_argument("--jobs", type=int, default=None, help="worker processes (default: cores)")
    common.add_argument("--config", default=None, help="YAML/JSON generation config")
    common.add_argument("--quiet", action="store_true", default=None)

    parser = argparse.ArgumentParser(prog="led", description="Layout error injection, detection and scoring.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="build an LED record tree from a COCO corpus")
    p.add_argument("corpus")
    p.add_argument("out")
    p.add_argument("--image-root", default=None)
    p.add_argument("--no-render", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("detect", parents=[common], help="diagnose a prediction against its GT")
    p.add_argument("gt")
    p.add_argument("pred")
    p.add_argument("out")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", parents=[common], help="score model answers against answer keys")
    p.add_argument("preds")
    p.add_argument("keys")
    p.add_argument("report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-bench", parents=[common], help="write a T1/T2/T3 x P1/P2/P3 bundle")
    p.add_argument("records")
    p.add_argument("task", choices=dataset_io.TASKS)
    p.add_argument("prompt", choices=dataset_io.PROMPTS)
    p.add_argument("out")
    p.add_argument("--image-root", default=None)
    p.set_defaults(func=cmd_export_bench)

    p = sub.add_parser("render", parents=[common], help="render one record's overlay")
    p.add_argument("record")
    p.add_argument("out")
    p.add_argument("--gt-color", type=_color, default=(0, 255, 0))
    p.add_argument("--pred-color", type=_color, default=(255, 0, 0))
    p.add_argument("--stroke", type=int, default=2)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--no-labels", action="store_true")
    p.add_argument("--image-root", default=None)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("stats", parents=[common], help="summarize a COCO corpus or record tree")
    p.add_argument("path")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic clean COCO corpus")
    p.add_argument("out")
    p.add_argument("--pages", type=int, default=100)
    p.add_argument("--min-elements", type=int, default=5)
    p.add_argument("--max-elements", type=int, default=40)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which would read as an I/O failure
        return EXIT_CONFIG if exc.code == 2 else int(exc.code or 0)
    try:
        if args.seed is None:
            args.seed = _env_int("LED_SEED")
        if args.jobs is None:
            args.jobs = _env_int("LED_JOBS") or default_jobs()
        if args.config is None:
            args.config = os.environ.get("LED_CONFIG") or None
        if args.quiet is None:
            args.quiet = _env_flag("LED_QUIET")
        return args.func(args)
    except CliError as exc:
        print(f"led: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"led: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
