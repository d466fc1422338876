"""Reading and writing corpora, LED record trees and benchmark bundles.

Record tree layout::

    <root>/manifest.json
    <root>/<page_id>/gt.coco        COCO-style GT annotation (xywh floats)
    <root>/<page_id>/pred.coco      COCO-style prediction annotation
    <root>/<page_id>/errors.led     error annotation (see ``ERRORS_SCHEMA``)
    <root>/<page_id>/overlay.png    GT (green) + prediction (red) overlay

All JSON is written with sorted keys and shortest round-trip float
formatting, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .geometry import BBox, GeometryError
from .layout import (
    ERROR_TYPES,
    CategorySet,
    DocumentErrorAnnotation,
    ElementErrorLabel,
    ErrorType,
    InjectionRecord,
    LayoutElement,
    LedRecord,
    PageLayout,
    Side,
)
from .render import RenderStyle, render_overlay, save_png

COCO_SCHEMA = "led-coco/1"
ERRORS_SCHEMA = "led-errors/1"
MANIFEST_SCHEMA = "led-manifest/1"
BUNDLE_SCHEMA = "led-bundle/1"

CLAMP_TOLERANCE = 1.0

TASKS = ("T1", "T2", "T3")
PROMPTS = ("P1", "P2", "P3")


class LoadError(ValueError):
    """A file could not be parsed or violates the format."""


class BundleError(RuntimeError):
    pass


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False, allow_nan=False) + "\n"


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _read_json(path: str | Path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path}: invalid JSON ({exc})") from exc


# --- COCO ------------------------------------------------------------------


def coco_dict(categories: CategorySet, pages: Sequence[PageLayout]) -> dict:
    images, annotations = [], []
    for p in pages:
        img = {"id": p.page_id, "width": p.page_width, "height": p.page_height}
        if p.image_ref is not None:
            img["file_name"] = p.image_ref
        images.append(img)
        for e in p.elements:
            x, y, w, h = e.bbox.to_xywh()
            annotations.append(
                {
                    "id": e.element_id,
                    "image_id": p.page_id,
                    "category_id": e.category_id,
                    "bbox": [x, y, w, h],
                    "area": w * h,
                    "iscrowd": 0,
                }
            )
    return {
        "info": {"schema_version": COCO_SCHEMA},
        "images": images,
        "annotations": annotations,
        "categories": [{"id": i, "name": n} for i, n in categories],
    }


def save_coco(path: str | Path, categories: CategorySet, pages: Sequence[PageLayout]) -> Path:
    return _write(Path(path), dumps(coco_dict(categories, pages)))


def _number(v: Any, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise LoadError(f"{what}: expected a finite number, got {v!r}")
    return float(v)


def _int_id(v: Any, what: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise LoadError(f"{what}: ids must be integers, got {v!r}")
    return v


def _clamp(v: float, lo: float, hi: float, what: str) -> float:
    if v < lo - CLAMP_TOLERANCE or v > hi + CLAMP_TOLERANCE:
        raise LoadError(f"{what}: coordinate {v} lies more than {CLAMP_TOLERANCE} px outside the page")
    return min(max(v, lo), hi)


def parse_coco(data: Any, source: str = "<coco>") -> tuple[CategorySet, list[PageLayout]]:
    if not isinstance(data, dict):
        raise LoadError(f"{source}: top level must be an object")
    for key in ("images", "annotations", "categories"):
        if not isinstance(data.get(key), list):
            raise LoadError(f"{source}: missing list '{key}'")
    try:
        cats = CategorySet(tuple((c["id"], c["name"]) for c in data["categories"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise LoadError(f"{source}: bad categories ({exc})") from None

    pages: dict[int, dict] = {}
    for k, img in enumerate(data["images"]):
        what = f"{source}: image #{k}"
        try:
            iid = _int_id(img["id"], what)
            w = _number(img["width"], what)
            h = _number(img["height"], what)
        except (KeyError, TypeError):
            raise LoadError(f"{what}: needs id, width, height") from None
        if iid in pages:
            raise LoadError(f"{what}: duplicate image id {iid}")
        if not (w > 0 and h > 0):
            raise LoadError(f"{what}: non-positive page size")
        pages[iid] = {"w": w, "h": h, "file_name": img.get("file_name"), "elements": []}

    for k, ann in enumerate(data["annotations"]):
        aid = ann.get("id", k) if isinstance(ann, dict) else k
        what = f"{source}: annotation id {aid}"
        if not isinstance(ann, dict):
            raise LoadError(f"{what}: not an object")
        for key in ("id", "image_id", "category_id", "bbox"):
            if key not in ann:
                raise LoadError(f"{what}: missing '{key}'")
        _int_id(ann["id"], what)
        page = pages.get(ann["image_id"])
        if page is None:
            raise LoadError(f"{what}: references unknown image id {ann['image_id']}")
        if ann["category_id"] not in cats:
            raise LoadError(f"{what}: unknown category id {ann['category_id']}")
        bbox = ann["bbox"]
        if not isinstance(bbox, list) or len(bbox) != 4:
            raise LoadError(f"{what}: bbox must be [x, y, w, h]")
        x, y, bw, bh = (_number(v, what) for v in bbox)
        if bw <= 0 or bh <= 0:
            raise LoadError(f"{what}: degenerate bbox {bbox}")
        x2, y2 = x + bw, y + bh
        x1c = _clamp(x, 0.0, page["w"], what)
        y1c = _clamp(y, 0.0, page["h"], what)
        x2c = _clamp(x2, 0.0, page["w"], what)
        y2c = _clamp(y2, 0.0, page["h"], what)
        try:
            box = BBox(x1c, y1c, x2c, y2c)
        except GeometryError as exc:
            raise LoadError(f"{what}: {exc}") from None
        page["elements"].append(LayoutElement(int(ann["id"]), box, int(ann["category_id"])))

    layouts = []
    for iid, p in pages.items():
        ids = [e.element_id for e in p["elements"]]
        if len(set(ids)) != len(ids):
            raise LoadError(f"{source}: image {iid} has duplicate annotation ids")
        layouts.append(
            PageLayout(p["w"], p["h"], tuple(p["elements"]), page_id=iid, image_ref=p["file_name"])
        )
    return cats, layouts


def load_coco(path: str | Path) -> tuple[CategorySet, list[PageLayout]]:
    path = Path(path)
    if not path.is_file():
        raise LoadError(f"{path}: no such file")
    return parse_coco(_read_json(path), str(path))


# --- error annotations -------------------------------------------------------


def _tuplify(v: Any) -> Any:
    if isinstance(v, list):
        return tuple(_tuplify(x) for x in v)
    if isinstance(v, dict):
        return {k: _tuplify(x) for k, x in v.items()}
    return v


def _listify(v: Any) -> Any:
    if isinstance(v, (list, tuple)):
        return [_listify(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _listify(x) for k, x in v.items()}
    return v


def errors_dict(
    ann: DocumentErrorAnnotation,
    page_id: int,
    provenance: Sequence[InjectionRecord] | None = None,
    meta: dict | None = None,
) -> dict:
    prov = None
    if provenance is not None:
        prov = {
            "injections": [
                {
                    "error_type": r.error_type.value,
                    "gt_ids": list(r.gt_ids),
                    "pred_ids": list(r.pred_ids),
                    "params": _listify(r.params),
                }
                for r in provenance
            ]
        }
        if meta:
            prov.update(_listify(meta))
    return {
        "schema_version": ERRORS_SCHEMA,
        "page_id": page_id,
        "has_error": ann.has_error,
        "error_types": ann.type_map(),
        "elements": [
            {
                "side": lab.side.value,
                "element_id": lab.element_id,
                "labels": [t.value for t in lab.sorted_labels()],
            }
            for lab in ann.element_labels
        ],
        "provenance": prov,
    }


def parse_errors(
    data: Any, source: str = "<errors>"
) -> tuple[DocumentErrorAnnotation, tuple[InjectionRecord, ...] | None, dict]:
    """Returns ``(annotation, injections, extra_provenance_fields)``."""
    if not isinstance(data, dict) or data.get("schema_version") != ERRORS_SCHEMA:
        raise LoadError(f"{source}: not a {ERRORS_SCHEMA} file")
    types = data.get("error_types")
    if not isinstance(types, dict) or set(types) != {t.value for t in ERROR_TYPES}:
        raise LoadError(f"{source}: error_types must map exactly the eight error types")
    try:
        labels = tuple(
            ElementErrorLabel(Side(e["side"]), int(e["element_id"]), frozenset(e["labels"]))
            for e in data.get("elements", [])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise LoadError(f"{source}: bad element label ({exc})") from None
    if not isinstance(data.get("has_error"), bool):
        raise LoadError(f"{source}: has_error must be a boolean")
    ann = DocumentErrorAnnotation(
        data["has_error"], tuple(int(bool(types[t.value])) for t in ERROR_TYPES), labels
    )
    prov = data.get("provenance")
    injections = None
    extra: dict = {}
    if prov is not None:
        try:
            injections = tuple(
                InjectionRecord(
                    ErrorType.parse(r["error_type"]),
                    tuple(r["gt_ids"]),
                    tuple(r["pred_ids"]),
                    _tuplify(r.get("params", {})),
                )
                for r in prov["injections"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise LoadError(f"{source}: bad provenance ({exc})") from None
        extra = {k: _tuplify(v) for k, v in prov.items() if k != "injections"}
    return ann, injections, extra


def load_errors(path: str | Path):
    return parse_errors(_read_json(path), str(path))


# --- LED records -------------------------------------------------------------


def page_dir_name(page_id: int) -> str:
    return str(page_id)


def save_led_record(
    r: LedRecord,
    root: str | Path,
    *,
    render: bool = True,
    style: RenderStyle | None = None,
    image_root: str | Path | None = None,
    meta: dict | None = None,
) -> list[Path]:
    """Write one record under ``root/<page_id>/``; returns the written paths."""
    d = Path(root) / page_dir_name(r.page_id)
    out = [
        _write(d / "gt.coco", dumps(coco_dict(r.categories, [r.gt]))),
        _write(d / "pred.coco", dumps(coco_dict(r.categories, [r.pred]))),
        _write(d / "errors.led", dumps(errors_dict(r.annotation, r.page_id, r.provenance, meta))),
    ]
    if render:
        base = None
        if image_root is not None and r.image_ref is not None:
            base = Path(image_root) / r.image_ref
        img = render_overlay(r.gt, r.pred, style, image=base, categories=r.categories, palette=True)
        out.append(save_png(img, d / "overlay.png"))
    return out


def load_led_record(page_dir: str | Path) -> LedRecord:
    d = Path(page_dir)
    cats, gts = load_coco(d / "gt.coco")
    pred_cats, preds = load_coco(d / "pred.coco")
    if len(gts) != 1 or len(preds) != 1:
        raise LoadError(f"{d}: record files must hold exactly one page each")
    if pred_cats != cats:
        raise LoadError(f"{d}: gt and pred category sets differ")
    ann, injections, _ = load_errors(d / "errors.led")
    gt, pred = gts[0], preds[0]
    return LedRecord(gt, pred, cats, ann, injections, gt.image_ref)


@dataclass(frozen=True)
class ManifestEntry:
    index: int
    page_id: int
    record_dir: str
    image_ref: str | None = None


@dataclass(frozen=True)
class CorpusManifest:
    categories: CategorySet
    entries: tuple[ManifestEntry, ...]
    meta: dict = field(default_factory=dict)

    def unresolved(self, root: str | Path) -> list[ManifestEntry]:
        """Entries whose record directory is absent under ``root``."""
        root = Path(root)
        return [e for e in self.entries if not (root / e.record_dir / "errors.led").is_file()]


def write_manifest(root: str | Path, records: Sequence[LedRecord], meta: dict | None = None) -> Path:
    if not records:
        raise ValueError("manifest needs at least one record")
    cats = records[0].categories
    body = {
        "schema_version": MANIFEST_SCHEMA,
        "categories": [{"id": i, "name": n} for i, n in cats],
        "pages": [
            {
                "index": k,
                "page_id": r.page_id,
                "dir": page_dir_name(r.page_id),
                "image_ref": r.image_ref,
            }
            for k, r in enumerate(records)
        ],
        "meta": _listify(meta or {}),
    }
    return _write(Path(root) / "manifest.json", dumps(body))


def load_manifest(root: str | Path) -> CorpusManifest:
    path = Path(root) / "manifest.json"
    if not path.is_file():
        raise LoadError(f"{path}: no manifest")
    data = _read_json(path)
    if not isinstance(data, dict) or data.get("schema_version") != MANIFEST_SCHEMA:
        raise LoadError(f"{path}: not a {MANIFEST_SCHEMA} file")
    try:
        cats = CategorySet(tuple((c["id"], c["name"]) for c in data["categories"]))
        entries = tuple(
            ManifestEntry(int(p["index"]), int(p["page_id"]), str(p["dir"]), p.get("image_ref"))
            for p in data["pages"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise LoadError(f"{path}: malformed manifest ({exc})") from None
    if [e.index for e in entries] != list(range(len(entries))):
        raise LoadError(f"{path}: page indices must be dense from 0")
    return CorpusManifest(cats, entries, data.get("meta", {}))


def load_records(root: str | Path) -> tuple[CorpusManifest, list[LedRecord]]:
    root = Path(root)
    manifest = load_manifest(root)
    missing = manifest.unresolved(root)
    if missing:
        raise LoadError(f"{root}: missing record dirs for pages {[e.page_id for e in missing]}")
    return manifest, [load_led_record(root / e.record_dir) for e in manifest.entries]


# --- benchmark bundles --------------------------------------------------------


def answer_key(r: LedRecord) -> dict:
    ann = r.annotation
    return {
        "doc_id": r.page_id,
        "has_error": ann.has_error,
        "error_types": ann.type_map(),
        "elements": [
            {
                "side": lab.side.value,
                "element_id": lab.element_id,
                "label": None if lab.primary() is None else lab.primary().value,
            }
            for lab in ann.element_labels
        ],
    }


@dataclass(frozen=True)
class BenchBundle:
    task: str
    prompt: str
    documents: tuple[dict, ...]
    payload_path: Path
    key_path: Path


def _jsonl(rows: Iterable[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n" for r in rows)


def export_bench_bundle(
    records: Sequence[LedRecord],
    task: str,
    prompt: str,
    out_dir: str | Path,
    *,
    image_root: str | Path | None = None,
    style: RenderStyle | None = None,
) -> BenchBundle:
    """Write a model-facing payload file plus a separate answer-key file.

    P1 carries the raw page image and the prediction JSON, P2 only an overlay
    image, P3 the overlay and the JSON. For T1/T2 the overlay shows the
    prediction alone; T3 inputs also carry the GT boxes (and GT JSON).
    """
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}, got {task!r}")
    if prompt not in PROMPTS:
        raise ValueError(f"prompt must be one of {PROMPTS}, got {prompt!r}")
    out = Path(out_dir)
    wants_image = prompt == "P1"
    wants_overlay = prompt in ("P2", "P3")
    wants_text = prompt in ("P1", "P3")
    with_gt = task == "T3"

    missing = []
    for r in records:
        if wants_image and r.image_ref is None:
            missing.append(r.page_id)
        elif image_root is not None and r.image_ref is not None and (wants_image or wants_overlay):
            if not (Path(image_root) / r.image_ref).is_file():
                missing.append(r.page_id)
    if missing:
        raise BundleError(f"missing page image for pages {missing}")

    docs = []
    for r in records:
        doc: dict[str, Any] = {"doc_id": r.page_id, "task": task, "prompt": prompt}
        if wants_image:
            doc["image"] = r.image_ref
        if wants_overlay:
            rel = f"overlays/{page_dir_name(r.page_id)}.png"
            base = Path(image_root) / r.image_ref if image_root is not None and r.image_ref else None
            img = render_overlay(
                r.gt if with_gt else None, r.pred, style, image=base, categories=r.categories, palette=True
            )
            save_png(img, out / rel)
            doc["overlay"] = rel
        if wants_text:
            doc["prediction"] = json.dumps(coco_dict(r.categories, [r.pred]), sort_keys=True)
            if with_gt:
                doc["ground_truth"] = json.dumps(coco_dict(r.categories, [r.gt]), sort_keys=True)
        docs.append(doc)

    payload_path = _write(out / "bundle.jsonl", _jsonl(docs))
    key_path = _write(out / "answer_key.jsonl", _jsonl(answer_key(r) for r in records))
    _write(
        out / "bundle.json",
        dumps(
            {
                "schema_version": BUNDLE_SCHEMA,
                "task": task,
                "prompt": prompt,
                "n_documents": len(docs),
                "payload": payload_path.name,
                "answer_key": key_path.name,
            }
        ),
    )
    return BenchBundle(task, prompt, tuple(docs), payload_path, key_path)


def read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise LoadError(f"{path}:{n}: invalid JSON ({exc})") from exc
    return rows
