"""Seeded synthesis of erroneous predictions from clean GT layouts.

Each ``inject_*`` function takes a clean page and returns ``(pred, record)``.
:func:`inject_document` composes several injections on one evolving
prediction, and :func:`generate_dataset` maps that over a corpus.

Randomness comes from numpy's counter-based Philox generator. Every page gets
its own stream keyed by ``(master_seed, page_id)`` and every error slot a
child stream spawned from it, so output does not depend on corpus order or
worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import detector
from .geometry import (
    BBox,
    GeometryError,
    enclosing_rect,
    intersection_area,
    iou,
    iou_matrix,
    scale_about_center,
    translate,
)
from .layout import (
    ERROR_TYPES,
    CategorySet,
    ErrorType,
    InjectionRecord,
    LayoutElement,
    LedRecord,
    PageLayout,
)
from .validation import check_corpus, check_interval, check_probability

# Four published shares; the 0.68 pp remainder is split evenly over the four
# rare structural types.
DEFAULT_MIXTURE: dict[ErrorType, float] = {
    ErrorType.MISSING: 0.6489,
    ErrorType.HALLUCINATION: 0.1469,
    ErrorType.SIZE_ERROR: 0.1097,
    ErrorType.SPLIT: 0.0017,
    ErrorType.MERGE: 0.0017,
    ErrorType.OVERLAP: 0.0017,
    ErrorType.DUPLICATE: 0.0017,
    ErrorType.MISCLASSIFICATION: 0.0877,
}

OVERLAP_GROWTH = 1.05
SPLIT_MAX_FRACTION = 0.45
SPLIT_MIN_FRACTION = 0.12
MIN_SPLIT_WIDTH = 8.0
TYPE_REDRAWS = 8


class InjectionError(RuntimeError):
    """An injection found no admissible element or placement."""


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class InjectionConfig:
    """Generation parameters; see README for the config-file format."""

    master_seed: int = 0
    type_mixture: tuple[float, ...] = tuple(DEFAULT_MIXTURE[t] for t in ERROR_TYPES)
    missing_fraction: float = 0.10
    size_scale_range: tuple[float, float] = (0.10, 0.30)
    size_neighbor_max_iou: float = 0.01
    split_fragment_range: tuple[int, int] = (2, 4)
    split_gap_fraction: float = 0.02
    merge_adjacency_factor: float = 1.5
    duplicate_perturb: float = 0.10
    hallucination_max_iou: float = 0.01
    max_rejection_attempts: int = 200
    errors_per_doc_range: tuple[int, int] = (1, 3)
    clean_document_fraction: float = 0.5

    def __post_init__(self) -> None:
        mix = self.type_mixture
        if isinstance(mix, Mapping):
            parsed = {ErrorType.parse(k): float(v) for k, v in mix.items()}
            mix = tuple(parsed.get(t, 0.0) for t in ERROR_TYPES)
        mix = tuple(float(v) for v in mix)
        if len(mix) != len(ERROR_TYPES):
            raise ConfigError(f"type_mixture needs {len(ERROR_TYPES)} weights, got {len(mix)}")
        if any(v < 0 for v in mix):
            raise ConfigError(f"type_mixture weights must be non-negative: {mix}")
        if abs(sum(mix) - 1.0) > 1e-9:
            raise ConfigError(f"type_mixture must sum to 1, sums to {sum(mix)!r}")
        object.__setattr__(self, "type_mixture", mix)
        object.__setattr__(self, "master_seed", int(self.master_seed))
        for name in ("size_scale_range", "split_fragment_range", "errors_per_doc_range"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        try:
            check_interval(*self.size_scale_range, "size_scale_range", positive=True)
            check_interval(*self.split_fragment_range, "split_fragment_range", positive=True)
            check_interval(*self.errors_per_doc_range, "errors_per_doc_range")
            for name in (
                "missing_fraction",
                "split_gap_fraction",
                "duplicate_perturb",
                "hallucination_max_iou",
                "size_neighbor_max_iou",
                "clean_document_fraction",
            ):
                check_probability(getattr(self, name), name)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.size_scale_range[1] >= 1.0:
            raise ConfigError("size_scale_range magnitudes must be below 1")
        if self.split_fragment_range[0] < 2:
            raise ConfigError("split_fragment_range must start at 2 or more")
        if self.errors_per_doc_range[0] < 0:
            raise ConfigError("errors_per_doc_range must be non-negative")
        if self.merge_adjacency_factor <= 0:
            raise ConfigError("merge_adjacency_factor must be positive")
        if self.max_rejection_attempts < 1:
            raise ConfigError("max_rejection_attempts must be positive")

    @property
    def mixture(self) -> dict[ErrorType, float]:
        return dict(zip(ERROR_TYPES, self.type_mixture))

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "InjectionConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**dict(data))

    def to_mapping(self) -> dict[str, Any]:
        d = asdict(self)
        d["type_mixture"] = {t.value: w for t, w in self.mixture.items()}
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


PLACEMENT_BATCH = 64


def page_rng(master_seed: int, page_id: int) -> np.random.Generator:
    """Philox stream for one page, keyed by ``(master_seed, page_id)``."""
    ss = np.random.SeedSequence(int(master_seed) % 2**63, spawn_key=(int(page_id) % 2**63,))
    return np.random.Generator(np.random.Philox(ss))


class _Working:
    """Mutable prediction under construction, with guard bookkeeping."""

    def __init__(self, gt: PageLayout, categories: CategorySet | None):
        self.gt = gt
        self.gt_by_id = {e.element_id: e for e in gt.elements}
        self.elements: dict[int, LayoutElement] = {e.element_id: e for e in gt.elements}
        self.protected: set[int] = set()
        self.missing_gt: set[int] = set()
        self.next_id = max(gt.ids, default=0) + 1
        self.categories = categories

    @property
    def width(self) -> float:
        return self.gt.page_width

    @property
    def height(self) -> float:
        return self.gt.page_height

    def untouched(self) -> list[int]:
        return sorted(
            i
            for i, e in self.elements.items()
            if i not in self.protected and self.gt_by_id.get(i) == e
        )

    def new_id(self) -> int:
        i = self.next_id
        self.next_id += 1
        return i

    def boxes(self, exclude: set[int] = frozenset()) -> list[BBox]:
        return [e.bbox for i, e in self.elements.items() if i not in exclude]

    def gt_boxes(self, exclude: set[int] = frozenset()) -> list[BBox]:
        return [e.bbox for i, e in self.gt_by_id.items() if i not in exclude]

    def fits(self, b: BBox) -> bool:
        return b.within(self.width, self.height)

    def reopens_missing(self, b: BBox) -> bool:
        """True if ``b`` would re-cover a GT box removed by an earlier Missing slot."""
        return any(
            iou(b, self.gt_by_id[g].bbox) >= detector.ASSOC_IOU for g in self.missing_gt
        )

    def to_layout(self) -> PageLayout:
        return self.gt.replace(elements=sorted(self.elements.values(), key=lambda e: e.element_id))


def _max_iou(b: BBox, others: Sequence[BBox]) -> float:
    if not others:
        return 0.0
    return float(iou_matrix([b], others).max())


def _pick(rng: np.random.Generator, items: Sequence):
    return items[int(rng.integers(len(items)))]


def _missing(w: _Working, rng: np.random.Generator, cfg: InjectionConfig) -> InjectionRecord:
    candidates = w.untouched()
    if not candidates:
        raise InjectionError("no element available to remove")
    # tolerance keeps e.g. 0.1 * 30 == 3.0000000000000004 from rounding up to 4
    n = max(1, math.ceil(cfg.missing_fraction * len(w.gt) - 1e-9))
    n = min(n, len(candidates))
    chosen = sorted(int(candidates[k]) for k in rng.permutation(len(candidates))[:n])
    for i in chosen:
        del w.elements[i]
    w.missing_gt.update(chosen)
    return InjectionRecord(ErrorType.MISSING, tuple(chosen), (), {"n_removed": n})


def _free_positions(
    bw: float, bh: float, xs: np.ndarray, ys: np.ndarray, blockers: np.ndarray, max_iou: float
) -> np.ndarray:
    """Indices of candidate corners whose ``bw x bh`` box stays under ``max_iou``."""
    if len(blockers) == 0:
        return np.arange(len(xs))
    x2, y2 = xs + bw, ys + bh
    iw = np.minimum(x2[:, None], blockers[None, :, 2]) - np.maximum(xs[:, None], blockers[None, :, 0])
    ih = np.minimum(y2[:, None], blockers[None, :, 3]) - np.maximum(ys[:, None], blockers[None, :, 1])
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    area_b = (blockers[:, 2] - blockers[:, 0]) * (blockers[:, 3] - blockers[:, 1])
    union = bw * bh + area_b[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        v = np.where(inter > 0, inter / union, 0.0)
    return np.flatnonzero(v.max(axis=1) <= max_iou)


def _hallucination(w: _Working, rng: np.random.Generator, cfg: InjectionConfig) -> InjectionRecord:
    if w.categories is None:
        raise InjectionError("hallucination needs a category set")
    cat_ids = w.categories.ids
    gt_sizes = [(e.bbox.width, e.bbox.height) for e in w.gt.elements]
    blockers = w.gt_boxes() + w.boxes()
    barr = np.array([b.as_tuple() for b in blockers], dtype=np.float64).reshape(-1, 4)
    for attempt in range(1, cfg.max_rejection_attempts + 1):
        if gt_sizes:
            bw, bh = _pick(rng, gt_sizes)
        else:
            bw = w.width * rng.uniform(0.10, 0.30)
            bh = w.height * rng.uniform(0.10, 0.30)
        # each size draw is tested against a batch of corners; free strips on a
        # dense page are thin, and one corner per draw rarely lands in them
        xs = rng.uniform(0.0, w.width - bw, PLACEMENT_BATCH)
        ys = rng.uniform(0.0, w.height - bh, PLACEMENT_BATCH)
        for k in _free_positions(bw, bh, xs, ys, barr, cfg.hallucination_max_iou):
            x, y = float(xs[k]), float(ys[k])
            try:
                b = BBox(x, y, x + bw, y + bh)
            except GeometryError:
                continue
            # exact re-check with the scalar path guards against snapping drift
            if w.fits(b) and _max_iou(b, blockers) <= cfg.hallucination_max_iou:
                break
        else:
            continue
        cat = int(_pick(rng, cat_ids))
        pid = w.new_id()
        w.elements[pid] = LayoutElement(pid, b, cat)
        w.protected.add(pid)
        return InjectionRecord(
            ErrorType.HALLUCINATION, (), (pid,), {"attempts": attempt, "category_id": cat}
        )
    raise InjectionError(f"page too dense: no free placement after {cfg.max_rejection_attempts} attempts")


def _size_error(w: _Working, rng: np.random.Generator, cfg: InjectionConfig) -> InjectionRecord:
    candidates = w.untouched()
    if not candidates:
        raise InjectionError("no element available to rescale")
    lo_u, hi_u = cfg.size_scale_range
    band_lo, band_hi = detector.SIZE_BAND
    for attempt in range(1, cfg.max_rejection_attempts + 1):
        i = int(_pick(rng, candidates))
        u = rng.uniform(lo_u, hi_u)
        factor = 1.0 + u if rng.random() < 0.5 else 1.0 - u
        # detectability guard: the squared factor must leave the size band
        if band_lo <= factor * factor <= band_hi:
            continue
        e = w.elements[i]
        b = scale_about_center(e.bbox, factor, factor)
        if not w.fits(b) or w.reopens_missing(b):
            continue
        neighbours = w.boxes(exclude={i}) + w.gt_boxes(exclude={i})
        if _max_iou(b, neighbours) > cfg.size_neighbor_max_iou:
            continue
        w.elements[i] = replace(e, bbox=b)
        w.protected.add(i)
        return InjectionRecord(
            ErrorType.SIZE_ERROR, (i,), (i,), {"factor": float(factor), "attempts": attempt}
        )
    raise InjectionError("no admissible size perturbation found")


def bounded_fractions(
    rng: np.random.Generator, n: int, total: float, lo: float, hi: float
) -> list[float]:
    """``n`` random shares summing to ``total``, each inside ``[lo, hi]``.

    Uniform draws are scaled by a common factor and clipped into the bounds;
    the factor is found by bisection so the clipped shares hit ``total``.
    """
    if not (n * lo <= total + 1e-12 and total <= n * hi + 1e-12):
        raise ValueError(f"cannot split {total} into {n} shares within [{lo}, {hi}]")
    raw = rng.uniform(0.0, 1.0, size=n) + 1e-12
    a, b = 0.0, hi / raw.min()
    for _ in range(200):
        m = 0.5 * (a + b)
        if np.clip(raw * m, lo, hi).sum() < total:
            a = m
        else:
            b = m
    x = np.clip(raw * b, lo, hi)
    # push the last rounding residue onto a share with room for it
    residue = total - x.sum()
    for k in np.argsort(-raw):
        if lo <= x[k] + residue <= hi:
            x[k] += residue
            break
    return [float(v) for v in x]


def _split(w: _Working, rng: np.random.Generator, cfg: InjectionConfig) -> InjectionRecord:
    candidates = [i for i in w.untouched() if w.elements[i].bbox.width >= MIN_SPLIT_WIDTH]
    if not candidates:
        raise InjectionError("no element wide enough to split")
    n_lo, n_hi = cfg.split_fragment_range
    gap = cfg.split_gap_fraction
    for _ in range(cfg.max_rejection_attempts):
        i = int(_pick(rng, candidates))
        n = int(rng.integers(n_lo, n_hi + 1))
        usable = 1.0 - (n - 1) * gap
        # with two fragments the shares must each sit just under one half
        hi = SPLIT_MAX_FRACTION if n * SPLIT_MAX_FRACTION >= usable else (usable / n + 0.5) / 2
        try:
            shares = bounded_fractions(rng, n, usable, SPLIT_MIN_FRACTION, hi)
        except ValueError:
            continue
        e = w.elements[i]
        b = e.bbox
        frags: list[BBox] = []
        x = b.x1
        try:
            for k, s in enumerate(shares):
                x2 = b.x2 if k == n - 1 else x + s * b.width
                frags.append(BBox(x, b.y1, min(x2, b.x2), b.y2))
                x = x2 + gap * b.width
        except GeometryError:
            continue
        ious = [iou(b, f) for f in frags]
        if not (
            all(detector.ASSOC_IOU <= v < detector.SPLIT_FRAGMENT_IOU for v in ious)
            and sum(ious) >= detector.SPLIT_SUM_IOU
        ):
            continue
        del w.elements[i]
        ids = []
        for f in frags:
            pid = w.new_id()
            w.elements[pid] = LayoutElement(pid, f, e.category_id)
            w.protected.add(pid)
            ids.append(pid)
        return InjectionRecord(
            ErrorType.SPLIT, (i,), tuple(ids), {"n": n, "fractions": tuple(shares)}
        )
    raise InjectionError("no admissible split found")


def _merge_ok(w: _Working, members: list[int], box: BBox) -> bool:
    if any(iou(w.gt_by_id[m].bbox, box) < detector.ASSOC_IOU for m in members):
        return False
    ms = set(members)
    outsiders = w.boxes(exclude=ms) + w.gt_boxes(exclude=ms)
    return all(intersection_area(box, o) == 0.0 for o in outsiders)


def _merge(w: _Working, rng: np.random.Generator, cfg: InjectionConfig) -> InjectionRecord:
    pool = w.untouched()
    if len(pool) < 2 or not len(w.gt):
        raise InjectionError("no merge candidates")
    mean_width = float(np.mean([e.bbox.width for e in w.gt.elements]))
    reach = cfg.merge_adjacency_factor * mean_width
    cx = {i: w.elements[i].bbox.center[0] for i in pool}
    cat = {i: w.elements[i].category_id for i in pool}
    pairs = [
        (a, b)
        for k, a in enumerate(pool)
        for b in pool[k + 1 :]
        if cat[a] == cat[b] and abs(cx[a] - cx[b]) <= reach
    ]
    for k in rng.permutation(len(pairs)):
        group = list(pairs[int(k)])
        box = enclosing_rect(w.elements[m].bbox for m in group)
        if not _merge_ok(w, group, box):
            continue
        grown = True
        while grown:
            grown = False
            c = box.center
            extra = [
                i
                for i in pool
                if i not in group
                and cat[i] == cat[group[0]]
                and min(abs(cx[i] - cx[m]) for m in group) <= reach
            ]
            extra.sort(key=lambda i: (math.dist(w.elements[i].bbox.center, c), i))
            for i in extra:
                cand = enclosing_rect([box, w.elements[i].bbox])
                if _merge_ok(w, group + [i], cand):
                    group.append(i)
                    box = cand
                    grown = True
                    break
        category = w.elements[group[0]].category_id
        for m in group:
            del w.elements[m]
        pid = w.new_id()
        w.elements[pid] = LayoutElement(pid, box, category)
        w.protected.add(pid)
        return InjectionRecord(
            ErrorType.MERGE, tuple(sorted(group)), (pid,), {"group_size": len(group)}
        )
    raise InjectionError("no merge candidates")


def _overlap(w: _Working, rng: np.random.Generator, cfg: InjectionConfig) -> InjectionRecord:
    pool = w.untouched()
    if not pool or len(w.elements) < 2:
        raise InjectionError("no element with a neighbour to overlap")
    for k in rng.permutation(len(pool)):
        i = int(pool[int(k)])
        e = w.elements[i]
        others = [(j, o.bbox) for j, o in w.elements.items() if j != i]
        other_boxes = [b for _, b in others]
        b = e.bbox
        sx = sy = 1.0
        for step in range(cfg.max_rejection_attempts + 1):
            ious = iou_matrix([b], other_boxes)[0]
            j = int(np.argmax(ious))
            if ious[j] >= detector.OVERLAP_IOU:
                if w.reopens_missing(b):
                    break
                neighbour = others[j][0]
                w.elements[i] = replace(e, bbox=b)
                w.protected.update({i, neighbour})
                return InjectionRecord(
                    ErrorType.OVERLAP,
                    (i,),
                    (i, neighbour),
                    {"steps": step, "scale_x": sx, "scale_y": sy},
                )
            # grow each axis by one step unless that axis would leave the page
            gx = OVERLAP_GROWTH if w.fits(scale_about_center(e.bbox, sx * OVERLAP_GROWTH, sy)) else 1.0
            gy = OVERLAP_GROWTH if w.fits(scale_about_center(e.bbox, sx, sy * OVERLAP_GROWTH)) else 1.0
            if gx == 1.0 and gy == 1.0:
                break
            sx *= gx
            sy *= gy
            b = scale_about_center(e.bbox, sx, sy)
            # the grown box must still be associated with its own GT element
            if not w.fits(b) or iou(b, e.bbox) < detector.ASSOC_IOU:
                break
    raise InjectionError("no element reaches a neighbour before leaving the page")


def _duplicate(w: _Working, rng: np.random.Generator, cfg: InjectionConfig) -> InjectionRecord:
    pool = w.untouched()
    if not pool:
        raise InjectionError("no element to duplicate")
    p = cfg.duplicate_perturb
    for k in rng.permutation(len(pool)):
        i = int(pool[int(k)])
        e = w.elements[i]
        n_copies = int(rng.integers(1, 3))
        copies: list[BBox] = []
        draws: list[tuple[float, float, float, float]] = []
        for _ in range(cfg.max_rejection_attempts):
            sx, sy = rng.uniform(1 - p, 1 + p, size=2)
            dx = rng.uniform(-p, p) * e.bbox.width
            dy = rng.uniform(-p, p) * e.bbox.height
            c = translate(scale_about_center(e.bbox, sx, sy), dx, dy)
            if w.fits(c) and iou(c, e.bbox) >= detector.DUPLICATE_IOU and not w.reopens_missing(c):
                copies.append(c)
                draws.append((float(sx), float(sy), float(dx), float(dy)))
                if len(copies) == n_copies:
                    break
        if len(copies) < n_copies:
            continue
        ids = []
        for c in copies:
            pid = w.new_id()
            w.elements[pid] = LayoutElement(pid, c, e.category_id)
            w.protected.add(pid)
            ids.append(pid)
        w.protected.add(i)
        return InjectionRecord(ErrorType.DUPLICATE, (i,), (i, *ids), {"copies": tuple(draws)})
    raise InjectionError("no admissible duplicate found")


def _misclassification(w: _Working, rng: np.random.Generator, cfg: InjectionConfig) -> InjectionRecord:
    if w.categories is None or len(w.categories) < 2:
        raise InjectionError("misclassification needs at least two categories")
    pool = w.untouched()
    if not pool:
        raise InjectionError("no element to relabel")
    i = int(_pick(rng, pool))
    e = w.elements[i]
    choices = [c for c in w.categories.ids if c != e.category_id]
    new = int(_pick(rng, choices))
    w.elements[i] = replace(e, category_id=new)
    w.protected.add(i)
    return InjectionRecord(
        ErrorType.MISCLASSIFICATION, (i,), (i,), {"from_category": e.category_id, "to_category": new}
    )


_INJECTORS: dict[ErrorType, Callable[[_Working, np.random.Generator, InjectionConfig], InjectionRecord]] = {
    ErrorType.MISSING: _missing,
    ErrorType.HALLUCINATION: _hallucination,
    ErrorType.SIZE_ERROR: _size_error,
    ErrorType.SPLIT: _split,
    ErrorType.MERGE: _merge,
    ErrorType.OVERLAP: _overlap,
    ErrorType.DUPLICATE: _duplicate,
    ErrorType.MISCLASSIFICATION: _misclassification,
}


def inject(
    error_type: ErrorType | str,
    gt: PageLayout,
    rng: np.random.Generator,
    config: InjectionConfig | None = None,
    categories: CategorySet | None = None,
) -> tuple[PageLayout, InjectionRecord]:
    """Inject one error of ``error_type`` into a copy of ``gt``."""
    cfg = config or InjectionConfig()
    w = _Working(gt, categories)
    rec = _INJECTORS[ErrorType.parse(error_type)](w, rng, cfg)
    return w.to_layout(), rec


def inject_missing(gt, rng, config=None, categories=None):
    if not len(gt):
        raise InjectionError("cannot remove elements from an empty page")
    return inject(ErrorType.MISSING, gt, rng, config, categories)


def inject_hallucination(gt, rng, config=None, categories=None):
    return inject(ErrorType.HALLUCINATION, gt, rng, config, categories)


def inject_size_error(gt, rng, config=None, categories=None):
    return inject(ErrorType.SIZE_ERROR, gt, rng, config, categories)


def inject_split(gt, rng, config=None, categories=None):
    return inject(ErrorType.SPLIT, gt, rng, config, categories)


def inject_merge(gt, rng, config=None, categories=None):
    return inject(ErrorType.MERGE, gt, rng, config, categories)


def inject_overlap(gt, rng, config=None, categories=None):
    return inject(ErrorType.OVERLAP, gt, rng, config, categories)


def inject_duplicate(gt, rng, config=None, categories=None):
    return inject(ErrorType.DUPLICATE, gt, rng, config, categories)


def inject_misclassification(gt, rng, config=None, categories=None):
    return inject(ErrorType.MISCLASSIFICATION, gt, rng, config, categories)


def inject_document(
    gt: PageLayout,
    rng: np.random.Generator,
    config: InjectionConfig | None = None,
    categories: CategorySet | None = None,
) -> LedRecord:
    """One LED record: a clean copy, or a sequence of injected error slots.

    The stored annotation is the detector's diagnosis of ``(gt, pred)``; the
    injected slots are kept as provenance. If a slot's injection fails, its
    type is redrawn up to 8 times before the slot is dropped.
    """
    cfg = config or InjectionConfig()
    if categories is None:
        raise ValueError("inject_document needs the corpus CategorySet")
    w = _Working(gt, categories)
    records: list[InjectionRecord] = []
    if rng.random() >= cfg.clean_document_fraction:
        k_lo, k_hi = cfg.errors_per_doc_range
        n_slots = int(rng.integers(k_lo, k_hi + 1))
        mixture = np.asarray(cfg.type_mixture)
        for slot_rng in rng.spawn(n_slots):
            for _ in range(1 + TYPE_REDRAWS):
                t = ERROR_TYPES[int(slot_rng.choice(len(ERROR_TYPES), p=mixture))]
                try:
                    records.append(_INJECTORS[t](w, slot_rng, cfg))
                    break
                except InjectionError:
                    continue
    pred = w.to_layout()
    return LedRecord(
        gt=gt,
        pred=pred,
        categories=categories,
        annotation=detector.classify_document(gt, pred),
        provenance=tuple(records),
        image_ref=gt.image_ref,
    )


def _generate_one(args: tuple[PageLayout, InjectionConfig, CategorySet]) -> LedRecord:
    page, cfg, cats = args
    return inject_document(page, page_rng(cfg.master_seed, page.page_id), cfg, cats)


def generate_dataset(
    corpus: Sequence[PageLayout],
    config: InjectionConfig | None = None,
    categories: CategorySet | None = None,
    n_jobs: int = 1,
) -> list[LedRecord]:
    """One LED record per page, in corpus order."""
    pages = check_corpus(corpus)
    cfg = config or InjectionConfig()
    cats = categories or infer_categories(pages)
    tasks = [(p, cfg, cats) for p in pages]
    if n_jobs <= 1:
        return [_generate_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_generate_one, tasks, chunksize=max(1, len(tasks) // (8 * n_jobs))))


def infer_categories(pages: Sequence[PageLayout]) -> CategorySet:
    ids = sorted({e.category_id for p in pages for e in p.elements})
    if not ids:
        raise ValueError("cannot infer categories from a corpus without elements")
    return CategorySet(tuple((i, f"category_{i}") for i in ids))


def slot_counts(records: Sequence[LedRecord]) -> dict[ErrorType, int]:
    """Number of injected slots per error type across ``records``."""
    counts = {t: 0 for t in ERROR_TYPES}
    for r in records:
        for rec in r.provenance or ():
            counts[rec.error_type] += 1
    return counts


class ErrorInjector(BaseEstimator):
    """Estimator front-end for :func:`generate_dataset`.

    ``fit`` records the category set (given, or inferred from the corpus);
    ``transform`` maps clean pages to :class:`LedRecord` objects. The
    remaining parameters mirror :class:`InjectionConfig`.
    """

    def __init__(
        self,
        master_seed: int = 0,
        type_mixture=None,
        missing_fraction: float = 0.10,
        size_scale_range=(0.10, 0.30),
        size_neighbor_max_iou: float = 0.01,
        split_fragment_range=(2, 4),
        split_gap_fraction: float = 0.02,
        merge_adjacency_factor: float = 1.5,
        duplicate_perturb: float = 0.10,
        hallucination_max_iou: float = 0.01,
        max_rejection_attempts: int = 200,
        errors_per_doc_range=(1, 3),
        clean_document_fraction: float = 0.5,
        categories: CategorySet | None = None,
        n_jobs: int = 1,
    ):
        self.master_seed = master_seed
        self.type_mixture = type_mixture
        self.missing_fraction = missing_fraction
        self.size_scale_range = size_scale_range
        self.size_neighbor_max_iou = size_neighbor_max_iou
        self.split_fragment_range = split_fragment_range
        self.split_gap_fraction = split_gap_fraction
        self.merge_adjacency_factor = merge_adjacency_factor
        self.duplicate_perturb = duplicate_perturb
        self.hallucination_max_iou = hallucination_max_iou
        self.max_rejection_attempts = max_rejection_attempts
        self.errors_per_doc_range = errors_per_doc_range
        self.clean_document_fraction = clean_document_fraction
        self.categories = categories
        self.n_jobs = n_jobs

    @classmethod
    def from_config(cls, config: InjectionConfig, **kwargs) -> "ErrorInjector":
        return cls(**asdict(config), **kwargs)

    def _make_config(self) -> InjectionConfig:
        params = self.get_params()
        params.pop("categories")
        params.pop("n_jobs")
        if params["type_mixture"] is None:
            params.pop("type_mixture")
        return InjectionConfig(**params)

    def fit(self, X, y=None):
        pages = check_corpus(X)
        self.config_ = self._make_config()
        self.categories_ = self.categories or infer_categories(pages)
        return self

    def transform(self, X) -> list[LedRecord]:
        check_is_fitted(self, "config_")
        return generate_dataset(X, self.config_, self.categories_, n_jobs=self.n_jobs)

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(X)
