"""Rule engine for the eight structural error types.

Every rule is a literal reading of its IoU / area-ratio definition. Rules fire
independently; the only interaction between them is the precedence used to
flatten element labels to a single class for element-level scoring.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .geometry import area_ratio, center_distance, iou_matrix
from .layout import (
    DocumentErrorAnnotation,
    ElementErrorLabel,
    ErrorType,
    N_ERROR_TYPES,
    PageLayout,
    Side,
)
from .validation import check_layout_pair, check_layout_pairs

ASSOC_IOU = 0.1
SIZE_BAND = (0.6, 1.4)
CENTER_TOLERANCE = 0.25
SPLIT_FRAGMENT_IOU = 0.5
SPLIT_SUM_IOU = 0.5
OVERLAP_IOU = 0.1
DUPLICATE_IOU = 0.9
MISCLASSIFICATION_IOU = 0.9


@dataclass(frozen=True)
class MatchTable:
    """Exhaustive GT x PRED IoU, rows and columns in ascending id order."""

    gt_ids: tuple[int, ...]
    pred_ids: tuple[int, ...]
    iou: np.ndarray
    threshold: float = ASSOC_IOU

    @property
    def gt_matches(self) -> dict[int, list[int]]:
        """Per GT id, the pred ids at IoU >= threshold."""
        return {
            g: [self.pred_ids[j] for j in np.flatnonzero(self.iou[i] >= self.threshold)]
            for i, g in enumerate(self.gt_ids)
        }

    @property
    def pred_matches(self) -> dict[int, list[int]]:
        return {
            p: [self.gt_ids[i] for i in np.flatnonzero(self.iou[:, j] >= self.threshold)]
            for j, p in enumerate(self.pred_ids)
        }


def build_match_table(gt: PageLayout, pred: PageLayout, threshold: float = ASSOC_IOU) -> MatchTable:
    check_layout_pair(gt, pred)
    gts = sorted(gt.elements, key=lambda e: e.element_id)
    preds = sorted(pred.elements, key=lambda e: e.element_id)
    m = iou_matrix([e.bbox for e in gts], [e.bbox for e in preds])
    return MatchTable(
        tuple(e.element_id for e in gts), tuple(e.element_id for e in preds), m, threshold
    )


def detect_missing(t: MatchTable, iou_threshold: float = ASSOC_IOU) -> set[int]:
    if not t.pred_ids:
        return set(t.gt_ids)
    best = t.iou.max(axis=1)
    return {g for g, b in zip(t.gt_ids, best) if b < iou_threshold}


def detect_hallucination(t: MatchTable, iou_threshold: float = ASSOC_IOU) -> set[int]:
    if not t.gt_ids:
        return set(t.pred_ids)
    best = t.iou.max(axis=0)
    return {p for p, b in zip(t.pred_ids, best) if b < iou_threshold}


def detect_size_error(
    t: MatchTable,
    gt: PageLayout,
    pred: PageLayout,
    iou_threshold: float = ASSOC_IOU,
    band: tuple[float, float] = SIZE_BAND,
    center_tolerance: float = CENTER_TOLERANCE,
) -> set[tuple[int, int]]:
    """``(pred_id, gt_id)`` pairs of center-aligned matches with an off-band area ratio.

    Each GT is paired with its argmax-IoU prediction (ties go to the lower
    pred id). Centers count as "similar" when their distance is at most
    ``center_tolerance`` times the GT diagonal.
    """
    out: set[tuple[int, int]] = set()
    if not t.pred_ids:
        return out
    lo, hi = band
    gt_by_id = {e.element_id: e for e in gt.elements}
    pred_by_id = {e.element_id: e for e in pred.elements}
    for i, g in enumerate(t.gt_ids):
        j = int(np.argmax(t.iou[i]))
        if t.iou[i, j] < iou_threshold:
            continue
        gb = gt_by_id[g].bbox
        pb = pred_by_id[t.pred_ids[j]].bbox
        if center_distance(pb, gb) > center_tolerance * gb.diagonal:
            continue
        r = area_ratio(pb, gb)
        if r < lo or r > hi:
            out.add((t.pred_ids[j], g))
    return out


def detect_split(
    t: MatchTable,
    gt: PageLayout | None = None,
    pred: PageLayout | None = None,
    iou_threshold: float = ASSOC_IOU,
    fragment_iou: float = SPLIT_FRAGMENT_IOU,
    sum_iou: float = SPLIT_SUM_IOU,
) -> dict[int, set[int]]:
    """GT id -> fragment pred ids, for GTs covered by >= 2 partial predictions."""
    out: dict[int, set[int]] = {}
    for i, g in enumerate(t.gt_ids):
        row = t.iou[i]
        idx = np.flatnonzero((row >= iou_threshold) & (row < fragment_iou))
        if len(idx) >= 2 and float(row[idx].sum()) >= sum_iou:
            out[g] = {t.pred_ids[j] for j in idx}
    return out


def detect_merge(
    t: MatchTable,
    gt: PageLayout | None = None,
    pred: PageLayout | None = None,
    iou_threshold: float = ASSOC_IOU,
) -> dict[int, set[int]]:
    """Pred id -> GT ids, for predictions touching >= 2 GT boxes."""
    out: dict[int, set[int]] = {}
    for j, p in enumerate(t.pred_ids):
        idx = np.flatnonzero(t.iou[:, j] >= iou_threshold)
        if len(idx) >= 2:
            out[p] = {t.gt_ids[i] for i in idx}
    return out


def detect_overlap(pred: PageLayout, iou_threshold: float = OVERLAP_IOU) -> set[frozenset[int]]:
    """Unordered pairs of distinct predictions with IoU >= threshold. GT is not consulted."""
    elems = sorted(pred.elements, key=lambda e: e.element_id)
    m = iou_matrix([e.bbox for e in elems], [e.bbox for e in elems])
    ii, jj = np.nonzero(np.triu(m >= iou_threshold, k=1))
    return {frozenset((elems[i].element_id, elems[j].element_id)) for i, j in zip(ii, jj)}


def detect_duplicate(t: MatchTable, iou_threshold: float = DUPLICATE_IOU) -> dict[int, set[int]]:
    out: dict[int, set[int]] = {}
    for i, g in enumerate(t.gt_ids):
        idx = np.flatnonzero(t.iou[i] >= iou_threshold)
        if len(idx) >= 2:
            out[g] = {t.pred_ids[j] for j in idx}
    return out


def detect_misclassification(
    t: MatchTable, gt: PageLayout, pred: PageLayout, iou_threshold: float = MISCLASSIFICATION_IOU
) -> set[tuple[int, int]]:
    gt_cat = {e.element_id: e.category_id for e in gt.elements}
    pred_cat = {e.element_id: e.category_id for e in pred.elements}
    out: set[tuple[int, int]] = set()
    ii, jj = np.nonzero(t.iou >= iou_threshold) if t.iou.size else ((), ())
    for i, j in zip(ii, jj):
        g, p = t.gt_ids[i], t.pred_ids[j]
        if gt_cat[g] != pred_cat[p]:
            out.add((p, g))
    return out


@dataclass(frozen=True)
class Findings:
    """Raw per-rule detector output for one document."""

    missing: set[int]
    hallucination: set[int]
    size_error: set[tuple[int, int]]
    split: dict[int, set[int]]
    merge: dict[int, set[int]]
    overlap: set[frozenset[int]]
    duplicate: dict[int, set[int]]
    misclassification: set[tuple[int, int]]

    def fired(self) -> set[ErrorType]:
        pairs = [
            (ErrorType.MISSING, self.missing),
            (ErrorType.HALLUCINATION, self.hallucination),
            (ErrorType.SIZE_ERROR, self.size_error),
            (ErrorType.SPLIT, self.split),
            (ErrorType.MERGE, self.merge),
            (ErrorType.OVERLAP, self.overlap),
            (ErrorType.DUPLICATE, self.duplicate),
            (ErrorType.MISCLASSIFICATION, self.misclassification),
        ]
        return {t for t, found in pairs if found}

    def pred_labels(self) -> dict[int, set[ErrorType]]:
        labels: dict[int, set[ErrorType]] = {}

        def add(pid: int, t: ErrorType) -> None:
            labels.setdefault(pid, set()).add(t)

        for p in self.hallucination:
            add(p, ErrorType.HALLUCINATION)
        for p, _ in self.size_error:
            add(p, ErrorType.SIZE_ERROR)
        for frags in self.split.values():
            for p in frags:
                add(p, ErrorType.SPLIT)
        for p in self.merge:
            add(p, ErrorType.MERGE)
        for pair in self.overlap:
            for p in pair:
                add(p, ErrorType.OVERLAP)
        for dups in self.duplicate.values():
            for p in dups:
                add(p, ErrorType.DUPLICATE)
        for p, _ in self.misclassification:
            add(p, ErrorType.MISCLASSIFICATION)
        return labels


def run_rules(
    gt: PageLayout,
    pred: PageLayout,
    *,
    assoc_iou: float = ASSOC_IOU,
    size_band: tuple[float, float] = SIZE_BAND,
    center_tolerance: float = CENTER_TOLERANCE,
    split_fragment_iou: float = SPLIT_FRAGMENT_IOU,
    split_sum_iou: float = SPLIT_SUM_IOU,
    overlap_iou: float = OVERLAP_IOU,
    duplicate_iou: float = DUPLICATE_IOU,
    misclassification_iou: float = MISCLASSIFICATION_IOU,
) -> Findings:
    t = build_match_table(gt, pred, assoc_iou)
    return Findings(
        missing=detect_missing(t, assoc_iou),
        hallucination=detect_hallucination(t, assoc_iou),
        size_error=detect_size_error(t, gt, pred, assoc_iou, size_band, center_tolerance),
        split=detect_split(t, gt, pred, assoc_iou, split_fragment_iou, split_sum_iou),
        merge=detect_merge(t, gt, pred, assoc_iou),
        overlap=detect_overlap(pred, overlap_iou),
        duplicate=detect_duplicate(t, duplicate_iou),
        misclassification=detect_misclassification(t, gt, pred, misclassification_iou),
    )


def classify_document(gt: PageLayout, pred: PageLayout, **thresholds) -> DocumentErrorAnnotation:
    """Full document diagnosis: binary flag, 8-dim type vector, per-element labels.

    Element labels cover every element on both sides (GT first, then PRED, by
    ascending id); an empty label set means the element is correct.
    """
    f = run_rules(gt, pred, **thresholds)
    pred_labels = f.pred_labels()
    labels = [
        ElementErrorLabel(
            Side.GT, g, frozenset({ErrorType.MISSING}) if g in f.missing else frozenset()
        )
        for g in sorted(gt.ids)
    ]
    labels += [
        ElementErrorLabel(Side.PRED, p, frozenset(pred_labels.get(p, ())))
        for p in sorted(pred.ids)
    ]
    return DocumentErrorAnnotation.from_types(f.fired(), labels)


class LayoutErrorDetector(BaseEstimator):
    """Estimator wrapper around :func:`classify_document`.

    The rules carry no learned state, so ``fit`` only validates its input.
    ``X`` is a sequence of ``(gt, pred)`` :class:`PageLayout` pairs.

    Parameters
    ----------
    assoc_iou : float
        IoU at which a GT and a prediction are associated (Missing,
        Hallucination, Merge, Split lower bound, Size Error matching).
    size_band : tuple of float
        Closed area-ratio interval considered correctly sized.
    center_tolerance : float
        Max center distance, as a fraction of the GT diagonal, for a Size Error.
    split_fragment_iou, split_sum_iou : float
        Per-fragment upper bound and summed lower bound for Split.
    overlap_iou, duplicate_iou, misclassification_iou : float
        Per-rule IoU thresholds.
    """

    def __init__(
        self,
        assoc_iou: float = ASSOC_IOU,
        size_band: tuple[float, float] = SIZE_BAND,
        center_tolerance: float = CENTER_TOLERANCE,
        split_fragment_iou: float = SPLIT_FRAGMENT_IOU,
        split_sum_iou: float = SPLIT_SUM_IOU,
        overlap_iou: float = OVERLAP_IOU,
        duplicate_iou: float = DUPLICATE_IOU,
        misclassification_iou: float = MISCLASSIFICATION_IOU,
    ):
        self.assoc_iou = assoc_iou
        self.size_band = size_band
        self.center_tolerance = center_tolerance
        self.split_fragment_iou = split_fragment_iou
        self.split_sum_iou = split_sum_iou
        self.overlap_iou = overlap_iou
        self.duplicate_iou = duplicate_iou
        self.misclassification_iou = misclassification_iou

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.requires_fit = False
        return tags

    def fit(self, X, y=None):
        check_layout_pairs(X)
        self.n_documents_seen_ = len(X)
        return self

    def annotate(self, X: Sequence[tuple[PageLayout, PageLayout]]) -> list[DocumentErrorAnnotation]:
        pairs = check_layout_pairs(X)
        params = self.get_params()
        params["size_band"] = tuple(params["size_band"])
        return [classify_document(gt, pred, **params) for gt, pred in pairs]

    def predict(self, X) -> np.ndarray:
        """Document-level error flag, shape ``(n_documents,)``."""
        return np.array([a.has_error for a in self.annotate(X)], dtype=bool)

    def transform(self, X) -> np.ndarray:
        """Error-type indicator matrix, shape ``(n_documents, 8)``."""
        anns = self.annotate(X)
        if not anns:
            return np.zeros((0, N_ERROR_TYPES), dtype=np.int8)
        return np.array([a.type_vector for a in anns], dtype=np.int8)

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(X)
