"""Input checks shared by the estimators and the CLI."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .layout import N_ERROR_TYPES, PageLayout


class LayoutMismatchError(ValueError):
    """GT and prediction layouts describe pages of different sizes."""


def check_layout(layout: object, name: str = "layout") -> PageLayout:
    if not isinstance(layout, PageLayout):
        raise TypeError(f"{name} must be a PageLayout, got {type(layout).__name__}")
    return layout


def check_layout_pair(gt: PageLayout, pred: PageLayout) -> tuple[PageLayout, PageLayout]:
    check_layout(gt, "gt")
    check_layout(pred, "pred")
    if not gt.same_page(pred):
        raise LayoutMismatchError(
            f"page {gt.page_id}: gt is {gt.page_width}x{gt.page_height}, "
            f"pred is {pred.page_width}x{pred.page_height}"
        )
    return gt, pred


def check_layout_pairs(X: Iterable) -> list[tuple[PageLayout, PageLayout]]:
    """Validate a sequence of ``(gt, pred)`` pairs and return it as a list."""
    pairs = list(X)
    out = []
    for k, item in enumerate(pairs):
        try:
            gt, pred = item
        except (TypeError, ValueError):
            raise TypeError(f"X[{k}] is not a (gt, pred) pair") from None
        out.append(check_layout_pair(gt, pred))
    return out


def check_corpus(X: Iterable) -> list[PageLayout]:
    pages = list(X)
    if not pages:
        raise ValueError("corpus is empty")
    for k, p in enumerate(pages):
        check_layout(p, f"X[{k}]")
    ids = [p.page_id for p in pages]
    if len(set(ids)) != len(ids):
        raise ValueError("corpus page_id values must be unique")
    return pages


def check_type_vector(v: Sequence) -> tuple[int, ...]:
    """Coerce an 8-entry 0/1 vector; raises ``ValueError`` when malformed."""
    arr = np.asarray(v)
    if arr.shape != (N_ERROR_TYPES,):
        raise ValueError(f"expected {N_ERROR_TYPES} entries, got shape {arr.shape}")
    out = []
    for x in arr.tolist():
        if isinstance(x, bool) or x in (0, 1):
            out.append(int(x))
        else:
            raise ValueError(f"type vector entries must be 0/1, got {x!r}")
    return tuple(out)


def check_probability(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_interval(lo, hi, name: str, *, positive: bool = False) -> tuple:
    if lo > hi:
        raise ValueError(f"{name} lower bound {lo} exceeds upper bound {hi}")
    if positive and lo <= 0:
        raise ValueError(f"{name} must be positive, got {(lo, hi)}")
    return lo, hi
