"""Random clean document-like pages for testing and benchmarking.

Pages are laid out as one or two columns of stacked blocks separated by
gutters, so no two elements overlap. Consecutive blocks often share a class,
which gives the merge injector same-class neighbours to work with.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import BBox
from .layout import DOCLAYNET_CATEGORIES, CategorySet, LayoutElement, PageLayout

PAGE_WIDTH = 1000.0
PAGE_HEIGHT = 1400.0
MARGIN = 50.0
GUTTER = 30.0


def random_clean_page(
    rng: np.random.Generator,
    page_id: int = 0,
    n_elements: tuple[int, int] = (5, 40),
    categories: CategorySet = DOCLAYNET_CATEGORIES,
    width: float = PAGE_WIDTH,
    height: float = PAGE_HEIGHT,
    repeat_class: float = 0.4,
) -> PageLayout:
    n = int(rng.integers(n_elements[0], n_elements[1] + 1))
    if n == 0:
        return PageLayout(width, height, (), page_id=page_id)
    n_cols = 1 if rng.random() < 0.4 else 2
    col_w = (width - 2 * MARGIN - (n_cols - 1) * GUTTER) / n_cols
    n_rows = math.ceil(n / n_cols)
    slot_h = (height - 2 * MARGIN) / n_rows
    cat_ids = categories.ids

    elements = []
    prev_cat = int(cat_ids[int(rng.integers(len(cat_ids)))])
    for k in range(n):
        row, col = divmod(k, n_cols)
        bw = col_w * rng.uniform(0.35, 1.0)
        bh = slot_h * rng.uniform(0.5, 0.85)
        x0 = MARGIN + col * (col_w + GUTTER) + rng.uniform(0.0, col_w - bw)
        y0 = MARGIN + row * slot_h + rng.uniform(0.0, slot_h - bh)
        if rng.random() >= repeat_class:
            prev_cat = int(cat_ids[int(rng.integers(len(cat_ids)))])
        elements.append(LayoutElement(k + 1, BBox(x0, y0, x0 + bw, y0 + bh), prev_cat))
    return PageLayout(width, height, tuple(elements), page_id=page_id)


def random_corpus(
    n_pages: int,
    seed: int = 0,
    n_elements: tuple[int, int] = (5, 40),
    categories: CategorySet = DOCLAYNET_CATEGORIES,
) -> list[PageLayout]:
    """``n_pages`` pages with ids ``1..n_pages``; page ``k`` uses its own seeded stream."""
    pages = []
    for k in range(1, n_pages + 1):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(k,))))
        pages.append(random_clean_page(rng, page_id=k, n_elements=n_elements, categories=categories))
    return pages
