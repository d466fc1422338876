from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from ledkit.geometry import BBox
from ledkit.layout import CategorySet, LayoutElement, PageLayout

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

CATS = CategorySet.from_names(["Text", "Title", "Table", "Picture"])


def page(*boxes, cats=None, width=1000.0, height=1000.0, page_id=1, start=1):
    """Layout from corner tuples; ids run from ``start`` in argument order."""
    cats = cats or [1] * len(boxes)
    elements = [
        LayoutElement(start + i, BBox(*b), c) for i, (b, c) in enumerate(zip(boxes, cats))
    ]
    return PageLayout(width, height, elements, page_id=page_id)


@pytest.fixture
def cats():
    return CATS


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, ok, detail in sorted(results):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num}. {name}: {detail}")
