import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import CATS, page
from ledkit.detector import classify_document
from ledkit.geometry import BBox
from ledkit.layout import (
    ERROR_TYPES,
    LABEL_PRECEDENCE,
    CategorySet,
    DocumentErrorAnnotation,
    ElementErrorLabel,
    ErrorType,
    LayoutElement,
    LedRecord,
    PageLayout,
    Side,
    validate_record,
)


def record(gt, pred, ann=None):
    return LedRecord(gt, pred, CATS, ann or classify_document(gt, pred))


def test_canonical_order():
    assert [t.value for t in ERROR_TYPES] == [
        "Missing",
        "Hallucination",
        "SizeError",
        "Split",
        "Merge",
        "Overlap",
        "Duplicate",
        "Misclassification",
    ]
    assert [t.index for t in ERROR_TYPES] == list(range(8))


@given(st.sampled_from(ERROR_TYPES))
def test_error_type_round_trips_through_json(t):
    assert ErrorType.parse(json.loads(json.dumps(t.value))) is t


@pytest.mark.parametrize("alias", ["size_error", "Size Error", "sizeerror"])
def test_parse_is_lenient(alias):
    assert ErrorType.parse(alias) is ErrorType.SIZE_ERROR


def test_parse_unknown():
    with pytest.raises(ValueError):
        ErrorType.parse("Wobble")


class TestValidateRecord:
    def test_well_formed(self):
        gt = page((0, 0, 10, 10), (20, 0, 30, 10))
        assert validate_record(record(gt, gt)) == []

    def test_duplicate_element_id(self):
        gt = page((0, 0, 10, 10))
        el = gt.elements[0]
        pred = gt.replace(elements=(el, LayoutElement(1, BBox(50, 50, 60, 60), 1)))
        ann = DocumentErrorAnnotation.from_types([])
        problems = validate_record(record(gt, pred, ann))
        assert len(problems) == 1
        assert "element 1" in problems[0] and "duplicate" in problems[0]

    def test_has_error_inconsistent(self):
        gt = page((0, 0, 10, 10))
        ann = DocumentErrorAnnotation(False, (1, 0, 0, 0, 0, 0, 0, 0))
        problems = validate_record(record(gt, gt, ann))
        assert len(problems) == 1
        assert "has_error" in problems[0]

    def test_idempotent_and_pure(self):
        gt = page((0, 0, 10, 10))
        r = record(gt, gt, DocumentErrorAnnotation(False, (1,) * 8))
        before = repr(r)
        assert validate_record(r) == validate_record(r)
        assert repr(r) == before

    def test_side_rules(self):
        gt = page((0, 0, 10, 10))
        labels = [ElementErrorLabel(Side.GT, 1, {ErrorType.MERGE})]
        ann = DocumentErrorAnnotation.from_types([ErrorType.MERGE], labels)
        assert any("not allowed" in p for p in validate_record(record(gt, gt, ann)))

    def test_unknown_element_and_category(self):
        gt = page((0, 0, 10, 10), cats=[99])
        labels = [ElementErrorLabel(Side.PRED, 7, {ErrorType.HALLUCINATION})]
        ann = DocumentErrorAnnotation.from_types([ErrorType.HALLUCINATION], labels)
        problems = validate_record(record(gt, gt, ann))
        assert any("unknown element" in p for p in problems)
        assert any("unknown category" in p for p in problems)

    def test_out_of_page(self):
        gt = page((0, 0, 10, 10), width=5)
        assert any("outside page" in p for p in validate_record(record(gt, gt)))


class TestFlattening:
    def test_precedence_order(self):
        assert [t.value for t in LABEL_PRECEDENCE] == [
            "Duplicate",
            "Split",
            "Merge",
            "Misclassification",
            "SizeError",
            "Overlap",
            "Hallucination",
        ]

    @given(st.sets(st.sampled_from([t for t in ERROR_TYPES if t is not ErrorType.MISSING]), min_size=1))
    def test_primary_is_highest_ranked(self, labels):
        lab = ElementErrorLabel(Side.PRED, 1, labels)
        assert lab.primary() == min(labels, key=LABEL_PRECEDENCE.index)

    def test_gt_side(self):
        assert ElementErrorLabel(Side.GT, 1, {ErrorType.MISSING}).primary() is ErrorType.MISSING
        assert ElementErrorLabel(Side.GT, 1).primary() is None


class TestCategorySet:
    def test_lookup(self):
        c = CategorySet.from_names(["a", "b"])
        assert c.ids == (1, 2) and c.name(2) == "b" and 1 in c and 3 not in c

    @pytest.mark.parametrize("items", [[], [(1, "a"), (1, "b")], [(1, "a"), (2, "a")]])
    def test_invalid(self, items):
        with pytest.raises(ValueError):
            CategorySet(items)


def test_page_layout_rejects_bad_dims():
    with pytest.raises(ValueError):
        PageLayout(0, 10)
