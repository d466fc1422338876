import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from conftest import CATS, page
from ledkit import dataset_io as io
from ledkit.detector import classify_document
from ledkit.geometry import BBox
from ledkit.injector import InjectionConfig, inject_document, page_rng
from ledkit.layout import ERROR_TYPES, LayoutElement, LedRecord, PageLayout
from ledkit.synthetic import random_clean_page


def minimal(**over):
    d = {
        "images": [{"id": 1, "width": 100, "height": 100}],
        "annotations": [{"id": 1, "image_id": 1, "category_id": 1, "bbox": [0, 0, 10, 10]}],
        "categories": [{"id": 1, "name": "Text"}],
    }
    d.update(over)
    return d


def make_record(seed, cats=CATS):
    gt = random_clean_page(np.random.default_rng(seed), page_id=seed, n_elements=(1, 20), categories=cats)
    gt = gt.replace(image_ref=f"img/{seed}.png")
    return inject_document(gt, page_rng(0, seed), InjectionConfig(), cats)


@st.composite
def layouts(draw):
    w = draw(st.floats(10, 5000))
    h = draw(st.floats(10, 5000))
    n = draw(st.integers(0, 8))
    elements = []
    for i in range(n):
        x1 = draw(st.floats(0, w * 0.9))
        y1 = draw(st.floats(0, h * 0.9))
        x2 = draw(st.floats(x1, w).filter(lambda v, x1=x1: v > x1))
        y2 = draw(st.floats(y1, h).filter(lambda v, y1=y1: v > y1))
        elements.append(LayoutElement(draw(st.integers(0, 10**6)) * 10 + i, BBox(x1, y1, x2, y2), draw(st.sampled_from(CATS.ids))))
    return PageLayout(w, h, elements, page_id=draw(st.integers(0, 2**40)), image_ref=draw(st.none() | st.just("p.png")))


class TestLoadCoco:
    def test_minimal(self):
        cats, pages = io.parse_coco(minimal())
        assert cats.ids == (1,)
        (p,) = pages
        assert len(p) == 1 and p.elements[0].bbox == BBox(0, 0, 10, 10)

    def test_unknown_image(self):
        d = minimal()
        d["annotations"][0]["image_id"] = 2
        with pytest.raises(io.LoadError, match="unknown image"):
            io.parse_coco(d)

    def test_unknown_category(self):
        d = minimal()
        d["annotations"][0]["category_id"] = 5
        with pytest.raises(io.LoadError, match="unknown category"):
            io.parse_coco(d)

    @pytest.mark.parametrize("bbox", [[0, 0, 0, 10], [0, 0, 10, -1]])
    def test_degenerate(self, bbox):
        d = minimal()
        d["annotations"][0]["bbox"] = bbox
        with pytest.raises(io.LoadError, match="annotation id 1"):
            io.parse_coco(d)

    def test_clamp_within_a_pixel(self):
        d = minimal()
        d["annotations"][0]["bbox"] = [-0.5, 95, 10, 5.8]
        _, (p,) = io.parse_coco(d)
        assert p.elements[0].bbox == BBox(0, 95, 9.5, 100)

    def test_overshoot_fails(self):
        d = minimal()
        d["annotations"][0]["bbox"] = [95, 0, 10, 10]
        with pytest.raises(io.LoadError, match="outside the page"):
            io.parse_coco(d)

    def test_non_integer_id(self):
        d = minimal()
        d["annotations"][0]["id"] = "a"
        with pytest.raises(io.LoadError):
            io.parse_coco(d)

    def test_bad_json(self, tmp_path):
        f = tmp_path / "x.json"
        f.write_text("{")
        with pytest.raises(io.LoadError, match="invalid JSON"):
            io.load_coco(f)

    def test_missing_file(self, tmp_path):
        with pytest.raises(io.LoadError):
            io.load_coco(tmp_path / "nope.json")

    @settings(max_examples=60)
    @given(st.lists(layouts(), min_size=1, max_size=3, unique_by=lambda p: p.page_id))
    def test_round_trip(self, pages):
        cats, back = io.parse_coco(json.loads(io.dumps(io.coco_dict(CATS, pages))))
        assert cats == CATS and back == pages


class TestErrorsFile:
    def test_clean(self):
        gt = page((0, 0, 10, 10))
        d = io.errors_dict(classify_document(gt, gt), 1)
        assert d["has_error"] is False
        assert d["error_types"] == {t.value: False for t in ERROR_TYPES}

    def test_missing_only(self):
        d = io.errors_dict(classify_document(page((0, 0, 10, 10)), page()), 1)
        assert [k for k, v in d["error_types"].items() if v] == ["Missing"]

    @settings(max_examples=40)
    @given(st.integers(0, 10**6))
    def test_round_trip(self, seed):
        r = make_record(seed)
        meta = {"master_seed": 7}
        ann, inj, extra = io.parse_errors(json.loads(io.dumps(io.errors_dict(r.annotation, r.page_id, r.provenance, meta))))
        assert ann == r.annotation and inj == r.provenance and extra == meta

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d.pop("schema_version"),
            lambda d: d["error_types"].pop("Missing"),
            lambda d: d.update(has_error="yes"),
            lambda d: d["elements"].append({"side": "left", "element_id": 1, "labels": []}),
        ],
    )
    def test_malformed(self, mutate):
        d = io.errors_dict(classify_document(page((0, 0, 10, 10)), page()), 1)
        mutate(d)
        with pytest.raises(io.LoadError):
            io.parse_errors(d)


class TestRecords:
    def test_save_load(self, tmp_path):
        r = make_record(11)
        paths = io.save_led_record(r, tmp_path)
        assert sorted(p.name for p in paths) == ["errors.led", "gt.coco", "overlay.png", "pred.coco"]
        assert io.load_led_record(tmp_path / "11") == r

    def test_bytes_stable(self, tmp_path):
        r = make_record(12)
        io.save_led_record(r, tmp_path / "a")
        io.save_led_record(r, tmp_path / "b")
        for name in ("gt.coco", "pred.coco", "errors.led", "overlay.png"):
            assert (tmp_path / "a/12" / name).read_bytes() == (tmp_path / "b/12" / name).read_bytes()

    def test_manifest(self, tmp_path):
        rs = [make_record(s) for s in (3, 1, 2)]
        for r in rs:
            io.save_led_record(r, tmp_path, render=False)
        io.write_manifest(tmp_path, rs, {"note": "x"})
        m, back = io.load_records(tmp_path)
        assert [e.index for e in m.entries] == [0, 1, 2]
        assert [e.page_id for e in m.entries] == [3, 1, 2]
        assert back == rs and m.meta == {"note": "x"}

    def test_manifest_unresolved(self, tmp_path):
        rs = [make_record(1)]
        io.write_manifest(tmp_path, rs)
        assert [e.page_id for e in io.load_manifest(tmp_path).unresolved(tmp_path)] == [1]
        with pytest.raises(io.LoadError, match="missing record"):
            io.load_records(tmp_path)


class TestBundles:
    @pytest.fixture
    def records(self, tmp_path):
        rs = [make_record(s) for s in range(1, 5)]
        root = tmp_path / "images"
        for r in rs:
            f = root / r.image_ref
            f.parent.mkdir(parents=True, exist_ok=True)
            Image.new("RGB", (20, 20), (200, 200, 200)).save(f)
        return rs, root

    def test_p1(self, records, tmp_path):
        rs, root = records
        b = io.export_bench_bundle(rs, "T1", "P1", tmp_path / "b", image_root=root)
        assert all("overlay" not in d and "image" in d and "prediction" in d for d in b.documents)
        assert not (tmp_path / "b/overlays").exists()

    def test_p2(self, records, tmp_path):
        rs, root = records
        b = io.export_bench_bundle(rs, "T2", "P2", tmp_path / "b", image_root=root)
        for d in b.documents:
            assert set(d) == {"doc_id", "task", "prompt", "overlay"}
            assert (tmp_path / "b" / d["overlay"]).is_file()

    def test_p3(self, records, tmp_path):
        rs, root = records
        b = io.export_bench_bundle(rs, "T3", "P3", tmp_path / "b", image_root=root)
        assert all({"overlay", "prediction", "ground_truth"} <= set(d) for d in b.documents)

    def test_answer_key_separate(self, records, tmp_path):
        rs, root = records
        b = io.export_bench_bundle(rs, "T2", "P3", tmp_path / "b", image_root=root)
        keys = io.read_jsonl(b.key_path)
        payload = io.read_jsonl(b.payload_path)
        assert len(keys) == len(payload) == len(rs)
        assert all("has_error" not in d and "error_types" not in d for d in payload)
        assert [k["doc_id"] for k in keys] == [r.page_id for r in rs]

    def test_missing_image(self, records, tmp_path):
        rs, root = records
        (root / rs[2].image_ref).unlink()
        with pytest.raises(io.BundleError, match=str(rs[2].page_id)):
            io.export_bench_bundle(rs, "T1", "P1", tmp_path / "b", image_root=root)

    def test_p1_needs_image_ref(self, tmp_path):
        r = make_record(1)
        r = LedRecord(r.gt.replace(image_ref=None), r.pred, r.categories, r.annotation, r.provenance, None)
        with pytest.raises(io.BundleError):
            io.export_bench_bundle([r], "T1", "P1", tmp_path)

    @pytest.mark.parametrize("task, prompt", [("T4", "P1"), ("T1", "P9")])
    def test_bad_ids(self, task, prompt, tmp_path):
        with pytest.raises(ValueError):
            io.export_bench_bundle([make_record(1)], task, prompt, tmp_path)
