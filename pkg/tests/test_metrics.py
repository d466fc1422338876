import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracle
from ledkit import metrics as m
from ledkit.layout import ERROR_TYPES, ErrorType, Side

MISSING = (1, 0, 0, 0, 0, 0, 0, 0)
HALLU = (0, 1, 0, 0, 0, 0, 0, 0)
ZERO = (0,) * 8


class TestT1:
    def test_all_correct(self):
        assert m.score_t1({1: True, 2: False}, {1: True, 2: False}) == 1.0

    def test_three_of_four(self):
        assert m.score_t1({1: True, 2: False, 3: True, 4: True}, {1: True, 2: False, 3: True, 4: False}) == 0.75

    def test_unanswered(self):
        assert m.score_t1({}, {1: True, 2: False}) == 0.0

    def test_non_bool_is_wrong(self):
        assert m.score_t1({1: 1, 2: "no"}, {1: True, 2: False}) == 0.0

    def test_empty_keys(self):
        with pytest.raises(ValueError):
            m.score_t1({}, {})

    @given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=30))
    def test_is_one_minus_hamming(self, pairs):
        keys = {i: k for i, (k, _) in enumerate(pairs)}
        preds = {i: p for i, (_, p) in enumerate(pairs)}
        hamming = sum(k != p for k, p in pairs) / len(pairs)
        assert m.score_t1(preds, keys) == pytest.approx(1 - hamming, abs=1e-15)


class TestT2:
    def test_perfect(self):
        s = m.score_t2({1: MISSING, 2: HALLU}, {1: MISSING, 2: HALLU})
        assert s.micro_f1 == s.macro_f1 == 1.0

    def test_single_missed(self):
        s = m.score_t2({1: ZERO}, {1: MISSING})
        assert s.per_type[ErrorType.MISSING].f1 == 0.0
        assert s.macro_f1 == 0.0

    def test_micro_half(self):
        s = m.score_t2({1: MISSING, 2: MISSING}, {1: MISSING, 2: HALLU})
        assert s.micro_f1 == 0.5

    def test_mapping_answer_and_rejection(self):
        s = m.score_t2({1: {"Missing": True}, 2: (1, 2, 0), 3: "x"}, {1: MISSING, 2: MISSING, 3: MISSING})
        assert s.per_type[ErrorType.MISSING].tp == 1
        assert set(s.rejected) == {2, 3} and s.answered == 1

    def test_order_invariance(self):
        keys = {i: tuple(random.Random(i).randint(0, 1) for _ in range(8)) for i in range(20)}
        preds = {i: tuple(random.Random(100 + i).randint(0, 1) for _ in range(8)) for i in range(20)}
        rev = dict(reversed(list(keys.items())))
        assert m.score_t2(preds, keys).micro_f1 == m.score_t2(preds, rev).micro_f1


class TestDetectionRate:
    def test_all_detected(self):
        assert m.detection_rate({1: MISSING, 2: MISSING}, {1: MISSING, 2: MISSING}, "Missing") == 1.0

    def test_equals_recall(self):
        keys = {1: MISSING, 2: MISSING, 3: HALLU}
        preds = {1: MISSING, 2: ZERO, 3: MISSING}
        rate = m.detection_rate(preds, keys, ErrorType.MISSING)
        assert rate == m.score_t2(preds, keys).per_type[ErrorType.MISSING].recall == 0.5

    def test_no_carriers(self):
        assert m.detection_rate({1: MISSING}, {1: MISSING}, "Split") is None


class TestT3:
    KEY = {1: {(Side.GT, 1): ErrorType.MISSING, (Side.PRED, 1): ErrorType.MISCLASSIFICATION, (Side.PRED, 2): None}}

    def test_perfect(self):
        assert m.score_t3(self.KEY, self.KEY).macro_f1 == 1.0

    def test_all_none(self):
        assert m.score_t3({1: {}}, self.KEY).macro_f1 == 0.0

    def test_one_of_two(self):
        # Missing found, Misclassification answered None:
        # Missing F1 = 1, Misclassification F1 = 0 -> macro 0.5
        pred = {1: {(Side.GT, 1): ErrorType.MISSING}}
        s = m.score_t3(pred, self.KEY)
        assert s.macro_f1 == 0.5
        assert s.confusion[ErrorType.MISCLASSIFICATION.index, 8] == 1

    def test_unknown_element_rejects(self):
        pred = {1: {(Side.PRED, 99): ErrorType.SPLIT}}
        s = m.score_t3(pred, self.KEY)
        assert s.rejected == (1,) and s.macro_f1 == 0.0

    def test_confusion_rows_match_truth(self):
        pred = {1: [{"side": "pred", "element_id": 1, "label": "Split"}]}
        s = m.score_t3(pred, self.KEY)
        truth = [ErrorType.MISSING, ErrorType.MISCLASSIFICATION, None]
        for c in truth:
            row = m.T3_CLASSES.index(c)
            assert s.confusion[row].sum() == truth.count(c)


class TestRobustness:
    def test_constant(self):
        assert m.robustness([0.5, 0.5, 0.5]) == (0.0, 0.0)

    def test_two(self):
        cv, nr = m.robustness([0.4, 0.6])
        assert cv == pytest.approx(0.2, abs=1e-15) and nr == pytest.approx(0.4, abs=1e-15)

    def test_single(self):
        with pytest.raises(ValueError):
            m.robustness([1.0])

    def test_zero_mean(self):
        assert m.robustness([0.0, 0.0]) == (None, None)


def random_instance(r):
    n_docs = r.randint(1, 10)
    keys = {d: [r.randint(0, 1) for _ in range(8)] for d in range(n_docs)}
    preds = {d: [r.randint(0, 1) for _ in range(8)] for d in range(n_docs) if r.random() < 0.9}
    labels = [None, *oracle.TYPES]
    e_keys, e_preds = {}, {}
    for d in range(n_docs):
        els = [(r.choice(["gt", "pred"]), k) for k in range(r.randint(1, 20))]
        e_keys[d] = {el: r.choice(labels) for el in els}
        e_preds[d] = {el: r.choice(labels) for el in els if r.random() < 0.8}
    return keys, preds, e_keys, e_preds


@pytest.mark.parametrize("seed", range(50))
def test_matches_reference(seed):
    r = random.Random(seed)
    keys, preds, e_keys, e_preds = random_instance(r)
    micro, macro, counts, recall = oracle.t2(preds, keys)
    s = m.score_t2(preds, keys)
    assert s.micro_f1 == pytest.approx(micro, abs=1e-12)
    assert s.macro_f1 == pytest.approx(macro, abs=1e-12)
    for t in ERROR_TYPES:
        assert (s.per_type[t].tp, s.per_type[t].fp, s.per_type[t].fn) == counts[t.value]
        got = m.detection_rate(preds, keys, t)
        assert (got is None and recall[t.value] is None) or got == pytest.approx(recall[t.value], abs=1e-12)

    truths = {d: bool(r.randint(0, 1)) for d in keys}
    answers = {d: bool(r.randint(0, 1)) for d in keys if r.random() < 0.9}
    assert m.score_t1(answers, truths) == pytest.approx(oracle.accuracy(answers, truths), abs=1e-12)

    to_lib = lambda doc: {(Side(s), i): (None if v is None else ErrorType(v)) for (s, i), v in doc.items()}
    macro3, _ = oracle.t3(e_preds, e_keys)
    s3 = m.score_t3({d: to_lib(v) for d, v in e_preds.items()}, {d: to_lib(v) for d, v in e_keys.items()})
    assert s3.macro_f1 == pytest.approx(macro3, abs=1e-12)

    scores = [r.random() for _ in range(r.randint(2, 5))]
    cv, nr = m.robustness(scores)
    ocv, onr = oracle.cv_nr(scores)
    assert cv == pytest.approx(ocv, abs=1e-12) and nr == pytest.approx(onr, abs=1e-12)


def key_row(doc, vec, elements=()):
    return {
        "doc_id": doc,
        "has_error": any(vec),
        "error_types": {t.value: bool(v) for t, v in zip(ERROR_TYPES, vec)},
        "elements": [{"side": s, "element_id": i, "label": lab} for s, i, lab in elements],
    }


class TestEvaluate:
    KEYS = m.parse_keys(
        [
            key_row(1, MISSING, [("gt", 1, "Missing")]),
            key_row(2, ZERO, [("gt", 1, None)]),
        ]
    )

    def rows(self, prompt, model="m"):
        return [
            {"doc_id": 1, "task": "T1", "prompt": prompt, "model": model, "answer": True},
            {"doc_id": 2, "task": "T1", "prompt": prompt, "model": model, "answer": False},
            {"doc_id": 1, "task": "T2", "prompt": prompt, "model": model, "answer": list(MISSING)},
            {"doc_id": 2, "task": "T2", "prompt": prompt, "model": model, "answer": list(ZERO)},
            {"doc_id": 1, "task": "T3", "prompt": prompt, "model": model,
             "answer": [{"side": "gt", "element_id": 1, "label": "Missing"}]},
            {"doc_id": 2, "task": "T3", "prompt": prompt, "model": model, "answer": []},
        ]

    def test_perfect(self):
        (rep,) = m.evaluate(self.rows("P1"), self.KEYS)
        assert rep.t1_accuracy == rep.t2_micro_f1 == rep.t2_macro_f1 == rep.t3_macro_f1 == 1.0
        assert rep.coverage == {"T1": 1.0, "T2": 1.0, "T3": 1.0}

    def test_coverage(self):
        rows = [r for r in self.rows("P1") if r["doc_id"] == 1]
        (rep,) = m.evaluate(rows, self.KEYS)
        assert rep.coverage["T1"] == 0.5

    def test_multi_prompt_table(self):
        rows = self.rows("P1") + self.rows("P2") + [r | {"answer": None} for r in self.rows("P3")]
        table = m.summary_table(m.evaluate(rows, self.KEYS))
        cells = table["m"]["T1"]
        assert cells["P3"] == 0.0 and cells["CV"] is not None and cells["NR"] is not None
        assert set(table["m"]) == {"T1", "T2", "T3"}

    def test_duplicate_key(self):
        with pytest.raises(ValueError):
            m.parse_keys([key_row(1, ZERO), key_row(1, ZERO)])
