"""Scoring of externally produced task answers against LED answer keys.

Conventions
-----------
* Unanswered or malformed answers count as wrong (T1), all-zeros (T2) or
  all-None (T3); coverage reports how many were usable.
* Per-type precision/recall/F1 are 0 when their denominator is 0.
* Macro F1 averages over the types that occur in the key or the prediction
  (``tp + fp + fn > 0``); micro F1 pools counts over documents x types. When
  nothing is positive anywhere both are 1.0: the answer agrees with the key.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .layout import ERROR_TYPES, N_ERROR_TYPES, ErrorType, Side
from .validation import check_type_vector

ElementKey = tuple[Side, int]
T3_CLASSES: tuple[ErrorType | None, ...] = (*ERROR_TYPES, None)


@dataclass(frozen=True)
class TypeScore:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        d = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / d if d else 0.0

    @property
    def support(self) -> int:
        return self.tp + self.fn

    @property
    def active(self) -> bool:
        return self.tp + self.fp + self.fn > 0

    def as_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def macro_f1(per_type: Mapping[Any, TypeScore]) -> float:
    active = [s.f1 for s in per_type.values() if s.active]
    return float(np.mean(active)) if active else 1.0


def micro_f1(per_type: Mapping[Any, TypeScore]) -> float:
    tp = sum(s.tp for s in per_type.values())
    fp = sum(s.fp for s in per_type.values())
    fn = sum(s.fn for s in per_type.values())
    d = 2 * tp + fp + fn
    return 2 * tp / d if d else 1.0


# --- T1 ----------------------------------------------------------------------


def score_t1(preds: Mapping[Any, Any], keys: Mapping[Any, bool]) -> float:
    """Accuracy; documents missing from ``preds`` (or answered ``None``) are wrong."""
    if not keys:
        raise ValueError("empty answer key")
    correct = 0
    for doc, truth in keys.items():
        answer = preds.get(doc)
        if isinstance(answer, bool) and answer == bool(truth):
            correct += 1
    return correct / len(keys)


# --- T2 ----------------------------------------------------------------------


@dataclass(frozen=True)
class T2Scores:
    micro_f1: float
    macro_f1: float
    per_type: dict[ErrorType, TypeScore]
    rejected: tuple = ()
    answered: int = 0


def _coerce_vector(v: Any) -> tuple[int, ...]:
    if isinstance(v, Mapping):
        out = [0] * N_ERROR_TYPES
        for k, x in v.items():
            t = ErrorType.parse(k)
            if not isinstance(x, (bool, int)) or x not in (0, 1):
                raise ValueError(f"bad entry {k}={x!r}")
            out[t.index] = int(x)
        return tuple(out)
    return check_type_vector(v)


def score_t2(preds: Mapping[Any, Any], keys: Mapping[Any, Sequence[int]]) -> T2Scores:
    if not keys:
        raise ValueError("empty answer key")
    key_arr = np.array([_coerce_vector(keys[d]) for d in keys], dtype=np.int64).reshape(-1, N_ERROR_TYPES)
    pred_rows, rejected, answered = [], [], 0
    for d in keys:
        if d not in preds or preds[d] is None:
            pred_rows.append((0,) * N_ERROR_TYPES)
            continue
        try:
            pred_rows.append(_coerce_vector(preds[d]))
            answered += 1
        except (ValueError, TypeError):
            rejected.append(d)
            pred_rows.append((0,) * N_ERROR_TYPES)
    pred_arr = np.array(pred_rows, dtype=np.int64).reshape(-1, N_ERROR_TYPES)
    tp = ((key_arr == 1) & (pred_arr == 1)).sum(axis=0)
    fp = ((key_arr == 0) & (pred_arr == 1)).sum(axis=0)
    fn = ((key_arr == 1) & (pred_arr == 0)).sum(axis=0)
    per_type = {t: TypeScore(int(tp[k]), int(fp[k]), int(fn[k])) for k, t in enumerate(ERROR_TYPES)}
    return T2Scores(micro_f1(per_type), macro_f1(per_type), per_type, tuple(rejected), answered)


def detection_rate(preds: Mapping[Any, Any], keys: Mapping[Any, Sequence[int]], error_type) -> float | None:
    """Share of key documents carrying ``error_type`` whose prediction has it too.

    ``None`` when no key document carries the type.
    """
    s = score_t2(preds, keys).per_type[ErrorType.parse(error_type)]
    if s.support == 0:
        return None
    return s.recall


# --- T3 ----------------------------------------------------------------------


@dataclass(frozen=True)
class T3Scores:
    macro_f1: float
    per_type: dict[ErrorType, TypeScore]
    confusion: np.ndarray  # rows: true class, cols: predicted, order T3_CLASSES
    rejected: tuple = ()
    answered: int = 0


def _label(v: Any) -> ErrorType | None:
    if v is None or (isinstance(v, str) and v.strip().lower() in ("none", "")):
        return None
    return ErrorType.parse(v)


def _coerce_elements(v: Any) -> dict[ElementKey, ErrorType | None]:
    if isinstance(v, Mapping):
        return {(Side(k[0]), int(k[1])): _label(x) for k, x in v.items()}
    out = {}
    for item in v:
        out[(Side(item["side"]), int(item["element_id"]))] = _label(item.get("label"))
    return out


def score_t3(
    preds: Mapping[Any, Any], keys: Mapping[Any, Mapping[ElementKey, ErrorType | None]]
) -> T3Scores:
    if not keys:
        raise ValueError("empty answer key")
    conf = np.zeros((len(T3_CLASSES), len(T3_CLASSES)), dtype=np.int64)
    index = {c: k for k, c in enumerate(T3_CLASSES)}
    rejected, answered = [], 0
    for d, key in keys.items():
        key = _coerce_elements(key)
        answer: dict = {}
        if d in preds and preds[d] is not None:
            try:
                answer = _coerce_elements(preds[d])
                if set(answer) - set(key):
                    raise ValueError("unknown element reference")
                answered += 1
            except (ValueError, TypeError, KeyError):
                rejected.append(d)
                answer = {}
        for el, truth in key.items():
            conf[index[truth], index[answer.get(el)]] += 1
    per_type = {}
    for k, t in enumerate(ERROR_TYPES):
        tp = int(conf[k, k])
        per_type[t] = TypeScore(tp, int(conf[:, k].sum()) - tp, int(conf[k, :].sum()) - tp)
    return T3Scores(macro_f1(per_type), per_type, conf, tuple(rejected), answered)


# --- robustness ----------------------------------------------------------------


def robustness(scores: Sequence[float]) -> tuple[float | None, float | None]:
    """Coefficient of variation and normalized range of per-prompt scores.

    ``cv = population std / mean`` and ``nr = (max - min) / mean``; both are
    ``None`` when the mean is 0.
    """
    xs = [float(s) for s in scores]
    if len(xs) < 2:
        raise ValueError("robustness needs scores from at least two prompts")
    if any(x < 0 for x in xs):
        raise ValueError("scores must be non-negative")
    mean = math.fsum(xs) / len(xs)
    if mean == 0:
        return None, None
    var = math.fsum((x - mean) ** 2 for x in xs) / len(xs)
    return math.sqrt(var) / mean, (max(xs) - min(xs)) / mean


# --- reports -------------------------------------------------------------------


@dataclass
class EvalReport:
    """Scores of one model under one prompt configuration."""

    model: str
    prompt: str
    n_documents: int
    t1_accuracy: float | None = None
    t2_micro_f1: float | None = None
    t2_macro_f1: float | None = None
    t2_per_type: dict[str, dict] | None = None
    detection_rates: dict[str, float | None] | None = None
    t3_macro_f1: float | None = None
    t3_per_type: dict[str, dict] | None = None
    t3_confusion: list[list[int]] | None = None
    coverage: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class AnswerKey:
    has_error: bool
    type_vector: tuple[int, ...]
    elements: dict[ElementKey, ErrorType | None]

    @classmethod
    def from_row(cls, row: Mapping) -> "AnswerKey":
        return cls(
            bool(row["has_error"]),
            _coerce_vector(row["error_types"]),
            _coerce_elements(row.get("elements", [])),
        )


def parse_keys(rows: Iterable[Mapping]) -> dict[Any, AnswerKey]:
    keys = {}
    for row in rows:
        if row["doc_id"] in keys:
            raise ValueError(f"duplicate answer-key document {row['doc_id']}")
        keys[row["doc_id"]] = AnswerKey.from_row(row)
    return keys


def evaluate(pred_rows: Iterable[Mapping], keys: Mapping[Any, AnswerKey]) -> list[EvalReport]:
    """One report per ``(model, prompt)`` found in ``pred_rows``.

    Each row is ``{"doc_id", "task", "prompt", "answer"}`` plus an optional
    ``"model"`` (default ``"model"``). Rows for unknown documents are ignored
    and do not raise coverage.
    """
    if not keys:
        raise ValueError("empty answer key")
    grouped: dict[tuple[str, str], dict[str, dict]] = defaultdict(lambda: defaultdict(dict))
    for row in pred_rows:
        model = str(row.get("model", "model"))
        grouped[(model, str(row["prompt"]))][str(row["task"])][row["doc_id"]] = row.get("answer")

    reports = []
    n = len(keys)
    for (model, prompt) in sorted(grouped):
        tasks = grouped[(model, prompt)]
        rep = EvalReport(model=model, prompt=prompt, n_documents=n)
        if "T1" in tasks:
            answers = tasks["T1"]
            rep.t1_accuracy = score_t1(answers, {d: k.has_error for d, k in keys.items()})
            rep.coverage["T1"] = sum(isinstance(answers.get(d), bool) for d in keys) / n
        if "T2" in tasks:
            key_vecs = {d: k.type_vector for d, k in keys.items()}
            s2 = score_t2(tasks["T2"], key_vecs)
            rep.t2_micro_f1, rep.t2_macro_f1 = s2.micro_f1, s2.macro_f1
            rep.t2_per_type = {t.value: s.as_dict() for t, s in s2.per_type.items()}
            rep.detection_rates = {
                t.value: (s.recall if s.support else None) for t, s in s2.per_type.items()
            }
            rep.coverage["T2"] = s2.answered / n
        if "T3" in tasks:
            s3 = score_t3(tasks["T3"], {d: k.elements for d, k in keys.items()})
            rep.t3_macro_f1 = s3.macro_f1
            rep.t3_per_type = {t.value: s.as_dict() for t, s in s3.per_type.items()}
            rep.t3_confusion = s3.confusion.tolist()
            rep.coverage["T3"] = s3.answered / n
        reports.append(rep)
    return reports


TABLE_METRICS = {"T1": "t1_accuracy", "T2": "t2_micro_f1", "T3": "t3_macro_f1"}
PROMPTS = ("P1", "P2", "P3")


def summary_table(reports: Sequence[EvalReport]) -> dict[str, dict[str, dict[str, float | None]]]:
    """``model -> task -> {P1, P2, P3, CV, NR}``; missing cells are ``None``."""
    out: dict[str, dict[str, dict[str, float | None]]] = {}
    for rep in reports:
        by_task = out.setdefault(rep.model, {t: {p: None for p in (*PROMPTS, "CV", "NR")} for t in TABLE_METRICS})
        for task, attr in TABLE_METRICS.items():
            if rep.prompt in PROMPTS:
                by_task[task][rep.prompt] = getattr(rep, attr)
    for by_task in out.values():
        for cells in by_task.values():
            vals = [cells[p] for p in PROMPTS if cells[p] is not None]
            if len(vals) >= 2:
                cells["CV"], cells["NR"] = robustness(vals)
    return out


def format_table(reports: Sequence[EvalReport]) -> str:
    """Plain-text model x (task, prompt) table with CV/NR per task."""
    table = summary_table(reports)
    cols = [*PROMPTS, "CV", "NR"]
    head1 = f"{'':<24}" + "".join(f"| {task:<38}" for task in TABLE_METRICS)
    head2 = f"{'Model':<24}" + "".join("| " + "".join(f"{c:<7}" for c in cols) + "   " for _ in TABLE_METRICS)
    lines = [head1.rstrip(), head2.rstrip(), "-" * len(head2.rstrip())]
    for model in sorted(table):
        cells = []
        for task in TABLE_METRICS:
            vals = table[model][task]
            cells.append("| " + "".join(f"{'-' if vals[c] is None else format(vals[c], '.3f'):<7}" for c in cols) + "   ")
        lines.append((f"{model:<24}" + "".join(cells)).rstrip())
    return "\n".join(lines) + "\n"
