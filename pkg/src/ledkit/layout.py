"""Pages, elements, error labels and LED records."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Sequence

from .geometry import BBox


class ErrorType(str, enum.Enum):
    """The eight structural error types, in canonical order."""

    MISSING = "Missing"
    HALLUCINATION = "Hallucination"
    SIZE_ERROR = "SizeError"
    SPLIT = "Split"
    MERGE = "Merge"
    OVERLAP = "Overlap"
    DUPLICATE = "Duplicate"
    MISCLASSIFICATION = "Misclassification"

    @property
    def index(self) -> int:
        return ERROR_TYPES.index(self)

    @classmethod
    def parse(cls, value: "str | ErrorType") -> "ErrorType":
        if isinstance(value, ErrorType):
            return value
        try:
            return cls(value)
        except ValueError:
            pass
        key = str(value).replace(" ", "").replace("_", "").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown error type {value!r}")

    def __str__(self) -> str:
        return self.value


ERROR_TYPES: tuple[ErrorType, ...] = tuple(ErrorType)
N_ERROR_TYPES = len(ERROR_TYPES)

# Element-level flattening order (highest first). Missing lives on the GT side
# and never competes with these.
LABEL_PRECEDENCE: tuple[ErrorType, ...] = (
    ErrorType.DUPLICATE,
    ErrorType.SPLIT,
    ErrorType.MERGE,
    ErrorType.MISCLASSIFICATION,
    ErrorType.SIZE_ERROR,
    ErrorType.OVERLAP,
    ErrorType.HALLUCINATION,
)

GT_SIDE_TYPES = frozenset({ErrorType.MISSING})
PRED_SIDE_TYPES = frozenset(ERROR_TYPES) - GT_SIDE_TYPES


class Side(str, enum.Enum):
    GT = "gt"
    PRED = "pred"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class CategorySet:
    """Ordered ``(category_id, name)`` pairs."""

    items: tuple[tuple[int, str], ...]

    def __post_init__(self) -> None:
        items = tuple((int(i), str(n)) for i, n in self.items)
        if not items:
            raise ValueError("CategorySet must be nonempty")
        ids = [i for i, _ in items]
        names = [n for _, n in items]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate category ids in {ids}")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate category names in {names}")
        object.__setattr__(self, "items", items)

    @classmethod
    def from_names(cls, names: Iterable[str], start: int = 1) -> "CategorySet":
        return cls(tuple((start + k, n) for k, n in enumerate(names)))

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.items)

    def name(self, category_id: int) -> str:
        for i, n in self.items:
            if i == category_id:
                return n
        raise KeyError(category_id)

    def __contains__(self, category_id: object) -> bool:
        return any(i == category_id for i, _ in self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[tuple[int, str]]:
        return iter(self.items)


# DocLayNet's eleven classes; used as the default for synthetic corpora.
DOCLAYNET_CATEGORIES = CategorySet.from_names(
    [
        "Caption",
        "Footnote",
        "Formula",
        "List-item",
        "Page-footer",
        "Page-header",
        "Picture",
        "Section-header",
        "Table",
        "Text",
        "Title",
    ]
)


@dataclass(frozen=True)
class LayoutElement:
    element_id: int
    bbox: BBox
    category_id: int


@dataclass(frozen=True)
class PageLayout:
    """All GT or predicted regions of one page.

    ``page_id`` keys the page across files and seeds its RNG stream;
    ``image_ref`` is the page image path relative to the corpus root.
    """

    page_width: float
    page_height: float
    elements: tuple[LayoutElement, ...] = ()
    page_id: int = 0
    image_ref: str | None = None

    def __post_init__(self) -> None:
        if not (self.page_width > 0 and self.page_height > 0):
            raise ValueError(
                f"page dimensions must be positive, got {(self.page_width, self.page_height)}"
            )
        object.__setattr__(self, "page_width", float(self.page_width))
        object.__setattr__(self, "page_height", float(self.page_height))
        object.__setattr__(self, "elements", tuple(self.elements))

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[LayoutElement]:
        return iter(self.elements)

    @property
    def ids(self) -> list[int]:
        return [e.element_id for e in self.elements]

    def get(self, element_id: int) -> LayoutElement:
        for e in self.elements:
            if e.element_id == element_id:
                return e
        raise KeyError(element_id)

    def sorted(self) -> "PageLayout":
        """Copy with elements in ascending ``element_id`` order."""
        return self.replace(elements=sorted(self.elements, key=lambda e: e.element_id))

    def replace(self, **changes: Any) -> "PageLayout":
        fields = dict(
            page_width=self.page_width,
            page_height=self.page_height,
            elements=self.elements,
            page_id=self.page_id,
            image_ref=self.image_ref,
        )
        fields.update(changes)
        return PageLayout(**fields)

    def same_page(self, other: "PageLayout") -> bool:
        return self.page_width == other.page_width and self.page_height == other.page_height


@dataclass(frozen=True)
class ElementErrorLabel:
    """Diagnosis of one element; an empty ``labels`` set means "None"."""

    side: Side
    element_id: int
    labels: frozenset[ErrorType] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "side", Side(self.side))
        object.__setattr__(self, "labels", frozenset(ErrorType.parse(x) for x in self.labels))

    @property
    def key(self) -> tuple[Side, int]:
        return (self.side, self.element_id)

    def primary(self) -> ErrorType | None:
        """Single label used for element-level scoring."""
        if not self.labels:
            return None
        if self.side is Side.GT:
            return ErrorType.MISSING if ErrorType.MISSING in self.labels else None
        for t in LABEL_PRECEDENCE:
            if t in self.labels:
                return t
        return None

    def sorted_labels(self) -> list[ErrorType]:
        return sorted(self.labels, key=lambda t: t.index)


@dataclass(frozen=True)
class DocumentErrorAnnotation:
    has_error: bool
    type_vector: tuple[int, ...]
    element_labels: tuple[ElementErrorLabel, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "has_error", bool(self.has_error))
        object.__setattr__(self, "type_vector", tuple(int(v) for v in self.type_vector))
        object.__setattr__(self, "element_labels", tuple(self.element_labels))

    @classmethod
    def from_types(
        cls, types: Iterable[ErrorType], element_labels: Sequence[ElementErrorLabel] = ()
    ) -> "DocumentErrorAnnotation":
        present = set(types)
        vector = tuple(int(t in present) for t in ERROR_TYPES)
        return cls(any(vector), vector, tuple(element_labels))

    @property
    def types(self) -> frozenset[ErrorType]:
        return frozenset(t for t, v in zip(ERROR_TYPES, self.type_vector) if v)

    def type_map(self) -> dict[str, bool]:
        return {t.value: bool(v) for t, v in zip(ERROR_TYPES, self.type_vector)}

    def flattened(self) -> dict[tuple[Side, int], ErrorType | None]:
        return {lab.key: lab.primary() for lab in self.element_labels}


@dataclass(frozen=True)
class InjectionRecord:
    """Provenance of one injected error.

    ``gt_ids`` are the GT elements the error was built from, ``pred_ids`` the
    prediction elements it produced or modified, ``params`` the drawn values.
    """

    error_type: ErrorType
    gt_ids: tuple[int, ...] = ()
    pred_ids: tuple[int, ...] = ()
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "error_type", ErrorType.parse(self.error_type))
        object.__setattr__(self, "gt_ids", tuple(int(i) for i in self.gt_ids))
        object.__setattr__(self, "pred_ids", tuple(int(i) for i in self.pred_ids))


@dataclass(frozen=True)
class LedRecord:
    gt: PageLayout
    pred: PageLayout
    categories: CategorySet
    annotation: DocumentErrorAnnotation
    provenance: tuple[InjectionRecord, ...] | None = None
    image_ref: str | None = None

    @property
    def page_id(self) -> int:
        return self.gt.page_id


def validate_record(r: LedRecord) -> list[str]:
    """List every broken invariant of ``r``; empty when the record is sound."""
    problems: list[str] = []
    cats = r.categories
    for side, layout in ((Side.GT, r.gt), (Side.PRED, r.pred)):
        problems.extend(validate_layout(layout, cats, side=str(side)))
    if not r.gt.same_page(r.pred):
        problems.append(
            f"page size mismatch: gt {(r.gt.page_width, r.gt.page_height)} "
            f"vs pred {(r.pred.page_width, r.pred.page_height)}"
        )

    ann = r.annotation
    if len(ann.type_vector) != N_ERROR_TYPES:
        problems.append(f"type_vector has {len(ann.type_vector)} entries, expected {N_ERROR_TYPES}")
    elif any(v not in (0, 1) for v in ann.type_vector):
        problems.append(f"type_vector is not binary: {ann.type_vector}")
    any_bit = any(ann.type_vector)
    any_label = any(lab.labels for lab in ann.element_labels)
    if ann.has_error != any_bit:
        problems.append(f"has_error={ann.has_error} inconsistent with type_vector {ann.type_vector}")
    if ann.element_labels and ann.has_error != any_label:
        problems.append(f"has_error={ann.has_error} inconsistent with element labels")

    ids = {Side.GT: set(r.gt.ids), Side.PRED: set(r.pred.ids)}
    seen: set[tuple[Side, int]] = set()
    for lab in ann.element_labels:
        where = f"{lab.side} element {lab.element_id}"
        if lab.key in seen:
            problems.append(f"{where}: labeled more than once")
        seen.add(lab.key)
        if lab.element_id not in ids[lab.side]:
            problems.append(f"{where}: label refers to an unknown element")
        allowed = GT_SIDE_TYPES if lab.side is Side.GT else PRED_SIDE_TYPES
        for t in lab.labels - allowed:
            problems.append(f"{where}: {t} is not allowed on the {lab.side} side")
        if len(ann.type_vector) == N_ERROR_TYPES:
            for t in lab.labels:
                if not ann.type_vector[t.index]:
                    problems.append(f"{where}: label {t} absent from type_vector")
    return problems


def validate_layout(layout: PageLayout, categories: CategorySet, side: str = "layout") -> list[str]:
    problems: list[str] = []
    seen: set[int] = set()
    for e in layout.elements:
        where = f"{side} element {e.element_id}"
        if e.element_id in seen:
            problems.append(f"{where}: duplicate element_id")
        seen.add(e.element_id)
        if e.category_id not in categories:
            problems.append(f"{where}: unknown category_id {e.category_id}")
        if not e.bbox.within(layout.page_width, layout.page_height):
            problems.append(f"{where}: bbox {e.bbox.as_tuple()} outside page")
    return problems
