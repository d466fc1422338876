"""Corpus-scale generation: inject, diagnose and write a record tree."""

from __future__ import annotations

import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .dataset_io import save_led_record, write_manifest
from .injector import InjectionConfig, inject_document, page_rng
from .layout import ERROR_TYPES, CategorySet, ErrorType, LedRecord, PageLayout
from .render import RenderStyle
from .validation import check_corpus


@dataclass
class GenerationSummary:
    n_pages: int = 0
    n_elements: int = 0
    n_error_documents: int = 0
    slot_counts: Counter = field(default_factory=Counter)
    document_type_counts: Counter = field(default_factory=Counter)

    @property
    def n_slots(self) -> int:
        return sum(self.slot_counts.values())

    def realized_mixture(self) -> dict[ErrorType, float]:
        n = self.n_slots
        return {t: (self.slot_counts[t] / n if n else 0.0) for t in ERROR_TYPES}

    def add(self, n_elements: int, slots: Sequence[ErrorType], types: Sequence[ErrorType]) -> None:
        self.n_pages += 1
        self.n_elements += n_elements
        self.n_error_documents += bool(types)
        self.slot_counts.update(slots)
        self.document_type_counts.update(types)


@dataclass(frozen=True)
class _Job:
    root: str
    config: InjectionConfig
    categories: CategorySet
    render: bool
    style: RenderStyle | None
    image_root: str | None


def _process(args: tuple[_Job, PageLayout]) -> tuple[LedRecord, int, list[ErrorType], list[ErrorType]]:
    job, page = args
    rec = inject_document(page, page_rng(job.config.master_seed, page.page_id), job.config, job.categories)
    save_led_record(
        rec,
        job.root,
        render=job.render,
        style=job.style,
        image_root=job.image_root,
        meta={"master_seed": job.config.master_seed},
    )
    slots = [r.error_type for r in rec.provenance or ()]
    # the full record is only needed for the manifest; drop layouts to keep IPC small
    slim = LedRecord(
        page.replace(elements=()), page.replace(elements=()), rec.categories, rec.annotation, None, rec.image_ref
    )
    return slim, len(page), slots, sorted(rec.annotation.types, key=lambda t: t.index)


def default_jobs() -> int:
    return os.cpu_count() or 1


def generate_tree(
    pages: Sequence[PageLayout],
    categories: CategorySet,
    config: InjectionConfig,
    out_dir: str | Path,
    *,
    n_jobs: int = 1,
    render: bool = True,
    style: RenderStyle | None = None,
    image_root: str | Path | None = None,
    manifest_meta: dict | None = None,
) -> GenerationSummary:
    """Write one LED record per page plus ``manifest.json`` under ``out_dir``.

    Output bytes are independent of ``n_jobs``: every page draws from its own
    keyed stream and the manifest is written after all pages, in corpus order.
    """
    pages = check_corpus(pages)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    job = _Job(str(out), config, categories, render, style, None if image_root is None else str(image_root))
    tasks = [(job, p) for p in pages]
    if n_jobs <= 1:
        results = [_process(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (4 * n_jobs))
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_process, tasks, chunksize=chunk))

    summary = GenerationSummary()
    for _, n_el, slots, types in results:
        summary.add(n_el, slots, types)
    meta = {"config": config.to_mapping(), "master_seed": config.master_seed}
    meta.update(manifest_meta or {})
    write_manifest(out, [r for r, *_ in results], meta)
    return summary
