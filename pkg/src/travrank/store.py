"""Append-only annotation store.

The store file is line-delimited JSON.  Three record shapes share the file:

- annotation: {"pair_id", "kind", "a": {...}, "b": {...}, "t", "source"}
- retraction: {"retract": "<pair_id>"}  (tombstone; the annotation stays in
  the log but is excluded from the effective state)
- skip:       {"skip": "<task_id>"}     (task dismissed without a label)

Effective state is resolved by replaying the log in order.  A pair_id may be
reused after its previous annotation was retracted; a live duplicate is
rejected.  Writes are serialized by a lock (single-writer contract);
readers may scan the file at any time.
"""
from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .errors import DuplicateAnnotationId, TravrankError
from .types import DatasetManifest, PairAnnotation, validate_annotation


def write_annotations(annotations: Iterable[PairAnnotation], path: str | Path) -> None:
    """Write a plain annotation file (no tombstones), one record per line."""
    path = Path(path)
    with path.open("w") as fh:
        for ann in annotations:
            fh.write(json.dumps(ann.to_json()))
            fh.write("\n")


def iter_records(path: str | Path) -> Iterator[dict]:
    path = Path(path)
    if not path.exists():
        return
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def resolve_records(records: Iterable[dict]) -> tuple[list[PairAnnotation], set[str]]:
    """Replay a record stream into (live annotations, skipped task ids)."""
    live: dict[str, PairAnnotation] = {}
    order: list[str] = []
    skipped: set[str] = set()
    for raw in records:
        if "retract" in raw:
            pair_id = str(raw["retract"])
            if pair_id in live:
                del live[pair_id]
                order.remove(pair_id)
            continue
        if "skip" in raw:
            skipped.add(str(raw["skip"]))
            continue
        ann = PairAnnotation.from_json(raw)
        if ann.pair_id in live:
            raise DuplicateAnnotationId(
                f"annotation log replays a live duplicate pair_id {ann.pair_id!r}"
            )
        live[ann.pair_id] = ann
        order.append(ann.pair_id)
    return [live[pid] for pid in order], skipped


def read_annotations(path: str | Path) -> list[PairAnnotation]:
    """Effective (tombstone-resolved) annotations from a store file."""
    live, _ = resolve_records(iter_records(path))
    return live


class AnnotationStore:
    """Validating append-only store over a single log file."""

    def __init__(self, path: str | Path, manifest: DatasetManifest):
        self.path = Path(path)
        self.manifest = manifest
        self._lock = threading.Lock()
        self._live: dict[str, PairAnnotation] = {}
        self._order: list[str] = []
        self._skipped: set[str] = set()
        if self.path.exists():
            live, skipped = resolve_records(iter_records(self.path))
            for ann in live:
                self._live[ann.pair_id] = ann
                self._order.append(ann.pair_id)
            self._skipped = skipped

    def _write_line(self, doc: dict) -> None:
        with self.path.open("a") as fh:
            fh.write(json.dumps(doc))
            fh.write("\n")
            fh.flush()

    def append(self, ann: PairAnnotation) -> None:
        """Validate and persist one annotation."""
        with self._lock:
            validate_annotation(ann, self.manifest)
            if ann.pair_id in self._live:
                raise DuplicateAnnotationId(f"pair_id {ann.pair_id!r} already stored")
            self._write_line(ann.to_json())
            self._live[ann.pair_id] = ann
            self._order.append(ann.pair_id)

    def retract(self, pair_id: str) -> None:
        """Tombstone a live annotation; the id may be reused afterwards."""
        with self._lock:
            if pair_id not in self._live:
                raise TravrankError(f"cannot retract unknown pair_id {pair_id!r}")
            self._write_line({"retract": pair_id})
            del self._live[pair_id]
            self._order.remove(pair_id)

    def mark_skipped(self, task_id: str) -> None:
        with self._lock:
            self._write_line({"skip": task_id})
            self._skipped.add(task_id)

    def annotations(self) -> list[PairAnnotation]:
        with self._lock:
            return [self._live[pid] for pid in self._order]

    def skipped_tasks(self) -> set[str]:
        with self._lock:
            return set(self._skipped)

    def __contains__(self, pair_id: str) -> bool:
        return pair_id in self._live

    def __len__(self) -> int:
        return len(self._order)


def append_annotation(
    store: AnnotationStore, ann: PairAnnotation, manifest: Optional[DatasetManifest] = None
) -> None:
    """Functional wrapper over AnnotationStore.append."""
    if manifest is not None and manifest is not store.manifest:
        validate_annotation(ann, manifest)
    store.append(ann)
