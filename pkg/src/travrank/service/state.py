"""Task pool with leases, label submission, skip, and undo.

All mutation happens under one lock, so concurrent sessions can never claim
the same task or double-label it.  Every state change is persisted through
the append-only store; replaying the store file reconstructs the pool.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import threading

from ..errors import (
    AlreadyLabeled,
    InvalidLabel,
    LeaseExpired,
    NoPendingTasks,
    NothingToUndo,
    UnknownTask,
)
from ..pairgen import PairTask
from ..store import AnnotationStore
from ..types import PairAnnotation, VALID_LABELS, equivalent_label_count

DEFAULT_LEASE_SECONDS = 600.0


@dataclass
class Lease:
    session: str
    expires: float


class TaskPool:
    def __init__(
        self,
        tasks: Sequence[PairTask],
        store: AnnotationStore,
        lease_seconds: float = DEFAULT_LEASE_SECONDS,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.store = store
        self.lease_seconds = lease_seconds
        self.clock = clock
        self.tasks: dict[str, PairTask] = {}
        self.order: list[str] = []
        for task in tasks:
            self.tasks[task.task_id] = task
            self.order.append(task.task_id)
        # replay: live annotations mark tasks labeled, skip records mark skipped
        for ann in store.annotations():
            if ann.pair_id in self.tasks:
                self.tasks[ann.pair_id].status = "labeled"
        for task_id in store.skipped_tasks():
            task = self.tasks.get(task_id)
            if task is not None and task.status == "pending":
                task.status = "skipped"
        self.leases: dict[str, Lease] = {}
        self.undo_stack: dict[str, list[str]] = {}
        self.lock = threading.Lock()

    def _drop_expired(self) -> None:
        now = self.clock()
        for task_id in [tid for tid, lease in self.leases.items() if lease.expires <= now]:
            del self.leases[task_id]

    def next_task(self, session: str) -> PairTask:
        with self.lock:
            self._drop_expired()
            for task_id in self.order:
                task = self.tasks[task_id]
                if task.status != "pending" or task_id in self.leases:
                    continue
                self.leases[task_id] = Lease(
                    session=session, expires=self.clock() + self.lease_seconds
                )
                return task
            raise NoPendingTasks("no pending tasks")

    def _checked_task(self, task_id: str, session: str) -> PairTask:
        task = self.tasks.get(task_id)
        if task is None:
            raise UnknownTask(f"unknown task {task_id!r}")
        if task.status != "pending":
            raise AlreadyLabeled(f"task {task_id!r} is already {task.status}")
        self._drop_expired()
        lease = self.leases.get(task_id)
        if lease is None or lease.session != session:
            raise LeaseExpired(f"task {task_id!r} is not leased to session {session!r}")
        return task

    def submit_label(self, task_id: str, t: int, session: str) -> PairAnnotation:
        with self.lock:
            if t not in VALID_LABELS:
                raise InvalidLabel(f"t must be one of {VALID_LABELS}, got {t!r}")
            task = self._checked_task(task_id, session)
            ann = PairAnnotation(
                pair_id=task.task_id, a=task.a, b=task.b, t=t, kind=task.kind, source="human"
            )
            self.store.append(ann)
            task.status = "labeled"
            del self.leases[task_id]
            self.undo_stack.setdefault(session, []).append(task_id)
            return ann

    def skip(self, task_id: str, session: str) -> None:
        with self.lock:
            task = self._checked_task(task_id, session)
            self.store.mark_skipped(task.task_id)
            task.status = "skipped"
            del self.leases[task_id]

    def undo_last(self, session: str) -> PairTask:
        with self.lock:
            stack = self.undo_stack.get(session) or []
            if not stack:
                raise NothingToUndo(f"session {session!r} has no label to undo")
            task_id = stack.pop()
            self.store.retract(task_id)
            task = self.tasks[task_id]
            task.status = "pending"
            self.leases.pop(task_id, None)
            return task

    def progress(self) -> dict:
        with self.lock:
            counts = {"pending": 0, "labeled": 0, "skipped": 0}
            intra_labeled = cross_labeled = 0
            for task in self.tasks.values():
                counts[task.status] += 1
                if task.status == "labeled":
                    if task.kind == "intra":
                        intra_labeled += 1
                    else:
                        cross_labeled += 1
            images = {t.a.image_id for t in self.tasks.values()}
            equivalent = equivalent_label_count(intra_labeled, cross_labeled)
            n_images = len(images)
            return {
                "total": len(self.tasks),
                "pending": counts["pending"],
                "labeled": counts["labeled"],
                "skipped": counts["skipped"],
                "images": n_images,
                "intra_labeled": intra_labeled,
                "cross_labeled": cross_labeled,
                "equivalent_labels": equivalent,
                "labels_per_two_images": (2.0 * equivalent / n_images) if n_images else 0.0,
            }
