"""Pydantic request/response models for the annotation service."""
from __future__ import annotations

from typing import Optional

from pydantic import BaseModel

from ..pairgen import PairTask


class PointOut(BaseModel):
    image_id: str
    x: int
    y: int
    image_url: str


class TaskOut(BaseModel):
    task_id: str
    kind: str
    a: PointOut
    b: PointOut


def task_to_schema(task: PairTask) -> TaskOut:
    return TaskOut(
        task_id=task.task_id,
        kind=task.kind,
        a=PointOut(
            image_id=task.a.image_id,
            x=task.a.x,
            y=task.a.y,
            image_url=f"/api/images/{task.a.image_id}",
        ),
        b=PointOut(
            image_id=task.b.image_id,
            x=task.b.x,
            y=task.b.y,
            image_url=f"/api/images/{task.b.image_id}",
        ),
    )


class LabelIn(BaseModel):
    t: int


class SubmitOut(BaseModel):
    task_id: str
    status: str


class UndoOut(BaseModel):
    task_id: str
    status: str


class ProgressOut(BaseModel):
    total: int
    pending: int
    labeled: int
    skipped: int
    images: int
    intra_labeled: int
    cross_labeled: int
    equivalent_labels: float
    labels_per_two_images: float


class ErrorOut(BaseModel):
    code: str
    message: str
    detail: Optional[str] = None
