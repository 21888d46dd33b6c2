"""Core domain types: labeled points, pair annotations, dataset manifests.

All types are immutable value objects; validation against image bounds and
the minimum-distance rule happens wherever a manifest is available (store
writes, task generation, service submission).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .errors import (
    BadImageDimensions,
    DuplicateImageId,
    InvalidLabel,
    KindMismatch,
    ManifestError,
    MinDistanceViolation,
    OutOfBoundsPoint,
    UnknownImageId,
)

DEFAULT_TARGET_H = 240
DEFAULT_TARGET_W = 424

MIN_IMAGE_DIM = 16

# Intra-image pairs must be at least this fraction of min(W, H) apart.
MIN_DISTANCE_FRACTION = 0.05

VALID_LABELS = (-1, 0, 1)
VALID_KINDS = ("intra", "cross")
VALID_SOURCES = ("human", "auto", "synthetic")


@dataclass(frozen=True)
class PointRef:
    """A pixel location inside a named image."""

    image_id: str
    x: int
    y: int

    def to_json(self) -> dict:
        return {"image_id": self.image_id, "x": self.x, "y": self.y}

    @classmethod
    def from_json(cls, raw: dict) -> "PointRef":
        return cls(image_id=str(raw["image_id"]), x=int(raw["x"]), y=int(raw["y"]))


def point_distance(a: PointRef, b: PointRef) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def min_pair_distance(width: int, height: int) -> float:
    """Minimum allowed intra-image pair distance, in pixels (no rounding)."""
    return MIN_DISTANCE_FRACTION * min(width, height)


@dataclass(frozen=True)
class PairAnnotation:
    """One ordinal judgment over a point pair.

    t=1 means point b is more traversable, t=-1 means point a is, t=0 equal.
    """

    pair_id: str
    a: PointRef
    b: PointRef
    t: int
    kind: str
    source: str

    def __post_init__(self) -> None:
        if self.t not in VALID_LABELS:
            raise InvalidLabel(f"t must be one of {VALID_LABELS}, got {self.t!r}")
        if self.kind not in VALID_KINDS:
            raise KindMismatch(f"kind must be one of {VALID_KINDS}, got {self.kind!r}")
        if self.source not in VALID_SOURCES:
            raise InvalidLabel(f"source must be one of {VALID_SOURCES}, got {self.source!r}")
        same_image = self.a.image_id == self.b.image_id
        if self.kind == "intra" and not same_image:
            raise KindMismatch(
                f"intra pair {self.pair_id} spans images {self.a.image_id!r} and {self.b.image_id!r}"
            )
        if self.kind == "cross" and same_image:
            raise KindMismatch(f"cross pair {self.pair_id} has both points in {self.a.image_id!r}")

    def to_json(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "kind": self.kind,
            "a": self.a.to_json(),
            "b": self.b.to_json(),
            "t": self.t,
            "source": self.source,
        }

    @classmethod
    def from_json(cls, raw: dict) -> "PairAnnotation":
        return cls(
            pair_id=str(raw["pair_id"]),
            a=PointRef.from_json(raw["a"]),
            b=PointRef.from_json(raw["b"]),
            t=int(raw["t"]),
            kind=str(raw["kind"]),
            source=str(raw["source"]),
        )


@dataclass(frozen=True)
class ImageEntry:
    image_id: str
    path: str
    width: int
    height: int
    gt_path: Optional[str] = None

    def to_json(self) -> dict:
        doc = {
            "image_id": self.image_id,
            "path": self.path,
            "width": self.width,
            "height": self.height,
        }
        if self.gt_path is not None:
            doc["gt_path"] = self.gt_path
        return doc


@dataclass(frozen=True)
class DatasetManifest:
    """Ordered image registry plus the target model resolution."""

    images: tuple[ImageEntry, ...]
    target_h: int = DEFAULT_TARGET_H
    target_w: int = DEFAULT_TARGET_W
    root: Optional[Path] = None  # directory image paths are relative to
    _index: dict = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))
        index: dict[str, ImageEntry] = {}
        for entry in self.images:
            if entry.image_id in index:
                raise DuplicateImageId(f"duplicate image_id {entry.image_id!r}")
            if entry.width < MIN_IMAGE_DIM or entry.height < MIN_IMAGE_DIM:
                raise BadImageDimensions(
                    f"image {entry.image_id!r} is {entry.width}x{entry.height}; "
                    f"both sides must be >= {MIN_IMAGE_DIM}"
                )
            index[entry.image_id] = entry
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.images)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._index

    def entry(self, image_id: str) -> ImageEntry:
        try:
            return self._index[image_id]
        except KeyError:
            raise UnknownImageId(f"unknown image_id {image_id!r}") from None

    def resolve_path(self, rel: str) -> Path:
        if self.root is None:
            return Path(rel)
        return self.root / rel


def validate_point(point: PointRef, manifest: DatasetManifest) -> None:
    entry = manifest.entry(point.image_id)
    if not (0 <= point.x < entry.width and 0 <= point.y < entry.height):
        raise OutOfBoundsPoint(
            f"point ({point.x}, {point.y}) outside {entry.width}x{entry.height} "
            f"image {point.image_id!r}"
        )


def validate_annotation(ann: PairAnnotation, manifest: DatasetManifest) -> None:
    """Check an annotation against image bounds and the minimum-distance rule."""
    validate_point(ann.a, manifest)
    validate_point(ann.b, manifest)
    if ann.kind == "intra":
        entry = manifest.entry(ann.a.image_id)
        threshold = min_pair_distance(entry.width, entry.height)
        dist = point_distance(ann.a, ann.b)
        if dist < threshold:
            raise MinDistanceViolation(
                f"intra pair {ann.pair_id}: distance {dist:.3f} px below "
                f"threshold {threshold:.3f} px"
            )


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read a manifest file: a header line, then one image record per line."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest file not found: {path}")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise ManifestError(f"manifest file is empty: {path}")
    try:
        header = json.loads(lines[0])
        target_h = int(header["target_h"])
        target_w = int(header["target_w"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"bad manifest header in {path}: {exc}") from exc
    entries = []
    for ln in lines[1:]:
        raw = json.loads(ln)
        entries.append(
            ImageEntry(
                image_id=str(raw["image_id"]),
                path=str(raw["path"]),
                width=int(raw["width"]),
                height=int(raw["height"]),
                gt_path=str(raw["gt_path"]) if raw.get("gt_path") is not None else None,
            )
        )
    return DatasetManifest(
        images=tuple(entries), target_h=target_h, target_w=target_w, root=path.parent
    )


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        fh.write(json.dumps({"target_h": manifest.target_h, "target_w": manifest.target_w}))
        fh.write("\n")
        for entry in manifest.images:
            fh.write(json.dumps(entry.to_json()))
            fh.write("\n")


def audit_label_ratio(
    annotations: Iterable[PairAnnotation], manifest: DatasetManifest
) -> dict:
    """Per-image label accounting for the 1-intra + 1-cross protocol.

    A cross task is charged to the image owning point a.  The equivalent
    label count charges each cross pairing once per two images, so a fully
    annotated N-image dataset reports 3 labels per 2 images.
    """
    intra_by_image = {e.image_id: 0 for e in manifest.images}
    cross_by_image = {e.image_id: 0 for e in manifest.images}
    n_intra = 0
    n_cross = 0
    for ann in annotations:
        if ann.kind == "intra":
            n_intra += 1
            intra_by_image[ann.a.image_id] = intra_by_image.get(ann.a.image_id, 0) + 1
        else:
            n_cross += 1
            cross_by_image[ann.a.image_id] = cross_by_image.get(ann.a.image_id, 0) + 1
    return {
        "images": len(manifest),
        "intra_labels": n_intra,
        "cross_labels": n_cross,
        "intra_per_image_ok": all(v == 1 for v in intra_by_image.values()),
        "cross_per_image_ok": all(v == 1 for v in cross_by_image.values()),
        "equivalent_labels": equivalent_label_count(n_intra, n_cross),
        "labels_per_two_images": (
            2.0 * equivalent_label_count(n_intra, n_cross) / len(manifest)
            if len(manifest)
            else 0.0
        ),
    }


def equivalent_label_count(n_intra: int, n_cross: int) -> float:
    """Label count with each cross pairing charged once per two images.

    One intra and one cross task per image comes out to 3 labels per 2
    images: N + N/2.
    """
    return n_intra + n_cross / 2.0
