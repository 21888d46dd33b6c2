"""Random pair-task generation and tier-based automatic labeling.

Point locations are selected uniformly at random; intra-image pairs are
rejection-sampled until they satisfy the minimum-distance rule, which keeps
the distribution uniform over the admissible set.  Every image gets one
intra task and one cross task (the cross task is charged to the image
owning point a).  All randomness flows from a root seed; per-image streams
are derived by stable hashing so task lists are reproducible and order
independent of generation parallelism.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from .errors import KindMismatch, SingleImageDataset, UnknownClassId
from .types import DatasetManifest, PairAnnotation, PointRef, min_pair_distance

TASK_STATUSES = ("pending", "labeled", "skipped")


@dataclass
class PairTask:
    """A pair awaiting an ordinal judgment."""

    task_id: str
    a: PointRef
    b: PointRef
    kind: str
    status: str = "pending"

    def __post_init__(self) -> None:
        same_image = self.a.image_id == self.b.image_id
        if self.kind == "intra" and not same_image:
            raise KindMismatch(f"intra task {self.task_id} spans two images")
        if self.kind == "cross" and same_image:
            raise KindMismatch(f"cross task {self.task_id} stays in one image")

    def to_json(self) -> dict:
        return {
            "pair_id": self.task_id,
            "kind": self.kind,
            "a": self.a.to_json(),
            "b": self.b.to_json(),
            "status": self.status,
        }

    @classmethod
    def from_json(cls, raw: dict) -> "PairTask":
        return cls(
            task_id=str(raw["pair_id"]),
            a=PointRef.from_json(raw["a"]),
            b=PointRef.from_json(raw["b"]),
            kind=str(raw["kind"]),
            status=str(raw.get("status", "pending")),
        )


def write_tasks(tasks: Iterable[PairTask], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for task in tasks:
            fh.write(json.dumps(task.to_json()))
            fh.write("\n")


def read_tasks(path: str | Path) -> list[PairTask]:
    tasks = []
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                tasks.append(PairTask.from_json(json.loads(line)))
    return tasks


def derived_rng(seed: int, *keys: object) -> np.random.Generator:
    """Independent generator derived from a root seed and string keys."""
    digest = hashlib.sha256("/".join(str(k) for k in keys).encode()).digest()
    words = [int.from_bytes(digest[i : i + 4], "big") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *words]))


def sample_biased_point(
    width: int, height: int, rng: np.random.Generator, bottom_fraction: float = 0.0
) -> tuple[int, int]:
    """Uniform point, biased into the bottom half with the given probability.

    With probability bottom_fraction the row is uniform over y >= height/2;
    otherwise the point is uniform over the whole image.
    """
    x = int(rng.integers(0, width))
    if bottom_fraction > 0.0 and rng.random() < bottom_fraction:
        lo = math.ceil(height / 2)
        y = int(rng.integers(lo, height))
    else:
        y = int(rng.integers(0, height))
    return x, y


def sample_intra_pair(
    image_id: str,
    width: int,
    height: int,
    rng: np.random.Generator,
    bottom_fraction: float = 0.0,
) -> tuple[PointRef, PointRef]:
    """Two random in-bounds points at least 5% of min(W, H) apart."""
    threshold = min_pair_distance(width, height)
    while True:
        x1, y1 = sample_biased_point(width, height, rng, bottom_fraction)
        x2, y2 = sample_biased_point(width, height, rng, bottom_fraction)
        if math.hypot(x1 - x2, y1 - y2) >= threshold:
            return PointRef(image_id, x1, y1), PointRef(image_id, x2, y2)


def sample_cross_pair(
    manifest: DatasetManifest,
    image_id: str,
    rng: np.random.Generator,
    bottom_fraction: float = 0.0,
) -> tuple[PointRef, PointRef]:
    """Point a uniform in image_id, point b uniform in a random other image."""
    if len(manifest) < 2:
        raise SingleImageDataset("cross pairs need at least 2 images")
    entry_a = manifest.entry(image_id)
    others = [e for e in manifest.images if e.image_id != image_id]
    partner = others[int(rng.integers(0, len(others)))]
    xa, ya = sample_biased_point(entry_a.width, entry_a.height, rng, bottom_fraction)
    xb, yb = sample_biased_point(partner.width, partner.height, rng, bottom_fraction)
    return PointRef(image_id, xa, ya), PointRef(partner.image_id, xb, yb)


def generate_pair_tasks(
    manifest: DatasetManifest,
    seed: int,
    intra_only: bool = False,
    bottom_fraction: float = 0.0,
) -> list[PairTask]:
    """One intra task per image plus (unless intra_only) one cross task per image.

    Deterministic under (manifest, seed): each image's points come from its
    own derived stream.
    """
    if not intra_only and len(manifest) < 2:
        raise SingleImageDataset("cross tasks need at least 2 images; use intra_only")
    tasks: list[PairTask] = []
    for entry in manifest.images:
        rng = derived_rng(seed, "intra", entry.image_id)
        a, b = sample_intra_pair(entry.image_id, entry.width, entry.height, rng, bottom_fraction)
        tasks.append(PairTask(task_id=f"intra:{entry.image_id}", a=a, b=b, kind="intra"))
    if not intra_only:
        for entry in manifest.images:
            rng = derived_rng(seed, "cross", entry.image_id)
            a, b = sample_cross_pair(manifest, entry.image_id, rng, bottom_fraction)
            tasks.append(PairTask(task_id=f"cross:{entry.image_id}", a=a, b=b, kind="cross"))
    return tasks


@dataclass(frozen=True)
class TierTable:
    """Semantic class -> traversability tier in {0, 1, 2, 3}.

    Keys may be class ids or class names; same-tier pairs are labeled equal.
    default_tier, when set, absorbs classes missing from the map.
    """

    class_to_tier: dict = field(default_factory=dict)
    default_tier: Optional[int] = None

    def tier_of(self, class_id: Union[int, str]) -> int:
        if class_id in self.class_to_tier:
            return int(self.class_to_tier[class_id])
        key = str(class_id)
        if key in self.class_to_tier:
            return int(self.class_to_tier[key])
        if self.default_tier is not None:
            return int(self.default_tier)
        raise UnknownClassId(f"class {class_id!r} has no tier")

    def to_json(self) -> dict:
        doc: dict = {"kind": "class_map", "class_to_tier": dict(self.class_to_tier)}
        if self.default_tier is not None:
            doc["default_tier"] = self.default_tier
        return doc


# Paved surfaces rank highest; water and bush are barely traversable;
# anything unlisted (trees, sky, obstacles, void) falls to tier 0.
DEFAULT_TIER_TABLE = TierTable(
    class_to_tier={
        "concrete": 3,
        "asphalt": 3,
        "dirt": 2,
        "sand": 2,
        "grass": 2,
        "gravel": 2,
        "mulch": 2,
        "rock-bed": 2,
        "water": 1,
        "bush": 1,
    },
    default_tier=0,
)


def autolabel_from_tiers(
    gt_a: Union[int, str], gt_b: Union[int, str], tiers: TierTable
) -> int:
    """Ordinal label from tier membership: sign(tier(b) - tier(a))."""
    ta = tiers.tier_of(gt_a)
    tb = tiers.tier_of(gt_b)
    return int(np.sign(tb - ta))


def autolabel_tasks(
    tasks: Iterable[PairTask],
    class_maps: dict,
    tiers: TierTable,
    source: str = "auto",
) -> list[PairAnnotation]:
    """Label tasks by looking up per-pixel classes in dense class maps."""
    annotations = []
    for task in tasks:
        map_a = class_maps[task.a.image_id]
        map_b = class_maps[task.b.image_id]
        t = autolabel_from_tiers(
            int(map_a[task.a.y, task.a.x]), int(map_b[task.b.y, task.b.x]), tiers
        )
        annotations.append(
            PairAnnotation(
                pair_id=task.task_id, a=task.a, b=task.b, t=t, kind=task.kind, source=source
            )
        )
    return annotations


@dataclass(frozen=True)
class TierSpec:
    """How to turn an image's ground truth into per-pixel classes and tiers.

    class_map mode reads an integer class-id image at gt_path and maps ids
    through a TierTable.  field_levels mode reads a dense score field and
    assigns each pixel the index of its nearest level, with the index
    doubling as both class id and tier.
    """

    mode: str  # "class_map" | "field_levels"
    table: TierTable
    level_values: tuple[float, ...] = ()

    def class_map_for(self, manifest, image_id: str) -> np.ndarray:
        from . import imageio
        from .synth import field_to_levels

        entry = manifest.entry(image_id)
        if entry.gt_path is None:
            raise UnknownClassId(f"image {image_id!r} has no ground-truth path")
        path = manifest.resolve_path(entry.gt_path)
        if self.mode == "field_levels":
            return field_to_levels(imageio.load_gray16(path), self.level_values)
        return imageio.load_gray(path)

    def tier_map_for(self, manifest, image_id: str) -> np.ndarray:
        classes = self.class_map_for(manifest, image_id)
        lut_keys = np.unique(classes)
        lut = {int(k): self.table.tier_of(int(k)) for k in lut_keys}
        out = np.zeros_like(classes)
        for k, tier in lut.items():
            out[classes == k] = tier
        return out

    @property
    def n_tiers(self) -> int:
        if self.mode == "field_levels":
            return len(self.level_values)
        tiers = set(int(v) for v in self.table.class_to_tier.values())
        if self.table.default_tier is not None:
            tiers.add(int(self.table.default_tier))
        return max(tiers) + 1

    def to_json(self) -> dict:
        if self.mode == "field_levels":
            return {"kind": "field_levels", "levels": list(self.level_values)}
        return self.table.to_json()


def tier_spec_from_json(raw: dict) -> TierSpec:
    kind = raw.get("kind", "class_map")
    if kind == "field_levels":
        levels = tuple(float(v) for v in raw["levels"])
        identity = TierTable(class_to_tier={i: i for i in range(len(levels))})
        return TierSpec(mode="field_levels", table=identity, level_values=levels)
    if kind == "class_map":
        table = TierTable(
            class_to_tier=dict(raw["class_to_tier"]),
            default_tier=raw.get("default_tier"),
        )
        return TierSpec(mode="class_map", table=table)
    raise ValueError(f"unknown tier spec kind {kind!r}")


def load_tier_spec(path: str | Path) -> TierSpec:
    with Path(path).open() as fh:
        return tier_spec_from_json(json.load(fh))
