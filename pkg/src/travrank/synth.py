"""Procedural scenes with dense ground-truth traversability, for desk-scale
end-to-end verification.

Each scene is a Voronoi partition into polygonal regions.  Every region is
assigned one of a small ladder of traversability levels spanning its scene
family's score range, and is rendered with a family palette color that
encodes the level plus region-specific procedural texture (noise and low
amplitude stripes).  Two scene families with disjoint palettes alternate
through the dataset; in the calibration stress mode their score ranges are
also disjoint (family a high, family b low), so only cross-image pairs tie
the two families to a common scale.

Levels are spaced so that any two distinct levels differ by well more than
the oracle equality tolerance, keeping oracle labels unambiguous.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import imageio
from .errors import TravrankError
from .pairgen import generate_pair_tasks
from .store import write_annotations
from .types import DatasetManifest, ImageEntry, PairAnnotation, PointRef, save_manifest

DEFAULT_EQUALITY_TOL = 0.1

FAMILIES = ("a", "b")


@dataclass(frozen=True)
class SynthConfig:
    height: int = 48
    width: int = 64
    min_regions: int = 3
    max_regions: int = 8
    levels: int = 3  # score ladder size per family
    levels_per_scene: Optional[int] = 2  # distinct levels drawn per scene (None: all)
    range_a: tuple[float, float] = (0.0, 1.0)
    range_b: tuple[float, float] = (0.0, 1.0)
    noise_std: float = 0.03
    stripe_amp: float = 0.02
    equality_tol: float = DEFAULT_EQUALITY_TOL

    def family_range(self, family: str) -> tuple[float, float]:
        return self.range_a if family == "a" else self.range_b

    def level_values(self, family: str) -> np.ndarray:
        lo, hi = self.family_range(family)
        if self.levels == 1:
            return np.array([lo])
        return lo + np.arange(self.levels) * (hi - lo) / (self.levels - 1)


def stress_config(config: SynthConfig) -> SynthConfig:
    """Disjoint family score ranges: cross-image pairs carry the calibration."""
    return replace(config, range_a=(0.5, 1.0), range_b=(0.0, 0.5), levels=2, levels_per_scene=None)


def palette_color(family: str, score: float) -> np.ndarray:
    """Deterministic family-specific color ramp over the score in [0, 1].

    Family a ramps earth-red to green with low blue; family b keeps a high
    blue channel, so the palettes never collide.
    """
    s = float(score)
    if family == "a":
        return np.array([0.75 - 0.55 * s, 0.25 + 0.65 * s, 0.12])
    return np.array([0.20 + 0.50 * s, 0.15 + 0.55 * s, 0.85 - 0.25 * s])


@dataclass
class SyntheticScene:
    image: np.ndarray  # HxWx3 float32 in [0, 1]
    gt_field: np.ndarray  # HxW float32 in [0, 1], constant per region
    region_map: np.ndarray  # HxW int region ids
    family: str


def generate_scene(seed, config: SynthConfig, family: str = "a") -> SyntheticScene:
    """Deterministic scene from (seed, config, family)."""
    rng = np.random.default_rng(np.random.SeedSequence([_seed_int(seed), 1]))
    h, w = config.height, config.width
    n_regions = int(rng.integers(config.min_regions, config.max_regions + 1))

    cy = rng.uniform(0, h, size=n_regions)
    cx = rng.uniform(0, w, size=n_regions)
    ys, xs = np.mgrid[0:h, 0:w]
    d2 = (ys[..., None] - cy) ** 2 + (xs[..., None] - cx) ** 2
    region_map = np.argmin(d2, axis=-1)

    values = config.level_values(family)
    if config.levels_per_scene is not None and config.levels_per_scene < len(values):
        allowed = rng.choice(len(values), size=config.levels_per_scene, replace=False)
    else:
        allowed = np.arange(len(values))
    region_levels = allowed[rng.integers(0, len(allowed), size=n_regions)]

    # quantize to the 16-bit grid so the stored field round-trips bit-exact
    region_scores = np.round(values[region_levels] * imageio.GRAY16_MAX) / imageio.GRAY16_MAX
    gt_field = region_scores[region_map].astype(np.float32)

    image = np.zeros((h, w, 3), dtype=np.float64)
    for r in range(n_regions):
        mask = region_map == r
        tex_rng = np.random.default_rng(np.random.SeedSequence([_seed_int(seed), 2, r]))
        base = palette_color(family, float(values[region_levels[r]]))
        sigma = config.noise_std * tex_rng.uniform(0.6, 1.4)
        noise = tex_rng.normal(0.0, sigma, size=(int(mask.sum()), 3))
        fy = tex_rng.uniform(0.05, 0.3)
        fx = tex_rng.uniform(0.05, 0.3)
        phase = tex_rng.uniform(0, 2 * np.pi)
        stripes = config.stripe_amp * np.sin(2 * np.pi * (fy * ys + fx * xs) + phase)
        image[mask] = base[None, :] + noise + stripes[mask, None]
    image = np.clip(image, 0.0, 1.0).astype(np.float32)
    return SyntheticScene(image=image, gt_field=gt_field, region_map=region_map, family=family)


def _seed_int(seed) -> int:
    return int(seed) & 0xFFFFFFFF


def oracle_label(
    gt_field_a: np.ndarray,
    point_a: PointRef,
    gt_field_b: np.ndarray,
    point_b: PointRef,
    eps: float = DEFAULT_EQUALITY_TOL,
) -> int:
    """Ground-truth ordinal judgment: equal within eps, else the sign of the gap."""
    g_a = float(gt_field_a[point_a.y, point_a.x])
    g_b = float(gt_field_b[point_b.y, point_b.x])
    if abs(g_b - g_a) <= eps:
        return 0
    return 1 if g_b > g_a else -1


def field_to_levels(field: np.ndarray, level_values) -> np.ndarray:
    """Index of the nearest level for every pixel of a score field."""
    values = np.asarray(level_values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise TravrankError("level_values must be a nonempty 1-D sequence")
    return np.argmin(np.abs(np.asarray(field)[..., None] - values), axis=-1)


def build_synth_dataset(
    out_dir: str | Path,
    n_images: int,
    seed: int,
    config: SynthConfig = SynthConfig(),
    stress: bool = False,
) -> tuple[DatasetManifest, list[PairAnnotation]]:
    """Scenes + protocol tasks auto-labeled by the ground-truth oracle.

    Writes images/, gt/, manifest.jsonl, annotations.jsonl, and a tiers.json
    describing the level ladder (usable for tier calibration flows).
    """
    if n_images < 1:
        raise TravrankError("n_images must be >= 1")
    if stress:
        config = stress_config(config)
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "gt").mkdir(parents=True, exist_ok=True)

    entries = []
    fields = {}
    for i in range(n_images):
        family = FAMILIES[i % 2]
        scene = generate_scene(
            np.random.SeedSequence([_seed_int(seed), 3, i]).generate_state(1)[0],
            config,
            family,
        )
        image_id = f"img_{i:04d}"
        img_rel = f"images/{image_id}.png"
        gt_rel = f"gt/{image_id}.png"
        imageio.save_rgb8(scene.image, out_dir / img_rel)
        imageio.save_gray16(scene.gt_field, out_dir / gt_rel)
        fields[image_id] = scene.gt_field
        entries.append(
            ImageEntry(
                image_id=image_id,
                path=img_rel,
                width=config.width,
                height=config.height,
                gt_path=gt_rel,
            )
        )
    manifest = DatasetManifest(
        images=tuple(entries),
        target_h=config.height,
        target_w=config.width,
        root=out_dir,
    )
    save_manifest(manifest, out_dir / "manifest.jsonl")

    annotations = []
    tasks = generate_pair_tasks(manifest, seed, intra_only=(n_images < 2))
    for task in tasks:
        t = oracle_label(
            fields[task.a.image_id],
            task.a,
            fields[task.b.image_id],
            task.b,
            eps=config.equality_tol,
        )
        annotations.append(
            PairAnnotation(
                pair_id=task.task_id,
                a=task.a,
                b=task.b,
                t=t,
                kind=task.kind,
                source="synthetic",
            )
        )
    write_annotations(annotations, out_dir / "annotations.jsonl")

    # level ladder for tier flows: nearest-level index doubles as a tier id
    union_levels = sorted(
        set(np.round(config.level_values("a"), 9)) | set(np.round(config.level_values("b"), 9))
    )
    with (out_dir / "tiers.json").open("w") as fh:
        json.dump({"kind": "field_levels", "levels": [float(v) for v in union_levels]}, fh)
        fh.write("\n")
    return manifest, annotations
