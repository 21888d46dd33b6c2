"""Model evaluation: disagreement rates on labeled pairs, tier calibration,
and tier-segmentation scoring against dense ground truth."""
from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from . import imageio
from .errors import EmptyTier
from .metrics import (
    DEFAULT_THRESHOLDS,
    HdrRow,
    SegMetrics,
    TierCutoffs,
    discretize,
    hdr,
    seg_metrics,
    tier_cutoffs,
)
from .model import ScoreNet, load_checkpoint, predict_map
from .pairgen import TierSpec, sample_biased_point
from .types import DatasetManifest, PairAnnotation


def predict_scores(
    model: ScoreNet, manifest: DatasetManifest, image_ids: Sequence[str]
) -> dict[str, np.ndarray]:
    """Score maps at the target resolution for the named images."""
    out = {}
    for image_id in image_ids:
        entry = manifest.entry(image_id)
        image = imageio.load_rgb8(manifest.resolve_path(entry.path))
        image = imageio.resize_rgb(image, manifest.target_h, manifest.target_w)
        out[image_id] = predict_map(model, image)
    return out


def annotation_pairs(
    score_maps: dict[str, np.ndarray],
    manifest: DatasetManifest,
    annotations: Sequence[PairAnnotation],
) -> tuple[list[tuple[float, float]], list[int]]:
    """Prediction pairs at annotation points (bilinear read at scaled coords)."""
    pairs = []
    labels = []
    for ann in annotations:
        values = []
        for p in (ann.a, ann.b):
            entry = manifest.entry(p.image_id)
            x, y = imageio.scale_point(
                p.x, p.y, entry.width, entry.height, manifest.target_w, manifest.target_h
            )
            values.append(imageio.bilinear_at(score_maps[p.image_id], x, y))
        pairs.append((values[0], values[1]))
        labels.append(ann.t)
    return pairs, labels


def evaluate_model_hdr(
    model: ScoreNet,
    manifest: DatasetManifest,
    annotations: Sequence[PairAnnotation],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> list[HdrRow]:
    image_ids = sorted({p.image_id for a in annotations for p in (a.a, a.b)})
    score_maps = predict_scores(model, manifest, image_ids)
    pairs, labels = annotation_pairs(score_maps, manifest, annotations)
    return hdr(pairs, labels, thresholds)


def evaluate_checkpoint_hdr(
    checkpoint_path: str | Path,
    manifest: DatasetManifest,
    annotations: Sequence[PairAnnotation],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    params: str = "student",
) -> list[HdrRow]:
    model = load_checkpoint(checkpoint_path).build(params)
    return evaluate_model_hdr(model, manifest, annotations, thresholds)


def collect_tier_scores(
    model: ScoreNet,
    manifest: DatasetManifest,
    tier_spec: TierSpec,
    rng: np.random.Generator,
    samples_per_image: int = 200,
    bottom_fraction: float = 0.0,
) -> dict[int, list[float]]:
    """Model scores grouped by ground-truth tier, from random pixel samples."""
    scores: dict[int, list[float]] = {}
    for entry in manifest.images:
        tier_map = tier_spec.tier_map_for(manifest, entry.image_id)
        score_map = predict_scores(model, manifest, [entry.image_id])[entry.image_id]
        gh, gw = tier_map.shape
        for _ in range(samples_per_image):
            x, y = sample_biased_point(gw, gh, rng, bottom_fraction)
            tier = int(tier_map[y, x])
            sx, sy = imageio.scale_point(x, y, gw, gh, manifest.target_w, manifest.target_h)
            scores.setdefault(tier, []).append(imageio.bilinear_at(score_map, sx, sy))
    return scores


def calibrate_cutoffs(
    model: ScoreNet,
    manifest: DatasetManifest,
    tier_spec: TierSpec,
    seed: int = 0,
    samples_per_image: int = 200,
    bottom_fraction: float = 0.0,
) -> TierCutoffs:
    rng = np.random.default_rng(seed)
    scores = collect_tier_scores(
        model, manifest, tier_spec, rng, samples_per_image, bottom_fraction
    )
    for tier in (0, 1, 2, 3):
        if tier not in scores:
            raise EmptyTier(f"no samples landed in tier {tier}; need more samples or images")
    return tier_cutoffs(scores)


def evaluate_segmentation(
    model: ScoreNet,
    manifest: DatasetManifest,
    tier_spec: TierSpec,
    cutoffs: TierCutoffs,
    n_classes: int = 4,
) -> SegMetrics:
    """Discretized prediction tiers vs ground-truth tiers over all images."""
    preds = []
    gts = []
    for entry in manifest.images:
        tier_map = tier_spec.tier_map_for(manifest, entry.image_id)
        score_map = predict_scores(model, manifest, [entry.image_id])[entry.image_id]
        if score_map.shape != tier_map.shape:
            score_map = _resize_field(score_map, tier_map.shape)
        preds.append(discretize(score_map, cutoffs).ravel())
        gts.append(tier_map.ravel())
    return seg_metrics(np.concatenate(preds), np.concatenate(gts), n_classes=n_classes)


def _resize_field(field: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    t = torch.from_numpy(field).unsqueeze(0).unsqueeze(0)
    out = torch.nn.functional.interpolate(t, size=shape, mode="bilinear", align_corners=False)
    return out.squeeze(0).squeeze(0).numpy()
