"""Mean-teacher training loop over pairwise ordinal annotations.

Each step: draw annotations from the oversampling stream until the batch
holds the configured number of images, augment every image once
geometrically (shared by both views) and twice photometrically (student
and teacher get independent color jitter), run the student on the student
views and the teacher on the teacher views without gradient, read student
predictions at the transformed annotation points (bilinear), and descend
the weighted sum of the pairwise ranking loss and the student-teacher
consistency MSE.  The teacher is advanced by exponential moving average
after every optimizer step and never receives gradient.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np
import torch

from . import imageio
from .errors import EmptyAnnotationSet, TrainingDiverged
from .losses import pairwise_loss
from .model import ModelConfig, ScoreNet, clone_model, ema_update, load_checkpoint, save_checkpoint
from .pairgen import derived_rng
from .types import DatasetManifest, PairAnnotation


@dataclass(frozen=True)
class TrainConfig:
    loss_name: str = "rizz"
    margin: float = 0.5
    clamp: float = 1.0
    consistency_weight: float = 1.0
    ema_decay: float = 0.99
    epochs: int = 10
    batch_size: int = 8  # images per step
    lr: float = 1e-3
    seed: int = 0
    oversample_target: float = 0.5
    augment: bool = True
    crop_min_scale: float = 0.7
    flip_prob: float = 0.5
    jitter_strength: float = 0.1
    intra_only: bool = False
    equalize_budget: bool = False
    encoder_widths: tuple[int, ...] = (8, 16, 32, 64)
    pretrained_backbone: Optional[str] = None

    def __post_init__(self) -> None:
        if not (0.0 < self.oversample_target < 1.0):
            raise ValueError(f"oversample_target must be in (0, 1), got {self.oversample_target}")
        if not (0.0 <= self.ema_decay <= 1.0):
            raise ValueError(f"ema_decay must be in [0, 1], got {self.ema_decay}")


def oversample_stream(
    annotations: Sequence[PairAnnotation],
    rng: np.random.Generator,
    target: float = 0.5,
) -> Iterator[PairAnnotation]:
    """Infinite stream whose long-run inequality fraction approaches target.

    Draws uniformly within the equality / inequality pools; if one pool is
    empty the other is used, so every annotation keeps nonzero probability.
    """
    anns = list(annotations)
    if not anns:
        raise EmptyAnnotationSet("no annotations to sample from")
    eq = [a for a in anns if a.t == 0]
    neq = [a for a in anns if a.t != 0]
    while True:
        if neq and (not eq or rng.random() < target):
            pool = neq
        else:
            pool = eq
        yield pool[int(rng.integers(0, len(pool)))]


def equalize_label_budget(
    annotations: Sequence[PairAnnotation], manifest: DatasetManifest
) -> list[PairAnnotation]:
    """Trim a full 1-intra + 1-cross-per-image set to one label per image.

    Even-indexed images keep their intra label, odd-indexed keep their cross
    label, matching the equal-budget comparison against intra-only training.
    """
    keep_kind = {}
    for i, entry in enumerate(manifest.images):
        keep_kind[entry.image_id] = "intra" if i % 2 == 0 else "cross"
    return [a for a in annotations if keep_kind.get(a.a.image_id) == a.kind]


@dataclass
class GeometricTransform:
    x0: int
    y0: int
    cw: int
    ch: int
    flip: bool
    width: int
    height: int

    def map_point(self, x: float, y: float) -> Optional[tuple[float, float]]:
        """Point through crop-resize-flip; None if it leaves the crop."""
        if not (self.x0 <= x <= self.x0 + self.cw - 1 and self.y0 <= y <= self.y0 + self.ch - 1):
            return None
        nx = (x - self.x0 + 0.5) * (self.width / self.cw) - 0.5
        ny = (y - self.y0 + 0.5) * (self.height / self.ch) - 0.5
        if self.flip:
            nx = (self.width - 1) - nx
        return nx, ny


def sample_geometric(
    height: int, width: int, rng: np.random.Generator, config: TrainConfig
) -> GeometricTransform:
    if not config.augment:
        return GeometricTransform(0, 0, width, height, False, width, height)
    scale = rng.uniform(config.crop_min_scale, 1.0)
    ch = max(8, int(round(scale * height)))
    cw = max(8, int(round(scale * width)))
    y0 = int(rng.integers(0, height - ch + 1))
    x0 = int(rng.integers(0, width - cw + 1))
    flip = bool(rng.random() < config.flip_prob)
    return GeometricTransform(x0, y0, cw, ch, flip, width, height)


def apply_geometric(image: torch.Tensor, g: GeometricTransform) -> torch.Tensor:
    """Crop, resize back to full resolution, and optionally mirror a [3,H,W] image."""
    out = image[:, g.y0 : g.y0 + g.ch, g.x0 : g.x0 + g.cw]
    if (g.ch, g.cw) != (g.height, g.width):
        out = torch.nn.functional.interpolate(
            out.unsqueeze(0), size=(g.height, g.width), mode="bilinear", align_corners=False
        ).squeeze(0)
    if g.flip:
        out = torch.flip(out, dims=[-1])
    return out


def color_jitter(
    image: torch.Tensor, rng: np.random.Generator, strength: float
) -> torch.Tensor:
    """Brightness, contrast, and per-channel gain jitter; factors from rng."""
    if strength <= 0:
        return image
    lo, hi = 1.0 - strength, 1.0 + strength
    brightness = rng.uniform(lo, hi)
    contrast = rng.uniform(lo, hi)
    gains = rng.uniform(lo, hi, size=3)
    out = image * brightness
    mean = out.mean()
    out = (out - mean) * contrast + mean
    out = out * torch.as_tensor(gains, dtype=out.dtype).view(3, 1, 1)
    return out.clamp(0.0, 1.0)


@dataclass
class AugmentedImage:
    student: torch.Tensor
    teacher: torch.Tensor
    transform: GeometricTransform


def augment_pair(
    image: np.ndarray,
    points: Sequence[tuple[float, float]],
    rng: np.random.Generator,
    config: TrainConfig,
) -> tuple[AugmentedImage, list[Optional[tuple[float, float]]]]:
    """One shared geometric transform, two independent color jitters."""
    h, w = image.shape[:2]
    g = sample_geometric(h, w, rng, config)
    base = torch.from_numpy(np.ascontiguousarray(image, dtype=np.float32)).permute(2, 0, 1)
    geo = apply_geometric(base, g)
    if config.augment:
        student = color_jitter(geo, rng, config.jitter_strength)
        teacher = color_jitter(geo, rng, config.jitter_strength)
    else:
        student = geo
        teacher = geo.clone()
    mapped = [g.map_point(x, y) for (x, y) in points]
    return AugmentedImage(student=student, teacher=teacher, transform=g), mapped


def bilinear_read(
    maps: torch.Tensor, batch_idx: torch.Tensor, xs: torch.Tensor, ys: torch.Tensor
) -> torch.Tensor:
    """Differentiable bilinear sample of [B,H,W] maps at float coordinates."""
    _, h, w = maps.shape
    xs = xs.clamp(0.0, w - 1.0)
    ys = ys.clamp(0.0, h - 1.0)
    x0 = xs.floor().long().clamp(0, w - 1)
    y0 = ys.floor().long().clamp(0, h - 1)
    x1 = (x0 + 1).clamp(0, w - 1)
    y1 = (y0 + 1).clamp(0, h - 1)
    wx = xs - x0.to(xs.dtype)
    wy = ys - y0.to(ys.dtype)
    v00 = maps[batch_idx, y0, x0]
    v01 = maps[batch_idx, y0, x1]
    v10 = maps[batch_idx, y1, x0]
    v11 = maps[batch_idx, y1, x1]
    top = v00 * (1 - wx) + v01 * wx
    bot = v10 * (1 - wx) + v11 * wx
    return top * (1 - wy) + bot * wy


@dataclass
class _PreparedAnnotation:
    a_image: str
    b_image: str
    a_xy: tuple[float, float]
    b_xy: tuple[float, float]
    t: int
    kind: str


def _prepare_annotations(
    annotations: Sequence[PairAnnotation], manifest: DatasetManifest
) -> list[_PreparedAnnotation]:
    """Scale native-resolution integer points to target-resolution float coords."""
    prepared = []
    for ann in annotations:
        coords = []
        for p in (ann.a, ann.b):
            entry = manifest.entry(p.image_id)
            coords.append(
                imageio.scale_point(
                    p.x, p.y, entry.width, entry.height, manifest.target_w, manifest.target_h
                )
            )
        prepared.append(
            _PreparedAnnotation(
                a_image=ann.a.image_id,
                b_image=ann.b.image_id,
                a_xy=coords[0],
                b_xy=coords[1],
                t=ann.t,
                kind=ann.kind,
            )
        )
    return prepared


def _load_images(
    manifest: DatasetManifest, image_ids: Iterable[str]
) -> dict[str, np.ndarray]:
    images = {}
    for image_id in image_ids:
        entry = manifest.entry(image_id)
        raw = imageio.load_rgb8(manifest.resolve_path(entry.path))
        images[image_id] = imageio.resize_rgb(raw, manifest.target_h, manifest.target_w)
    return images


def assemble_batch(
    stream: Iterator[PairAnnotation], max_images: int
) -> tuple[list[str], list[PairAnnotation]]:
    """Draw annotations until the batch reaches max_images distinct images.

    The final draw may overflow by one image so cross pairs are never split.
    """
    image_ids: list[str] = []
    seen: set[str] = set()
    anns: list[PairAnnotation] = []
    while len(seen) < max_images and len(anns) < 4 * max_images:
        ann = next(stream)
        anns.append(ann)
        for image_id in (ann.a.image_id, ann.b.image_id):
            if image_id not in seen:
                seen.add(image_id)
                image_ids.append(image_id)
    return image_ids, anns


@dataclass
class TrainResult:
    student: ScoreNet
    teacher: ScoreNet
    history: list[dict]
    config: TrainConfig
    model_config: ModelConfig


def train(
    config: TrainConfig,
    manifest: DatasetManifest,
    annotations: Sequence[PairAnnotation],
    out_path: Optional[str | Path] = None,
    log_path: Optional[str | Path] = None,
) -> TrainResult:
    # tiny desk-scale nets run much faster single-threaded, and serial
    # execution keeps runs bit-reproducible
    torch.set_num_threads(1)

    anns = list(annotations)
    if config.equalize_budget:
        anns = equalize_label_budget(anns, manifest)
    if config.intra_only:
        anns = [a for a in anns if a.kind == "intra"]
    if not anns:
        raise EmptyAnnotationSet("no training annotations after filtering")

    used_ids = sorted({p.image_id for a in anns for p in (a.a, a.b)})
    images = _load_images(manifest, used_ids)
    prepared = {id(a): p for a, p in zip(anns, _prepare_annotations(anns, manifest))}

    model_config = ModelConfig(
        encoder_widths=tuple(config.encoder_widths),
        input_h=manifest.target_h,
        input_w=manifest.target_w,
    )
    torch.manual_seed(int(derived_rng(config.seed, "init").integers(0, 2**31 - 1)))
    student = ScoreNet(model_config)
    if config.pretrained_backbone:
        from .model import load_backbone

        ckpt = load_checkpoint(config.pretrained_backbone)
        load_backbone(student, ckpt.student_state)
    teacher = clone_model(student)
    for p in teacher.parameters():
        p.requires_grad_(False)
    teacher.eval()

    optimizer = torch.optim.Adam(student.parameters(), lr=config.lr)
    stream_rng = derived_rng(config.seed, "stream")
    aug_rng = derived_rng(config.seed, "augment")
    stream = oversample_stream(anns, stream_rng, config.oversample_target)

    history: list[dict] = []
    log_fh = Path(log_path).open("w") if log_path else None
    step = 0
    try:
        for _epoch in range(config.epochs):
            consumed = 0
            while consumed < len(anns):
                image_ids, batch_anns = assemble_batch(stream, config.batch_size)
                consumed += len(batch_anns)
                step += 1

                views = {}
                for image_id in image_ids:
                    aug, _ = augment_pair(images[image_id], [], aug_rng, config)
                    views[image_id] = aug
                student_in = torch.stack([views[i].student for i in image_ids])
                teacher_in = torch.stack([views[i].teacher for i in image_ids])

                student.train()
                out_s = student(student_in)
                with torch.no_grad():
                    out_t = teacher(teacher_in)

                index = {image_id: k for k, image_id in enumerate(image_ids)}
                rows = []
                for ann in batch_anns:
                    p = prepared[id(ann)]
                    pa = views[p.a_image].transform.map_point(*p.a_xy)
                    pb = views[p.b_image].transform.map_point(*p.b_xy)
                    if pa is None or pb is None:
                        continue  # point cropped out: drop the pair this step
                    rows.append((index[p.a_image], pa, index[p.b_image], pb, p.t))
                if rows:
                    ia = torch.tensor([r[0] for r in rows])
                    xa = torch.tensor([r[1][0] for r in rows], dtype=torch.float32)
                    ya = torch.tensor([r[1][1] for r in rows], dtype=torch.float32)
                    ib = torch.tensor([r[2] for r in rows])
                    xb = torch.tensor([r[3][0] for r in rows], dtype=torch.float32)
                    yb = torch.tensor([r[3][1] for r in rows], dtype=torch.float32)
                    tt = torch.tensor([r[4] for r in rows])
                    p_a = bilinear_read(out_s, ia, xa, ya)
                    p_b = bilinear_read(out_s, ib, xb, yb)
                    acc = pairwise_loss(
                        config.loss_name, p_a, p_b, tt, config.margin, config.clamp
                    ).mean()
                else:
                    acc = out_s.sum() * 0.0
                cons = ((out_s - out_t) ** 2).mean()
                total = acc + config.consistency_weight * cons

                if not torch.isfinite(total):
                    raise TrainingDiverged(
                        f"non-finite loss at step {step}: "
                        f"acc={float(acc.detach())} cons={float(cons.detach())}"
                    )
                optimizer.zero_grad()
                total.backward()
                optimizer.step()
                ema_update(teacher, student, config.ema_decay)

                record = {
                    "step": step,
                    "acc_loss": float(acc.detach()),
                    "cons_loss": float(cons.detach()),
                    "total": float(total.detach()),
                    "lr": config.lr,
                }
                history.append(record)
                if log_fh:
                    log_fh.write(json.dumps(record))
                    log_fh.write("\n")
    finally:
        if log_fh:
            log_fh.close()

    if out_path:
        save_checkpoint(
            out_path,
            student,
            teacher,
            step=step,
            ema_decay=config.ema_decay,
            loss_name=config.loss_name,
            margin=config.margin,
            extra={"epochs": config.epochs, "seed": config.seed, "lr": config.lr},
        )
    return TrainResult(
        student=student,
        teacher=teacher,
        history=history,
        config=config,
        model_config=model_config,
    )


def smoothed_losses(history: Sequence[dict], window: int = 20) -> list[float]:
    """Moving average of the total loss, for monotonicity checks on curves."""
    totals = [h["total"] for h in history]
    out = []
    for i in range(len(totals)):
        lo = max(0, i - window + 1)
        out.append(sum(totals[lo : i + 1]) / (i + 1 - lo))
    return out
