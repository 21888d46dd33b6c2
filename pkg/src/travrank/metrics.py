"""Human disagreement rate, tier calibration, and segmentation metrics."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import EmptySet, EmptyTier, NonMonotoneCutoffs, ShapeMismatch

DEFAULT_THRESHOLDS = (0.1, 0.25, 0.5)


def ordinal_of(p_a: float, p_b: float, tau: float) -> int:
    """Ordinal implied by a prediction pair at threshold tau.

    1 if p_b - p_a > tau, -1 if p_b - p_a < -tau, else 0 (the equality band
    is inclusive: |p_b - p_a| <= tau).
    """
    d = p_b - p_a
    if d > tau:
        return 1
    if d < -tau:
        return -1
    return 0


@dataclass(frozen=True)
class HdrRow:
    """Disagreement rates at one threshold, split by ground-truth label class."""

    tau: float
    hdr: float
    hdr_eq: Optional[float]
    hdr_neq: Optional[float]
    n: int
    n_eq: int
    n_neq: int

    def to_json(self) -> dict:
        return {
            "tau": self.tau,
            "hdr": self.hdr,
            "hdr_eq": self.hdr_eq,
            "hdr_neq": self.hdr_neq,
            "n": self.n,
            "n_eq": self.n_eq,
            "n_neq": self.n_neq,
        }


def hdr(
    predictions: Sequence[tuple[float, float]],
    labels: Sequence[int],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> list[HdrRow]:
    """Fraction of pairs whose prediction-implied ordinal disagrees with the label.

    Rates are reported overall and restricted to equality / inequality
    ground truth; a split with no pairs is reported as absent (None).
    """
    if len(predictions) != len(labels):
        raise ShapeMismatch(f"{len(predictions)} prediction pairs vs {len(labels)} labels")
    if not predictions:
        raise EmptySet("hdr needs at least one labeled pair")
    rows = []
    for tau in thresholds:
        wrong = wrong_eq = wrong_neq = 0
        n_eq = n_neq = 0
        for (p_a, p_b), t in zip(predictions, labels):
            miss = ordinal_of(p_a, p_b, tau) != t
            wrong += miss
            if t == 0:
                n_eq += 1
                wrong_eq += miss
            else:
                n_neq += 1
                wrong_neq += miss
        rows.append(
            HdrRow(
                tau=float(tau),
                hdr=wrong / len(labels),
                hdr_eq=(wrong_eq / n_eq) if n_eq else None,
                hdr_neq=(wrong_neq / n_neq) if n_neq else None,
                n=len(labels),
                n_eq=n_eq,
                n_neq=n_neq,
            )
        )
    return rows


def write_hdr_report(rows: Sequence[HdrRow], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for row in rows:
            fh.write(json.dumps(row.to_json()))
            fh.write("\n")


def format_hdr_table(rows: Sequence[HdrRow]) -> str:
    def cell(v: Optional[float]) -> str:
        return "   --" if v is None else f"{v:.3f}"

    lines = ["  tau    hdr   hdr_eq  hdr_neq      n   n_eq  n_neq"]
    for r in rows:
        lines.append(
            f"{r.tau:5.2f}  {r.hdr:.3f}  {cell(r.hdr_eq):>6}  {cell(r.hdr_neq):>6} "
            f"{r.n:6d} {r.n_eq:6d} {r.n_neq:6d}"
        )
    return "\n".join(lines)


@dataclass(frozen=True)
class TierCutoffs:
    """Score boundaries between adjacent traversability tiers (descending)."""

    cutoff_3: float
    cutoff_2: float
    cutoff_1: float
    tier_means: tuple[float, float, float, float]
    tier_stds: tuple[float, float, float, float]

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.cutoff_3, self.cutoff_2, self.cutoff_1)

    def to_json(self) -> dict:
        return {
            "cutoff_3": self.cutoff_3,
            "cutoff_2": self.cutoff_2,
            "cutoff_1": self.cutoff_1,
            "tier_means": list(self.tier_means),
            "tier_stds": list(self.tier_stds),
        }

    @classmethod
    def from_json(cls, raw: dict) -> "TierCutoffs":
        return cls(
            cutoff_3=float(raw["cutoff_3"]),
            cutoff_2=float(raw["cutoff_2"]),
            cutoff_1=float(raw["cutoff_1"]),
            tier_means=tuple(raw["tier_means"]),
            tier_stds=tuple(raw["tier_stds"]),
        )


def tier_cutoffs(train_scores: Mapping[int, Sequence[float]]) -> TierCutoffs:
    """Boundary between tier N and N-1: midpoint of (mu_N - sigma_N) and
    (mu_{N-1} + sigma_{N-1}), with sample mean and population std."""
    means = []
    stds = []
    for tier in (0, 1, 2, 3):
        scores = np.asarray(train_scores.get(tier, ()), dtype=np.float64)
        if scores.size == 0:
            raise EmptyTier(f"tier {tier} has no scores")
        means.append(float(scores.mean()))
        stds.append(float(scores.std()))  # population std (divide by n)
    cuts = []
    for n in (3, 2, 1):
        cuts.append(((means[n] - stds[n]) + (means[n - 1] + stds[n - 1])) / 2.0)
    c3, c2, c1 = cuts
    if not (c3 > c2 > c1):
        raise NonMonotoneCutoffs(f"cutoffs not strictly descending: {c3}, {c2}, {c1}")
    return TierCutoffs(
        cutoff_3=c3,
        cutoff_2=c2,
        cutoff_1=c1,
        tier_means=tuple(means),
        tier_stds=tuple(stds),
    )


def discretize(score_map: np.ndarray, cutoffs: TierCutoffs) -> np.ndarray:
    """Map scores to tiers; a score must exceed a cutoff to enter the higher tier."""
    scores = np.asarray(score_map)
    tiers = np.zeros(scores.shape, dtype=np.int64)
    tiers[scores > cutoffs.cutoff_1] = 1
    tiers[scores > cutoffs.cutoff_2] = 2
    tiers[scores > cutoffs.cutoff_3] = 3
    return tiers


@dataclass(frozen=True)
class SegMetrics:
    miou: float
    fw_miou: float
    macc: float
    fw_macc: float
    per_class_iou: dict
    per_class_acc: dict

    def to_json(self) -> dict:
        return {
            "miou": self.miou,
            "fw_miou": self.fw_miou,
            "macc": self.macc,
            "fw_macc": self.fw_macc,
            "per_class_iou": {str(k): v for k, v in self.per_class_iou.items()},
            "per_class_acc": {str(k): v for k, v in self.per_class_acc.items()},
        }


def seg_metrics(pred_tiers: np.ndarray, gt_tiers: np.ndarray, n_classes: int = 4) -> SegMetrics:
    """IOU and pixel accuracy per class, plus unweighted and
    frequency-weighted means over classes present in the ground truth."""
    pred = np.asarray(pred_tiers)
    gt = np.asarray(gt_tiers)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"shape mismatch: {pred.shape} vs {gt.shape}")
    pred = pred.ravel()
    gt = gt.ravel()
    total = gt.size
    iou: dict[int, float] = {}
    acc: dict[int, float] = {}
    freq: dict[int, float] = {}
    for c in range(n_classes):
        in_pred = pred == c
        in_gt = gt == c
        n_gt = int(in_gt.sum())
        if n_gt == 0 and not in_pred.any():
            continue
        tp = int((in_pred & in_gt).sum())
        union = int((in_pred | in_gt).sum())
        if n_gt == 0:
            # predicted-only class: weight 0, excluded from unweighted means
            continue
        iou[c] = tp / union
        acc[c] = tp / n_gt
        freq[c] = n_gt / total
    if not iou:
        raise EmptySet("no classes present in ground truth")
    present = sorted(iou)
    return SegMetrics(
        miou=float(np.mean([iou[c] for c in present])),
        fw_miou=float(sum(freq[c] * iou[c] for c in present)),
        macc=float(np.mean([acc[c] for c in present])),
        fw_macc=float(sum(freq[c] * acc[c] for c in present)),
        per_class_iou=iou,
        per_class_acc=acc,
    )
