"""Pairwise ordinal ranking losses and the composite training loss.

Four interchangeable pairwise losses over a prediction pair (p_a, p_b) and
an ordinal label t in {-1, 0, 1}:

- diw      log-ratio ranking loss: ln(1 + exp(-t(p_b - p_a))); squared error
           for equality pairs.  Strictly positive for any finite difference,
           so it keeps pushing inequality pairs apart.
- snow     same, but the difference is clamped to [-c, c] first.
- rizz     squared hinge with margin L: max{0, L - t(p_b - p_a)}^2; zero once
           the pair is separated by at least L.
- rizz_l1  linear hinge with margin L and absolute error for equality pairs.

Scalar forms (with analytic gradients) are the reference implementation;
batched torch forms are used inside the training loop and are tested for
equivalence against the scalar forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .errors import ShapeMismatch

LOSS_NAMES = ("rizz", "rizz_l1", "diw", "snow")

DEFAULT_MARGIN = 0.5
DEFAULT_CLAMP = 1.0
DEFAULT_CONSISTENCY_WEIGHT = 1.0


@dataclass(frozen=True)
class LossConfig:
    margin: float = DEFAULT_MARGIN
    clamp: float = DEFAULT_CLAMP
    consistency_weight: float = DEFAULT_CONSISTENCY_WEIGHT

    def __post_init__(self) -> None:
        if self.margin <= 0:
            raise ValueError(f"margin must be > 0, got {self.margin}")
        if self.clamp <= 0:
            raise ValueError(f"clamp must be > 0, got {self.clamp}")
        if self.consistency_weight < 0:
            raise ValueError(f"consistency_weight must be >= 0, got {self.consistency_weight}")


def _softplus(z: float) -> float:
    # ln(1 + exp(z)) without overflow for large |z|
    return max(z, 0.0) + math.log1p(math.exp(-abs(z)))


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def loss_diw(p_a: float, p_b: float, t: int) -> float:
    d = p_b - p_a
    if t == 0:
        return d * d
    return _softplus(-t * d)


def loss_snow(p_a: float, p_b: float, t: int, clamp: float = DEFAULT_CLAMP) -> float:
    d = p_b - p_a
    if t == 0:
        return d * d
    return _softplus(-t * min(max(d, -clamp), clamp))


def loss_rizz(p_a: float, p_b: float, t: int, margin: float = DEFAULT_MARGIN) -> float:
    d = p_b - p_a
    if t == 0:
        return d * d
    h = max(0.0, margin - t * d)
    return h * h


def loss_rizz_l1(p_a: float, p_b: float, t: int, margin: float = DEFAULT_MARGIN) -> float:
    d = p_b - p_a
    if t == 0:
        return abs(d)
    return max(0.0, margin - t * d)


def grad_diw(p_a: float, p_b: float, t: int) -> tuple[float, float]:
    d = p_b - p_a
    if t == 0:
        g = 2.0 * d
    else:
        g = -t * _sigmoid(-t * d)
    return -g, g


def grad_snow(p_a: float, p_b: float, t: int, clamp: float = DEFAULT_CLAMP) -> tuple[float, float]:
    d = p_b - p_a
    if t == 0:
        g = 2.0 * d
    elif abs(d) > clamp:
        g = 0.0
    else:
        g = -t * _sigmoid(-t * d)
    return -g, g


def grad_rizz(p_a: float, p_b: float, t: int, margin: float = DEFAULT_MARGIN) -> tuple[float, float]:
    d = p_b - p_a
    if t == 0:
        g = 2.0 * d
    else:
        h = margin - t * d
        g = -2.0 * t * h if h > 0 else 0.0
    return -g, g


def grad_rizz_l1(
    p_a: float, p_b: float, t: int, margin: float = DEFAULT_MARGIN
) -> tuple[float, float]:
    d = p_b - p_a
    if t == 0:
        g = math.copysign(1.0, d) if d != 0 else 0.0
    else:
        g = -float(t) if margin - t * d > 0 else 0.0
    return -g, g


def scalar_loss(
    name: str,
    p_a: float,
    p_b: float,
    t: int,
    margin: float = DEFAULT_MARGIN,
    clamp: float = DEFAULT_CLAMP,
) -> float:
    if name == "diw":
        return loss_diw(p_a, p_b, t)
    if name == "snow":
        return loss_snow(p_a, p_b, t, clamp)
    if name == "rizz":
        return loss_rizz(p_a, p_b, t, margin)
    if name == "rizz_l1":
        return loss_rizz_l1(p_a, p_b, t, margin)
    raise ValueError(f"unknown loss {name!r}; expected one of {LOSS_NAMES}")


def scalar_grad(
    name: str,
    p_a: float,
    p_b: float,
    t: int,
    margin: float = DEFAULT_MARGIN,
    clamp: float = DEFAULT_CLAMP,
) -> tuple[float, float]:
    """Analytic partial derivatives (dL/dp_a, dL/dp_b)."""
    if name == "diw":
        return grad_diw(p_a, p_b, t)
    if name == "snow":
        return grad_snow(p_a, p_b, t, clamp)
    if name == "rizz":
        return grad_rizz(p_a, p_b, t, margin)
    if name == "rizz_l1":
        return grad_rizz_l1(p_a, p_b, t, margin)
    raise ValueError(f"unknown loss {name!r}; expected one of {LOSS_NAMES}")


def pairwise_loss(
    name: str,
    p_a: torch.Tensor,
    p_b: torch.Tensor,
    t: torch.Tensor,
    margin: float = DEFAULT_MARGIN,
    clamp: float = DEFAULT_CLAMP,
) -> torch.Tensor:
    """Elementwise batched loss; differentiable with respect to predictions."""
    d = p_b - p_a
    tf = t.to(d.dtype)
    eq = t == 0
    if name == "diw":
        ineq = torch.nn.functional.softplus(-tf * d)
        eq_branch = d * d
    elif name == "snow":
        ineq = torch.nn.functional.softplus(-tf * d.clamp(-clamp, clamp))
        eq_branch = d * d
    elif name == "rizz":
        h = torch.relu(margin - tf * d)
        ineq = h * h
        eq_branch = d * d
    elif name == "rizz_l1":
        ineq = torch.relu(margin - tf * d)
        eq_branch = d.abs()
    else:
        raise ValueError(f"unknown loss {name!r}; expected one of {LOSS_NAMES}")
    return torch.where(eq, eq_branch, ineq)


def consistency_loss(student: np.ndarray, teacher: np.ndarray) -> float:
    """Mean squared error between two prediction maps."""
    student = np.asarray(student, dtype=np.float64)
    teacher = np.asarray(teacher, dtype=np.float64)
    if student.shape != teacher.shape:
        raise ShapeMismatch(f"shape mismatch: {student.shape} vs {teacher.shape}")
    diff = student - teacher
    return float(np.mean(diff * diff))


def total_loss(acc: float, cons: float, consistency_weight: float) -> float:
    """Weighted sum of the pairwise accuracy term and the consistency term."""
    return acc + consistency_weight * cons
