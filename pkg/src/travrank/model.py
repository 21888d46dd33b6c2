"""Per-pixel traversability network and teacher parameter maintenance.

A small strided-convolution encoder with a conv + nearest-neighbor-upsample
decoder and a 1x1 sigmoid head, mapping an RGB image to a dense score map
in (0, 1) at the input resolution.  The architecture contract (shape
preservation, sigmoid head, upsample-based decoder) is what matters here;
the encoder is deliberately tiny so that desk-scale training on CPU is
practical.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import ShapeMismatch

CHECKPOINT_FORMAT = "travrank-checkpoint-v1"


@dataclass(frozen=True)
class ModelConfig:
    encoder_widths: tuple[int, ...] = (16, 32, 64, 128)
    input_h: int = 240
    input_w: int = 424

    @classmethod
    def from_json(cls, raw: dict) -> "ModelConfig":
        return cls(
            encoder_widths=tuple(raw["encoder_widths"]),
            input_h=int(raw["input_h"]),
            input_w=int(raw["input_w"]),
        )


class ScoreNet(nn.Module):
    """Dense regressor f: [B, 3, H, W] -> [B, H, W] with outputs in (0, 1).

    Strided-conv encoder; the decoder upsamples with nearest-neighbor
    interpolation, concatenates the encoder feature at that resolution
    (skip connection), and applies a 3x3 convolution.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        widths = list(config.encoder_widths)
        enc = []
        in_ch = 3
        for w in widths:
            enc.append(
                nn.Sequential(
                    nn.Conv2d(in_ch, w, 3, stride=2, padding=1),
                    nn.ReLU(inplace=True),
                    nn.Conv2d(w, w, 3, stride=1, padding=1),
                    nn.ReLU(inplace=True),
                )
            )
            in_ch = w
        self.encoder = nn.ModuleList(enc)
        # skip channels at each decoder resolution, deepest first
        skip_ch = list(reversed([3] + widths[:-1]))
        dec_out = list(reversed(widths[:-1])) + [widths[0]]
        dec = []
        for skip, w in zip(skip_ch, dec_out):
            dec.append(
                nn.Sequential(
                    nn.Conv2d(in_ch + skip, w, 3, stride=1, padding=1),
                    nn.ReLU(inplace=True),
                )
            )
            in_ch = w
        self.decoder = nn.ModuleList(dec)
        self.head = nn.Conv2d(in_ch, 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeMismatch(f"expected [B, 3, H, W] input, got {tuple(x.shape)}")
        if x.shape[2] != self.config.input_h or x.shape[3] != self.config.input_w:
            raise ShapeMismatch(
                f"input is {x.shape[2]}x{x.shape[3]}, model expects "
                f"{self.config.input_h}x{self.config.input_w}"
            )
        skips = []
        for stage in self.encoder:
            skips.append(x)
            x = stage(x)
        for stage, skip in zip(self.decoder, reversed(skips)):
            x = nn.functional.interpolate(x, size=skip.shape[2:], mode="nearest")
            x = stage(torch.cat([x, skip], dim=1))
        return torch.sigmoid(self.head(x)).squeeze(1)


def build_model(config: ModelConfig, seed: int | None = None) -> ScoreNet:
    if seed is not None:
        torch.manual_seed(seed)
    return ScoreNet(config)


def predict_map(model: ScoreNet, image: np.ndarray) -> np.ndarray:
    """Score map for one HxWx3 float image in [0, 1] (eval mode, no grad)."""
    model.eval()
    with torch.no_grad():
        x = torch.from_numpy(np.ascontiguousarray(image, dtype=np.float32))
        x = x.permute(2, 0, 1).unsqueeze(0)
        return model(x).squeeze(0).numpy()


@torch.no_grad()
def ema_update(teacher: nn.Module, student: nn.Module, decay: float) -> None:
    """teacher <- decay * teacher + (1 - decay) * student, per parameter."""
    t_params = dict(teacher.named_parameters())
    s_params = dict(student.named_parameters())
    if t_params.keys() != s_params.keys():
        raise ShapeMismatch("teacher and student parameter names differ")
    for name, p_t in t_params.items():
        p_s = s_params[name]
        if p_t.shape != p_s.shape:
            raise ShapeMismatch(f"parameter {name!r}: {tuple(p_t.shape)} vs {tuple(p_s.shape)}")
        p_t.mul_(decay).add_(p_s, alpha=1.0 - decay)


def clone_model(model: ScoreNet) -> ScoreNet:
    twin = ScoreNet(model.config)
    twin.load_state_dict(model.state_dict())
    return twin


def save_checkpoint(
    path: str | Path,
    student: ScoreNet,
    teacher: ScoreNet,
    step: int,
    ema_decay: float,
    loss_name: str,
    margin: float,
    extra: dict | None = None,
) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "config": asdict(student.config),
        "step": step,
        "ema_decay": ema_decay,
        "loss_name": loss_name,
        "margin": margin,
        "student": student.state_dict(),
        "teacher": teacher.state_dict(),
    }
    if extra:
        doc["extra"] = extra
    torch.save(doc, path)


@dataclass
class Checkpoint:
    config: ModelConfig
    step: int
    ema_decay: float
    loss_name: str
    margin: float
    student_state: dict
    teacher_state: dict
    extra: dict

    def build(self, params: str = "student") -> ScoreNet:
        model = ScoreNet(self.config)
        model.load_state_dict(self.student_state if params == "student" else self.teacher_state)
        model.eval()
        return model


def load_checkpoint(path: str | Path) -> Checkpoint:
    doc = torch.load(path, weights_only=True)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a recognized checkpoint: {path}")
    return Checkpoint(
        config=ModelConfig.from_json(doc["config"]),
        step=int(doc["step"]),
        ema_decay=float(doc["ema_decay"]),
        loss_name=str(doc["loss_name"]),
        margin=float(doc["margin"]),
        student_state=doc["student"],
        teacher_state=doc["teacher"],
        extra=doc.get("extra", {}),
    )


def load_backbone(model: ScoreNet, state: dict) -> list[str]:
    """Import all layers except the head (pretraining hook); returns loaded names."""
    own = model.state_dict()
    loaded = []
    for name, tensor in state.items():
        if name.startswith("head."):
            continue
        if name in own and own[name].shape == tensor.shape:
            own[name] = tensor
            loaded.append(name)
    model.load_state_dict(own)
    return loaded
