"""Label-budget scaling study: disagreement rate versus annotated image count.

For each seed a random image order is fixed and every fraction trains on a
nested prefix of it, so larger budgets strictly contain smaller ones.  The
reported number per fraction is the median validation disagreement rate
over the seeds.
"""
from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .evaluate import evaluate_model_hdr
from .pairgen import derived_rng
from .trainer import TrainConfig, train
from .types import DatasetManifest, PairAnnotation


def subset_annotations(
    annotations: Sequence[PairAnnotation], image_ids: set[str]
) -> list[PairAnnotation]:
    """Annotations whose endpoints both lie in the chosen image subset."""
    return [
        a for a in annotations if a.a.image_id in image_ids and a.b.image_id in image_ids
    ]


def sweep_label_budget(
    manifest: DatasetManifest,
    annotations: Sequence[PairAnnotation],
    val_manifest: DatasetManifest,
    val_annotations: Sequence[PairAnnotation],
    fractions: Sequence[float],
    seeds: Sequence[int],
    base_config: TrainConfig,
    tau: float = 0.25,
) -> dict:
    all_ids = [e.image_id for e in manifest.images]
    rows = []
    for seed in seeds:
        order = list(derived_rng(seed, "sweep-order").permutation(all_ids))
        for fraction in fractions:
            n = max(2, int(round(fraction * len(all_ids))))
            chosen = set(order[:n])
            anns = subset_annotations(annotations, chosen)
            config = replace(base_config, seed=int(seed))
            result = train(config, manifest, anns)
            hdr_rows = evaluate_model_hdr(result.student, val_manifest, val_annotations, [tau])
            rows.append(
                {
                    "fraction": float(fraction),
                    "seed": int(seed),
                    "n_images": n,
                    "n_annotations": len(anns),
                    "hdr": hdr_rows[0].hdr,
                    "tau": tau,
                }
            )
    medians = {}
    for fraction in fractions:
        values = [r["hdr"] for r in rows if r["fraction"] == float(fraction)]
        medians[float(fraction)] = float(np.median(values))
    return {"rows": rows, "medians": medians, "tau": tau}


def write_sweep_report(report: dict, path: str | Path) -> None:
    doc = {
        "tau": report["tau"],
        "medians": {str(k): v for k, v in report["medians"].items()},
        "rows": report["rows"],
    }
    with Path(path).open("w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
