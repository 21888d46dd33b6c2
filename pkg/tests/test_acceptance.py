"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s to see them live)."""
import math
import time
from contextlib import contextmanager
from dataclasses import replace

import numpy as np
import pytest
import torch

from travrank import imageio
from travrank.cli import main as cli_main
from travrank.evaluate import evaluate_model_hdr, predict_scores
from travrank.losses import loss_diw, loss_rizz, scalar_grad, scalar_loss, LOSS_NAMES
from travrank.metrics import hdr, seg_metrics, tier_cutoffs
from travrank.model import ModelConfig, build_model, ema_update
from travrank.pairgen import derived_rng, generate_pair_tasks
from travrank.synth import SynthConfig, build_synth_dataset
from travrank.trainer import TrainConfig, train
from travrank.types import (
    DatasetManifest,
    ImageEntry,
    audit_label_ratio,
    equivalent_label_count,
)


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL", flush=True)
        raise
    print(f"ACCEPTANCE {name}: PASS", flush=True)


# ---------------------------------------------------------------- fixtures

@pytest.fixture(scope="module")
def e2e_world(tmp_path_factory):
    root = tmp_path_factory.mktemp("e2e")
    config = SynthConfig()
    train_man, train_anns = build_synth_dataset(root / "train", 200, seed=11, config=config)
    val_man, val_anns = build_synth_dataset(root / "val", 100, seed=999, config=config)
    return {
        "dir": root,
        "train": (train_man, train_anns),
        "val": (val_man, val_anns),
    }


@pytest.fixture(scope="module")
def e2e_result(e2e_world):
    train_man, train_anns = e2e_world["train"]
    config = TrainConfig(loss_name="rizz", epochs=10, seed=0, batch_size=8)
    start = time.perf_counter()
    result = train(config, train_man, train_anns)
    seconds = time.perf_counter() - start
    return result, seconds


@pytest.fixture(scope="module")
def stress_world(tmp_path_factory):
    root = tmp_path_factory.mktemp("stress")
    train_man, train_anns = build_synth_dataset(root / "train", 80, seed=21, stress=True)
    val_man, val_anns = build_synth_dataset(root / "val", 60, seed=888, stress=True)
    return {
        "train": (train_man, train_anns),
        "val": (val_man, [a for a in val_anns if a.kind == "cross"]),
    }


# ---------------------------------------------------------------- criteria

def test_c01_loss_oracle_equivalence():
    def oracle(name, p_a, p_b, t, margin=0.5, clamp=1.0):
        d = p_b - p_a
        if name == "diw":
            return d * d if t == 0 else math.log(1.0 + math.exp(-t * d))
        if name == "snow":
            dc = max(-clamp, min(clamp, d))
            return d * d if t == 0 else math.log(1.0 + math.exp(-t * dc))
        if name == "rizz":
            return d * d if t == 0 else max(0.0, margin - t * d) ** 2
        return abs(d) if t == 0 else max(0.0, margin - t * d)

    with criterion("loss-oracle-equivalence"):
        rng = np.random.default_rng(2024)
        start = time.perf_counter()
        for name in LOSS_NAMES:
            for _ in range(1000):
                p_a = float(rng.uniform(0, 1))
                p_b = float(rng.uniform(0, 1))
                t = int(rng.integers(-1, 2))
                got = scalar_loss(name, p_a, p_b, t, margin=0.5, clamp=1.0)
                assert abs(got - oracle(name, p_a, p_b, t)) < 1e-6
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0, f"oracle comparison took {elapsed:.2f}s"


def test_c02_gradient_checks():
    def near_kink(name, p_a, p_b, t, margin=0.5, clamp=1.0, width=1e-3):
        d = p_b - p_a
        if t == 0:
            return name == "rizz_l1" and abs(d) < width
        if name in ("rizz", "rizz_l1") and abs(margin - t * d) < width:
            return True
        return name == "snow" and abs(abs(d) - clamp) < width

    with criterion("gradient-finite-difference"):
        h = 1e-4
        start = time.perf_counter()
        for name in LOSS_NAMES:
            rng = np.random.default_rng(name.encode()[0])
            checked = 0
            while checked < 1000:
                p_a = float(rng.uniform(0, 1))
                p_b = float(rng.uniform(0, 1))
                t = int(rng.integers(-1, 2))
                if near_kink(name, p_a, p_b, t):
                    continue
                ga, gb = scalar_grad(name, p_a, p_b, t)
                fa = (scalar_loss(name, p_a + h, p_b, t) - scalar_loss(name, p_a - h, p_b, t)) / (
                    2 * h
                )
                fb = (scalar_loss(name, p_a, p_b + h, t) - scalar_loss(name, p_a, p_b - h, t)) / (
                    2 * h
                )
                assert abs(ga - fa) <= 1e-4 * max(1.0, abs(fa)), (name, p_a, p_b, t)
                assert abs(gb - fb) <= 1e-4 * max(1.0, abs(fb)), (name, p_a, p_b, t)
                checked += 1
        elapsed = time.perf_counter() - start
        assert elapsed < 10.0, f"gradient checks took {elapsed:.2f}s"


def test_c03_squared_hinge_zero_set():
    with criterion("squared-hinge-zero-set"):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            t = int(rng.choice([-1, 1]))
            gap = float(rng.uniform(0.5, 1.0))
            p_a = float(rng.uniform(0, 1.0 - gap))
            p_b = p_a + gap
            if t == -1:
                p_a, p_b = p_b, p_a
            assert loss_rizz(p_a, p_b, t, margin=0.5) == 0.0
            assert scalar_grad("rizz", p_a, p_b, t) == (0.0, 0.0)
            assert loss_diw(p_a, p_b, t) > 0.0


def test_c04_hdr_bruteforce_oracle():
    def oracle(pairs, labels, tau):
        wrong = wrong_eq = wrong_neq = n_eq = n_neq = 0
        for (p_a, p_b), t in zip(pairs, labels):
            d = p_b - p_a
            o = 1 if d > tau else (-1 if d < -tau else 0)
            miss = int(o != t)
            wrong += miss
            if t == 0:
                n_eq, wrong_eq = n_eq + 1, wrong_eq + miss
            else:
                n_neq, wrong_neq = n_neq + 1, wrong_neq + miss
        return (
            wrong / len(labels),
            wrong_eq / n_eq if n_eq else None,
            wrong_neq / n_neq if n_neq else None,
        )

    with criterion("hdr-bruteforce-oracle"):
        rng = np.random.default_rng(404)
        for _ in range(100):
            n = int(rng.integers(1, 201))
            pairs = [tuple(rng.uniform(0, 1, size=2)) for _ in range(n)]
            labels = [int(v) for v in rng.integers(-1, 2, size=n)]
            tau = float(rng.choice([0.1, 0.25, 0.5]))
            (row,) = hdr(pairs, labels, [tau])
            want = oracle(pairs, labels, tau)
            assert (row.hdr, row.hdr_eq, row.hdr_neq) == want
            # decomposition identity
            acc = (row.n_eq * row.hdr_eq if row.n_eq else 0.0) + (
                row.n_neq * row.hdr_neq if row.n_neq else 0.0
            )
            assert row.n * row.hdr == pytest.approx(acc, abs=1e-9)


def test_c05_annotation_protocol_audit():
    with criterion("annotation-protocol-audit"):
        n = 40
        manifest = DatasetManifest(
            images=tuple(
                ImageEntry(f"img{i:05d}", f"img{i:05d}.png", 424, 240) for i in range(n)
            )
        )
        tasks = generate_pair_tasks(manifest, seed=12345)
        assert len(tasks) == 2 * n
        from travrank.types import PairAnnotation

        anns = [
            PairAnnotation(t.task_id, t.a, t.b, 0, t.kind, "synthetic") for t in tasks
        ]
        audit = audit_label_ratio(anns, manifest)
        assert audit["intra_per_image_ok"] and audit["cross_per_image_ok"]
        assert audit["labels_per_two_images"] == pytest.approx(3.0)
        # the published dataset size reproduces arithmetically
        assert equivalent_label_count(16558, 16558) == pytest.approx(24837.0)
        for t in tasks:
            if t.kind == "intra":
                assert math.hypot(t.a.x - t.b.x, t.a.y - t.b.y) >= 12.0


def test_c06_ema_closed_form():
    with criterion("ema-closed-form"):
        config = ModelConfig(encoder_widths=(4, 8), input_h=48, input_w=64)
        teacher = build_model(config, seed=1).double()
        student = build_model(config, seed=2).double()
        t0 = {k: v.clone() for k, v in teacher.state_dict().items()}
        s = student.state_dict()
        alpha = 0.99
        for k in range(1, 101):
            ema_update(teacher, student, alpha)
            for name, p in teacher.state_dict().items():
                want = s[name] + (alpha ** k) * (t0[name] - s[name])
                assert float((p - want).abs().max()) < 1e-6, (name, k)


def test_c07_synthetic_end_to_end(e2e_world, e2e_result):
    result, seconds = e2e_result
    val_man, val_anns = e2e_world["val"]
    with criterion("synthetic-end-to-end"):
        assert seconds <= 600.0, f"training took {seconds:.0f}s (budget 600s)"
        from travrank.trainer import smoothed_losses

        smoothed = smoothed_losses(result.history, window=50)
        assert smoothed[-1] < smoothed[49]  # training curve clearly descends
        rows = evaluate_model_hdr(result.student, val_man, val_anns[:200], [0.25])
        row = rows[0]
        print(
            f"  end-to-end: HDR_0.25={row.hdr:.4f} (eq={row.hdr_eq:.4f} "
            f"neq={row.hdr_neq:.4f}) in {seconds:.0f}s; smoothed loss "
            f"{smoothed[49]:.4f} -> {smoothed[-1]:.4f}",
            flush=True,
        )
        assert row.n == 200
        assert row.hdr <= 0.15


def test_c07b_interior_predictions(e2e_world, e2e_result):
    # squared-hinge models keep a healthy interior mass; the log-ratio loss
    # statistic is reported alongside for comparison, not asserted
    result, _ = e2e_result
    val_man, _ = e2e_world["val"]
    with criterion("interior-prediction-mass"):
        ids = [e.image_id for e in val_man.images[:30]]
        maps = predict_scores(result.student, val_man, ids)
        values = np.concatenate([m.ravel() for m in maps.values()])
        interior = float(((values >= 0.2) & (values <= 0.8)).mean())
        train_man, train_anns = e2e_world["train"]
        diw = train(
            TrainConfig(loss_name="diw", epochs=10, seed=0, batch_size=8),
            train_man,
            train_anns,
        )
        diw_maps = predict_scores(diw.student, val_man, ids)
        diw_values = np.concatenate([m.ravel() for m in diw_maps.values()])
        diw_interior = float(((diw_values >= 0.2) & (diw_values <= 0.8)).mean())
        print(
            f"  interior [0.2, 0.8] mass: squared-hinge={interior:.3f} "
            f"log-ratio={diw_interior:.3f} (reported)",
            flush=True,
        )
        assert interior >= 0.20


def test_c08_cross_image_ablation_direction(stress_world):
    train_man, train_anns = stress_world["train"]
    val_man, cross_val = stress_world["val"]
    with criterion("cross-image-ablation-direction"):
        for seed in (0, 1, 2):
            scores = {}
            for mode in ("with_cross", "intra_only"):
                config = TrainConfig(
                    loss_name="rizz",
                    epochs=20,
                    seed=seed,
                    batch_size=8,
                    equalize_budget=(mode == "with_cross"),
                    intra_only=(mode == "intra_only"),
                )
                result = train(config, train_man, train_anns)
                row = evaluate_model_hdr(result.student, val_man, cross_val, [0.25])[0]
                scores[mode] = row.hdr_neq
            print(
                f"  seed {seed}: intra+cross neq={scores['with_cross']:.3f} "
                f"intra-only neq={scores['intra_only']:.3f}",
                flush=True,
            )
            assert scores["with_cross"] < scores["intra_only"], f"seed {seed}"


def test_c09_metrics_identities():
    with criterion("metrics-identities"):
        rng = np.random.default_rng(66)
        ident = rng.integers(0, 4, size=(32, 32))
        m = seg_metrics(ident, ident)
        assert (m.miou, m.fw_miou, m.macc, m.fw_macc) == (1.0, 1.0, 1.0, 1.0)
        for _ in range(100):
            gt = rng.integers(0, 4, size=(32, 32))
            pred = np.where(rng.random((32, 32)) < 0.4, rng.integers(0, 4, size=(32, 32)), gt)
            m = seg_metrics(pred, gt)
            cm = np.zeros((4, 4), dtype=np.int64)
            for p, g in zip(pred.ravel(), gt.ravel()):
                cm[g, p] += 1
            present = [c for c in range(4) if cm[c].sum()]
            iou = {
                c: cm[c, c] / (cm[c].sum() + cm[:, c].sum() - cm[c, c]) for c in present
            }
            acc = {c: cm[c, c] / cm[c].sum() for c in present}
            freq = {c: cm[c].sum() / cm.sum() for c in present}
            assert m.miou == pytest.approx(np.mean(list(iou.values())), abs=1e-12)
            assert m.macc == pytest.approx(np.mean(list(acc.values())), abs=1e-12)
            assert m.fw_miou == pytest.approx(sum(freq[c] * iou[c] for c in present), abs=1e-12)
            assert m.fw_macc == pytest.approx(sum(freq[c] * acc[c] for c in present), abs=1e-12)
        cuts = tier_cutoffs({3: [0.85, 0.95], 2: [0.5, 0.7], 1: [0.3, 0.5], 0: [0.1, 0.3]})
        assert abs(cuts.cutoff_3 - 0.775) < 1e-12
        assert abs(cuts.cutoff_2 - 0.5) < 1e-12
        assert abs(cuts.cutoff_1 - 0.3) < 1e-12
        cuts = tier_cutoffs({3: [0.8], 2: [0.6], 1: [0.4], 0: [0.2]})
        assert max(abs(a - b) for a, b in zip(cuts.as_tuple(), (0.7, 0.5, 0.3))) < 1e-12


def test_c10_label_budget_sweep(tmp_path_factory):
    root = tmp_path_factory.mktemp("sweep")
    build_synth_dataset(root / "train", 150, seed=31)
    build_synth_dataset(root / "val", 80, seed=777)
    out = root / "sweep.json"
    with criterion("label-budget-sweep"):
        code = cli_main(
            [
                "sweep-labels",
                "--manifest", str(root / "train" / "manifest.jsonl"),
                "--annotations", str(root / "train" / "annotations.jsonl"),
                "--val-manifest", str(root / "val" / "manifest.jsonl"),
                "--val-annotations", str(root / "val" / "annotations.jsonl"),
                "--fractions", "0.05,0.1,0.25,0.5,1.0",
                "--seeds", "0,1,2",
                "--epochs", "8",
                "--out", str(out),
            ]
        )
        assert code == 0
        import json

        doc = json.loads(out.read_text())
        medians = [doc["medians"][key] for key in ("0.05", "0.1", "0.25", "0.5", "1.0")]
        print(f"  sweep medians: {[round(v, 4) for v in medians]}", flush=True)
        for small, big in zip(medians, medians[1:]):
            assert big <= small + 1e-12, f"median rose from {small} to {big}"
