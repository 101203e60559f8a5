"""Acceptance suite: one test per release criterion.

Each test prints a single PASS/FAIL line (visible with pytest -s) and asserts
the criterion at its stated tolerance. Criterion 5 consumes the shared
overfit fixture from conftest so the 200-step run happens once per session.
"""

import time

import numpy as np

from laneseg.data import AugmentationSpec, KINDS, Transform, augment
from laneseg.metrics import (
    ConfusionMatrix,
    confusion,
    frame_lane_accuracy,
    pixel_metrics,
)
from laneseg.models import ModelConfig, build_fpn, build_model, build_unet_attention
from laneseg.synth import SceneParams, generate_dataset
from laneseg.train import TrainConfig, train

from test_augment import coordinate_sample, decode_warp, lane_sample, ssr_spec
from test_cli import tree_digest
from test_losses import TestGradients as _LossGradients
from test_metrics import brute_force_counts
from test_models import REFERENCE_UNET_PARAM_COUNT, expected_unet_params


def report(num, description, passed, detail=""):
    suffix = f" ({detail})" if detail else ""
    print(f"\nACCEPTANCE {num} [{'PASS' if passed else 'FAIL'}] {description}{suffix}")
    assert passed, f"criterion {num}: {description}{suffix}"


def brute_metrics(tp, fp, fn, tn):
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    iou_fg = tp / (tp + fp + fn) if tp + fp + fn else 1.0
    iou_bg = tn / (tn + fp + fn) if tn + fp + fn else 1.0
    return accuracy, precision, recall, iou_fg, (iou_fg + iou_bg) / 2


def test_criterion_1_metric_oracle_equivalence():
    started = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(200):
        pred = (rng.random((16, 16)) < rng.uniform(0.05, 0.95)).astype(np.uint8)
        target = (rng.random((16, 16)) < rng.uniform(0.05, 0.95)).astype(np.uint8)
        cm = confusion(pred, target)
        expected_counts = brute_force_counts(pred, target)
        assert (cm.tp, cm.fp, cm.fn, cm.tn) == expected_counts
        got = pixel_metrics(cm)
        want = brute_metrics(*expected_counts)
        values = (got.accuracy, got.precision, got.recall, got.iou_fg, got.iou_mean)
        worst = max(worst, max(abs(a - b) for a, b in zip(values, want)))
        assert worst <= 1e-12
    elapsed = time.perf_counter() - started
    report(
        1,
        "confusion + pixel metrics match brute-force oracle on 200 random pairs",
        worst <= 1e-12 and elapsed < 10.0,
        f"max abs diff {worst:.2e}, {elapsed:.2f}s",
    )


def test_criterion_2_frame_accuracy_display_arithmetic():
    pairs = [(0.9, 0.9)] * 113 + [(0.9, 0.1)] * 4 + [(0.1, 0.1)] * 12
    result = frame_lane_accuracy(pairs, tau=0.5)
    ok = (
        result.total_frames == 129
        and result.both_detected == 113
        and result.one_detected == 117
        and result.acc_both_pct == 87.59
        and result.acc_one_pct == 90.69
    )
    report(
        2,
        "113/129 and 117/129 display as 87.59% and 90.69% under truncation",
        ok,
        f"both {result.acc_both_pct}%, one {result.acc_one_pct}%",
    )


def test_criterion_3_confusion_rate_consistency():
    total = 10**6
    positives = round(0.01418 * total)
    tp = round(0.3634 * positives)
    fp = round(tp / 0.8150 - tp)
    fn = positives - tp
    tn = total - tp - fp - fn
    result = pixel_metrics(ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn))
    accuracy_pct = result.accuracy * 100
    iou_mean_pct = result.iou_mean * 100
    ok = abs(accuracy_pct - 98.98) <= 0.05 and abs(iou_mean_pct - 66.3) <= 0.5
    # iou_mean lands near 66.3%, about one point above the commonly quoted
    # 65.25% composite for this operating point; see README metric notes
    report(
        3,
        "reconstructed benchmark matrix gives accuracy 98.98% and iou_mean ~66.3%",
        ok,
        f"accuracy {accuracy_pct:.4f}%, iou_mean {iou_mean_pct:.3f}%, iou_fg {result.iou_fg:.4f}",
    )


def test_criterion_4_loss_gradient_checks():
    started = time.perf_counter()
    checks = _LossGradients()
    checks.test_binary_dice_gradient()
    checks.test_bce_gradient()
    checks.test_multi_dice_gradient()
    elapsed = time.perf_counter() - started
    report(
        4,
        "dice/multi-dice/bce analytic gradients match central differences (<1e-4)",
        elapsed < 30.0,
        f"{elapsed:.2f}s",
    )


def test_criterion_5_overfit_small_unet(overfit_run):
    iou = overfit_run["iou_fg"]
    seconds = overfit_run["seconds"]
    ok = iou >= 0.85 and seconds < 300.0
    report(
        5,
        "C=8 attention U-Net reaches train IoU >= 0.85 in 200 steps on CPU",
        ok,
        f"iou_fg {iou:.4f} in {seconds:.1f}s",
    )


def test_criterion_6_shape_and_normalization_suite():
    rng = np.random.default_rng(0)
    worst_softmax = 0.0
    for size in ((96, 96), (224, 224)):
        graph = build_fpn(ModelConfig(arch="fpn", input_size=size), seed=0)
        probs = graph.predict(rng.random((1, *size, 3)).astype(np.float32))
        assert probs.shape == (1, *size, 3)
        worst_softmax = max(worst_softmax, float(np.abs(probs.sum(-1) - 1).max()))
    in_range = True
    for size in ((64, 80), (256, 320)):
        graph = build_unet_attention(ModelConfig(arch="unet_attn", input_size=size), seed=0)
        probs = graph.predict(rng.random((1, *size, 3)).astype(np.float32))
        assert probs.shape == (1, *size, 1)
        in_range = in_range and probs.min() >= 0.0 and probs.max() <= 1.0
    ok = worst_softmax < 1e-5 and in_range
    report(
        6,
        "FPN softmax sums to 1 within 1e-5; U-Net outputs stay in [0, 1]",
        ok,
        f"max softmax deviation {worst_softmax:.2e}",
    )


def test_criterion_7_parameter_budget():
    graph = build_unet_attention(ModelConfig(arch="unet_attn"))
    oracle = expected_unet_params(44)
    deviation = abs(graph.parameter_count - REFERENCE_UNET_PARAM_COUNT) / REFERENCE_UNET_PARAM_COUNT
    ok = graph.parameter_count == oracle and deviation <= 0.10
    report(
        7,
        "default U-Net parameter count equals layer oracle and sits within "
        "10% of 15,117,829",
        ok,
        f"count {graph.parameter_count}, oracle {oracle}, deviation {deviation:.2%}",
    )


def test_criterion_8_augmentation_properties():
    spec = AugmentationSpec.default()
    for trial in range(100):
        sample = lane_sample(seed=trial)
        out = augment(sample, spec, seed=5000 + trial)
        assert set(np.unique(out.mask_left)) <= {0, 1}
        assert set(np.unique(out.mask_right)) <= {0, 1}
        assert 0.0 <= out.image.min() and out.image.max() <= 1.0

    for seed in range(5):
        sample = coordinate_sample(64, 64, mask_seed=seed)
        warped = augment(
            sample,
            ssr_spec(
                rotate=(-15, 15), shift=(-0.0625, 0.0625), scale=(-0.1, 0.1),
                interpolation="nearest",
            ),
            seed=seed,
        )
        assert np.array_equal(decode_warp(warped.image, sample.mask_left), warped.mask_left)
        assert np.array_equal(
            decode_warp(warped.image, sample.mask_right), warped.mask_right
        )

    sample = lane_sample(seed=77)
    identity = augment(sample, AugmentationSpec([Transform(k, 0.0, {}) for k in KINDS]), 3)
    assert np.array_equal(identity.image, sample.image)
    assert np.array_equal(identity.mask_left, sample.mask_left)
    report(
        8,
        "100 augmentation trials keep masks binary and images in range; "
        "warps stay synchronized; p=0 is the identity",
        True,
    )


def test_criterion_9_training_and_synth_determinism(tmp_path):
    scene = SceneParams(image_size=(64, 80), lane_width_px=28.0, line_thickness_px=3.0)
    manifest = generate_dataset(21, 16, scene, tmp_path / "data")  # 15 train / 1 val
    runs = []
    for tag in ("a", "b"):
        graph = build_model(
            ModelConfig(arch="unet_attn", input_size=(64, 80), base_width=8), seed=17
        )
        cfg = TrainConfig.for_arch(
            "unet_attn", epochs=8, batch_size=2, seed=17, learning_rate=1e-3
        )
        bundle = train(graph, manifest, cfg, tmp_path / tag)
        runs.append(bundle.step_losses)
    n_steps = len(runs[0])
    losses_equal = n_steps >= 50 and np.allclose(runs[0], runs[1], atol=1e-6)

    for name in ("s1", "s2"):
        generate_dataset(7, 6, scene, tmp_path / name)
    synth_identical = tree_digest(tmp_path / "s1") == tree_digest(tmp_path / "s2")

    report(
        9,
        "same-seed training repeats per-step losses within 1e-6 over 50+ steps "
        "and dataset synthesis is byte-identical",
        losses_equal and synth_identical,
        f"{n_steps} steps, max loss diff "
        f"{float(np.abs(np.array(runs[0]) - np.array(runs[1])).max()):.2e}",
    )
