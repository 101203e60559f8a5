import hashlib
import json

import cv2
import numpy as np
import pytest

from laneseg.cli import center_deviation, main, overlay, predict_masks
from laneseg.data import DatasetManifest, ManifestEntry, save_manifest, write_image, write_mask
from laneseg.models import ModelConfig, build_model, count_parameters
from laneseg.synth import SceneParams, generate_dataset
from laneseg.train import CheckpointBundle, TrainConfig, save_checkpoint


class TestOverlay:
    def test_alpha_zero_is_identity(self):
        rng = np.random.default_rng(0)
        image = rng.random((8, 8, 3)).astype(np.float32)
        mask = (rng.random((8, 8)) < 0.3).astype(np.uint8)
        out = overlay(image, mask_left=mask, alpha=0.0)
        assert np.array_equal(out, image)

    def test_full_opacity_paints_pure_color(self):
        image = np.zeros((4, 4, 3), np.float32)
        mask = np.zeros((4, 4), np.uint8)
        mask[1, 2] = 1
        out = overlay(image, mask_union=mask, alpha=1.0)
        assert np.allclose(out[1, 2], (0.10, 0.80, 0.10))

    def test_half_alpha_blends(self):
        image = np.full((4, 4, 3), 0.4, np.float32)
        mask = np.zeros((4, 4), np.uint8)
        mask[0, 0] = 1
        out = overlay(image, mask_left=mask, alpha=0.5)
        expected = 0.5 * np.array([0.4, 0.4, 0.4]) + 0.5 * np.array([0.85, 0.10, 0.10])
        assert np.abs(out[0, 0] - expected).max() <= 1 / 255

    def test_pixels_outside_masks_untouched(self):
        rng = np.random.default_rng(1)
        image = rng.random((8, 8, 3)).astype(np.float32)
        left = np.zeros((8, 8), np.uint8)
        left[:, 0] = 1
        out = overlay(image, mask_left=left, alpha=0.7)
        assert np.array_equal(out[:, 1:], image[:, 1:])

    def test_bad_alpha(self):
        with pytest.raises(ValueError, match="alpha"):
            overlay(np.zeros((4, 4, 3)), alpha=1.5)


def lanes_at(width, left_col, right_col, h=40):
    left = np.zeros((h, width), np.uint8)
    right = np.zeros((h, width), np.uint8)
    left[:, left_col] = 1
    right[:, right_col] = 1
    return left, right


class TestCenterDeviation:
    def test_symmetric_lanes_zero_deviation(self):
        left, right = lanes_at(100, 25, 75)
        rec = center_deviation(left, right)
        assert rec.valid
        assert rec.deviation_px == pytest.approx(0.0)

    def test_shifted_lanes_positive_deviation(self):
        left, right = lanes_at(100, 35, 85)
        rec = center_deviation(left, right)
        assert rec.valid
        assert rec.deviation_px == pytest.approx(10.0)
        assert rec.deviation_norm == pytest.approx(10.0 / 50.0)

    def test_empty_left_mask_invalid(self):
        left, right = lanes_at(100, 25, 75)
        left[:] = 0
        rec = center_deviation(left, right)
        assert not rec.valid

    def test_lanes_missing_only_inside_band_invalid(self):
        left, right = lanes_at(100, 25, 75, h=100)
        left[60:, :] = 0  # default band (0.70, 0.95) sees no left pixels
        rec = center_deviation(left, right)
        assert not rec.valid

    def test_extreme_offset_marked_invalid(self):
        left, right = lanes_at(400, 2, 6)  # lane width 4, center offset ~196
        rec = center_deviation(left, right)
        assert not rec.valid

    def test_bad_band(self):
        left, right = lanes_at(100, 25, 75)
        with pytest.raises(ValueError, match="band"):
            center_deviation(left, right, band=(0.9, 0.5))

    def test_record_json_keys(self):
        left, right = lanes_at(100, 25, 75)
        rec = center_deviation(left, right, frame_id="f1")
        assert set(rec.to_dict()) == {"frame", "dev_px", "dev_norm", "valid"}


def tree_digest(root):
    digest = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            digest.update(str(path.relative_to(root)).encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


def write_video(path, n_frames, size=(64, 48)):
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"MJPG"), 10.0, size)
    for i in range(n_frames):
        writer.write(np.full((size[1], size[0], 3), (i * 23) % 256, np.uint8))
    writer.release()


@pytest.fixture(scope="module")
def cli_workspace(tmp_path_factory):
    """Dataset, trained checkpoint, and model config shared by CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    config_path = root / "model.json"
    config_path.write_text(json.dumps({"input_size": [64, 80], "base_width": 8}))
    data_dir = root / "data"
    generate_dataset(3, 6, SceneParams.scaled_to(64, 80), data_dir)
    ckpt_dir = root / "ckpt"
    code = main(
        [
            "train", "--arch", "unet_attn", "--data", str(data_dir),
            "--out", str(ckpt_dir), "--config", str(config_path),
            "--epochs", "2", "--batch-size", "4", "--seed", "0",
        ]
    )
    assert code == 0
    return {"root": root, "data": data_dir, "ckpt": ckpt_dir, "config": config_path}


class TestCliSynth:
    def test_byte_identical_across_runs(self, tmp_path):
        for name in ("a", "b"):
            code = main(
                ["synth", "--n", "6", "--seed", "7", "--out", str(tmp_path / name),
                 "--size", "64x80"]
            )
            assert code == 0
        assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")

    def test_split_counts_printed(self, tmp_path, capsys):
        main(["synth", "--n", "10", "--seed", "0", "--out", str(tmp_path / "d"),
              "--size", "64x80"])
        out = capsys.readouterr().out
        assert "9 train / 1 val" in out


class TestCliExtract:
    def test_extract_counts(self, tmp_path, capsys):
        video = tmp_path / "v.avi"
        write_video(video, 9)
        code = main(
            ["extract", "--video", str(video), "--out", str(tmp_path / "f"), "--stride", "2"]
        )
        assert code == 0
        assert "wrote 5 frames" in capsys.readouterr().out
        assert len(list((tmp_path / "f").glob("*.png"))) == 5


class TestCliParams:
    def test_count_matches_library(self, cli_workspace, capsys):
        code = main(
            ["params", "--arch", "unet_attn", "--config", str(cli_workspace["config"])]
        )
        assert code == 0
        printed = int(capsys.readouterr().out.strip().splitlines()[-1])
        expected = count_parameters(
            build_model(ModelConfig(arch="unet_attn", input_size=(64, 80), base_width=8))
        )
        assert printed == expected

    def test_summary_flag(self, capsys):
        code = main(["params", "--arch", "fpn", "--summary"])
        assert code == 0
        out = capsys.readouterr().out
        assert "Conv2d" in out and "total" in out


class TestCliTrainEvalInfer:
    def test_train_wrote_checkpoints(self, cli_workspace):
        for sub in ("best", "last"):
            assert (cli_workspace["ckpt"] / sub / "weights.bin").is_file()

    def test_eval_writes_report(self, cli_workspace, capsys):
        report_path = cli_workspace["root"] / "report.json"
        code = main(
            ["eval", "--ckpt", str(cli_workspace["ckpt"]), "--data",
             str(cli_workspace["data"]), "--report", str(report_path)]
        )
        assert code == 0
        doc = json.loads(report_path.read_text())
        assert doc["version"] == 1
        assert set(doc["pixel"]) == {"accuracy", "precision", "recall", "iou_fg", "iou_mean"}
        assert set(doc["frame"]) == {"total", "both", "one", "acc_both", "acc_one", "tau"}
        assert doc["frame"]["total"] == 1  # val split of the 6-sample dataset

    def test_infer_on_frame_directory(self, cli_workspace):
        out_dir = cli_workspace["root"] / "infer"
        code = main(
            ["infer", "--ckpt", str(cli_workspace["ckpt"]), "--input",
             str(cli_workspace["data"] / "frames"), "--out", str(out_dir),
             "--overlay", "--deviation"]
        )
        assert code == 0
        masks = sorted((out_dir / "masks").glob("*_union.png"))
        assert len(masks) == 6
        assert len(list((out_dir / "overlay").glob("*.png"))) == 6
        records = [
            json.loads(line)
            for line in (out_dir / "deviation.jsonl").read_text().splitlines()
        ]
        assert len(records) == 6
        for rec in records:
            assert set(rec) == {"frame", "dev_px", "dev_norm", "valid"}

    def test_eval_report_byte_identical_across_runs(self, cli_workspace, tmp_path):
        reports = []
        for name in ("r1.json", "r2.json"):
            path = tmp_path / name
            code = main(
                ["eval", "--ckpt", str(cli_workspace["ckpt"]), "--data",
                 str(cli_workspace["data"]), "--report", str(path)]
            )
            assert code == 0
            reports.append(path.read_bytes())
        assert reports[0] == reports[1]

    def test_infer_on_video(self, cli_workspace, tmp_path):
        video = tmp_path / "v.avi"
        write_video(video, 4, size=(80, 64))
        out_dir = tmp_path / "out"
        code = main(
            ["infer", "--ckpt", str(cli_workspace["ckpt"]), "--input", str(video),
             "--out", str(out_dir)]
        )
        assert code == 0
        assert len(list((out_dir / "masks").glob("*_union.png"))) == 4


class TestCliPerfectPredictions:
    def test_eval_against_own_predictions_is_perfect(self, tmp_path, capsys):
        # ground truth written from the model's own deterministic predictions,
        # so every pixel metric must be exactly 1 and every frame must pass
        graph = build_model(
            ModelConfig(arch="unet_attn", input_size=(64, 80), base_width=8), seed=1
        )
        import torch
        with torch.no_grad():
            graph.net.head.bias.fill_(0.05)  # keep some pixels above threshold

        source = generate_dataset(9, 4, SceneParams.scaled_to(64, 80), tmp_path / "src")
        data_dir = tmp_path / "data"
        data_dir.mkdir()
        entries = []
        nonempty = 0
        for i, entry in enumerate(source.entries):
            image = source.load_sample(entry).image
            left, right, union = predict_masks(graph, image)
            nonempty += int(union.sum() > 0)
            write_image(data_dir / f"f{i}.png", image)
            write_mask(data_dir / f"f{i}_l.png", left)
            write_mask(data_dir / f"f{i}_r.png", right)
            entries.append(
                ManifestEntry(f"f{i}.png", f"f{i}_l.png", f"f{i}_r.png", "val")
            )
        assert nonempty == 4
        save_manifest(DatasetManifest(entries=entries, root=data_dir), data_dir / "manifest.json")

        ckpt = tmp_path / "ckpt"
        save_checkpoint(
            CheckpointBundle(graph, TrainConfig.for_arch("unet_attn"), 0, []), ckpt
        )
        report_path = tmp_path / "report.json"
        code = main(
            ["eval", "--ckpt", str(ckpt), "--data", str(data_dir),
             "--report", str(report_path)]
        )
        assert code == 0
        doc = json.loads(report_path.read_text())
        for key in ("accuracy", "precision", "recall", "iou_fg", "iou_mean"):
            assert doc["pixel"][key] == 1.0
        assert doc["frame"]["acc_both"] == 100.0
        assert doc["frame"]["acc_one"] == 100.0


class TestExitCodes:
    def test_usage_error_is_one(self, capsys):
        assert main(["synth"]) == 1  # missing required --n/--out
        assert main(["bogus"]) == 1
        assert main([]) == 1

    def test_runtime_error_is_two(self, tmp_path, capsys):
        code = main(
            ["eval", "--ckpt", str(tmp_path / "none"), "--data", str(tmp_path),
             "--report", str(tmp_path / "r.json")]
        )
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_extract_runtime_error(self, tmp_path, capsys):
        code = main(
            ["extract", "--video", str(tmp_path / "missing.avi"), "--out", str(tmp_path)]
        )
        assert code == 2
