"""Deterministic training loop with checkpointing and per-epoch history.

Checkpoint directory layout::

    config.json        {"version": 1, "epoch": N, "model": {...}}
    train_config.json  optimizer/loss hyperparameters
    weights.bin        framework-native state dict
    history.jsonl      one JSON object per epoch

With workers=1 torch runs single-threaded and two runs with the same seed
produce bit-identical step losses. Shuffling order is a pure function of
(seed, epoch). The final partial batch is dropped during training (unless it
is the only batch) and kept during validation.
"""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import torch

from .data.augment import AugmentationSpec, augment
from .data.manifest import DatasetManifest, ManifestEntry
from .data.sample import Sample, resize_pair
from .errors import CheckpointError, ConfigMismatchError, TrainingDivergedError
from .losses import bce_loss, multi_dice_loss
from .metrics import ConfusionMatrix, confusion, pixel_metrics
from .models import ModelGraph, build_model
from .models.config import ModelConfig

CHECKPOINT_VERSION = 1
LOSSES = ("multi_dice", "bce")
_ARCH_DEFAULTS = {"fpn": ("multi_dice", 4), "unet_attn": ("bce", 10)}
_SEED_MASK = 0xFFFFFFFFFFFFFFFF
_CACHE_LIMIT = 512


@dataclasses.dataclass
class TrainConfig:
    loss: str
    epochs: int
    learning_rate: float = 1e-4
    batch_size: int = 8
    seed: int = 0
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8

    def __post_init__(self):
        if self.optimizer != "adam":
            raise ValueError(f"only the 'adam' optimizer is supported, got {self.optimizer!r}")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")

    @classmethod
    def for_arch(cls, arch: str, **overrides) -> "TrainConfig":
        """Per-architecture defaults: fpn trains 4 epochs with multi_dice,
        unet_attn trains 10 epochs with bce; both use Adam at 1e-4, batch 8."""
        if arch not in _ARCH_DEFAULTS:
            raise ValueError(f"unknown arch {arch!r}")
        loss, epochs = _ARCH_DEFAULTS[arch]
        values = {"loss": loss, "epochs": epochs}
        values.update(overrides)
        return cls(**values)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown train config fields: {sorted(unknown)}")
        return cls(**doc)


@dataclasses.dataclass
class CheckpointBundle:
    graph: ModelGraph
    train_config: TrainConfig
    epoch: int
    history: list[dict]
    step_losses: list[float] = dataclasses.field(default_factory=list)  # not serialized

    def predict(self, images):
        return self.graph.predict(images)


def save_checkpoint(bundle: CheckpointBundle, path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "config.json", "w") as fh:
        json.dump(
            {
                "version": CHECKPOINT_VERSION,
                "epoch": bundle.epoch,
                "model": bundle.graph.config.to_dict(),
            },
            fh,
            indent=1,
        )
        fh.write("\n")
    with open(path / "train_config.json", "w") as fh:
        json.dump(bundle.train_config.to_dict(), fh, indent=1)
        fh.write("\n")
    torch.save(bundle.graph.net.state_dict(), path / "weights.bin")
    with open(path / "history.jsonl", "w") as fh:
        for rec in bundle.history:
            fh.write(json.dumps(rec) + "\n")


def load_checkpoint(path) -> CheckpointBundle:
    path = Path(path)
    config_path = path / "config.json"
    if not config_path.is_file():
        raise CheckpointError(f"no checkpoint at {path}: missing config.json")
    try:
        with open(config_path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot parse {config_path}: {exc}") from exc
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version mismatch: expected {CHECKPOINT_VERSION}, "
            f"got {doc.get('version')!r}"
        )
    try:
        model_config = ModelConfig.from_dict(doc["model"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"invalid model config in {config_path}: {exc}") from exc

    train_config_path = path / "train_config.json"
    try:
        with open(train_config_path) as fh:
            train_config = TrainConfig.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise CheckpointError(f"cannot load {train_config_path}: {exc}") from exc

    weights_path = path / "weights.bin"
    try:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"corrupt checkpoint weights {weights_path}: {exc}") from exc

    graph = build_model(model_config)
    try:
        graph.net.load_state_dict(state)
    except RuntimeError as exc:
        raise ConfigMismatchError(
            f"weights in {weights_path} do not fit the stored model config: {exc}"
        ) from exc

    history = []
    history_path = path / "history.jsonl"
    if history_path.is_file():
        with open(history_path) as fh:
            for line in fh:
                if line.strip():
                    history.append(json.loads(line))
    return CheckpointBundle(
        graph=graph, train_config=train_config, epoch=doc["epoch"], history=history
    )


def _derive_seed(seed: int, *streams: int) -> int:
    ss = np.random.SeedSequence([seed & _SEED_MASK, *streams])
    return int(ss.generate_state(1, np.uint64)[0])


def epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    """Shuffle order for one epoch; a pure function of (seed, epoch)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed & _SEED_MASK, epoch]))
    return rng.permutation(n)


class _SampleStore:
    """Loads manifest samples, caching small datasets in memory."""

    def __init__(self, manifest: DatasetManifest, input_size, seed, augment_spec):
        self.manifest = manifest
        self.input_size = tuple(input_size)
        self.seed = seed
        self.augment_spec = augment_spec
        self._cache: dict[ManifestEntry, Sample] | None = (
            {} if len(manifest.entries) <= _CACHE_LIMIT else None
        )

    def _raw(self, entry: ManifestEntry) -> Sample:
        if self._cache is not None and entry in self._cache:
            return self._cache[entry]
        sample = self.manifest.load_sample(entry)
        if self._cache is not None:
            self._cache[entry] = sample
        return sample

    def prepared(self, entry, epoch: int | None = None, index: int | None = None) -> Sample:
        sample = self._raw(entry)
        if self.augment_spec is not None and epoch is not None:
            sample = augment(sample, self.augment_spec, _derive_seed(self.seed, 1, epoch, index))
        if sample.shape != self.input_size:
            sample = resize_pair(sample, self.input_size)
        return sample


def _batch_tensors(samples: list[Sample]):
    images = np.stack([s.image for s in samples]).transpose(0, 3, 1, 2)
    x = torch.from_numpy(np.ascontiguousarray(images))
    left = torch.from_numpy(np.stack([s.mask_left for s in samples]))
    right = torch.from_numpy(np.stack([s.mask_right for s in samples]))
    union = torch.from_numpy(np.stack([s.mask_union for s in samples]))
    return x, left, right, union


def _compute_loss(graph: ModelGraph, loss_name: str, x, left, right, union):
    y = graph.net(x)
    if loss_name == "multi_dice":
        return multi_dice_loss(y.permute(0, 2, 3, 1), left, right)
    return bce_loss(y[:, 0], union)


def _predict_union(graph: ModelGraph, samples: list[Sample], threshold=0.5) -> np.ndarray:
    probs = graph.predict(np.stack([s.image for s in samples]))
    if graph.arch == "fpn":
        classes = probs.argmax(axis=-1)
        return ((classes == 1) | (classes == 2)).astype(np.uint8)
    return (probs[..., 0] >= threshold).astype(np.uint8)


def _validate(graph, store, entries, workers) -> dict | None:
    if not entries:
        return None
    cm = ConfusionMatrix()
    for start in range(0, len(entries), 8):
        chunk = entries[start : start + 8]
        samples = _map_samples(store, chunk, workers)
        pred = _predict_union(graph, samples)
        for i, s in enumerate(samples):
            cm = cm.merge(confusion(pred[i], s.mask_union))
    report = pixel_metrics(cm)
    return {
        "val_accuracy": report.accuracy,
        "val_iou_fg": report.iou_fg,
        "val_iou_mean": report.iou_mean,
    }


def _map_samples(store, jobs, workers, epoch=None):
    # jobs: entries, or (entry, dataset_index) pairs when augmenting
    def prepare(job):
        if isinstance(job, tuple):
            entry, idx = job
            return store.prepared(entry, epoch=epoch, index=idx)
        return store.prepared(job)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(prepare, jobs))
    return [prepare(job) for job in jobs]


def train(
    graph: ModelGraph,
    manifest: DatasetManifest,
    cfg: TrainConfig,
    out_dir,
    augment_spec: AugmentationSpec | None = None,
    workers: int = 1,
) -> CheckpointBundle:
    """Optimize graph on the manifest's train split; returns the final bundle.

    Writes out_dir/last every epoch and out_dir/best whenever the validation
    foreground IoU improves (every epoch when there is no val split).
    """
    train_entries = manifest.split_entries("train")
    val_entries = manifest.split_entries("val")
    if not train_entries:
        raise ValueError("manifest has an empty train split")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    threads_before = torch.get_num_threads()
    if workers == 1:
        torch.set_num_threads(1)
    try:
        torch.manual_seed(cfg.seed & _SEED_MASK)
        store = _SampleStore(manifest, graph.config.input_size, cfg.seed, augment_spec)
        optimizer = torch.optim.Adam(
            graph.net.parameters(),
            lr=cfg.learning_rate,
            betas=(cfg.adam_beta1, cfg.adam_beta2),
            eps=cfg.adam_epsilon,
        )

        n = len(train_entries)
        per_epoch = max(1, n // cfg.batch_size)  # drop final partial batch
        history: list[dict] = []
        step_losses: list[float] = []
        best_iou = -1.0
        bundle = CheckpointBundle(graph, cfg, 0, history, step_losses)

        for epoch in range(cfg.epochs):
            graph.net.train()
            order = epoch_permutation(cfg.seed, epoch, n)
            epoch_losses = []
            for b in range(per_epoch):
                idxs = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
                jobs = [(train_entries[i], int(i)) for i in idxs]
                samples = _map_samples(store, jobs, workers, epoch=epoch)
                x, left, right, union = _batch_tensors(samples)
                optimizer.zero_grad()
                loss = _compute_loss(graph, cfg.loss, x, left, right, union)
                if not torch.isfinite(loss.value):
                    raise TrainingDivergedError(len(step_losses), loss.component_floats())
                loss.value.backward()
                optimizer.step()
                value = float(loss.value.detach())
                step_losses.append(value)
                epoch_losses.append(value)

            graph.net.eval()
            val_stats = _validate(graph, store, val_entries, workers)
            record = {"epoch": epoch, "train_loss": float(np.mean(epoch_losses))}
            record.update(
                val_stats
                or {"val_accuracy": None, "val_iou_fg": None, "val_iou_mean": None}
            )
            history.append(record)

            bundle = CheckpointBundle(graph, cfg, epoch, list(history), step_losses)
            save_checkpoint(bundle, out_dir / "last")
            current = val_stats["val_iou_fg"] if val_stats else None
            # ties prefer the later epoch so a flat val curve still tracks
            # the most-trained weights
            if current is None or current >= best_iou:
                best_iou = current if current is not None else best_iou
                save_checkpoint(bundle, out_dir / "best")
        return bundle
    finally:
        torch.set_num_threads(threads_before)
