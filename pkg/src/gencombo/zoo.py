"""Synthetic datasets, the model zoo, and its on-disk format.

Zoo directory layout::

    manifest.json              config echo, dataset dimensions, one entry per model
    dataset/train.bin          float64 LE features (row-major), then int32 LE labels
    dataset/val.bin            same layout
    <model_id>/init.bin        float64 LE weights, canonical layer-major order, no header
    <model_id>/trained.bin     same layout

Seeds: model ``i`` of the grid (Cartesian product order: widths, learning
rates, epochs, batch sizes) gets ``seed = derive_seed(base_seed, i)``; its
initial weights use ``derive_seed(seed, 1)`` and its batch order
``derive_seed(seed, 2)``.
"""

from __future__ import annotations

import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from gencombo.model import (
    Dataset,
    DivergenceError,
    ModelSpec,
    TrainingRecipe,
    accuracy,
    forward,
    init_weights,
    train,
)
from gencombo.ranking import GapRecord, generalization_gap
from gencombo.seeding import derive_seed

FORMAT_VERSION = 1
GENERATORS = ("blobs", "spirals")
INIT_SEED_TAG = 1
SHUFFLE_SEED_TAG = 2


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class SnapshotError(RuntimeError):
    pass


@dataclass(frozen=True)
class DatasetConfig:
    generator: str = "blobs"
    num_train: int = 200
    num_val: int = 200
    input_dim: int = 10
    num_classes: int = 4
    label_noise: float = 0.2
    data_seed: int = 0
    cluster_scale: float = 2.0


@dataclass(frozen=True)
class GridConfig:
    hidden_layer_widths: tuple[tuple[int, ...], ...] = ((), (32,), (64, 64))
    learning_rates: tuple[float, ...] = (0.01, 0.05, 0.2)
    epochs: tuple[int, ...] = (5, 30, 100)
    batch_sizes: tuple[int, ...] = (32,)

    def points(self):
        return list(itertools.product(self.hidden_layer_widths, self.learning_rates, self.epochs, self.batch_sizes))


@dataclass(frozen=True)
class ZooConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    base_seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = {k: [list(v) if isinstance(v, tuple) else v for v in vals] for k, vals in d["grid"].items()}
        return d

    @classmethod
    def from_dict(cls, raw) -> "ZooConfig":
        if not isinstance(raw, dict):
            raise ConfigError("$", "config must be a JSON object")
        _reject_unknown(raw, {"dataset", "grid", "base_seed"}, "$")
        ds_raw = raw.get("dataset", {})
        grid_raw = raw.get("grid", {})
        if not isinstance(ds_raw, dict):
            raise ConfigError("dataset", "must be an object")
        if not isinstance(grid_raw, dict):
            raise ConfigError("grid", "must be an object")
        _reject_unknown(ds_raw, set(DatasetConfig.__dataclass_fields__), "dataset")
        _reject_unknown(grid_raw, set(GridConfig.__dataclass_fields__), "grid")

        d = DatasetConfig()
        generator = ds_raw.get("generator", d.generator)
        if generator not in GENERATORS:
            raise ConfigError("dataset.generator", f"unknown generator {generator!r}, expected one of {GENERATORS}")
        dataset = DatasetConfig(
            generator=generator,
            num_train=_int(ds_raw, "num_train", d.num_train, "dataset", minimum=10),
            num_val=_int(ds_raw, "num_val", d.num_val, "dataset", minimum=10),
            input_dim=_int(ds_raw, "input_dim", d.input_dim, "dataset", minimum=1),
            num_classes=_int(ds_raw, "num_classes", d.num_classes, "dataset", minimum=2),
            label_noise=_real(ds_raw, "label_noise", d.label_noise, "dataset", lo=0.0, hi=1.0),
            data_seed=_int(ds_raw, "data_seed", d.data_seed, "dataset"),
            cluster_scale=_real(ds_raw, "cluster_scale", d.cluster_scale, "dataset", lo=0.0),
        )
        if generator == "blobs" and dataset.input_dim < dataset.num_classes:
            raise ConfigError("dataset.input_dim", "blobs needs input_dim >= num_classes")
        if generator == "spirals" and dataset.input_dim != 2:
            raise ConfigError("dataset.input_dim", "spirals are two-dimensional")

        g = GridConfig()
        widths = _list(grid_raw, "hidden_layer_widths", g.hidden_layer_widths)
        for i, w in enumerate(widths):
            path = f"grid.hidden_layer_widths[{i}]"
            if not isinstance(w, (list, tuple)):
                raise ConfigError(path, "must be a list of layer widths")
            for j, u in enumerate(w):
                if not _is_int(u) or u < 1:
                    raise ConfigError(f"{path}[{j}]", "must be a positive integer")
        grid = GridConfig(
            hidden_layer_widths=tuple(tuple(int(u) for u in w) for w in widths),
            learning_rates=tuple(
                _checked(v, f"grid.learning_rates[{i}]", real=True, lo=0.0, open_lo=True)
                for i, v in enumerate(_list(grid_raw, "learning_rates", g.learning_rates))
            ),
            epochs=tuple(
                _checked(v, f"grid.epochs[{i}]", minimum=1) for i, v in enumerate(_list(grid_raw, "epochs", g.epochs))
            ),
            batch_sizes=tuple(
                _checked(v, f"grid.batch_sizes[{i}]", minimum=1)
                for i, v in enumerate(_list(grid_raw, "batch_sizes", g.batch_sizes))
            ),
        )
        if len(grid.points()) < 2:
            raise ConfigError("grid", "the grid must contain at least two models")
        base_seed = raw.get("base_seed", 0)
        if not _is_int(base_seed):
            raise ConfigError("base_seed", "must be an integer")
        return cls(dataset, grid, int(base_seed))


def _reject_unknown(d: dict, allowed: set, path: str):
    extra = sorted(set(d) - allowed)
    if extra:
        prefix = "" if path == "$" else f"{path}."
        raise ConfigError(f"{prefix}{extra[0]}", "unknown field")


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _checked(v, path, real=False, minimum=None, lo=None, hi=None, open_lo=False):
    if real:
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
            raise ConfigError(path, "must be a finite number")
        v = float(v)
        if lo is not None and (v < lo or (open_lo and v == lo)):
            raise ConfigError(path, f"must be {'>' if open_lo else '>='} {lo}")
        if hi is not None and v > hi:
            raise ConfigError(path, f"must be <= {hi}")
        return v
    if not _is_int(v):
        raise ConfigError(path, "must be an integer")
    if minimum is not None and v < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return int(v)


def _int(d, key, default, prefix, minimum=None):
    return _checked(d.get(key, default), f"{prefix}.{key}", minimum=minimum)


def _real(d, key, default, prefix, lo=None, hi=None):
    return _checked(d.get(key, default), f"{prefix}.{key}", real=True, lo=lo, hi=hi)


def _list(d, key, default):
    v = d.get(key, default)
    if not isinstance(v, (list, tuple)) or len(v) == 0:
        raise ConfigError(f"grid.{key}", "must be a non-empty list")
    return v


def load_config(path) -> ZooConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON ({exc})") from exc
    return ZooConfig.from_dict(raw)


def default_config() -> ZooConfig:
    return load_config(Path(__file__).with_name("default_config.json"))


# -- datasets ---------------------------------------------------------------


def _blobs(rng, n, cfg: DatasetConfig):
    labels = rng.integers(0, cfg.num_classes, n)
    centers = cfg.cluster_scale * np.eye(cfg.num_classes, cfg.input_dim)
    features = centers[labels] + rng.standard_normal((n, cfg.input_dim))
    return features, labels


def _spirals(rng, n, cfg: DatasetConfig):
    labels = rng.integers(0, cfg.num_classes, n)
    t = np.sqrt(rng.uniform(0.0, 1.0, n))
    radius = cfg.cluster_scale * t
    angle = 2 * np.pi * labels / cfg.num_classes + 3 * np.pi * t
    features = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    features += 0.1 * cfg.cluster_scale * rng.standard_normal((n, 2))
    return features, labels


def generate_dataset(config: ZooConfig) -> tuple[Dataset, Dataset]:
    """Training and validation sets drawn from one stream, then split; noise hits training labels only."""
    cfg = config.dataset
    rng = np.random.default_rng(cfg.data_seed)
    n = cfg.num_train + cfg.num_val
    if cfg.generator == "blobs":
        features, labels = _blobs(rng, n, cfg)
    elif cfg.generator == "spirals":
        features, labels = _spirals(rng, n, cfg)
    else:
        raise ConfigError("dataset.generator", f"unknown generator {cfg.generator!r}")
    train_labels = labels[: cfg.num_train].copy()
    k = int(round(cfg.label_noise * cfg.num_train))
    if k:
        flip = rng.choice(cfg.num_train, size=k, replace=False)
        train_labels[flip] = rng.integers(0, cfg.num_classes, k)
    train_set = Dataset(features[: cfg.num_train], train_labels, cfg.num_classes)
    val_set = Dataset(features[cfg.num_train:], labels[cfg.num_train:], cfg.num_classes)
    return train_set, val_set


def dataset_bytes(data: Dataset) -> bytes:
    return data.features.astype("<f8").tobytes(order="C") + data.labels.astype("<i4").tobytes()


def dataset_from_bytes(raw: bytes, rows: int, cols: int, num_classes: int) -> Dataset:
    n_feat = rows * cols * 8
    if len(raw) != n_feat + rows * 4:
        raise SnapshotError(f"dataset file has {len(raw)} bytes, expected {n_feat + rows * 4}")
    features = np.frombuffer(raw, dtype="<f8", count=rows * cols).reshape(rows, cols).astype(np.float64)
    labels = np.frombuffer(raw, dtype="<i4", offset=n_feat).astype(np.int64)
    return Dataset(features, labels, num_classes)


# -- snapshots ---------------------------------------------------------------


@dataclass
class ModelSnapshot:
    model_id: str
    spec: ModelSpec
    init: np.ndarray
    trained: np.ndarray
    recipe: TrainingRecipe
    train_accuracy: float
    validation_accuracy: float
    seed: int

    def manifest_entry(self) -> dict:
        return {
            "model_id": self.model_id,
            "status": "ok",
            "seed": self.seed,
            "spec": self.spec.to_dict(),
            "recipe": self.recipe.to_dict(),
            "train_accuracy": self.train_accuracy,
            "validation_accuracy": self.validation_accuracy,
        }


def atomic_write(path: Path, data: bytes):
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def weights_to_bytes(weights) -> bytes:
    return np.asarray(weights, dtype="<f8").tobytes()


def weights_from_bytes(raw: bytes, count: int) -> np.ndarray:
    if len(raw) != count * 8:
        raise SnapshotError(f"weight file has {len(raw)} bytes, expected {count * 8}")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64)


def save_snapshot(zoo_dir, snap: ModelSnapshot):
    model_dir = Path(zoo_dir) / snap.model_id
    model_dir.mkdir(parents=True, exist_ok=True)
    atomic_write(model_dir / "init.bin", weights_to_bytes(snap.init))
    atomic_write(model_dir / "trained.bin", weights_to_bytes(snap.trained))


def load_snapshot(zoo_dir, entry: dict) -> ModelSnapshot:
    try:
        spec = ModelSpec.from_dict(entry["spec"])
        recipe = TrainingRecipe.from_dict(entry["recipe"])
        model_dir = Path(zoo_dir) / entry["model_id"]
        init = weights_from_bytes((model_dir / "init.bin").read_bytes(), spec.num_params)
        trained = weights_from_bytes((model_dir / "trained.bin").read_bytes(), spec.num_params)
        snap = ModelSnapshot(
            entry["model_id"],
            spec,
            init,
            trained,
            recipe,
            float(entry["train_accuracy"]),
            float(entry["validation_accuracy"]),
            int(entry["seed"]),
        )
    except SnapshotError as exc:
        raise SnapshotError(f"{entry.get('model_id', '?')}: {exc}") from exc
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise SnapshotError(f"{entry.get('model_id', '?')}: {exc!r}") from exc
    if not (np.all(np.isfinite(snap.init)) and np.all(np.isfinite(snap.trained))):
        raise SnapshotError(f"{snap.model_id}: weights contain NaN or Inf")
    return snap


def manifest_bytes(manifest: dict) -> bytes:
    return (json.dumps(manifest, indent=2) + "\n").encode()


def read_manifest(zoo_dir) -> dict:
    path = Path(zoo_dir) / "manifest.json"
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"cannot read {path}: {exc}") from exc
    if manifest.get("format") != FORMAT_VERSION:
        raise SnapshotError(f"{path}: unsupported format {manifest.get('format')!r}")
    return manifest


def load_datasets(zoo_dir, manifest: dict) -> tuple[Dataset, Dataset]:
    info = manifest["dataset"]
    out = []
    for split in ("train", "val"):
        meta = info[split]
        raw = (Path(zoo_dir) / meta["file"]).read_bytes()
        out.append(dataset_from_bytes(raw, meta["rows"], meta["cols"], info["num_classes"]))
    return out[0], out[1]


def load_zoo(zoo_dir):
    """Manifest, datasets and every successfully trained snapshot; raises on any corrupt file."""
    manifest = read_manifest(zoo_dir)
    train_set, val_set = load_datasets(zoo_dir, manifest)
    snaps = [load_snapshot(zoo_dir, e) for e in manifest["models"] if e["status"] == "ok"]
    return manifest, train_set, val_set, snaps


# -- generation -----------------------------------------------------------------


def model_id_for(index: int) -> str:
    return f"m{index:03d}"


def _train_point(args):
    index, point, base_seed, train_set, val_set = args
    widths, lr, epochs, batch_size = point
    seed = derive_seed(base_seed, index)
    spec = ModelSpec(train_set.input_dim, tuple(widths), train_set.num_classes)
    recipe = TrainingRecipe(lr, epochs, batch_size, derive_seed(seed, SHUFFLE_SEED_TAG))
    init = init_weights(spec, derive_seed(seed, INIT_SEED_TAG))
    entry = {
        "model_id": model_id_for(index),
        "seed": seed,
        "spec": spec.to_dict(),
        "recipe": recipe.to_dict(),
    }
    try:
        trained, trace = train(spec, init, train_set, recipe)
    except DivergenceError as exc:
        return None, {**entry, "status": "failed", "error": str(exc)}
    snap = ModelSnapshot(
        entry["model_id"],
        spec,
        init,
        trained,
        recipe,
        trace[-1],
        accuracy(forward(spec, trained, val_set.features), val_set.labels),
        seed,
    )
    return snap, snap.manifest_entry()


def generate_zoo(
    config: ZooConfig,
    out_dir,
    jobs: int = 1,
    on_model: Callable[[dict], None] | None = None,
) -> list[ModelSnapshot]:
    """Train one model per grid point, persist everything, and return the successful snapshots."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_set, val_set = generate_dataset(config)
    (out / "dataset").mkdir(exist_ok=True)
    atomic_write(out / "dataset" / "train.bin", dataset_bytes(train_set))
    atomic_write(out / "dataset" / "val.bin", dataset_bytes(val_set))

    tasks = [(i, p, config.base_seed, train_set, val_set) for i, p in enumerate(config.grid.points())]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_train_point, tasks))
    else:
        results = [_train_point(t) for t in tasks]

    snaps, entries = [], []
    for snap, entry in results:
        if snap is not None:
            save_snapshot(out, snap)
            snaps.append(snap)
        entries.append(entry)
        if on_model is not None:
            on_model(entry)

    manifest = {
        "format": FORMAT_VERSION,
        "config": config.to_dict(),
        "dataset": {
            "num_classes": train_set.num_classes,
            "train": {"file": "dataset/train.bin", "rows": len(train_set), "cols": train_set.input_dim},
            "val": {"file": "dataset/val.bin", "rows": len(val_set), "cols": val_set.input_dim},
        },
        "models": entries,
    }
    atomic_write(out / "manifest.json", manifest_bytes(manifest))
    return snaps


def compute_gaps(snapshots) -> list[GapRecord]:
    records = []
    for s in snapshots:
        if s.train_accuracy is None or s.validation_accuracy is None:
            raise ValueError(f"{s.model_id}: missing accuracy")
        records.append(
            GapRecord(s.model_id, s.train_accuracy, s.validation_accuracy,
                      generalization_gap(s.train_accuracy, s.validation_accuracy))
        )
    return sorted(records, key=lambda r: r.model_id)
