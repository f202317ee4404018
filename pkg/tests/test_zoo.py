import json

import numpy as np
import pytest

from gencombo.model import ModelSpec, TrainingRecipe, accuracy, forward, train_logistic_regression
from gencombo.seeding import derive_seed, splitmix64
from gencombo.zoo import (
    ConfigError,
    ModelSnapshot,
    SnapshotError,
    ZooConfig,
    compute_gaps,
    dataset_bytes,
    default_config,
    generate_dataset,
    generate_zoo,
    load_snapshot,
    load_zoo,
    manifest_bytes,
    read_manifest,
    save_snapshot,
)

SMALL = {
    "dataset": {"num_train": 60, "num_val": 40, "input_dim": 4, "num_classes": 3, "label_noise": 0.2},
    "grid": {"hidden_layer_widths": [[], [6]], "learning_rates": [0.05], "epochs": [2, 4], "batch_sizes": [16]},
    "base_seed": 5,
}


def small_config(**dataset):
    raw = json.loads(json.dumps(SMALL))
    raw["dataset"].update(dataset)
    return ZooConfig.from_dict(raw)


def test_splitmix_reference_values():
    # first outputs of the reference splitmix64 generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert derive_seed(1, 2) != derive_seed(2, 1)
    assert derive_seed(7, 3) == derive_seed(7, 3)


def test_blobs_contract_and_determinism():
    cfg = small_config(num_train=200, num_classes=4)
    train, val = generate_dataset(cfg)
    assert train.features.shape == (200, 4) and len(val) == 40
    assert set(np.unique(train.labels)) <= {0, 1, 2, 3}
    again = generate_dataset(cfg)
    assert dataset_bytes(train) == dataset_bytes(again[0]) and dataset_bytes(val) == dataset_bytes(again[1])


def test_train_and_validation_rows_disjoint():
    for generator, dim in (("blobs", 4), ("spirals", 2)):
        train, val = generate_dataset(small_config(generator=generator, input_dim=dim))
        rows = {r.tobytes() for r in train.features}
        assert not any(r.tobytes() in rows for r in val.features)


def test_noiseless_blobs_are_fit_by_logistic_regression():
    train, _ = generate_dataset(small_config(num_train=200, label_noise=0.0, cluster_scale=5.0))
    w = train_logistic_regression(train, TrainingRecipe(0.1, 50, 32, 0))
    assert accuracy(forward(ModelSpec(4, (), 3), w, train.features), train.labels) >= 0.9


def test_label_noise_touches_training_labels_only():
    clean_train, clean_val = generate_dataset(small_config(label_noise=0.0))
    noisy_train, noisy_val = generate_dataset(small_config(label_noise=0.5))
    np.testing.assert_array_equal(clean_val.labels, noisy_val.labels)
    np.testing.assert_array_equal(clean_train.features, noisy_train.features)
    changed = np.mean(clean_train.labels != noisy_train.labels)
    assert 0.0 < changed <= 0.5


@pytest.mark.parametrize(
    "patch, path",
    [
        ({"dataset": {"generator": "moons"}}, "dataset.generator"),
        ({"dataset": {"num_train": 5}}, "dataset.num_train"),
        ({"dataset": {"label_noise": 1.5}}, "dataset.label_noise"),
        ({"grid": {"learning_rates": [0.1, -1]}}, "grid.learning_rates[1]"),
        ({"grid": {"hidden_layer_widths": [[4, 0]]}}, "grid.hidden_layer_widths[0][1]"),
        ({"grid": {"epochs": []}}, "grid.epochs"),
        ({"grid": {"hidden_layer_widths": [[]], "learning_rates": [0.1], "epochs": [1], "batch_sizes": [8]}}, "grid"),
        ({"base_seed": "x"}, "base_seed"),
        ({"colour": 1}, "colour"),
    ],
)
def test_config_errors_name_the_field(patch, path):
    raw = json.loads(json.dumps(SMALL))
    for key, value in patch.items():
        if isinstance(value, dict):
            raw[key].update(value)
        else:
            raw[key] = value
    with pytest.raises(ConfigError) as info:
        ZooConfig.from_dict(raw)
    assert info.value.path == path


def test_default_config_shape():
    cfg = default_config()
    assert len(cfg.grid.points()) == 27
    assert cfg.dataset.generator == "blobs" and cfg.dataset.label_noise == 0.2


def test_generate_zoo_roundtrip(tmp_path):
    cfg = small_config()
    seen = []
    snaps = generate_zoo(cfg, tmp_path, on_model=seen.append)
    assert len(snaps) == len(seen) == 4
    manifest, train, val, loaded = load_zoo(tmp_path)
    assert [s.model_id for s in loaded] == ["m000", "m001", "m002", "m003"]
    for a, b in zip(snaps, loaded):
        assert a.init.tobytes() == b.init.tobytes()
        assert a.trained.tobytes() == b.trained.tobytes()
        assert a.spec == b.spec and a.recipe == b.recipe and a.seed == b.seed
        assert a.seed == derive_seed(cfg.base_seed, int(a.model_id[1:]))
    assert dataset_bytes(train) == dataset_bytes(generate_dataset(cfg)[0])
    # save -> load -> save is byte-identical
    before = {p.relative_to(tmp_path): p.read_bytes() for p in tmp_path.rglob("*") if p.is_file()}
    for s in loaded:
        save_snapshot(tmp_path, s)
    (tmp_path / "manifest.json").write_bytes(manifest_bytes(read_manifest(tmp_path)))
    after = {p.relative_to(tmp_path): p.read_bytes() for p in tmp_path.rglob("*") if p.is_file()}
    assert before == after
    assert not list(tmp_path.rglob(".*.tmp*"))


def test_generate_zoo_deterministic_and_parallel_safe(tmp_path):
    cfg = small_config()
    generate_zoo(cfg, tmp_path / "a")
    generate_zoo(cfg, tmp_path / "b", jobs=2)
    for p in (tmp_path / "a").rglob("*"):
        if p.is_file():
            assert p.read_bytes() == (tmp_path / "b" / p.relative_to(tmp_path / "a")).read_bytes()


def test_weight_files_are_raw_little_endian(tmp_path):
    generate_zoo(small_config(), tmp_path)
    entry = read_manifest(tmp_path)["models"][1]
    spec = ModelSpec.from_dict(entry["spec"])
    raw = (tmp_path / "m001" / "trained.bin").read_bytes()
    assert len(raw) == 8 * spec.num_params
    np.testing.assert_array_equal(np.frombuffer(raw, "<f8"), load_snapshot(tmp_path, entry).trained)
    train_raw = (tmp_path / "dataset" / "train.bin").read_bytes()
    assert len(train_raw) == 60 * 4 * 8 + 60 * 4


def test_diverged_models_are_listed_as_failed(tmp_path):
    raw = json.loads(json.dumps(SMALL))
    raw["dataset"]["cluster_scale"] = 1e150
    raw["grid"]["learning_rates"] = [0.05, 1e12]
    raw["grid"]["hidden_layer_widths"] = [[]]
    snaps = generate_zoo(ZooConfig.from_dict(raw), tmp_path)
    manifest = read_manifest(tmp_path)
    failed = [e for e in manifest["models"] if e["status"] == "failed"]
    assert failed and all("diverged" in e["error"] for e in failed)
    assert len(snaps) + len(failed) == 4
    for e in failed:
        assert not (tmp_path / e["model_id"]).exists()


def test_corrupt_snapshot_is_detected(tmp_path):
    generate_zoo(small_config(), tmp_path)
    (tmp_path / "m002" / "init.bin").write_bytes(b"\x00" * 12)
    entry = read_manifest(tmp_path)["models"][2]
    with pytest.raises(SnapshotError):
        load_snapshot(tmp_path, entry)


def _snap(model_id, train_acc, val_acc):
    spec = ModelSpec(2, (), 2)
    w = np.zeros(spec.num_params)
    return ModelSnapshot(model_id, spec, w, w, TrainingRecipe(0.1, 1, 1), train_acc, val_acc, 0)


def test_compute_gaps():
    records = compute_gaps([_snap("m001", 0.5, 0.5), _snap("m000", 1.0, 0.8)])
    assert [r.model_id for r in records] == ["m000", "m001"]
    assert records[0].gap == pytest.approx(0.2, abs=1e-15)
    assert records[1].gap == 0.0
    with pytest.raises(ValueError):
        compute_gaps([_snap("m002", None, 0.5)])
