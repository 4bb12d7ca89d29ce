import numpy as np
import pytest

from xbarsim import nn
from xbarsim.device import DeviceParams


@pytest.fixture(scope="module")
def small():
    d = nn.generate_dataset(4, 32, 800, seed=3, separation=4.0)
    train, test = d.split(600)
    return nn.train_reference(train, (32,), epochs=20, seed=0), train, test


def test_dataset_determinism_and_shape():
    a = nn.generate_dataset(3, 8, 30, seed=1)
    b = nn.generate_dataset(3, 8, 30, seed=1)
    assert np.array_equal(a.features, b.features) and np.array_equal(a.labels, b.labels)
    assert a.features.min() >= 0 and a.features.max() <= 255
    one = nn.generate_dataset(5, 8, 5, seed=0)
    assert sorted(one.labels.tolist()) == [0, 1, 2, 3, 4]


def test_separated_blobs_train_to_full_accuracy():
    d = nn.generate_dataset(2, 16, 200, seed=0, separation=8.0)
    net = nn.train_float(d, (16,), epochs=20, seed=0)
    assert np.mean(net.predict(d.features / nn.ACT_MAX) == d.labels) >= 0.99


def test_zero_epochs_is_chance():
    d = nn.generate_dataset(10, 16, 2000, seed=0)
    net = nn.train_float(d, (16,), epochs=0, seed=0)
    assert abs(np.mean(net.predict(d.features / nn.ACT_MAX) == d.labels) - 0.1) < 0.1


def test_training_deterministic():
    d = nn.generate_dataset(3, 8, 60, seed=0)
    a, b = nn.train_reference(d, (8,), 5, seed=4), nn.train_reference(d, (8,), 5, seed=4)
    assert all(np.array_equal(x.weights.values, y.weights.values) for x, y in zip(a.layers, b.layers))


def test_divergence_detected():
    d = nn.generate_dataset(3, 8, 60, seed=0)
    with pytest.raises(nn.TrainingDivergedError):
        nn.train_float(d, (8,), epochs=50, seed=0, lr=1e100)


def test_quantized_model_tracks_float(small):
    model, train, test = small
    acc = nn.accuracy(nn.software_logits(model, test.features), test.labels)
    assert acc > 0.8


@pytest.mark.parametrize("stack", ["conventional", "vecom"])
def test_ideal_equivalence(small, stack):
    model, _, test = small
    res = nn.infer_sim(model, test, stack, DeviceParams(r_ratio=1e9), trials=1)
    assert res.mean == res.software_accuracy and res.logit_rmse == (0.0,)


def test_vecom_exact_at_low_r(small):
    model, _, test = small
    ideal = nn.infer_sim(model, test, "vecom", DeviceParams(r_ratio=1e9))
    low = nn.infer_sim(model, test, "vecom", DeviceParams(r_ratio=7))
    assert low.accuracies == ideal.accuracies and low.logit_rmse == (0.0,)


def test_heavy_variation_hurts_conventional(small):
    model, _, test = small
    res = nn.infer_sim(model, test, "conventional", DeviceParams(sigma=0.12), trials=5)
    assert res.mean < res.software_accuracy


def test_dimension_mismatch(small):
    model, _, _ = small
    with pytest.raises(ValueError):
        nn.infer_sim(model, nn.generate_dataset(4, 16, 20, seed=0), "vecom", DeviceParams())


def test_requantize_saturates():
    assert nn.requantize([-5, 10, 1000], 0.5).tolist() == [0, 5, 255]


def test_model_and_dataset_files(tmp_path, small):
    model, _, test = small
    nn.save_model(model, tmp_path / "m.json")
    back = nn.load_model(tmp_path / "m.json")
    assert np.array_equal(nn.software_logits(back, test.features), nn.software_logits(model, test.features))
    nn.save_dataset(test, tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().startswith("label,f0,f1")
    d = nn.load_dataset(tmp_path / "d.csv", class_count=4)
    assert np.array_equal(d.features, test.features) and np.array_equal(d.labels, test.labels)
