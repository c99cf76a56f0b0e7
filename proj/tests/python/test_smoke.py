"""Smoke tests for the pybind11 surface."""

import json

import numpy as np
import pytest

import spixseg


def test_sampling_count():
    assert spixseg.sampling_count(0.01, 4096) == 40
    assert spixseg.sampling_count(1.0, 4096) == 4096
    assert spixseg.sampling_count(0.0002, 4096) == 1
    with pytest.raises(ValueError):
        spixseg.sampling_count(0.0, 4096)


def test_lr_schedule():
    assert spixseg.lr_at(0, 2e-3, 0.8, 20) == pytest.approx(2e-3)
    assert spixseg.lr_at(20, 2e-3, 0.8, 20) == pytest.approx(1.6e-3)
    assert spixseg.lr_at(100, 1e-3, 0.8, 50) == pytest.approx(6.4e-4)


def test_hadamard_bank_orthogonality():
    bank = spixseg.make_hadamard_patterns(16, 4, 4, ordering="natural")
    flat = bank.reshape(16, -1)
    gram = flat @ flat.T
    assert np.array_equal(gram, 16 * np.eye(16))
    assert np.all(bank[0] == 1.0)


def test_hadamard_sequency_counts_sign_changes():
    bank = spixseg.make_hadamard_patterns(8, 4, 2, ordering="sequency")
    flat = bank.reshape(8, -1)
    changes = (np.diff(np.sign(flat), axis=1) != 0).sum(axis=1)
    assert list(changes) == list(range(8))


def test_simulate_measurements_matches_numpy():
    rng = np.random.default_rng(7)
    scene = rng.random((16, 16))
    patterns = spixseg.make_random_patterns(5, 16, 16, seed=3)
    got = spixseg.simulate_measurements(scene, patterns)
    expect = np.einsum("yx,nyx->n", scene, patterns)
    np.testing.assert_allclose(got, expect, rtol=1e-12)


def test_metrics_hand_cases():
    a = np.array([[0, 1], [2, 0]], dtype=np.uint8)
    b = np.array([[0, 1], [0, 1]], dtype=np.uint8)
    assert spixseg.pixel_accuracy(a, a) == 100.0
    assert spixseg.pixel_accuracy(b, a) == 50.0
    pred = np.array([[1, 1], [0, 0]], dtype=np.uint8)
    gt = np.array([[1, 0], [1, 0]], dtype=np.uint8)
    assert spixseg.dice(pred, gt, [1]) == 50.0


def test_tv_reconstruct_identity_bank():
    side = 8
    eye = np.eye(side * side).reshape(side * side, side, side)
    scene = np.zeros((side, side))
    scene[2:6, 2:6] = 0.8
    meas = spixseg.simulate_measurements(scene, eye)
    image, trace, iters, converged = spixseg.tv_reconstruct(
        meas, eye, lambda_=1e-6, max_iters=50
    )
    assert np.all(np.diff(trace) <= 1e-12)
    assert np.abs(image - scene).max() < 1e-2
    assert iters >= 1 and converged


def test_model_roundtrip(tmp_path):
    config = {
        "n_measurements": 4,
        "scene_h": 16,
        "scene_w": 16,
        "n_classes": 2,
        "fsrcnn": {"d": 8, "s": 4, "m": 2},
        "head": {"levels": 2, "base": 4},
        "class_names": ["background", "foreground"],
    }
    model = spixseg.Model.init(json.dumps(config), seed=11)
    assert model.n_measurements == 4
    assert model.scene_side == 16

    rng = np.random.default_rng(3)
    scene = rng.random((16, 16))
    logits = model.forward(scene)
    assert logits.shape == (2, 16, 16)

    meas = model.encode(scene)
    assert meas.shape == (4,)
    labels = model.infer_from_measurements(meas)
    np.testing.assert_array_equal(labels, logits.argmax(axis=0).astype(np.uint8))

    path = tmp_path / "model.spx"
    model.save(path)
    back = spixseg.Model(path)
    np.testing.assert_array_equal(back.patterns(), model.patterns())
    np.testing.assert_array_equal(back.infer_from_measurements(meas), labels)

    with pytest.raises(ValueError):
        model.infer_from_measurements(np.zeros(7))


def test_noise_snr_calibration():
    rng = np.random.default_rng(5)
    values = rng.random(10000) + 1.0
    noisy = spixseg.apply_noise(values, kind="additive_gaussian", snr_db=20.0, seed=9)
    snr = 10 * np.log10((values**2).sum() / ((noisy - values) ** 2).sum())
    assert snr == pytest.approx(20.0, abs=0.5)
