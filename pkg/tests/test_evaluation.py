from __future__ import annotations

import math

import numpy as np
import pytest

from arrayloc.evaluation import align_and_evm, max_beamform_freq
from arrayloc.geometry import NodeLayout


def _random_rigid(rng):
    theta = rng.uniform(0.0, 2.0 * np.pi)
    rot = np.array(
        [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
    )
    if rng.random() < 0.5:
        rot = rot @ np.diag([1.0, -1.0])  # reflection
    return rot, rng.uniform(-10.0, 10.0, size=(2, 1))


def test_align_identity():
    truth = NodeLayout(np.array([[0.0, 1.0, 2.0], [0.0, 1.0, 0.0]]))
    result = align_and_evm(truth, truth)
    assert result.evm_mean == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(result.rotation, np.eye(2), atol=1e-12)
    assert np.allclose(result.translation, 0.0, atol=1e-12)


def test_align_undoes_any_rigid_map(rng):
    truth = NodeLayout(rng.uniform(-5, 5, size=(2, 8)))
    scale = np.abs(truth.coords).max()
    for _ in range(20):
        rot, shift = _random_rigid(rng)
        estimate = NodeLayout(rot @ truth.coords + shift)
        result = align_and_evm(estimate, truth)
        assert result.evm_mean < 1e-12 * scale
        assert np.allclose(
            result.rotation.T @ result.rotation, np.eye(2), atol=1e-10
        )


def test_aligned_layout_matches_the_reported_transform(rng):
    estimate = NodeLayout(rng.uniform(-1, 1, size=(2, 6)))
    truth = NodeLayout(rng.uniform(-1, 1, size=(2, 6)))
    result = align_and_evm(estimate, truth)
    rebuilt = result.rotation @ estimate.coords + result.translation[:, None]
    assert np.allclose(rebuilt, result.aligned.coords, atol=1e-12)


def test_evm_mean_is_the_mean_of_per_node_errors(rng):
    estimate = NodeLayout(rng.uniform(-1, 1, size=(2, 7)))
    truth = NodeLayout(rng.uniform(-1, 1, size=(2, 7)))
    result = align_and_evm(estimate, truth)
    assert result.evm_mean == pytest.approx(result.evm_per_node.mean(), rel=1e-14)
    assert result.evm_per_node.shape == (7,)


def test_evm_under_known_gaussian_perturbation():
    # with iid sigma per coordinate the node errors are Rayleigh; their mean
    # is sigma * sqrt(pi/2), and rigid alignment absorbs only O(1/N) of it
    rng = np.random.default_rng(6)
    sigma = 1e-3
    truth = NodeLayout(rng.uniform(0, 5, size=(2, 500)))
    noisy = NodeLayout(truth.coords + sigma * rng.standard_normal((2, 500)))
    direct = np.linalg.norm(noisy.coords - truth.coords, axis=0).mean()
    result = align_and_evm(noisy, truth)
    assert result.evm_mean == pytest.approx(direct, rel=0.02)
    assert result.evm_mean == pytest.approx(sigma * math.sqrt(math.pi / 2.0), rel=0.05)


def test_evm_consistent_under_relabeling(rng):
    estimate = NodeLayout(rng.uniform(-1, 1, size=(2, 6)))
    truth = NodeLayout(rng.uniform(-1, 1, size=(2, 6)))
    perm = rng.permutation(6)
    base = align_and_evm(estimate, truth)
    permuted = align_and_evm(
        NodeLayout(estimate.coords[:, perm]), NodeLayout(truth.coords[:, perm])
    )
    assert permuted.evm_mean == pytest.approx(base.evm_mean, rel=1e-12)
    assert np.allclose(permuted.evm_per_node, base.evm_per_node[perm], atol=1e-12)


def test_align_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        align_and_evm(NodeLayout(np.zeros((2, 4))), NodeLayout(np.zeros((2, 5))))


def test_evm_rms_property(rng):
    estimate = NodeLayout(rng.uniform(-1, 1, size=(2, 6)))
    truth = NodeLayout(rng.uniform(-1, 1, size=(2, 6)))
    result = align_and_evm(estimate, truth)
    assert result.evm_rms == pytest.approx(
        np.sqrt(np.mean(result.evm_per_node**2)), rel=1e-14
    )
    assert result.evm_rms >= result.evm_mean  # RMS dominates the mean


# ---------------------------------------------------------------------------
# beamforming bound
# ---------------------------------------------------------------------------


def test_beamform_freq_at_measured_precision():
    # 0.823 mm position error supports carriers up to about 24.3 GHz
    assert max_beamform_freq(0.823e-3) == pytest.approx(2.4284524746861080e10, rel=1e-12)


def test_beamform_freq_inverts_the_fifteenth_wavelength_rule():
    sigma = 9.51722088888889e-3  # one fifteenth of the 2.1 GHz wavelength
    assert max_beamform_freq(sigma) == pytest.approx(2.1e9, rel=1e-12)


def test_beamform_freq_inverse_proportionality():
    assert max_beamform_freq(0.5e-3) == pytest.approx(
        2.0 * max_beamform_freq(1e-3), rel=1e-14
    )
    values = [max_beamform_freq(s) for s in (1e-4, 1e-3, 1e-2)]
    assert values[0] > values[1] > values[2]


def test_beamform_freq_rejects_non_positive_error():
    with pytest.raises(ValueError):
        max_beamform_freq(0.0)
    with pytest.raises(ValueError):
        max_beamform_freq(-1e-3)
