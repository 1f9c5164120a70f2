import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import tent_values
from pptnqfe.encoder import FeatureEncoding, encode_state
from pptnqfe.kernel import (
    AngleKernel,
    PptnqfeKernel,
    classify_experiment,
    decision_function,
    fit,
    gen_half_moons,
    gen_three_lines,
    kernel_matrix,
    kernel_value,
    predict,
    probe_grid,
)
from pptnqfe.quantum_sim import Circuit, apply, ry

KERNELS = [PptnqfeKernel(), PptnqfeKernel(2), AngleKernel(), AngleKernel((1, 2, 4), 0.5)]
points2d = st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=12)


@settings(max_examples=30)
@pytest.mark.parametrize("spec", KERNELS, ids=repr)
@given(pts=points2d)
def test_gram_matrix_is_psd_with_unit_diagonal(spec, pts):
    gram = kernel_matrix(spec, np.array(pts))
    np.testing.assert_allclose(np.diag(gram), 1.0, atol=1e-12)
    np.testing.assert_array_equal(gram, gram.T)
    assert np.linalg.eigvalsh(gram).min() >= -1e-10
    assert gram.min() >= 0 and gram.max() <= 1 + 1e-12


def pptnqfe_simulated(x, y, q):
    enc = FeatureEncoding.closed(q)
    a = np.kron(encode_state(enc, x[0])[0], encode_state(enc, x[1])[0])
    b = np.kron(encode_state(enc, y[0])[0], encode_state(enc, y[1])[0])
    return abs(np.vdot(a, b)) ** 2


def angle_simulated(x, y, spec):
    def state(p):
        gates = [ry(f * np.pi * spec.scale * v, i * len(spec.frequencies) + j)
                 for i, v in enumerate(p) for j, f in enumerate(spec.frequencies)]
        return apply(Circuit(2 * len(spec.frequencies), tuple(gates)))

    return abs(np.vdot(state(x), state(y))) ** 2


def test_kernels_match_six_qubit_simulation():
    rng = np.random.default_rng(0)
    for _ in range(30):
        x, y = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        assert kernel_value(PptnqfeKernel(3), x, y) == pytest.approx(pptnqfe_simulated(x, y, 3), abs=1e-12)
        assert kernel_value(AngleKernel(), x, y) == pytest.approx(angle_simulated(x, y, AngleKernel()), abs=1e-12)


def test_kernel_value_dimension_mismatch():
    with pytest.raises(ValueError):
        kernel_value(PptnqfeKernel(), [0.0, 0.0], [0.0])
    with pytest.raises(ValueError):
        kernel_matrix(PptnqfeKernel(), np.zeros((2, 2)), np.zeros((2, 3)))


def test_pptnqfe_compact_support():
    spec = PptnqfeKernel(3)
    h = 2.0 / 7
    rng = np.random.default_rng(1)
    for _ in range(300):
        x = rng.uniform(-1, 1, 2)
        y = x.copy()
        y[0] = x[0] + rng.choice([-1, 1]) * rng.uniform(2 * h, 2)
        if abs(y[0]) > 1:
            continue
        assert kernel_value(spec, x, y) == 0.0
    grid = np.linspace(-1, 1, 50)
    for a in grid:
        for b in grid:
            k = kernel_value(spec, [a, 0.0], [b, 0.0])
            disjoint = not np.any((tent_values(3, a) > 1e-12) & (tent_values(3, b) > 1e-12))
            assert (k == 0.0) == disjoint
            if k == 0.0:
                assert abs(a - b) >= h - 1e-12


def test_zero_kernel_does_not_require_two_spacings():
    # one direction of the equivalence fails: points closer than 2h can still have zero overlap
    h = 2.0 / 7
    a, b = -1.0 + 0.9 * h, -1.0 + 2.1 * h
    assert abs(a - b) < 2 * h
    assert kernel_value(PptnqfeKernel(3), [a, 0.0], [b, 0.0]) == 0.0


@pytest.mark.parametrize("freqs, size", [((1, 2, 3), 13), ((1, 2, 4), 15), ((1,), 3)])
def test_angle_kernel_frequency_spectrum(freqs, size):
    spec = AngleKernel(freqs)
    assert len(spec.spectrum()) == size
    m = 128
    deltas = np.arange(m) * 2.0 / m  # kernel has period 2 in the feature difference
    k = kernel_matrix(spec, deltas[:, None], np.zeros((1, 1)))[:, 0]
    coeffs = np.fft.fft(k) / m
    present = np.flatnonzero(np.abs(coeffs) > 1e-12)
    present = np.where(present > m // 2, present - m, present)
    np.testing.assert_array_equal(np.sort(present), spec.spectrum().astype(int))


def test_far_apart_points_fit_exactly():
    pts = np.array([[-0.9, -0.9], [0.9, 0.9]])
    y = np.array([1.0, -1.0])
    model = fit(PptnqfeKernel(), pts, y, lam=0.25)
    np.testing.assert_allclose(model.alpha, y / 1.25, atol=1e-15)


def test_small_ridge_interpolates_training_labels():
    data = gen_half_moons(40, seed=3)
    for spec in (PptnqfeKernel(), AngleKernel()):
        model = fit(spec, data.points, data.labels, lam=1e-8)
        np.testing.assert_allclose(decision_function(spec, model, data.points), data.labels, atol=1e-3)


def test_singular_system_raises_lambda_with_warning():
    pts = np.array([[0.1, 0.2], [0.1, 0.2]])
    with pytest.warns(RuntimeWarning):
        model = fit(PptnqfeKernel(), pts, [1.0, 1.0], lam=0.0)
    assert model.lam_raised and model.lam > 0
    with pytest.raises(ValueError):
        fit(PptnqfeKernel(), np.zeros((0, 2)), [])


def test_label_flip_flips_decision():
    data = gen_three_lines(60, seed=2)
    spec = PptnqfeKernel()
    a = fit(spec, data.points, data.labels)
    b = fit(spec, data.points, -data.labels)
    probes = probe_grid()
    np.testing.assert_allclose(decision_function(spec, a, probes), -decision_function(spec, b, probes), atol=1e-12)


def test_predict_maps_zero_to_plus_one():
    spec = PptnqfeKernel()
    model = fit(spec, np.array([[-0.9, -0.9]]), [-1.0])
    assert predict(spec, model, np.array([[0.9, 0.9]]))[0] == 1


@pytest.mark.parametrize("n", [4, 5, 200])
def test_half_moons_generator(n):
    d = gen_half_moons(n, seed=1)
    assert d.points.shape == (n, 2)
    assert abs(d.labels.sum()) <= 1
    assert d.points.min() >= -0.9 - 1e-12 and d.points.max() <= 0.9 + 1e-12
    assert len(d.train) == round(0.8 * n) and len(d.train) + len(d.test) == n
    assert set(d.train).isdisjoint(d.test)


@pytest.mark.parametrize("n", [4, 7, 150])
def test_three_lines_generator(n):
    d = gen_three_lines(n, seed=1)
    assert abs(d.labels.sum()) <= 1
    assert np.all(np.abs(d.points) <= 1)
    clean = gen_three_lines(n, noise=0.0, seed=1)
    assert set(np.unique(clean.points[:, 1])) <= {-0.5, 0.0, 0.5}
    np.testing.assert_array_equal(clean.labels[clean.points[:, 1] == 0.0], -1)


def test_generators_are_seeded_and_validate_size():
    np.testing.assert_array_equal(gen_half_moons(seed=4).points, gen_half_moons(seed=4).points)
    with pytest.raises(ValueError):
        gen_half_moons(3)
    with pytest.raises(ValueError):
        gen_three_lines(2)


def test_probe_grid_layout():
    probes = probe_grid()
    assert probes.shape == (84, 2)
    assert set(np.round(probes[:, 1], 2)) == {-0.95, -0.85, 0.85, 0.95}


def test_classify_experiment_scores():
    report = classify_experiment(gen_half_moons(seed=0))
    for name in ("pptnqfe", "angle"):
        s = report.scores[name]
        assert s.train_accuracy == 1.0
        assert s.test_accuracy >= 0.9
        assert s.probe_flips <= s.probe_flips_any
        assert s.predictions.shape == (200,)
