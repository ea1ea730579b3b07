import math

import numpy as np
import pytest

from privmask import (
    ConditioningError,
    SpectrumGrid,
    StateSpaceModel,
    UndefinedEntropyError,
    integrate_spectrum,
    stationary_state_covariance,
    state_power_spectrum_logdet,
    z_power_spectrum,
)
from privmask.spectrum import grid_omegas, read_spectrum_csv, write_spectrum_csv

from .conftest import random_stable_model


def test_grid_layout():
    g = z_power_spectrum(StateSpaceModel.scalar(0.5, 1, 0.75, 0.1), 64)
    assert g.num_points == 64
    assert g.omegas[0] == -np.pi
    np.testing.assert_allclose(np.diff(g.omegas), 2 * np.pi / 64)
    assert g.omegas[-1] < np.pi


def test_scalar_closed_form(m1):
    g = z_power_spectrum(m1, 4096)
    # 0.75 / (1.25 - cos w)
    np.testing.assert_allclose(g.values, 0.75 / (1.25 - np.cos(g.omegas)), rtol=1e-13)
    i0 = np.argmin(np.abs(g.omegas))
    assert g.values[i0] == pytest.approx(3.0, rel=1e-13)
    assert g.values[0] == pytest.approx(1 / 3, rel=1e-13)


def test_white_spectrum_constant():
    W = np.array([[2.0, 0.3], [0.3, 1.0]])
    C = np.array([1.0, -2.0])
    g = z_power_spectrum(StateSpaceModel(np.zeros((2, 2)), C, W, 0.1), 128)
    np.testing.assert_allclose(g.values, C @ W @ C, rtol=1e-13)


def test_zero_process_noise():
    g = z_power_spectrum(StateSpaceModel([[0.3, 0.1], [0, 0.2]], [1, 1], np.zeros((2, 2)), 0.1), 64)
    assert np.all(g.values == 0)


def test_matches_explicit_inverse(rng):
    for _ in range(10):
        model = random_stable_model(rng)
        g = z_power_spectrum(model, 64)
        for w, v in zip(g.omegas[::7], g.values[::7]):
            G = np.linalg.inv(np.exp(1j * w) * np.eye(model.m) - model.A)
            ref = (model.C @ G @ model.W @ G.conj().T @ model.C).real
            assert v == pytest.approx(ref, rel=1e-11, abs=1e-14)


def test_even_symmetry_and_mirror(rng):
    model = random_stable_model(rng, m=3)
    g = z_power_spectrum(model, 256)
    np.testing.assert_array_equal(g.values, g.values[g.mirrored_index()])
    # direct evaluation on the negative half agrees with the mirror
    neg = g.omegas[1:128]
    G = np.linalg.inv(np.exp(1j * neg)[:, None, None] * np.eye(3) - model.A)
    ref = np.einsum("i,fij,jk,flk,l->f", model.C, G, model.W, G.conj(), model.C).real
    np.testing.assert_allclose(g.values[1:128], ref, rtol=1e-11)


def test_bad_grid_sizes(m1):
    for n in (32, 100, 0):
        with pytest.raises(ValueError):
            z_power_spectrum(m1, n)


def test_conditioning_guard():
    # bypass validation: a unit-circle eigenvalue makes the resolvent singular at w = 0
    with pytest.raises(ConditioningError):
        z_power_spectrum(StateSpaceModel.scalar(1.0, 1, 1, 0.1), 64)


def test_logdet_scalar(m1):
    assert state_power_spectrum_logdet(m1, 0.0) == pytest.approx(math.log2(3.0), rel=1e-13)


def test_logdet_memoryless():
    W = np.array([[2.0, 0.3], [0.3, 1.0]])
    model = StateSpaceModel(np.zeros((2, 2)), [1, 0], W, 0.1)
    vals = state_power_spectrum_logdet(model, np.linspace(-3, 3, 7))
    np.testing.assert_allclose(vals, np.log2(np.linalg.det(W)), rtol=1e-13)


def test_logdet_factorized_form(rng):
    # log det Phi = log det W - 2 log |det(e^{jw} I - A)|
    model = random_stable_model(rng, m=3)
    w = np.linspace(-np.pi, np.pi, 11)
    got = state_power_spectrum_logdet(model, w)
    dets = np.array([np.linalg.det(np.exp(1j * x) * np.eye(3) - model.A) for x in w])
    ref = np.log2(np.linalg.det(model.W)) - 2 * np.log2(np.abs(dets))
    np.testing.assert_allclose(got, ref, rtol=1e-11, atol=1e-12)


def test_logdet_singular_w():
    with pytest.raises(UndefinedEntropyError, match="conditional entropy undefined"):
        state_power_spectrum_logdet(StateSpaceModel.scalar(0.5, 1, 0.0, 0.1), 0.0)


def test_integrate_constant_and_zero():
    assert integrate_spectrum(SpectrumGrid.constant(2.5, 64)) == pytest.approx(2.5)
    assert integrate_spectrum(SpectrumGrid.constant(0.0, 64)) == 0.0


def test_integrate_matches_lyapunov(m1):
    assert integrate_spectrum(z_power_spectrum(m1, 4096)) == pytest.approx(1.0, abs=1e-6)


def test_parseval_random_models(rng):
    for _ in range(100):
        model = random_stable_model(rng)
        Sx = stationary_state_covariance(model)
        r0 = model.C @ Sx @ model.C
        assert integrate_spectrum(z_power_spectrum(model, 4096)) == pytest.approx(r0, rel=1e-6)


def test_quadrature_doubling(rng):
    for _ in range(20):
        model = random_stable_model(rng, max_radius=0.95)
        a = integrate_spectrum(z_power_spectrum(model, 4096))
        b = integrate_spectrum(z_power_spectrum(model, 8192))
        assert abs(a - b) <= 1e-8 * abs(b)


def test_grid_validation():
    with pytest.raises(ValueError, match="nonnegative"):
        SpectrumGrid.from_values(-np.ones(64))
    v = np.ones(64)
    v[3] = 2.0
    with pytest.raises(ValueError, match="even"):
        SpectrumGrid.from_values(v)


def test_interpolate_and_resample(m1):
    g = z_power_spectrum(m1, 4096)
    coarse = g.resample(64)
    np.testing.assert_allclose(coarse.values, z_power_spectrum(m1, 64).values, rtol=1e-12)
    assert g.interpolate(np.pi) == pytest.approx(g.values[0])


def test_csv_roundtrip(tmp_path, m1):
    g = z_power_spectrum(m1, 64)
    p = tmp_path / "s.csv"
    write_spectrum_csv(p, g)
    lines = p.read_text().splitlines()
    assert lines[0] == "omega,value"
    assert len(lines) == 65
    back = read_spectrum_csv(p)
    np.testing.assert_array_equal(back.values, g.values)
    np.testing.assert_array_equal(back.omegas, grid_omegas(64))
