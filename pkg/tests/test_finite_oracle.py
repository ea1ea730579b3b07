import math

import numpy as np
import pytest

from privmask import (
    InfeasibleError,
    StateSpaceModel,
    convergence_report,
    design_distortion_constrained,
    finite_leakage,
    finite_waterfilling,
    oracle_from_eigenvalues,
    toeplitz_z_covariance,
    z_autocovariance,
    z_power_spectrum,
)
from privmask.finite_oracle import channel_leakage_bits, write_convergence_csv

from .conftest import random_stable_model


def _leak(lam, alloc, sv):
    return float(np.sum(0.5 * np.log2(1 + lam / (alloc + sv))))


def test_toeplitz_m1(m1):
    np.testing.assert_allclose(
        toeplitz_z_covariance(m1, 2), [[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]], rtol=1e-13
    )


def test_toeplitz_white_and_single():
    model = StateSpaceModel(np.zeros((2, 2)), [1, 1], [[1.0, 0.2], [0.2, 0.5]], 0.1)
    np.testing.assert_allclose(toeplitz_z_covariance(model, 4), 1.9 * np.eye(5), atol=1e-15)
    assert toeplitz_z_covariance(model, 0).shape == (1, 1)


def test_trace_identity(rng):
    for k in (0, 5, 100):
        model = random_stable_model(rng)
        T = toeplitz_z_covariance(model, k)
        assert np.trace(T) == pytest.approx((k + 1) * z_autocovariance(model, 0)[0], rel=1e-14)


def test_waterfilling_single_channel():
    eta, alloc = finite_waterfilling([2.0], 0.5, 1.0)
    assert alloc[0] == pytest.approx(1.0, rel=1e-12)
    assert _leak(np.array([2.0]), alloc, 0.5) == pytest.approx(0.5 * math.log2(1 + 2 / 1.5), rel=1e-12)
    assert eta == pytest.approx(10.5, rel=1e-10)


def test_waterfilling_zero_budget():
    eta, alloc = finite_waterfilling([3.0, 1.0, 0.0], 0.1, 0.0)
    assert eta == 0 and np.all(alloc == 0)


def test_waterfilling_all_zero_gains():
    with pytest.raises(InfeasibleError):
        finite_waterfilling([0.0, 0.0], 0.1, 1.0)


def test_waterfilling_brute_force_two_channels():
    lam = np.array([3.0, 1 / 3])
    sv, D = 0.1, 0.5
    _, alloc = finite_waterfilling(lam, sv, D)
    assert alloc[0] > alloc[1]
    # exhaustive search over N0 + N1 = 2 D with step 1e-4
    n0 = np.arange(0, 2 * D + 5e-5, 1e-4)
    n1 = 2 * D - n0
    keep = n1 >= -1e-12
    n0, n1 = n0[keep], np.maximum(n1[keep], 0)
    obj = 0.5 * np.log2(1 + lam[0] / (n0 + sv)) + 0.5 * np.log2(1 + lam[1] / (n1 + sv))
    best = np.argmin(obj)
    assert abs(n0[best] - alloc[0]) <= 1e-3
    assert abs(n1[best] - alloc[1]) <= 1e-3


def test_waterfilling_formula_and_budget(rng):
    for _ in range(20):
        lam = np.concatenate([rng.exponential(2.0, 12), [0.0]])
        sv = float(rng.uniform(0, 1))
        D = float(rng.uniform(0.01, 3))
        eta, alloc = finite_waterfilling(lam, sv, D)
        assert np.mean(alloc) == pytest.approx(D, rel=1e-10)
        ref = np.zeros_like(lam)
        pos = lam > 0
        ref[pos] = np.maximum(eta / (2 * (1 + np.sqrt(1 + eta / lam[pos]))) - sv, 0)
        np.testing.assert_allclose(alloc, ref, rtol=1e-12, atol=1e-15)
        assert alloc[-1] == 0


def test_finite_leakage_k0(m1):
    res = finite_leakage(m1, 0, 0.4)
    assert res.eigenvalues[0] == pytest.approx(1.0)
    assert res.leakage_per_step_bits == pytest.approx(0.5 * math.log2(3), rel=1e-12)


@pytest.mark.parametrize("k", [0, 3, 50])
def test_finite_leakage_white(m0, k):
    res = finite_leakage(m0, k, 1.0)
    assert res.leakage_per_step_bits == pytest.approx(0.5 * math.log2(1 + 2 / 1.5), rel=1e-12)


def test_finite_leakage_pipeline_invariants(m1):
    res = finite_leakage(m1, 40, 0.5)
    assert res.horizon_k == 40 and len(res.eigenvalues) == 41
    assert np.all(res.eigenvalues >= 0)
    assert np.mean(res.allocations) == pytest.approx(0.5, rel=1e-10)


def test_finite_leakage_m1_asymptotic(m1):
    res = finite_leakage(m1, 2048, 0.5)
    asym = design_distortion_constrained(m1, 0.5, 8192).leakage_rate_bits
    assert abs(res.leakage_per_step_bits - asym) <= 1e-3


def test_oracle_agreement_random_models():
    rng = np.random.default_rng(777)
    worst = 0.0
    for _ in range(20):
        model = random_stable_model(rng)
        lam = np.linalg.eigvalsh(toeplitz_z_covariance(model, 2048))
        s_z = z_power_spectrum(model, 8192)
        for D in (0.1, 1.0, 10.0):
            fin = oracle_from_eigenvalues(lam, model.sigma_v_sq, D).leakage_per_step_bits
            asym = design_distortion_constrained(model, D, s_z=s_z).leakage_rate_bits
            worst = max(worst, abs(fin - asym))
    assert worst <= 2e-3


def test_eigenvalue_range(m1):
    res = finite_leakage(m1, 1024, 0.0)
    s = z_power_spectrum(m1, 8192).values
    span = s.max() - s.min()
    assert res.eigenvalues.min() >= s.min() - 0.05 * span
    assert res.eigenvalues.max() <= s.max() + 0.05 * span


@pytest.mark.parametrize("k", [1, 3, 6])
def test_local_optimality_perturbations(rng, k):
    model = random_stable_model(rng)
    D = 0.7
    res = finite_leakage(model, k, D)
    lam, alloc, sv = res.eigenvalues, res.allocations, model.sigma_v_sq
    base = _leak(lam, alloc, sv)
    for _ in range(1000):
        delta = rng.standard_normal(k + 1)
        delta -= delta.mean()
        step = rng.uniform(1e-6, 0.5)
        cand = alloc + step * delta
        if np.any(cand < 0):
            # scale back onto the nonnegative orthant, still budget preserving
            neg = delta < 0
            t = np.min(alloc[neg] / -delta[neg]) if np.any(neg) else step
            cand = alloc + min(step, t) * delta
            cand = np.maximum(cand, 0.0)
            cand *= (D * (k + 1)) / cand.sum()
        assert _leak(lam, cand, sv) >= base - 1e-9


def test_convergence_report_trend(m1):
    rows = convergence_report(m1, 0.5, [16, 64, 256, 1024])
    gaps = [r.gap_bits for r in rows]
    assert gaps[-1] < gaps[0]
    for a, b in zip(gaps, gaps[1:]):
        assert b <= 1.1 * a
    assert all(r.asymptotic_bits == rows[0].asymptotic_bits for r in rows)


def test_convergence_report_white(m0):
    for r in convergence_report(m0, 1.0, [4, 16, 64]):
        assert r.gap_bits <= 1e-9


def test_convergence_report_unmasked(m1):
    rows = convergence_report(m1, 0.0, [16, 128, 1024])
    assert rows[-1].gap_bits < rows[0].gap_bits
    assert rows[-1].gap_bits < 1e-3


def test_convergence_csv(tmp_path, m1):
    rows = convergence_report(m1, 0.5, [4, 8], grid_size=1024)
    write_convergence_csv(tmp_path / "c.csv", rows)
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "k,leakage_k_bits,asymptotic_bits,gap_bits"
    assert lines[1].startswith("4,")


def test_channel_leakage_zero_gain_channels():
    out = channel_leakage_bits([0.0, 1.0], [0.0, 1.0], 0.0)
    assert out[0] == 0.0 and out[1] == pytest.approx(0.5)


def test_horizon_cap(m1):
    with pytest.raises(ValueError):
        finite_leakage(m1, 10_000, 0.5)
