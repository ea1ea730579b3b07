"""End-to-end consistency checks across the design, oracle and spectrum routes."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import InfiniteLeakageError
from .finite_oracle import channel_leakage_bits, finite_leakage, toeplitz_z_covariance
from .mask_design import (
    design_distortion_constrained,
    design_leakage_constrained,
    iid_leakage,
)
from .spectrum import DEFAULT_GRID, SpectrumGrid, integrate_spectrum, z_power_spectrum
from .system_model import StateSpaceModel, state_autocovariance_blocks

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class CheckResult:
    """One named check. ``tolerance=None`` marks an informational reading."""

    check_id: str
    value: float
    discrepancy: float = 0.0
    tolerance: float | None = None

    @property
    def passed(self) -> bool:
        if self.tolerance is None:
            return True
        return bool(abs(self.discrepancy) <= self.tolerance)

    def to_dict(self) -> dict:
        val = self.value if math.isfinite(self.value) else None
        return {
            "check_id": self.check_id,
            "value": val,
            "discrepancy": self.discrepancy,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


@dataclass
class ValidationReport:
    checks: list[CheckResult] = field(default_factory=list)

    def add(self, check_id, value, discrepancy=0.0, tolerance=None) -> CheckResult:
        c = CheckResult(check_id, float(value), float(discrepancy), tolerance)
        self.checks.append(c)
        return c

    def extend(self, other: ValidationReport) -> None:
        self.checks.extend(other.checks)

    def __getitem__(self, check_id) -> CheckResult:
        for c in self.checks:
            if c.check_id == check_id:
                return c
        raise KeyError(check_id)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_list(self) -> list[dict]:
        return [c.to_dict() for c in sorted(self.checks, key=lambda c: c.check_id)]

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_list(), indent=2) + "\n")


def _logdet_pd(M: np.ndarray) -> float | None:
    """Natural log-determinant via Cholesky; ``None`` if M is not positive definite."""
    try:
        c, _ = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return None
    d = np.diag(c)
    if np.any(d <= 0):
        return None
    return float(2.0 * np.sum(np.log(d)))


def toeplitz_psd_repair(autocov) -> tuple[np.ndarray, float]:
    """Toeplitz matrix of ``autocov`` with negative eigenvalues clipped to 0.

    Returns the matrix and the spectral-norm size of the repair (0 if none).
    """
    T = scipy.linalg.toeplitz(np.asarray(autocov, dtype=float))
    lam, U = scipy.linalg.eigh(T)
    if np.min(lam) >= 0:
        return T, 0.0
    pert = float(-np.min(lam))
    return (U * np.maximum(lam, 0.0)) @ U.T, pert


def mask_autocovariance(mask_spectrum: SpectrumGrid, max_lag: int) -> np.ndarray:
    """Autocovariance of the mask, lags ``0..max_lag``, by inverse DFT of the grid.

    Lags beyond the grid length wrap around (the grid defines a circular process).
    """
    r = np.fft.ifft(np.fft.ifftshift(mask_spectrum.values)).real
    return r[np.arange(max_lag + 1) % len(r)]


def finite_horizon_leakage_analytic(model: StateSpaceModel, mask_autocov, k: int) -> float:
    """Per-step ``1/2 log2 det(Sz + Sv + Sn) / det(Sv + Sn)`` over ``k + 1`` samples.

    ``mask_autocov`` is either a lag sequence (at least ``k + 1`` long, made
    Toeplitz and PSD-repaired) or a full ``(k+1) x (k+1)`` mask covariance.

    Raises
    ------
    InfiniteLeakageError
        If ``Sv + Sn`` is singular.
    """
    n = k + 1
    mask = np.asarray(mask_autocov, dtype=float)
    if mask.ndim == 1:
        if len(mask) < n:
            raise ValueError(f"need {n} mask lags, got {len(mask)}")
        Sn, _ = toeplitz_psd_repair(mask[:n])
    else:
        if mask.shape != (n, n):
            raise ValueError(f"mask covariance must be {n} x {n}")
        Sn = 0.5 * (mask + mask.T)
    noise = Sn + model.sigma_v_sq * np.eye(n)
    ld_noise = _logdet_pd(noise)
    if ld_noise is None:
        raise InfiniteLeakageError("measurement-plus-mask covariance is singular")
    ld_out = _logdet_pd(toeplitz_z_covariance(model, k) + noise)
    return 0.5 * (ld_out - ld_noise) / _LN2 / n


def state_augmented_leakage(model: StateSpaceModel, mask_cov, k: int) -> float:
    """Same leakage computed from the joint covariance of states and masked outputs.

    ``I(x; y_hat) = 1/2 log2 det(Sx) det(Sy) / det(S_joint)``, which conditions on
    the state rather than the noiseless output. Needs a positive definite state
    covariance over the horizon.
    """
    n = k + 1
    m = model.m
    Sx = state_autocovariance_blocks(model, k)
    Cbig = np.kron(np.eye(n), model.C.reshape(1, m))
    mask = np.asarray(mask_cov, dtype=float)
    Sn = scipy.linalg.toeplitz(mask[:n]) if mask.ndim == 1 else mask
    Sy = Cbig @ Sx @ Cbig.T + model.sigma_v_sq * np.eye(n) + Sn
    cross = Sx @ Cbig.T
    joint = np.block([[Sx, cross], [cross.T, Sy]])
    lds = [_logdet_pd(M) for M in (Sx, Sy, joint)]
    if any(v is None for v in lds):
        raise ArithmeticError("state-augmented covariance is singular")
    return 0.5 * (lds[0] + lds[1] - lds[2]) / _LN2 / n


def compare_designs(model: StateSpaceModel, D: float, grid_size: int = DEFAULT_GRID, k: int = 256) -> ValidationReport:
    """Colored versus white mask at equal power, asymptotically and over horizon ``k``."""
    rep = ValidationReport()
    design = design_distortion_constrained(model, D, grid_size)
    colored = design.leakage_rate_bits
    iid = iid_leakage(model, design.s_z, D)
    rep.add("compare.colored_leakage_bits", colored)
    rep.add("compare.iid_leakage_bits", iid)
    rep.add("compare.improvement_bits", iid - colored, max(0.0, colored - iid), 1e-9)

    orc = finite_leakage(model, k, D)
    fin_iid = float(np.sum(channel_leakage_bits(orc.eigenvalues, np.full(k + 1, float(D)), model.sigma_v_sq))) / (k + 1)
    rep.add("compare.finite_colored_leakage_bits", orc.leakage_per_step_bits)
    rep.add("compare.finite_iid_leakage_bits", fin_iid)
    rep.add(
        "compare.finite_improvement_bits",
        fin_iid - orc.leakage_per_step_bits,
        max(0.0, orc.leakage_per_step_bits - fin_iid),
        1e-9,
    )
    rep.add("compare.finite_minus_asymptotic_bits", orc.leakage_per_step_bits - colored)
    return rep


def duality_roundtrip(model: StateSpaceModel, D_values, grid_size: int = DEFAULT_GRID, rtol: float = 1e-6) -> ValidationReport:
    """Solve the distortion problem, feed its leakage to the dual, compare distortions."""
    rep = ValidationReport()
    s_z = z_power_spectrum(model, grid_size)
    for D in D_values:
        if not D > 0:
            raise ValueError("round-trip distortions must be positive")
        R = design_distortion_constrained(model, D, s_z=s_z).leakage_rate_bits
        D2 = design_leakage_constrained(model, R, s_z=s_z).realized_distortion
        rep.add(f"duality.D={D:.6g}", D2, abs(D - D2) / D, rtol)
    return rep


def determinant_route(model: StateSpaceModel, D: float, k: int, tol: float = 1e-9) -> ValidationReport:
    """Oracle eigen-sum leakage versus the determinant ratio with the oracle's mask covariance."""
    rep = ValidationReport()
    orc = finite_leakage(model, k, D, keep_vectors=True)
    det = finite_horizon_leakage_analytic(model, orc.mask_covariance(), k)
    rep.add(f"determinant_route.k={k}", det, det - orc.leakage_per_step_bits, tol)
    return rep


def chain_identity(model: StateSpaceModel, mask_autocov, k: int, tol: float = 1e-8) -> ValidationReport:
    """Output-conditioned versus state-conditioned determinant leakage."""
    rep = ValidationReport()
    a = finite_horizon_leakage_analytic(model, mask_autocov, k)
    b = state_augmented_leakage(model, mask_autocov, k)
    rep.add(f"chain_identity.k={k}", a, a - b, tol)
    return rep


def run_all(model: StateSpaceModel, D: float, grid_size: int = DEFAULT_GRID, k: int = 256) -> ValidationReport:
    """Every check that applies to ``model``; used by the ``validate`` command."""
    rep = compare_designs(model, D, grid_size, k)
    if D > 0:
        rep.extend(duality_roundtrip(model, [D / 10, D, 10 * D], grid_size))
    rep.extend(determinant_route(model, D, min(k, 256)))

    design = design_distortion_constrained(model, D, grid_size)
    kk = min(k, 64)
    lags = mask_autocovariance(design.mask_spectrum, kk)
    _, pert = toeplitz_psd_repair(lags)
    rep.add("mask_autocov.psd_repair", pert)
    try:
        np.linalg.cholesky(model.W)
    except np.linalg.LinAlgError:
        pass
    else:
        rep.extend(chain_identity(model, lags, kk))
    quad = integrate_spectrum(design.s_z)
    r0 = float(toeplitz_z_covariance(model, 0)[0, 0])
    rep.add("spectrum.parseval", quad, (quad - r0) / r0 if r0 > 0 else quad, 1e-6)
    return rep
