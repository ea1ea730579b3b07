"""Finite-horizon brute-force oracle.

Over a horizon of ``k + 1`` samples the masked output is a bank of parallel
channels: diagonalizing the Toeplitz covariance of ``z[0..k]`` gives
independent channels with gains ``lambda_i``, and the optimal mask puts
power ``N_i`` along each eigenvector. As ``k`` grows the eigenvalue
distribution approaches ``S_z`` and the per-step leakage approaches the
spectral integral. Nothing here calls into :mod:`privmask.mask_design`
except :func:`convergence_report`, which needs the asymptotic value.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from .errors import InfeasibleError, InfiniteLeakageError
from .mask_design import design_distortion_constrained
from .system_model import StateSpaceModel, z_autocovariance

MAX_HORIZON = 8192
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class OracleResult:
    horizon_k: int
    eigenvalues: np.ndarray
    allocations: np.ndarray
    eta: float
    leakage_per_step_bits: float
    eigenvectors: np.ndarray | None = field(default=None, repr=False)

    def mask_covariance(self) -> np.ndarray:
        """Mask covariance ``U diag(N) U^T`` over the horizon."""
        if self.eigenvectors is None:
            raise ValueError("eigenvectors were not kept; rerun with keep_vectors=True")
        U = self.eigenvectors
        return (U * self.allocations) @ U.T


def toeplitz_z_covariance(model: StateSpaceModel, k: int) -> np.ndarray:
    """Covariance of ``z[0..k]``; entry (i, j) is ``R_z(|i - j|)``."""
    if k < 0:
        raise ValueError("horizon k must be nonnegative")
    return scipy.linalg.toeplitz(z_autocovariance(model, k))


def _allocation(lam: np.ndarray, eta: float, sigma_v_sq: float) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    out = np.zeros_like(lam)
    pos = lam > 0
    if eta > 0:
        out[pos] = eta / (2.0 * (np.sqrt(1.0 + eta / lam[pos]) + 1.0)) - sigma_v_sq
    return np.maximum(out, 0.0)


def channel_leakage_bits(eigenvalues, allocations, sigma_v_sq) -> np.ndarray:
    """Per-channel ``1/2 log2(1 + lambda_i / (N_i + sigma_v^2))``."""
    lam = np.asarray(eigenvalues, dtype=float)
    noise = np.asarray(allocations, dtype=float) + sigma_v_sq
    out = np.zeros_like(lam)
    pos = lam > 0
    if np.any(pos & (noise <= 0)):
        raise InfiniteLeakageError("infinite leakage: a channel has signal but no noise")
    out[pos] = 0.5 * np.log1p(lam[pos] / noise[pos]) / _LN2
    return out


def finite_waterfilling(eigenvalues, sigma_v_sq: float, D: float) -> tuple[float, np.ndarray]:
    """Allocate average mask power ``D`` across channels with gains ``eigenvalues``.

    Returns ``(eta, allocations)`` with ``mean(allocations) == D``.
    """
    lam = np.maximum(np.asarray(eigenvalues, dtype=float), 0.0)
    if D < 0:
        raise ValueError("distortion must be nonnegative")
    if D == 0:
        return 0.0, np.zeros_like(lam)
    if not np.any(lam > 0):
        raise InfeasibleError("infeasible: all channel gains are zero")

    def excess(eta):
        return float(np.mean(_allocation(lam, eta, sigma_v_sq))) - D

    lo = 4.0 * sigma_v_sq
    hi = max(2.0 * lo, 1.0)
    while excess(hi) < 0:
        lo, hi = hi, 2.0 * hi
    eta = brentq(excess, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(eta), _allocation(lam, eta, sigma_v_sq)


def finite_leakage(model: StateSpaceModel, k: int, D: float, keep_vectors: bool = False) -> OracleResult:
    """Minimum per-step leakage over a horizon of ``k + 1`` samples with average mask power ``D``."""
    if k > MAX_HORIZON:
        raise ValueError(f"horizon {k} exceeds cap {MAX_HORIZON}")
    T = toeplitz_z_covariance(model, k)
    try:
        if keep_vectors:
            lam, U = scipy.linalg.eigh(T)
        else:
            lam, U = scipy.linalg.eigh(T, eigvals_only=True), None
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigen-decomposition failed at k={k}: {exc}") from exc
    return oracle_from_eigenvalues(lam, model.sigma_v_sq, D, U)


def oracle_from_eigenvalues(eigenvalues, sigma_v_sq: float, D: float, eigenvectors=None) -> OracleResult:
    """Water-fill a precomputed Toeplitz spectrum; lets several budgets share one decomposition."""
    lam = np.asarray(eigenvalues, dtype=float)
    scale = max(float(np.max(np.abs(lam))), np.finfo(float).tiny)
    if np.min(lam) < -1e-9 * scale:
        raise ArithmeticError(f"Toeplitz covariance is not PSD (min eigenvalue {np.min(lam):.3g})")
    lam = np.maximum(lam, 0.0)
    eta, alloc = finite_waterfilling(lam, sigma_v_sq, D)
    leak = float(np.sum(channel_leakage_bits(lam, alloc, sigma_v_sq))) / len(lam)
    return OracleResult(len(lam) - 1, lam, alloc, eta, leak, eigenvectors)


@dataclass(frozen=True)
class ConvergenceRow:
    k: int
    leakage_k_bits: float
    asymptotic_bits: float
    gap_bits: float


def convergence_report(model: StateSpaceModel, D: float, horizons, grid_size: int = 8192) -> list[ConvergenceRow]:
    """Oracle leakage at each horizon against the spectral-integral value on a ``grid_size`` grid."""
    horizons = [int(h) for h in horizons]
    if any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ValueError("horizons must be strictly increasing")
    asym = design_distortion_constrained(model, D, grid_size).leakage_rate_bits
    rows = []
    for k in horizons:
        lk = finite_leakage(model, k, D).leakage_per_step_bits
        rows.append(ConvergenceRow(k, lk, asym, abs(lk - asym)))
    return rows


def write_convergence_csv(path: str | Path, rows: list[ConvergenceRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "leakage_k_bits", "asymptotic_bits", "gap_bits"])
        for r in rows:
            w.writerow([r.k, f"{r.leakage_k_bits:.17g}", f"{r.asymptotic_bits:.17g}", f"{r.gap_bits:.17g}"])
