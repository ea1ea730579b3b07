"""Power spectra of the noiseless output and of the state on a uniform grid.

Grids cover ``[-pi, pi)`` with ``num_points`` samples (a power of two), so
``omegas[i] = -pi + 2*pi*i/num_points`` and the sample at ``-omega_i`` sits at
index ``(num_points - i) % num_points``. Spectra of real processes are even,
so they are evaluated on ``[0, pi]`` only and mirrored.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConditioningError, UndefinedEntropyError
from .system_model import StateSpaceModel

DEFAULT_GRID = 4096
_COND_LIMIT = 1e14
_IMAG_TOL = 1e-10


def _check_grid_size(n: int, minimum: int = 64) -> int:
    n = int(n)
    if n < minimum or n & (n - 1):
        raise ValueError(f"grid size must be a power of two >= {minimum}, got {n}")
    return n


def grid_omegas(num_points: int) -> np.ndarray:
    return -np.pi + 2.0 * np.pi * np.arange(num_points) / num_points


def _half_omegas(num_points: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(num_points // 2 + 1) / num_points


def mirror_half(half: np.ndarray) -> np.ndarray:
    """Expand samples at ``omega = 2*pi*j/n, j = 0..n/2`` onto the full grid."""
    h = len(half) - 1
    idx = np.abs(np.arange(2 * h) - h)
    return np.asarray(half)[idx]


@dataclass(frozen=True)
class SpectrumGrid:
    """Nonnegative even spectrum sampled on the canonical ``[-pi, pi)`` grid."""

    num_points: int
    omegas: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        omegas = np.asarray(self.omegas, dtype=float)
        omegas.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "omegas", omegas)

    @classmethod
    def from_values(cls, values, check: bool = True) -> SpectrumGrid:
        values = np.asarray(values, dtype=float)
        n = _check_grid_size(len(values), minimum=2)
        grid = cls(n, grid_omegas(n), values)
        if check:
            grid.check()
        return grid

    @classmethod
    def from_half(cls, half) -> SpectrumGrid:
        return cls.from_values(mirror_half(half), check=False)

    @classmethod
    def constant(cls, c: float, num_points: int = DEFAULT_GRID) -> SpectrumGrid:
        return cls.from_values(np.full(_check_grid_size(num_points), float(c)))

    @property
    def half_values(self) -> np.ndarray:
        """Samples on ``[0, pi]``."""
        n = self.num_points
        return np.concatenate([self.values[n // 2:], self.values[:1]])

    def mirrored_index(self) -> np.ndarray:
        return (self.num_points - np.arange(self.num_points)) % self.num_points

    def check(self) -> None:
        """Raise ``ValueError`` unless values are finite, nonnegative and even."""
        v = self.values
        if v.shape != (self.num_points,) or self.omegas.shape != v.shape:
            raise ValueError("spectrum grid arrays have inconsistent lengths")
        if not np.all(np.isfinite(v)):
            raise ValueError("spectrum contains non-finite values")
        if np.any(v < 0):
            raise ValueError("spectrum values must be nonnegative")
        scale = max(float(np.max(np.abs(v), initial=0.0)), np.finfo(float).tiny)
        if np.max(np.abs(v - v[self.mirrored_index()]), initial=0.0) > 1e-10 * scale:
            raise ValueError("spectrum is not even in omega")

    def interpolate(self, omegas) -> np.ndarray:
        """Periodic linear interpolation at arbitrary frequencies."""
        w = np.mod(np.asarray(omegas, dtype=float) + np.pi, 2 * np.pi) - np.pi
        xp = np.append(self.omegas, np.pi)
        fp = np.append(self.values, self.values[0])
        return np.interp(w, xp, fp)

    def resample(self, num_points: int) -> SpectrumGrid:
        if num_points == self.num_points:
            return self
        return SpectrumGrid.from_values(self.interpolate(grid_omegas(num_points)), check=False)


def _resolvent_rows(model: StateSpaceModel, omegas: np.ndarray) -> np.ndarray:
    """Rows ``C (e^{jw} I - A)^{-1}`` for each frequency, shape (F, m)."""
    m = model.m
    z = np.exp(1j * omegas)
    M = z[:, None, None] * np.eye(m)[None] - model.A[None].astype(complex)
    cond = np.linalg.cond(M)
    if np.any(~np.isfinite(cond)) or np.max(cond) > _COND_LIMIT:
        raise ConditioningError(
            f"resolvent condition number {np.max(cond):.3g} exceeds {_COND_LIMIT:g}; "
            "A is too close to marginal stability"
        )
    # (zI - A)^T r^T = C^T
    rhs = np.broadcast_to(model.C.astype(complex), (len(omegas), m))[..., None]
    return np.linalg.solve(np.transpose(M, (0, 2, 1)), rhs)[..., 0]


def z_power_spectrum(model: StateSpaceModel, grid_size: int = DEFAULT_GRID) -> SpectrumGrid:
    """Sample ``S_z(w) = C (e^{jw}I - A)^{-1} W (e^{-jw}I - A)^{-T} C^T``."""
    n = _check_grid_size(grid_size)
    r = _resolvent_rows(model, _half_omegas(n))
    quad = np.einsum("fi,ij,fj->f", r, model.W, r.conj())
    scale = max(float(np.max(np.abs(quad))), np.finfo(float).tiny)
    if np.max(np.abs(quad.imag)) > _IMAG_TOL * scale:
        raise ArithmeticError("output spectrum has a non-negligible imaginary part")
    half = np.maximum(quad.real, 0.0)
    return SpectrumGrid.from_half(half)


def state_power_spectrum(model: StateSpaceModel, omegas) -> np.ndarray:
    """Matrix spectrum ``Phi_x(w)`` of the state, shape (F, m, m), Hermitian."""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    m = model.m
    z = np.exp(1j * omegas)
    M = z[:, None, None] * np.eye(m)[None] - model.A[None].astype(complex)
    G = np.linalg.solve(M, np.broadcast_to(np.eye(m, dtype=complex), M.shape))
    return G @ model.W[None] @ np.conj(np.transpose(G, (0, 2, 1)))


def state_power_spectrum_logdet(model: StateSpaceModel, omega):
    """``log2 det Phi_x(omega)``; scalar in, scalar out, array in, array out.

    Raises
    ------
    UndefinedEntropyError
        If W is not positive definite (``Phi_x`` is then singular).
    """
    try:
        np.linalg.cholesky(model.W)
    except np.linalg.LinAlgError:
        raise UndefinedEntropyError(
            "conditional entropy undefined: W is not positive definite"
        ) from None
    scalar = np.ndim(omega) == 0
    phi = state_power_spectrum(model, omega)
    phi = 0.5 * (phi + np.conj(np.transpose(phi, (0, 2, 1))))
    sign, logabs = np.linalg.slogdet(phi)
    if np.any(sign.real <= 0):
        raise UndefinedEntropyError("conditional entropy undefined: Phi_x is singular")
    out = logabs / math.log(2.0)
    return float(out[0]) if scalar else out


def integrate_spectrum(grid: SpectrumGrid) -> float:
    """``(1/2pi) * integral of the spectrum over one period`` by the midpoint rule."""
    return float(np.mean(grid.values))


def write_spectrum_csv(path: str | Path, grid: SpectrumGrid) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega", "value"])
        for om, v in zip(grid.omegas, grid.values):
            w.writerow([f"{om:.17g}", f"{v:.17g}"])


def read_spectrum_csv(path: str | Path) -> SpectrumGrid:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return SpectrumGrid.from_values([float(r["value"]) for r in rows])
