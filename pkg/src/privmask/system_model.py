"""Linear Gaussian state-space model and its stationary second-order statistics.

The model is

    x[k+1] = A x[k] + w[k],    w ~ N(0, W)
    y[k]   = C x[k] + v[k],    v ~ N(0, sigma_v_sq)

with scalar output. ``z[k] = C x[k]`` is the noiseless output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import LyapunovError, ModelError

#: Models with spectral radius at or above ``1 - STABILITY_MARGIN`` are rejected.
STABILITY_MARGIN = 1e-9
_SYM_TOL = 1e-12
_PSD_TOL = 1e-12


@dataclass(frozen=True)
class StateSpaceModel:
    """System matrices of a scalar-output linear Gaussian system.

    Arrays are coerced to float64 on construction; no invariant is checked
    here, use :func:`validate_model` (or :meth:`validated`) for that.
    """

    A: np.ndarray
    C: np.ndarray
    W: np.ndarray
    sigma_v_sq: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        C = np.asarray(self.C, dtype=float).reshape(-1)
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        for arr in (A, C, W):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "sigma_v_sq", float(self.sigma_v_sq))

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    def validated(self) -> StateSpaceModel:
        """Return ``self`` or raise :class:`ModelError` listing every violation."""
        problems = validate_model(self)
        if problems:
            raise ModelError("invalid model: " + "; ".join(problems))
        return self

    @classmethod
    def scalar(cls, a: float, c: float, w: float, sigma_v_sq: float) -> StateSpaceModel:
        return cls([[a]], [c], [[w]], sigma_v_sq)

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "C": self.C.tolist(),
            "W": self.W.tolist(),
            "sigma_v_sq": self.sigma_v_sq,
        }


@dataclass(frozen=True)
class StationaryStatistics:
    state_covariance: np.ndarray
    z_autocovariance: np.ndarray = field(repr=False)


def validate_model(model: StateSpaceModel) -> list[str]:
    """Check every model invariant and return the list of violations.

    An empty list means the model is usable. Dimension problems short-circuit
    the remaining checks since they would be meaningless.
    """
    problems: list[str] = []
    A, C, W = model.A, model.C, model.W
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        problems.append(f"A must be square m x m with m >= 1, got shape {A.shape}")
        return problems
    m = A.shape[0]
    if C.shape != (m,):
        problems.append(f"C must be 1 x {m}, got {C.size} entries")
    if W.shape != (m, m):
        problems.append(f"W must be {m} x {m}, got shape {W.shape}")
    if problems:
        return problems

    for name, arr in (("A", A), ("C", C), ("W", W)):
        if not np.all(np.isfinite(arr)):
            problems.append(f"{name} contains non-finite entries")
    if not math.isfinite(model.sigma_v_sq):
        problems.append("sigma_v_sq must be finite")
    if problems:
        return problems

    rho = model.spectral_radius
    if rho >= 1.0 - STABILITY_MARGIN:
        problems.append(f"spectral radius of A is {rho:.12g}, must be < 1 (A not stable)")

    w_norm = float(np.linalg.norm(W, 2))
    if np.max(np.abs(W - W.T), initial=0.0) > _SYM_TOL * max(w_norm, 1.0):
        problems.append("W is not symmetric")
    else:
        w_min = float(np.min(np.linalg.eigvalsh((W + W.T) / 2)))
        if w_min < -_PSD_TOL * w_norm:
            problems.append(f"W is not positive semidefinite (min eigenvalue {w_min:.6g})")

    if model.sigma_v_sq < 0:
        problems.append("sigma_v_sq must be nonnegative")
    return problems


def stationary_state_covariance(
    model: StateSpaceModel, rtol: float = 1e-12, max_iter: int = 1_000_000
) -> np.ndarray:
    """Solve the discrete Lyapunov equation ``S = A S A^T + W``.

    Uses the doubling form of the fixed-point iteration: after step ``j``
    the iterate holds the first ``2**j`` terms of ``sum_k A^k W A^kT``.
    Each iterate is re-symmetrized. ``max_iter`` caps the number of
    fixed-point terms covered.

    Raises
    ------
    LyapunovError
        If the relative residual does not fall below ``max(rtol, 1e-10)``.
    """
    A = model.A
    S = np.array(model.W, dtype=float)
    Ak = A.copy()
    steps = 0
    # doubling covers 2**steps fixed-point iterations; stop once the tail is below roundoff
    while (1 << steps) <= max_iter:
        S = S + Ak @ S @ Ak.T
        S = 0.5 * (S + S.T)
        Ak = Ak @ Ak
        steps += 1
        if not np.all(np.isfinite(S)) or np.linalg.norm(Ak, 2) ** 2 < 1e-17:
            break
    residual = _lyapunov_residual(A, model.W, S) if np.all(np.isfinite(S)) else np.inf
    if residual > max(rtol, 1e-10):
        raise LyapunovError(
            f"Lyapunov iteration did not converge (relative residual {residual:.3g})",
            residual=residual,
        )
    return S


def _lyapunov_residual(A, W, S) -> float:
    scale = max(float(np.linalg.norm(S)), np.finfo(float).tiny)
    if not np.any(S):
        return 0.0
    return float(np.linalg.norm(A @ S @ A.T + W - S)) / scale


def z_autocovariance(
    model: StateSpaceModel, max_lag: int, state_covariance: np.ndarray | None = None
) -> np.ndarray:
    """Autocovariance ``R_z(tau) = C A^tau S_x C^T`` for ``tau = 0..max_lag``."""
    if max_lag < 0:
        raise ValueError("max_lag must be nonnegative")
    S = stationary_state_covariance(model) if state_covariance is None else state_covariance
    out = np.empty(max_lag + 1)
    # propagate g = A^tau S_x C^T
    g = S @ model.C
    for tau in range(max_lag + 1):
        out[tau] = model.C @ g
        g = model.A @ g
    return out


def stationary_statistics(model: StateSpaceModel, max_lag: int) -> StationaryStatistics:
    S = stationary_state_covariance(model)
    return StationaryStatistics(S, z_autocovariance(model, max_lag, S))


def state_autocovariance_blocks(model: StateSpaceModel, k: int) -> np.ndarray:
    """Covariance of the stacked states ``x[0..k]``: block (i, j) is ``A^(i-j) S_x`` for i >= j."""
    S = stationary_state_covariance(model)
    m = model.m
    powers = [np.eye(m)]
    for _ in range(k):
        powers.append(model.A @ powers[-1])
    big = np.empty(((k + 1) * m, (k + 1) * m))
    for i in range(k + 1):
        for j in range(k + 1):
            if i >= j:
                blk = powers[i - j] @ S
            else:
                blk = S @ powers[j - i].T
            big[i * m:(i + 1) * m, j * m:(j + 1) * m] = blk
    return 0.5 * (big + big.T)


def _reject_constant(token):
    raise ModelError(f"non-finite number {token!r} in model file")


def _matrix(obj, name):
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ModelError(f"{name} must be a non-empty array of arrays")
    widths = {len(r) for r in obj}
    if len(widths) != 1:
        raise ModelError(f"{name} has ragged rows")
    return _numbers(obj, name)


def _numbers(obj, name):
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelError(f"{name} must contain only numbers") from exc
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} contains non-finite numbers")
    return arr


def model_from_dict(data: dict) -> StateSpaceModel:
    missing = [k for k in ("A", "C", "W", "sigma_v_sq") if k not in data]
    if missing:
        raise ModelError(f"model file missing keys: {', '.join(missing)}")
    A = _matrix(data["A"], "A")
    W = _matrix(data["W"], "W")
    C = data["C"]
    if isinstance(C, list) and len(C) == 1 and isinstance(C[0], list):
        C = C[0]
    if not isinstance(C, list) or any(isinstance(c, list) for c in C):
        raise ModelError("C must be a flat array (single output row)")
    C = _numbers(C, "C")
    sv = data["sigma_v_sq"]
    if isinstance(sv, bool) or not isinstance(sv, (int, float)) or not math.isfinite(sv):
        raise ModelError("sigma_v_sq must be a finite number")
    return StateSpaceModel(A, C, W, float(sv))


def load_model(path: str | Path) -> StateSpaceModel:
    """Read a JSON model file and validate it."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ModelError(f"model file {path} is not valid JSON: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ModelError("model file must hold a JSON object")
    return model_from_dict(data).validated()
