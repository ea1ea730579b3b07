"""Optimal privacy-mask design.

The optimal mask is stationary colored Gaussian with spectrum

    N(w) = { eta / (2 [1 + sqrt(1 + eta / S_z(w))]) - sigma_v^2 }^+

where the multiplier ``eta >= 0`` is pinned by whichever constraint binds
(mask power, leakage cap, or masked-output power). All leakages are in bits
per step; all integrals are ``(1/2pi) * integral over one period`` evaluated
with the midpoint rule of :mod:`privmask.spectrum`.

Along the family indexed by ``eta`` the mask power is nondecreasing and the
leakage nonincreasing, so every constraint is solved by one-dimensional
bisection on ``eta``. The curve traced by ``eta`` is also the set of
minimizers of the Lagrangians ``I + alpha * D`` and ``D + beta * I``; the
tradeoff slope at a point equals ``-zeta`` (bits per unit distortion).
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import InfeasibleError, InfiniteLeakageError, UndefinedEntropyError
from .spectrum import (
    DEFAULT_GRID,
    SpectrumGrid,
    integrate_spectrum,
    state_power_spectrum_logdet,
    z_power_spectrum,
)
from .system_model import StateSpaceModel

LOG2E = 1.0 / math.log(2.0)
NONE_ACTIVE = "none-active"
ALL_ACTIVE = "all-active"

_MAX_BISECT = 200
_POWER_RTOL = 1e-12
_POWER_ATOL = 1e-14
_LEAK_RTOL = 1e-13


class ConstraintKind(str, enum.Enum):
    DISTORTION = "distortion"
    LEAKAGE_CAP = "leakage"
    OUTPUT_POWER = "output_power"
    MIN_OUTPUT_POWER = "min_output_power"


@dataclass(frozen=True)
class ProblemSpec:
    """Active constraint and its value.

    ``value`` is ``D`` (mask power), ``R`` (bits/step), ``Y_hat`` (masked
    output power) or ``R`` again for the minimum-output-power problem.
    """

    constraint_kind: ConstraintKind
    value: float

    def __post_init__(self):
        object.__setattr__(self, "constraint_kind", ConstraintKind(self.constraint_kind))
        v = float(self.value)
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"{self.constraint_kind.value} must be a nonnegative finite number")
        if self.constraint_kind in (ConstraintKind.LEAKAGE_CAP, ConstraintKind.MIN_OUTPUT_POWER) and v <= 0:
            raise ValueError("leakage cap must be positive")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class TradeoffPoint:
    eta: float
    distortion: float
    leakage_bits: float


@dataclass(frozen=True)
class MaskDesign:
    """A solved design.

    ``activation_threshold`` is a float, or :data:`NONE_ACTIVE` /
    :data:`ALL_ACTIVE`. ``conditional_entropy_rate`` is ``None`` when W is
    singular.
    """

    problem: ProblemSpec
    eta: float
    zeta: float | None
    s_z: SpectrumGrid
    mask_spectrum: SpectrumGrid
    sigma_v_sq: float
    realized_distortion: float
    leakage_rate_bits: float
    iid_leakage_bits: float
    unmasked_leakage_bits: float
    conditional_entropy_rate: float | None
    activation_threshold: float | str
    output_power: float

    @property
    def grid_size(self) -> int:
        return self.mask_spectrum.num_points

    def integrand_bits(self) -> np.ndarray:
        return _leakage_integrand(self.s_z.values, self.mask_spectrum.values, self.sigma_v_sq)

    def kkt_multiplier(self) -> np.ndarray:
        """Pointwise ``(log2 e / 2) (1/(N+sv) - 1/(N+sv+S))``; equals ``zeta`` where ``N > 0``."""
        n = self.mask_spectrum.values + self.sigma_v_sq
        s = self.s_z.values
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 0.5 * LOG2E * s / (n * (n + s))
        return np.where(s > 0, out, 0.0)

    def to_report(self) -> dict:
        thr = self.activation_threshold
        return {
            "constraint": self.problem.constraint_kind.value,
            "constraint_value": self.problem.value,
            "eta": self.eta,
            "zeta": self.zeta,
            "distortion": self.realized_distortion,
            "leakage_bits": self.leakage_rate_bits,
            "iid_leakage_bits": self.iid_leakage_bits,
            "unmasked_leakage_bits": _finite_or_none(self.unmasked_leakage_bits),
            "conditional_entropy_rate": self.conditional_entropy_rate,
            "threshold": thr if isinstance(thr, float) else None,
            "activation": "thresholded" if isinstance(thr, float) else thr,
            "output_power": self.output_power,
            "grid_size": self.grid_size,
        }

    def write_report(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_report(), indent=2) + "\n")

    def write_mask_csv(self, path: str | Path) -> None:
        integ = self.integrand_bits()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["omega", "S_z", "N", "integrand_bits"])
            for row in zip(self.s_z.omegas, self.s_z.values, self.mask_spectrum.values, integ):
                w.writerow([f"{x:.17g}" for x in row])


def _finite_or_none(x):
    return x if math.isfinite(x) else None


# pointwise kernels -----------------------------------------------------------


def mask_spectrum_at(s_z, eta, sigma_v_sq):
    """Clipped mask level for signal level ``s_z``; broadcasts over arrays.

    Returns 0 where ``s_z == 0`` (the limit of the formula).
    """
    s = np.asarray(s_z, dtype=float)
    eta = np.asarray(eta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        level = eta / (2.0 * (1.0 + np.sqrt(1.0 + eta / s)))
    level = np.where((s > 0) & (eta > 0), level, 0.0)
    out = np.maximum(level - sigma_v_sq, 0.0)
    return float(out) if out.ndim == 0 else out


def _leakage_integrand(s, n, sigma_v_sq) -> np.ndarray:
    noise = np.asarray(n, dtype=float) + sigma_v_sq
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 0.5 * LOG2E * np.log1p(s / noise)
    val = np.where(s > 0, val, 0.0)
    return np.where((s > 0) & (noise <= 0), np.inf, val)


def _leakage_bits(s, n, sigma_v_sq) -> float:
    return float(np.mean(_leakage_integrand(s, n, sigma_v_sq)))


def _power(s, eta, sigma_v_sq) -> float:
    return float(np.mean(mask_spectrum_at(s, eta, sigma_v_sq)))


# spectral functionals --------------------------------------------------------


def total_mask_power(model: StateSpaceModel, grid: SpectrumGrid, eta: float) -> float:
    """Mask power ``(1/2pi) int N(w) dw`` at multiplier ``eta`` for the output spectrum ``grid``."""
    return _power(grid.values, eta, model.sigma_v_sq)


def leakage_rate(model: StateSpaceModel, grid: SpectrumGrid, mask_spectrum: SpectrumGrid | np.ndarray) -> float:
    """Leakage rate ``(1/2pi) int 1/2 log2(1 + S_z/(N + sigma_v^2)) dw`` in bits/step.

    Raises
    ------
    InfiniteLeakageError
        If some frequency carries signal but neither mask nor measurement noise.
    """
    n = mask_spectrum.values if isinstance(mask_spectrum, SpectrumGrid) else np.asarray(mask_spectrum, float)
    if np.any(n < 0):
        raise ValueError("mask spectrum must be nonnegative")
    out = _leakage_bits(grid.values, n, model.sigma_v_sq)
    if not math.isfinite(out):
        raise InfiniteLeakageError(
            "infinite leakage rate: signal present where mask and measurement noise vanish"
        )
    return out


def iid_leakage(model: StateSpaceModel, grid: SpectrumGrid, D: float) -> float:
    """Leakage of a white mask of power ``D``."""
    if D < 0:
        raise ValueError("distortion must be nonnegative")
    out = _leakage_bits(grid.values, np.full(grid.num_points, float(D)), model.sigma_v_sq)
    if not math.isfinite(out):
        raise InfiniteLeakageError("infinite leakage rate: D + sigma_v^2 = 0 with nonzero S_z")
    return out


def activation_threshold(eta: float, sigma_v_sq: float) -> float | str:
    """Signal level above which the mask is switched on.

    ``N(w) > 0`` exactly when ``S_z(w)`` exceeds the returned value. With no
    measurement noise every frequency is active; for ``eta <= 4 sigma_v^2``
    no frequency is.
    """
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if sigma_v_sq == 0:
        return ALL_ACTIVE if eta > 0 else NONE_ACTIVE
    if eta <= 4.0 * sigma_v_sq:
        return NONE_ACTIVE
    # same as eta / ((eta/(2 sv) - 1)^2 - 1), without overflow for tiny sv
    return float(4.0 * sigma_v_sq**2 / (eta - 4.0 * sigma_v_sq))


# multiplier solves -------------------------------------------------------------


def _upper_bracket(pred, start: float) -> float:
    hi = start
    for _ in range(2000):
        if pred(hi):
            return hi
        hi *= 2.0
        if not math.isfinite(hi):
            break
    raise InfeasibleError("no finite multiplier satisfies the constraint")


def _bisect(f_below, lo: float, hi: float, done) -> tuple[float, float]:
    """Shrink ``[lo, hi]`` keeping ``f_below(lo)`` true and ``f_below(hi)`` false."""
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f_below(mid):
            lo = mid
        else:
            hi = mid
        if done(lo, hi):
            break
    return lo, hi


def solve_eta_for_distortion(model: StateSpaceModel, grid: SpectrumGrid, D: float) -> float:
    """Multiplier at which the mask power equals ``D``.

    Raises
    ------
    InfeasibleError
        If ``D > 0`` but ``S_z`` vanishes identically.
    """
    if D < 0 or not math.isfinite(D):
        raise ValueError("distortion must be nonnegative")
    if D == 0:
        return 0.0
    s, sv = grid.values, model.sigma_v_sq
    if not np.any(s > 0):
        raise InfeasibleError("infeasible: mask power cannot be absorbed (S_z is identically zero)")
    tol = max(_POWER_RTOL * D, _POWER_ATOL)
    hi = _upper_bracket(lambda e: _power(s, e, sv) >= D, 4.0 * (D + sv + 1.0))
    lo = 4.0 * sv if 4.0 * sv < hi else 0.0

    lo, hi = _bisect(
        lambda e: _power(s, e, sv) < D,
        lo,
        hi,
        lambda a, b: abs(_power(s, b, sv) - D) <= tol and abs(_power(s, a, sv) - D) <= tol,
    )
    p_lo, p_hi = _power(s, lo, sv), _power(s, hi, sv)
    return lo if abs(p_lo - D) < abs(p_hi - D) else hi


def solve_eta_for_leakage(model: StateSpaceModel, grid: SpectrumGrid, R: float) -> float:
    """Smallest-distortion multiplier whose leakage equals ``R``; 0 if the cap is inactive."""
    if R <= 0 or not math.isfinite(R):
        raise ValueError("leakage cap must be positive")
    s, sv = grid.values, model.sigma_v_sq
    base = _leakage_bits(s, np.zeros_like(s), sv)
    if R >= base:
        return 0.0

    def leak(e):
        return _leakage_bits(s, mask_spectrum_at(s, e, sv), sv)

    hi = _upper_bracket(lambda e: leak(e) <= R, 4.0 * (sv + 1.0))
    lo = 4.0 * sv if 4.0 * sv < hi else 0.0
    lo, hi = _bisect(
        lambda e: leak(e) > R,
        lo,
        hi,
        lambda a, b: abs(leak(b) - R) <= _LEAK_RTOL * R and abs(leak(a) - R) <= _LEAK_RTOL * R,
    )
    l_lo, l_hi = leak(lo), leak(hi)
    return lo if abs(l_lo - R) < abs(l_hi - R) else hi


# full designs ------------------------------------------------------------------


def conditional_entropy_rate(model: StateSpaceModel, design: MaskDesign) -> float | None:
    """Entropy rate of the state given the masked output, in bits; ``None`` if W is singular."""
    try:
        logdet = state_power_spectrum_logdet(model, design.s_z.omegas)
    except UndefinedEntropyError:
        return None
    h_x = float(np.mean(0.5 * (model.m * math.log2(2 * math.pi * math.e) + logdet)))
    return h_x - design.leakage_rate_bits


def _build(model, s_z: SpectrumGrid, eta: float, problem: ProblemSpec) -> MaskDesign:
    sv = model.sigma_v_sq
    s = s_z.values
    n = mask_spectrum_at(s, eta, sv)
    mask = SpectrumGrid(s_z.num_points, s_z.omegas, n)
    distortion = float(np.mean(n))
    leak = leakage_rate(model, s_z, mask)
    design = MaskDesign(
        problem=problem,
        eta=float(eta),
        zeta=2.0 * LOG2E / eta if eta > 0 else None,
        s_z=s_z,
        mask_spectrum=mask,
        sigma_v_sq=sv,
        realized_distortion=distortion,
        leakage_rate_bits=leak,
        iid_leakage_bits=iid_leakage(model, s_z, distortion),
        unmasked_leakage_bits=_leakage_bits(s, np.zeros_like(s), sv),
        conditional_entropy_rate=None,
        activation_threshold=activation_threshold(eta, sv),
        output_power=distortion + integrate_spectrum(s_z) + sv,
    )
    h = conditional_entropy_rate(model, design)
    if h is None:
        return design
    return replace(design, conditional_entropy_rate=h)


def design_distortion_constrained(
    model: StateSpaceModel, D: float, grid_size: int = DEFAULT_GRID, s_z: SpectrumGrid | None = None
) -> MaskDesign:
    """Minimum-leakage mask subject to mask power (distortion) ``D``."""
    problem = ProblemSpec(ConstraintKind.DISTORTION, D)
    s_z = z_power_spectrum(model, grid_size) if s_z is None else s_z
    eta = solve_eta_for_distortion(model, s_z, problem.value)
    return _build(model, s_z, eta, problem)


def design_leakage_constrained(
    model: StateSpaceModel, R: float, grid_size: int = DEFAULT_GRID, s_z: SpectrumGrid | None = None
) -> MaskDesign:
    """Minimum-distortion mask keeping leakage at most ``R`` bits/step.

    A cap at or above the unmasked leakage is inactive and yields the zero mask.
    """
    problem = ProblemSpec(ConstraintKind.LEAKAGE_CAP, R)
    s_z = z_power_spectrum(model, grid_size) if s_z is None else s_z
    eta = solve_eta_for_leakage(model, s_z, problem.value)
    return _build(model, s_z, eta, problem)


def design_output_power_constrained(
    model: StateSpaceModel, Y_hat: float, grid_size: int = DEFAULT_GRID, s_z: SpectrumGrid | None = None
) -> MaskDesign:
    """Minimum-leakage mask with masked output power at most ``Y_hat``.

    The mask budget is ``Y_hat`` minus the unmasked output power.
    """
    problem = ProblemSpec(ConstraintKind.OUTPUT_POWER, Y_hat)
    s_z = z_power_spectrum(model, grid_size) if s_z is None else s_z
    unmasked = integrate_spectrum(s_z) + model.sigma_v_sq
    D = problem.value - unmasked
    if D < 0:
        if D >= -1e-12 * max(unmasked, 1.0):
            D = 0.0
        else:
            raise InfeasibleError(
                f"output power below unmasked output power ({problem.value:.6g} < {unmasked:.6g})"
            )
    eta = solve_eta_for_distortion(model, s_z, D)
    return _build(model, s_z, eta, problem)


def design_min_output_power(
    model: StateSpaceModel, R: float, grid_size: int = DEFAULT_GRID, s_z: SpectrumGrid | None = None
) -> tuple[MaskDesign, float]:
    """Least masked-output power achieving leakage at most ``R``; returns ``(design, Y_min)``."""
    problem = ProblemSpec(ConstraintKind.MIN_OUTPUT_POWER, R)
    s_z = z_power_spectrum(model, grid_size) if s_z is None else s_z
    eta = solve_eta_for_leakage(model, s_z, problem.value)
    design = _build(model, s_z, eta, problem)
    return design, design.output_power


def solve(model: StateSpaceModel, problem: ProblemSpec, grid_size: int = DEFAULT_GRID) -> MaskDesign:
    kind = problem.constraint_kind
    if kind is ConstraintKind.DISTORTION:
        return design_distortion_constrained(model, problem.value, grid_size)
    if kind is ConstraintKind.LEAKAGE_CAP:
        return design_leakage_constrained(model, problem.value, grid_size)
    if kind is ConstraintKind.OUTPUT_POWER:
        return design_output_power_constrained(model, problem.value, grid_size)
    return design_min_output_power(model, problem.value, grid_size)[0]


def tradeoff_curve(model: StateSpaceModel, eta_values, grid_size: int = DEFAULT_GRID) -> list[TradeoffPoint]:
    """(distortion, leakage) along the optimal family; leakage may be ``inf`` when sigma_v^2 = 0."""
    eta_values = [float(e) for e in eta_values]
    if any(e < 0 for e in eta_values):
        raise ValueError("eta values must be nonnegative")
    if any(b < a for a, b in zip(eta_values, eta_values[1:])):
        raise ValueError("eta values must be sorted")
    s = z_power_spectrum(model, grid_size).values
    sv = model.sigma_v_sq
    points = []
    for e in eta_values:
        n = mask_spectrum_at(s, e, sv)
        points.append(TradeoffPoint(e, float(np.mean(n)), _leakage_bits(s, n, sv)))
    return points


def write_tradeoff_csv(path: str | Path, points: list[TradeoffPoint]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eta", "distortion", "leakage_bits"])
        for p in points:
            w.writerow([f"{p.eta:.17g}", f"{p.distortion:.17g}", f"{p.leakage_bits:.17g}"])
