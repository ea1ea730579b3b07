"""Sample paths of a colored Gaussian mask and spectral estimates from samples.

Synthesis is spectral: independent Gaussian Fourier coefficients scaled by
the square root of the target spectrum, inverted with a real FFT. The result
is one period of a circular process whose spectrum equals the target exactly
at the FFT frequencies; as a segment of the stationary process it is off by
edge terms of order ``1/L``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal

from .spectrum import SpectrumGrid, _check_grid_size

MIN_PATH_LENGTH = 1024


@dataclass(frozen=True)
class NoisePath:
    samples: np.ndarray
    seed: int
    target_spectrum: SpectrumGrid

    def __len__(self):
        return len(self.samples)


def _rng(seed: int) -> np.random.Generator:
    # Philox is counter-based; the seed alone fixes the stream
    return np.random.Generator(np.random.Philox(int(seed) % 2**64))


def synthesize_mask(target: SpectrumGrid, length: int, seed: int) -> NoisePath:
    """Draw a real mask path of ``length`` samples whose spectrum is ``target``.

    The target is resampled onto the ``length``-point FFT grid by periodic linear
    interpolation when the sizes differ.
    """
    length = _check_grid_size(length, MIN_PATH_LENGTH)
    v = np.asarray(target.values)
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ValueError("target spectrum must be finite and nonnegative")
    target.check()
    # rfft bin j sits at omega = 2*pi*j/L, j = 0..L/2
    half = target.resample(length).half_values
    rng = _rng(seed)
    re = rng.standard_normal(length // 2 + 1)
    im = rng.standard_normal(length // 2 + 1)
    coef = np.sqrt(half * length / 2.0) * (re + 1j * im)
    # DC and Nyquist must be real with the full bin variance
    coef[0] = np.sqrt(half[0] * length) * re[0]
    coef[-1] = np.sqrt(half[-1] * length) * re[-1]
    samples = np.fft.irfft(coef, n=length)
    samples.setflags(write=False)
    return NoisePath(samples, int(seed), target)


def estimate_periodogram(path: NoisePath | np.ndarray, segment_length: int = 256, overlap_fraction: float = 0.5) -> SpectrumGrid:
    """Averaged Hann-windowed periodogram on the ``segment_length`` grid.

    Scaled so that the grid mean estimates the variance, same convention as
    :func:`privmask.spectrum.integrate_spectrum`.
    """
    x = np.asarray(path.samples if isinstance(path, NoisePath) else path, dtype=float)
    seg = _check_grid_size(segment_length, 2)
    if seg > len(x):
        raise ValueError("segment_length exceeds path length")
    if not 0 <= overlap_fraction <= 0.75:
        raise ValueError("overlap_fraction must lie in [0, 0.75]")
    _, pxx = signal.welch(
        x,
        fs=2 * np.pi,
        window="hann",
        nperseg=seg,
        noverlap=int(round(overlap_fraction * seg)),
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    vals = np.fft.fftshift(pxx) * 2 * np.pi
    # welch output is already even up to roundoff; make it exact
    grid = SpectrumGrid.from_values(vals, check=False)
    sym = 0.5 * (vals + vals[grid.mirrored_index()])
    return SpectrumGrid.from_values(sym)


def empirical_distortion(path: NoisePath | np.ndarray) -> float:
    """Sample mean of squares, an estimate of the mask power."""
    x = np.asarray(path.samples if isinstance(path, NoisePath) else path, dtype=float)
    return float(np.mean(x * x)) if x.size else 0.0


def relative_l1_error(estimate: SpectrumGrid, target: SpectrumGrid) -> float:
    """``sum |estimate - target| / sum target`` with the target interpolated onto the estimate grid."""
    ref = target.interpolate(estimate.omegas)
    denom = float(np.sum(ref))
    if denom == 0:
        return float(np.sum(np.abs(estimate.values)))
    return float(np.sum(np.abs(estimate.values - ref)) / denom)


def write_path_csv(path: str | Path, noise: NoisePath) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n"])
        for v in noise.samples:
            w.writerow([f"{v:.17g}"])
