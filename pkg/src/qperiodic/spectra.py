"""Long-time windowed Fourier transforms and peak detection.

Signals are real, so only non-negative frequencies are reported; a mode
oscillating as ``exp(-i lambda t)`` shows up at ``|lambda|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import EmptyWindow

# samples per block of the direct DFT, bounds peak memory
_CHUNK = 4096


@dataclass(frozen=True)
class Spectrum:
    omegas: np.ndarray
    amplitudes: np.ndarray
    t_star: float
    dt: float
    coefficients: np.ndarray = field(repr=False, default=None)

    @property
    def bin_width(self) -> float:
        return float(self.omegas[1] - self.omegas[0]) if len(self.omegas) > 1 else 0.0


class Peak(NamedTuple):
    omega: float
    amplitude: float
    prominence: float


def windowed_fourier(times, values, t_star: float, omega_max: float, n_bins: int) -> Spectrum:
    """``|sum_{t_j > t_star} dt exp(-i w t_j) x(t_j)|`` on ``w_m = m omega_max / n_bins``.

    ``times`` must be a uniform grid. Direct summation, ``m = 0..n_bins-1``.

    Raises:
        EmptyWindow: if no sample lies past ``t_star``.
    """
    t = np.asarray(times, dtype=float)
    x = np.asarray(values, dtype=float)
    if t.shape != x.shape or t.ndim != 1:
        raise ValueError("times and values must be 1-d arrays of equal length")
    if n_bins < 1 or not omega_max > 0:
        raise ValueError("need n_bins >= 1 and omega_max > 0")
    if t.size < 2:
        raise EmptyWindow("need at least two samples to define a spacing")
    steps = np.diff(t)
    dt = float(steps[0])
    if not dt > 0 or np.max(np.abs(steps - dt)) > 1e-9 * max(1.0, abs(t[-1])):
        raise ValueError("times must form a uniform increasing grid")
    sel = t > t_star
    if not np.any(sel):
        raise EmptyWindow(f"no samples after t* = {t_star}")
    tw, xw = t[sel], x[sel]
    omegas = np.arange(n_bins) * (omega_max / n_bins)
    coef = np.zeros(n_bins, dtype=np.complex128)
    for k in range(0, tw.size, _CHUNK):
        ts, xs = tw[k : k + _CHUNK], xw[k : k + _CHUNK]
        coef += np.exp(-1j * np.outer(omegas, ts)) @ xs
    coef *= dt
    return Spectrum(omegas, np.abs(coef), float(t_star), dt, coef)


def _min_index(spec: Spectrum, omega_min: float | None) -> int:
    if omega_min is None:
        return min(2, len(spec.omegas) - 1)
    return int(np.searchsorted(spec.omegas, omega_min - 1e-12 * max(1.0, abs(omega_min))))


def dominant_peak(spec: Spectrum, omega_min: float | None = None) -> Peak:
    """Largest amplitude at ``omega >= omega_min`` (default: skip two bins).

    Prominence is the peak amplitude over the median amplitude of the same
    range, and is 0 for an identically zero spectrum.  Ties go to the lower
    frequency.
    """
    i0 = _min_index(spec, omega_min)
    amps = spec.amplitudes[i0:]
    if amps.size == 0:
        raise ValueError("omega_min excludes every frequency bin")
    k = int(np.argmax(amps))
    peak = float(amps[k])
    med = float(np.median(amps))
    prom = peak / med if med > 0 else (0.0 if peak == 0 else float("inf"))
    return Peak(float(spec.omegas[i0 + k]), peak, prom)


def peak_phase(spec: Spectrum, omega: float) -> float:
    """Phase of the complex Fourier coefficient at the bin nearest ``omega``."""
    k = int(np.argmin(np.abs(spec.omegas - omega)))
    return float(np.angle(spec.coefficients[k]))


def oscillation_verdict(spec: Spectrum, omega_min: float | None = None, k_threshold: float = 10.0) -> bool:
    return dominant_peak(spec, omega_min).prominence > k_threshold
