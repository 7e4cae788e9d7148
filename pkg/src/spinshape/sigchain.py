"""Signal conditioning: causal Butterworth low-pass filtering and resampling.

The digital filter is the order-``n`` Butterworth prototype mapped by the
bilinear transform with the cutoff pre-warped (``scipy.signal.butter``),
run causally as second-order sections.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .qcore import ValidationError
from .windows import SampledWaveform


@dataclass(frozen=True)
class FilterSpec:
    """Low-pass filter settings; ``cutoff`` in GHz."""

    order: int = 3
    cutoff: float = 0.150
    enabled: bool = True

    def __post_init__(self):
        if self.order < 1:
            raise ValidationError("filter order must be >= 1")
        if self.cutoff <= 0:
            raise ValidationError("cutoff must be positive")

    @property
    def time_constant(self) -> float:
        """``1 / (2 pi f_c)`` in ns."""
        return 1.0 / (2 * np.pi * self.cutoff)


def butterworth_sos(spec: FilterSpec, dt: float) -> np.ndarray:
    """Second-order sections of the digital low-pass for sample step ``dt`` (ns).

    Raises
    ------
    ValidationError
        If the cutoff is at or above the Nyquist frequency.
    """
    if not dt * spec.cutoff < 0.5:
        raise ValidationError(f"cutoff {spec.cutoff} GHz is above Nyquist for dt = {dt} ns")
    return sps.butter(spec.order, spec.cutoff, btype="low", output="sos", fs=1.0 / dt)


def lowpass(x: np.ndarray, dt: float, spec: FilterSpec) -> np.ndarray:
    """Causal filtering of a sample array starting from steady state at ``x[0]``."""
    if not spec.enabled:
        return np.array(x, copy=True)
    sos = butterworth_sos(spec, dt)
    x = np.asarray(x)
    zi = sps.sosfilt_zi(sos)
    if np.iscomplexobj(x):
        return lowpass(x.real, dt, spec) + 1j * lowpass(x.imag, dt, spec)
    y, _ = sps.sosfilt(sos, x, zi=zi * x[0])
    return y


def butterworth_lowpass(sig: SampledWaveform, spec: FilterSpec) -> SampledWaveform:
    """Causal Butterworth filtering of a waveform (DC gain exactly 1).

    Raises
    ------
    ValidationError
        If the cutoff violates Nyquist for the waveform's ``dt``.
    """
    return SampledWaveform(sig.t0, sig.dt, lowpass(sig.samples, sig.dt, spec))


def extend(sig: SampledWaveform, before: float, after: float) -> SampledWaveform:
    """Pad a waveform by holding its first and last values for the given durations."""
    nb = int(np.ceil(before / sig.dt))
    na = int(np.ceil(after / sig.dt))
    x = np.concatenate([np.full(nb, sig.samples[0]), sig.samples, np.full(na, sig.samples[-1])])
    return SampledWaveform(sig.t0 - nb * sig.dt, sig.dt, x)


def resample(sig: SampledWaveform, new_dt: float) -> SampledWaveform:
    """Linear interpolation onto a uniform grid spanning the same interval.

    The step is adjusted to ``T / round(T / new_dt)`` so both endpoints are
    kept exactly.
    """
    if new_dt <= 0:
        raise ValidationError("new_dt must be positive")
    t = sig.t
    span = t[-1] - t[0]
    n = max(1, int(round(span / new_dt)))
    t_new = np.linspace(t[0], t[-1], n + 1)
    if np.iscomplexobj(sig.samples):
        y = np.interp(t_new, t, sig.samples.real) + 1j * np.interp(t_new, t, sig.samples.imag)
    else:
        y = np.interp(t_new, t, sig.samples)
    return SampledWaveform(t[0], span / n, y)
