"""Stochastic inputs: 1/f charge-noise traces, quasi-static Zeeman shifts and
the static offset that replaces noise slower than one trace.

The noise density is two-sided, ``S(f) = A^2 / (2 pi |f|)`` per unit
frequency, i.e. ``S(omega) = A^2 / |omega|`` evaluated at ``omega = 2 pi f``.
With this density the variance in a band ``[f1, f2]`` is
``(A^2 / pi) ln(f2 / f1)``, which is the static-variance formula used below.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qcore import ValidationError


@dataclass(frozen=True)
class NoiseSpec:
    """Noise configuration.

    Attributes
    ----------
    charge_amp : float
        ``A`` in mV; the barrier voltage fluctuates with density ``A^2/(2 pi f)``.
    f_min : float
        Low-frequency cut-off in Hz (retuning cycle).
    quasi_static_sigma : tuple of float
        Standard deviation (GHz) of a static shift of each qubit frequency.
    seed : int
    static_compensation : bool
        Add a Gaussian offset carrying the power between ``f_min`` and ``1/t_sim``.
    """

    charge_amp: float = 0.0
    f_min: float = 0.1
    quasi_static_sigma: tuple = field(default=(0.0, 0.0))
    seed: int = 0
    static_compensation: bool = True

    def __post_init__(self):
        if self.charge_amp < 0:
            raise ValidationError("charge noise amplitude must be non-negative")
        if self.f_min <= 0:
            raise ValidationError("f_min must be positive")
        if any(s < 0 for s in self.quasi_static_sigma):
            raise ValidationError("quasi-static sigma must be non-negative")

    @property
    def is_silent(self) -> bool:
        return self.charge_amp == 0 and not any(self.quasi_static_sigma)


@dataclass(frozen=True)
class NoiseTrace:
    """Piecewise-constant trace, ``samples[k]`` holding on ``[k dt, (k+1) dt)``."""

    dt: float
    samples: np.ndarray
    static_offset: float = 0.0

    @property
    def total(self) -> np.ndarray:
        return self.samples + self.static_offset


def realization_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for realization ``index``; identical in serial and parallel runs."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def psd(f, amp: float):
    """Two-sided density ``A^2 / (2 pi |f|)``."""
    return amp**2 / (2 * np.pi * np.abs(f))


def colored_trace(amp: float, n: int, dt: float, rng: np.random.Generator) -> NoiseTrace:
    """1/f trace by Fourier filtering of white Gaussian noise.

    The DFT of ``n`` unit Gaussians is multiplied by ``sqrt(S(f_k) / dt)`` for
    ``k > 0`` and the zero-frequency bin is removed; the static term is
    added separately via :func:`static_variance`.
    """
    if n < 2:
        raise ValidationError("trace needs at least two segments")
    white = rng.standard_normal(n)
    if amp == 0:
        return NoiseTrace(dt, np.zeros(n))
    spec = np.fft.rfft(white)
    f = np.fft.rfftfreq(n, dt)
    gain = np.zeros_like(f)
    gain[1:] = np.sqrt(psd(f[1:], amp) / dt)
    return NoiseTrace(dt, np.fft.irfft(spec * gain, n))


def static_variance(amp: float, t_sim: float, f_min: float) -> float:
    """Variance of the noise between ``f_min`` (Hz) and ``1 / t_sim`` (``t_sim`` in ns).

    Raises
    ------
    ValidationError
        If ``t_sim * f_min >= 1`` (the trace already resolves ``f_min``).
    """
    x = t_sim * 1e-9 * f_min
    if x >= 1:
        raise ValidationError("trace length already resolves f_min; no static component")
    return amp**2 / np.pi * np.log(1 / x)


def quasi_static_draw(sigma: float, rng: np.random.Generator) -> float:
    """One Gaussian shift (GHz), constant over a gate."""
    if sigma < 0:
        raise ValidationError("sigma must be non-negative")
    return float(rng.normal(0.0, sigma)) if sigma > 0 else 0.0


@dataclass(frozen=True)
class Realization:
    """Everything random about one run: voltage noise and qubit-frequency shifts."""

    voltage: NoiseTrace
    zeeman: tuple


def draw_realization(spec: NoiseSpec, n: int, dt: float, index: int) -> Realization:
    """Draw realization ``index`` of ``spec`` for an ``n``-segment simulation."""
    rng = realization_rng(spec.seed, index)
    shifts = tuple(quasi_static_draw(s, rng) for s in spec.quasi_static_sigma)
    trace = colored_trace(spec.charge_amp, n, dt, rng)
    offset = 0.0
    if spec.static_compensation and spec.charge_amp > 0:
        offset = float(rng.normal(0.0, np.sqrt(static_variance(spec.charge_amp, n * dt, spec.f_min))))
    return Realization(NoiseTrace(dt, trace.samples, offset), shifts)
