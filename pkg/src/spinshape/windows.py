"""Window functions, their sampling, the energy spectral density and the
time-dilation map between real time ``t`` and normalized time ``s``.

Every window is normalized to ``int_0^tg w(t) dt = tg`` (unit mean), so a
pulse amplitude is always "area / tg" times ``w``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import iv

from .qcore import ValidationError

KINDS = ("rect", "hann", "kaiser", "fourier", "tukey")
FOURIER_SLEPIAN = (1.0715, -0.0795, 0.0043, 0.0037)


@dataclass(frozen=True)
class WindowSpec:
    """Parametric window.

    Parameters
    ----------
    kind : {"rect", "hann", "kaiser", "fourier", "tukey"}
    lam : float
        Kaiser shape ``lambda > 0`` (identical to the ``beta`` of
        ``numpy.kaiser``) or Tukey ramp fraction in ``[0, 1]``.
    lam_even, lam_odd : tuple of float
        Fourier-series coefficients of the ``1 - cos`` and ``1 - sin`` terms.
    """

    kind: str
    lam: float = 0.0
    lam_even: tuple = field(default=(1.0, 0.0, 0.0, 0.0))
    lam_odd: tuple = field(default=(0.0, 0.0, 0.0, 0.0))

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown window kind {self.kind!r}")
        if self.kind == "kaiser" and self.lam < 0:
            raise ValidationError("Kaiser lambda must be non-negative")
        if self.kind == "tukey" and not 0.0 <= self.lam <= 1.0:
            raise ValidationError("Tukey lambda must lie in [0, 1]")
        if self.kind == "fourier" and sum(self.lam_even) + sum(self.lam_odd) <= 0:
            raise ValidationError("Fourier window has non-positive area")

    @classmethod
    def rect(cls):
        return cls("rect")

    @classmethod
    def hann(cls):
        return cls("hann")

    @classmethod
    def kaiser(cls, lam: float):
        return cls("kaiser", lam=float(lam))

    @classmethod
    def tukey(cls, lam: float):
        return cls("tukey", lam=float(lam))

    @classmethod
    def fourier(cls, lam_even=FOURIER_SLEPIAN, lam_odd=(0.0, 0.0, 0.0, 0.0)):
        return cls("fourier", lam_even=tuple(map(float, lam_even)), lam_odd=tuple(map(float, lam_odd)))

    @classmethod
    def from_dict(cls, d: dict) -> "WindowSpec":
        d = dict(d)
        kind = d.pop("kind")
        if "lam_even" in d:
            d["lam_even"] = tuple(d["lam_even"])
        if "lam_odd" in d:
            d["lam_odd"] = tuple(d["lam_odd"])
        return cls(kind, **d)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind in ("kaiser", "tukey"):
            out["lam"] = self.lam
        if self.kind == "fourier":
            out["lam_even"] = list(self.lam_even)
            out["lam_odd"] = list(self.lam_odd)
        return out


def _unit_window(spec: WindowSpec, u: np.ndarray) -> np.ndarray:
    """Window on normalized time ``u = t/tg`` with unit mean over [0, 1]."""
    if spec.kind == "rect":
        return np.ones_like(u)
    if spec.kind == "hann":
        return 1 - np.cos(2 * np.pi * u)
    if spec.kind == "kaiser":
        lam = spec.lam
        if lam == 0:
            return np.ones_like(u)
        # int_0^1 I0(2 lam sqrt(u(1-u))) du = sum_k lam^2k/(2k+1)! = sinh(lam)/lam
        arg = 2 * lam * np.sqrt(np.clip(u * (1 - u), 0, None))
        return iv(0, arg) * lam / np.sinh(lam)
    if spec.kind == "fourier":
        w = np.zeros_like(u)
        for n, c in enumerate(spec.lam_even, start=1):
            w += c * (1 - np.cos(2 * np.pi * n * u))
        for n, c in enumerate(spec.lam_odd, start=1):
            w += c * (1 - np.sin(2 * np.pi * n * u))
        return w / (sum(spec.lam_even) + sum(spec.lam_odd))
    # tukey
    lam = spec.lam
    if lam == 0:
        return np.ones_like(u)
    plateau = 2 / (2 - lam)
    w = np.full_like(u, plateau)
    rise = u <= lam / 2
    fall = u >= 1 - lam / 2
    w[rise] = (1 - np.cos(2 * np.pi * u[rise] / lam)) / (2 - lam)
    w[fall] = (1 - np.cos(2 * np.pi * (1 - u[fall]) / lam)) / (2 - lam)
    return w


def window_value(spec: WindowSpec, t, t_g: float):
    """Evaluate ``w(t)`` normalized to ``int_0^tg w dt = tg``.

    Accepts scalars or arrays of times.

    Raises
    ------
    ValidationError
        If any ``t`` lies outside ``[0, t_g]`` or ``t_g <= 0``.
    """
    if t_g <= 0:
        raise ValidationError("t_g must be positive")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    eps = 1e-12 * t_g
    if np.any(t_arr < -eps) or np.any(t_arr > t_g + eps):
        raise ValidationError("window evaluated outside [0, t_g]")
    w = _unit_window(spec, np.clip(t_arr / t_g, 0.0, 1.0))
    return float(w[0]) if np.ndim(t) == 0 else w


@dataclass(frozen=True)
class SampledWaveform:
    """Samples on the uniform grid ``t0 + dt * k``."""

    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples))
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise ValidationError("a waveform needs at least two samples")
        if self.dt <= 0:
            raise ValidationError("dt must be positive")

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    def __len__(self):
        return self.samples.size


def sample_window(spec: WindowSpec, t_g: float, n: int) -> SampledWaveform:
    """``n`` uniform samples of ``w`` on ``[0, t_g]`` including both endpoints."""
    if n < 2:
        raise ValidationError("need n >= 2 samples")
    t = np.linspace(0.0, t_g, n)
    return SampledWaveform(0.0, t_g / (n - 1), window_value(spec, t, t_g))


@dataclass(frozen=True)
class DilationMap:
    """Monotone tabulated pairs ``(s_k, t_k)`` with linear interpolation both ways.

    ``total_phase`` is ``f(t_g) - f(0)`` in the units of the ``f_dot`` input.
    """

    s: np.ndarray
    t: np.ndarray
    total_phase: float

    def t_of_s(self, s):
        return np.interp(s, self.s, self.t)

    def s_of_t(self, t):
        return np.interp(t, self.t, self.s)

    @property
    def t_g(self) -> float:
        return float(self.t[-1])


def dilation_map(f_dot: SampledWaveform, t_g: float | None = None) -> DilationMap:
    """Build ``t(s)`` from ``ds/dt = f_dot(t) / (f(t_g) - f(0))``.

    The cumulative trapezoid of ``f_dot`` on its own grid gives ``s(t)``;
    inverting the tabulated pairs yields ``t(s)``, which equals the integral
    of ``nu_f t_g / f_dot`` over ``s``.

    Raises
    ------
    ValidationError
        If any sample of ``f_dot`` is not strictly positive (the substitution
        is singular there).
    """
    fd = np.asarray(f_dot.samples, dtype=float)
    bad = np.flatnonzero(~(fd > 0))
    if bad.size:
        raise ValidationError(f"f_dot must be strictly positive; first offending index {bad[0]}")
    t = f_dot.t - f_dot.t0
    if t_g is not None and not np.isclose(t[-1], t_g, rtol=1e-9):
        raise ValidationError("f_dot grid does not span [0, t_g]")
    f = cumulative_trapezoid(fd, t, initial=0.0)
    total = float(f[-1])
    s = f / total
    s[-1] = 1.0
    return DilationMap(s=s, t=t, total_phase=total)


def esd(signal: SampledWaveform, x: float) -> float:
    """Energy spectral density ``|int_0^1 g(s) exp(i x s) ds|^2`` by trapezoid.

    ``signal`` must be sampled on ``s in [0, 1]``; complex samples are allowed.
    """
    s = signal.t
    if not (np.isclose(s[0], 0.0) and np.isclose(s[-1], 1.0)):
        raise ValidationError("esd expects a signal sampled on [0, 1]")
    val = np.trapezoid(signal.samples * np.exp(1j * x * s), s)
    return float(abs(val) ** 2)
