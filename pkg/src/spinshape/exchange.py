"""Barrier-voltage to exchange maps, Zeeman shift with voltage, harmonic
decomposition of a driven exchange and valley renormalization.

Voltages are in mV, exchange and Zeeman energies in GHz.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import iv

from .qcore import ValidationError

K_MAX = 10


@dataclass(frozen=True)
class ExchangeModel:
    """Voltage to exchange relation.

    ``kind="exponential"`` uses ``J = J0 exp(2 alpha v)``.
    ``kind="saturating"`` uses
    ``J = J_sat (sqrt(1 + exp(-2 alpha (v - v_off))) - exp(-alpha (v - v_off)))^2``.
    """

    kind: str = "exponential"
    J0: float = 1e-4
    alpha: float = 0.1
    J_sat: float = 1.0
    v_off: float = 0.0

    def __post_init__(self):
        if self.kind not in ("exponential", "saturating"):
            raise ValidationError(f"unknown exchange model {self.kind!r}")
        if self.alpha <= 0:
            raise ValidationError("alpha must be positive")
        if self.kind == "exponential" and self.J0 <= 0:
            raise ValidationError("J0 must be positive")
        if self.kind == "saturating" and self.J_sat <= 0:
            raise ValidationError("J_sat must be positive")

    @classmethod
    def exponential(cls, J0: float, alpha: float) -> "ExchangeModel":
        return cls("exponential", J0=J0, alpha=alpha)

    @classmethod
    def saturating(cls, J_sat: float, alpha: float, v_off: float) -> "ExchangeModel":
        return cls("saturating", J_sat=J_sat, alpha=alpha, v_off=v_off)

    @classmethod
    def saturating_from_residual(cls, J_sat: float, alpha: float, J_res: float) -> "ExchangeModel":
        """Saturating model whose offset puts ``J(0) = J_res``."""
        v_off = -float(v_of_j(cls("saturating", J_sat=J_sat, alpha=alpha, v_off=0.0), J_res))
        return cls("saturating", J_sat=J_sat, alpha=alpha, v_off=v_off)


@dataclass(frozen=True)
class ZeemanShiftModel:
    """Linear Zeeman-difference shift ``dEz(v) = dEz0 + beta (v - v0)``."""

    dEz0: float = 0.1
    beta: float = 0.0


@dataclass(frozen=True)
class ValleyParams:
    """Valley parameters: tunneling ``t`` and valley splittings in ueV, charging ``U`` in meV."""

    t: float
    U: float
    E_V1: float
    E_V2: float
    phi_V1: float = 0.0
    phi_V2: float = 0.0

    def __post_init__(self):
        if self.U <= 0:
            raise ValidationError("charging energy U must be positive")
        if self.E_V1 < 0 or self.E_V2 < 0:
            raise ValidationError("valley splittings must be non-negative")


def j_of_v(model: ExchangeModel, v):
    """Exchange (GHz) at barrier voltage ``v`` (mV)."""
    v = np.asarray(v, dtype=float)
    if model.kind == "exponential":
        out = model.J0 * np.exp(2 * model.alpha * v)
    else:
        x = np.exp(-model.alpha * (v - model.v_off))
        # sqrt(1+x^2) - x = 1/(sqrt(1+x^2) + x) avoids cancellation for large x
        out = model.J_sat / (np.sqrt(1 + x * x) + x) ** 2
    return out if out.ndim else float(out)


def v_of_j(model: ExchangeModel, J):
    """Barrier voltage (mV) producing exchange ``J`` (GHz).

    For the saturating model this is the exact inverse
    ``v = v_off + log(2 sqrt(r) / (1 - r)) / alpha`` with ``r = J / J_sat``.

    Raises
    ------
    ValidationError
        If ``J <= 0`` or, for the saturating model, ``J >= J_sat``.
    """
    J = np.asarray(J, dtype=float)
    if np.any(~(J > 0)):
        raise ValidationError("exchange must be positive to invert the voltage map")
    if model.kind == "exponential":
        out = np.log(J / model.J0) / (2 * model.alpha)
    else:
        r = J / model.J_sat
        if np.any(r >= 1):
            raise ValidationError("exchange at or beyond saturation has no voltage preimage")
        out = model.v_off + np.log(2 * np.sqrt(r) / (1 - r)) / model.alpha
    return out if out.ndim else float(out)


def dj_dv(model: ExchangeModel, v):
    """Derivative of ``j_of_v`` with respect to voltage (GHz/mV)."""
    v = np.asarray(v, dtype=float)
    if model.kind == "exponential":
        out = 2 * model.alpha * j_of_v(model, v)
    else:
        x = np.exp(-model.alpha * (v - model.v_off))
        root = np.sqrt(1 + x * x)
        # dJ/dv = 2 J_sat (root - x) * (x - x^2/root) * alpha
        out = 2 * model.J_sat * (root - x) * model.alpha * (x - x * x / root)
    return out if out.ndim else float(out)


def fourier_coeffs_driven(model: ExchangeModel, v_B0: float, v_amp: float, k_max: int = K_MAX,
                          n_quad: int = 4096) -> np.ndarray:
    """Harmonics ``J_k`` of ``J(v_B0 + v_amp cos(phi)) = J_0 + sum_k 2 J_k cos(k phi)``.

    Exponential model: ``J_k = J(v_B0) I_k(2 alpha v_amp)``. Saturating model:
    numeric coefficients from ``n_quad`` uniform samples over one period.
    ``v_amp`` may be an array, in which case the result has shape
    ``(len(v_amp), k_max + 1)``.
    """
    if k_max < 1:
        raise ValidationError("k_max must be at least 1")
    amp = np.atleast_1d(np.asarray(v_amp, dtype=float))
    if model.kind == "exponential":
        x = 2 * model.alpha * amp
        out = j_of_v(model, v_B0) * iv(np.arange(k_max + 1), x[:, None])
    else:
        phi = 2 * np.pi * np.arange(n_quad) / n_quad
        vals = j_of_v(model, v_B0 + amp[:, None] * np.cos(phi)[None, :])
        spec = np.fft.rfft(vals, axis=-1).real / n_quad
        out = spec[:, : k_max + 1]
    return out if np.ndim(v_amp) else out[0]


def delta_ez_of_v(shift: ZeemanShiftModel, v_B, v_B0: float = 0.0):
    """Zeeman-energy difference at barrier voltage ``v_B``."""
    return shift.dEz0 + shift.beta * (np.asarray(v_B, dtype=float) - v_B0)


def valley_corrections(p: ValleyParams, dEz: float, J: float) -> tuple[float, float]:
    """Lowest-order valley renormalization of ``dEz`` and ``J``.

    ``dEz~ = dEz [1 - (t^2/U^2 + 2 t^2 / (E_V1 + E_V2 + 2U)^2)]`` and
    ``J~ = J (1 + cos(phi_V1 - phi_V2)) / 2``. All energies are converted to
    ueV before forming the ratios.
    """
    U = p.U * 1e3
    ratio = p.t**2 / U**2 + 2 * p.t**2 / (p.E_V1 + p.E_V2 + 2 * U) ** 2
    return dEz * (1 - ratio), J * (1 + np.cos(p.phi_V1 - p.phi_V2)) / 2
