"""Pulse synthesis: single-qubit IQ pulses, CZ barrier pulses, resonant SWAP
drives and synchronization conditions.

Pulses are tabulated on a fine uniform grid over ``[0, t_g]`` and evaluated
by linear interpolation; :meth:`sample` returns the channel dictionary used
by :mod:`spinshape.simulator`. Units are ns, GHz and mV throughout.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from . import exchange as ex
from .qcore import ValidationError
from .windows import WindowSpec, window_value

MIN_SAMPLES = 4097
SAMPLE_STEP = 2.5e-3


def _fine_grid(t_g: float, n: int | None = None) -> np.ndarray:
    if t_g <= 0:
        raise ValidationError("t_g must be positive")
    if n is None:
        n = max(MIN_SAMPLES, int(np.ceil(t_g / SAMPLE_STEP)) + 1)
    return np.linspace(0.0, t_g, n)


def _interp(t, grid, values, before=0.0, after=0.0):
    t = np.asarray(t, dtype=float)
    eps = 1e-9 * grid[-1]
    inside = (t >= -eps) & (t <= grid[-1] + eps)
    val = np.interp(np.clip(t, 0.0, grid[-1]), grid, values)
    return np.where(inside, val, np.where(t < 0, before, after))


def derivative(y: np.ndarray, dt: float) -> np.ndarray:
    """Centered differences inside, second-order one-sided differences at the ends."""
    return np.gradient(y, dt, edge_order=2)


@dataclass(frozen=True, eq=False)
class IQPulse:
    """Microwave drive with in-phase and quadrature envelopes (GHz) and a phase ramp (rad)."""

    t_g: float
    t: np.ndarray
    envelope_x: np.ndarray
    envelope_y: np.ndarray
    theta: np.ndarray
    nu_d: float
    qubit: int = 1
    coupling: tuple | None = None
    label: str = "iq"

    @property
    def theta_dot(self) -> np.ndarray:
        return derivative(self.theta, self.t[1] - self.t[0])

    def sample(self, t) -> dict:
        return {
            "bx": _interp(t, self.t, self.envelope_x),
            "by": _interp(t, self.t, self.envelope_y),
            "theta": _interp(t, self.t, self.theta, 0.0, self.theta[-1]),
            "theta_dot": _interp(t, self.t, self.theta_dot),
        }

    def columns(self) -> dict:
        return {"bx_ghz": self.envelope_x, "by_ghz": self.envelope_y, "theta_rad": self.theta}


@dataclass(frozen=True, eq=False)
class VoltagePulse:
    """Barrier-voltage pulse (mV), optionally with a carrier at ``nu_st``.

    The applied voltage is ``v_b(t) + v_b1(t) cos(2 pi nu_st t + theta_j(t))``.
    ``info`` carries derived quantities such as the exchange profile or
    calibration factors.
    """

    t_g: float
    t: np.ndarray
    v_b: np.ndarray
    baseline: float
    v_b1: np.ndarray | None = None
    theta_j: np.ndarray | None = None
    nu_st: float | None = None
    label: str = "voltage"
    info: dict = field(default_factory=dict)

    def sample(self, t) -> dict:
        out = {"v_b": _interp(t, self.t, self.v_b, self.baseline, self.baseline)}
        if self.v_b1 is not None:
            out["v_b1"] = _interp(t, self.t, self.v_b1)
            th = self.theta_j if self.theta_j is not None else np.zeros_like(self.t)
            out["theta_j"] = _interp(t, self.t, th, 0.0, th[-1])
        return out

    def columns(self) -> dict:
        cols = {"v_b_mv": self.v_b}
        if self.v_b1 is not None:
            cols["v_b1_mv"] = self.v_b1
            cols["theta_j_rad"] = self.theta_j if self.theta_j is not None else np.zeros_like(self.t)
        if "J" in self.info:
            cols["J_ghz"] = self.info["J"]
        return cols


class SyncSolution(NamedTuple):
    m: int
    n: int
    t_g: float
    amplitude: float


def write_csv(pulse, path) -> None:
    """Write ``t_ns`` plus every channel of ``pulse`` with round-trip float formatting."""
    cols = pulse.columns()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_ns", *cols])
        for k, tk in enumerate(pulse.t):
            w.writerow([repr(float(tk)), *(repr(float(v[k])) for v in cols.values())])


# --------------------------------------------------------------------------- single qubit


def static_1q_pulse(window: WindowSpec, t_g: float, angle: float, nu_d: float, qubit: int = 1,
                    n: int | None = None) -> IQPulse:
    """Rotation by ``angle`` about x with envelope ``angle / (2 pi t_g) * w(t)``.

    Under ``H = Bx Sx`` the rotation angle is ``2 pi int Bx dt``, which
    the window normalization ``int w = t_g`` fixes to ``angle``.
    """
    t = _fine_grid(t_g, n)
    x = angle / (2 * np.pi * t_g) * window_value(window, t, t_g)
    z = np.zeros_like(t)
    return IQPulse(t_g, t, x, z, z.copy(), nu_d, qubit, label="static")


def drag_factor(dEz: float, t_g: float) -> float:
    """Amplitude renormalization ``1 - 5 / (5 + (4 dEz t_g)^2)``."""
    return 1.0 - 5.0 / (5.0 + (4 * dEz * t_g) ** 2)


def drag_1q_pulse(window: WindowSpec, t_g: float, dEz: float, angle: float, nu_d: float, qubit: int = 1,
                  renormalize: bool = True, n: int | None = None, scale: float | None = None,
                  ramp_scale: float = 1.0) -> IQPulse:
    """Quadrature-corrected pulse that leaves the off-resonant spectator untouched.

    With a global drive the spectator sees ``Bx Sx + By Sy + d_s Sz``, where
    ``d_s = -dEz + d_1`` when qubit 1 is the target (``+dEz`` for qubit 2)
    and ``d_1 = -theta_dot / (2 pi)`` is the frame shift of the phase ramp.
    Tilting into the spectator's adiabatic frame by ``eta = atan(Bx / d_s)``
    adds ``-(d eta/dt) / (2 pi) Sy``, so ``By = (d eta/dt) / (2 pi)`` removes
    spectator transitions exactly. To first order this is the familiar
    ``By = -(dBx/dt) / (2 pi dEz)``.

    On the resonant qubit the quadrature tilts the rotation axis. Integrating
    its first-order error by parts shows it is cancelled by ``d_1 = -Bx eta``,
    i.e. ``theta_dot ~ -2 pi Bx^2 / dEz``; ``d_1`` and ``d_s`` are solved
    self-consistently per sample.

    ``renormalize`` scales the in-phase envelope by ``drag_factor(2 dEz, t_g)``,
    which compensates the extra rotation the quadrature causes on the target
    qubit in this module's field convention. ``scale`` overrides that factor
    and ``ramp_scale`` multiplies the phase ramp; both are the two knobs
    tuned by ``simulator.calibrate_drag`` when a filter distorts the pulse.

    Raises
    ------
    ValidationError
        If ``dEz == 0``.
    """
    if dEz == 0:
        raise ValidationError("DRAG needs a non-zero Zeeman difference")
    detuning = -dEz if qubit == 1 else dEz
    t = _fine_grid(t_g, n)
    dt = t[1] - t[0]
    if scale is None:
        scale = drag_factor(2 * abs(dEz), t_g) if renormalize else 1.0
    x = scale * angle / (2 * np.pi * t_g) * window_value(window, t, t_g)
    d1 = np.zeros_like(x)
    for _ in range(200):
        eta = np.arctan(x / (detuning + d1))
        new = -x * eta
        if np.max(np.abs(new - d1)) <= 1e-15 * abs(dEz):
            break
        d1 = new
    else:
        raise ValidationError("DRAG phase ramp did not converge; drive too strong for the detuning")
    y = derivative(eta, dt) / (2 * np.pi)
    theta = ramp_scale * cumulative_trapezoid(-2 * np.pi * d1, t, initial=0.0)
    return IQPulse(t_g, t, x, y, theta, nu_d, qubit, label="drag")


def sync_1q_times(dEz: float, gate: str = "pi/2", m_max: int = 5) -> list:
    """Equal-amplitude global-drive gate times where the spectator returns.

    ``pi/2``: ``sqrt(16 m^2 - 1) / (4 dEz)``; ``pi``: ``sqrt(4 m^2 - 1) / (2 dEz)``.
    """
    if dEz <= 0:
        raise ValidationError("dEz must be positive")
    angle = {"pi/2": np.pi / 2, "pi": np.pi}[gate]
    out = []
    for m in range(1, m_max + 1):
        tg = np.sqrt(16 * m * m - 1) / (4 * dEz) if gate == "pi/2" else np.sqrt(4 * m * m - 1) / (2 * dEz)
        out.append(SyncSolution(m, 0, float(tg), angle / (2 * np.pi * tg)))
    return out


def sync_1q(dEz: float, bx_drive: float | None = None, gate: str = "pi/2", m_max: int = 5,
            n_max: int = 3) -> list:
    """Synchronization solutions for a single-qubit gate under a global drive.

    Without ``bx_drive`` the equal-amplitude times of :func:`sync_1q_times`
    are returned. With it, the amplitude solutions
    ``B_i = (2n' + 1) / (2m) sqrt(B_j^2 / 4 + dEz^2)`` are listed, where
    ``n' = n`` for a pi gate and ``n' = 2n`` for a pi/2 gate, and ``t_g`` is
    the time the drive ``bx_drive`` needs for the target rotation.
    """
    if dEz <= 0:
        raise ValidationError("dEz must be positive")
    if gate not in ("pi", "pi/2"):
        raise ValidationError("gate must be 'pi' or 'pi/2'")
    if bx_drive is None:
        return sync_1q_times(dEz, gate, m_max)
    angle = np.pi if gate == "pi" else np.pi / 2
    tg = angle / (2 * np.pi * bx_drive)
    root = np.sqrt(bx_drive**2 / 4 + dEz**2)
    out = []
    for m in range(1, m_max + 1):
        for n in range(n_max + 1):
            k = n if gate == "pi" else 2 * n
            out.append(SyncSolution(m, n, float(tg), float((2 * k + 1) / (2 * m) * root)))
    return out


# --------------------------------------------------------------------------- CZ


def sync_cz(dEz: float, m: int = 1) -> float:
    """Rectangular CZ time ``sqrt(4 m^2 - 1) / (2 dEz)`` avoiding odd-block leakage."""
    if dEz <= 0 or m < 1:
        raise ValidationError("need dEz > 0 and m >= 1")
    return float(np.sqrt(4 * m * m - 1) / (2 * dEz))


def _solve_j(theta_m, model, shift, v_b0):
    """``J`` with ``J = dEz(v(J)) tan(theta_m)`` per sample (fixed point)."""
    tan = np.tan(theta_m)
    J = shift.dEz0 * tan
    if shift.beta == 0:
        return J
    for _ in range(200):
        dEz = ex.delta_ez_of_v(shift, ex.v_of_j(model, J), v_b0)
        new = dEz * tan
        if np.max(np.abs(new - J) / np.maximum(np.abs(J), 1e-300)) < 1e-14:
            return new
        J = new
    raise ValidationError("exchange and Zeeman shift did not reach a self-consistent profile")


def _cz_full_profile(A, w_s, s, t_g, theta0, model, shift, v_b0):
    theta_m = 2 * A * w_s + theta0
    J = _solve_j(theta_m, model, shift, v_b0)
    dEz = J / np.tan(theta_m)
    nu = np.hypot(dEz, J)
    dtds = 1.0 / nu
    t_of_s = cumulative_trapezoid(dtds, s, initial=0.0)
    t_of_s *= t_g / t_of_s[-1]
    return J, t_of_s


def cz_pulse(window: WindowSpec, t_g: float, model: ex.ExchangeModel, shift: ex.ZeemanShiftModel,
             phase: float = np.pi, mode: str = "simplified", v_b0: float = 0.0,
             n: int | None = None) -> VoltagePulse:
    """Barrier pulse for a controlled phase ``phase``.

    ``simplified``: ``J(t) = J_res + phase / (2 pi) * w(t) / t_g`` so the
    pulse adds exactly ``phase`` on top of the residual exchange.

    ``full``: the odd-block mixing angle ``atan(J / dEz)`` follows
    ``2 A w`` on the time axis dilated by the instantaneous splitting
    ``nu_j = sqrt(dEz^2 + J^2)``, with ``A`` chosen so the total
    ``2 pi int J dt`` equals ``phase``. ``dEz`` tracks the barrier voltage
    through ``shift``.

    Raises
    ------
    ValidationError
        If the area cannot be bracketed or the exchange leaves the model's range.
    """
    if mode not in ("simplified", "full"):
        raise ValidationError("mode must be 'simplified' or 'full'")
    t = _fine_grid(t_g, n)
    J_res = float(ex.j_of_v(model, v_b0))
    if mode == "simplified":
        J = J_res + phase / (2 * np.pi) * window_value(window, t, t_g) / t_g
        A = None
    else:
        s = t / t_g
        w_s = window_value(window, t, t_g)
        dEz0 = float(ex.delta_ez_of_v(shift, v_b0, v_b0))
        theta0 = np.arctan2(J_res, dEz0)
        target = phase / (2 * np.pi)
        cap = np.pi / 2 - 1e-9
        if model.kind == "saturating":
            cap = min(cap, np.arctan(0.9 * model.J_sat / dEz0))
        a_max = (cap - theta0) / (2 * np.max(w_s))

        def area(a):
            J_s, t_s = _cz_full_profile(a, w_s, s, t_g, theta0, model, shift, v_b0)
            return np.trapezoid(J_s, t_s) - target

        if area(0.0) > 0 or area(a_max) < 0:
            raise ValidationError("conditional phase not reachable within the exchange range")
        A = brentq(area, 0.0, a_max, xtol=1e-14, rtol=1e-12)
        J_s, t_s = _cz_full_profile(A, w_s, s, t_g, theta0, model, shift, v_b0)
        J = np.interp(t, t_s, J_s)
    v = ex.v_of_j(model, J)
    v[0] = v[-1] = v_b0 if window.kind != "rect" else v[0]
    return VoltagePulse(t_g, t, v, v_b0, label=f"cz-{mode}", info={"J": J, "A": A, "J_res": J_res})


# --------------------------------------------------------------------------- resonant swap

PHASE_MODES = ("none", "bessel", "ode")


def _swap_quadratures(model, shift, v_b0, v_b1, psi, J0, dEz, nu):
    """Longitudinal ``Z - nu`` and transverse ``X`` fields in the idle eigenbasis.

    ``psi`` is the instantaneous carrier phase. Both are in GHz; the odd
    block reads ``(Z sz + X sx) / 2`` up to a multiple of the identity.
    """
    v = v_b0 + v_b1 * np.cos(psi)
    J = ex.j_of_v(model, v)
    dEz_t = ex.delta_ez_of_v(shift, v, v_b0)
    z = (J0 * J + dEz * dEz_t) / nu - nu
    x = (dEz * J - J0 * dEz_t) / nu
    return z, x


def swap_rabi_rate(model, shift, v_b0, v_b1, k_max: int = ex.K_MAX) -> np.ndarray:
    """Resonant Rabi rate ``(dEz J_1 - J0 beta v_b1 / 2) / nu_st`` for envelope samples ``v_b1``.

    A flip between the idle eigenstates needs ``int rate dt = 1/2``.
    """
    J0 = float(ex.j_of_v(model, v_b0))
    dEz = float(ex.delta_ez_of_v(shift, v_b0, v_b0))
    nu = np.hypot(dEz, J0)
    jk = ex.fourier_coeffs_driven(model, v_b0, np.asarray(v_b1, dtype=float), k_max)
    return (dEz * jk[..., 1] - J0 * shift.beta * np.asarray(v_b1) / 2) / nu


def _bessel_phase(model, shift, v_b0, v_b1, t, k_max):
    """Phase ramp from the averaged (Floquet) Hamiltonian up to second order in ``1/nu``.

    With harmonics ``X = sum_k X_k e^{ik psi}`` of the transverse field, the
    rotating-frame detuning is ``Z_0 - nu`` plus the Bloch-Siegert type
    shift ``sum_{m>=1} (X_{m-1}^2 - X_{m+1}^2) / (2 m nu)``.
    """
    J0 = float(ex.j_of_v(model, v_b0))
    dEz = float(ex.delta_ez_of_v(shift, v_b0, v_b0))
    nu = np.hypot(dEz, J0)
    jk = ex.fourier_coeffs_driven(model, v_b0, v_b1, k_max + 1)
    xk = dEz * jk / nu
    xk[:, 0] -= J0 * dEz / nu
    xk[:, 1] -= J0 * shift.beta * v_b1 / (2 * nu)
    rate = (J0 * jk[:, 0] + dEz * dEz) / nu - nu
    for m in range(1, k_max + 1):
        rate = rate + (xk[:, m - 1] ** 2 - xk[:, m + 1] ** 2) / (2 * m * nu)
    return cumulative_trapezoid(2 * np.pi * rate, t, initial=0.0)


def _ode_phase(model, shift, v_b0, v_b1, t):
    """Linearized phase equation integrated with classical fourth-order steps.

    In the frame of the instantaneous drive ``U = exp(-i pi int X cos(psi) sx)``
    the error amplitude is ``int (g_R + i g_I) e^{i f}`` with
    ``g_R = (Z - nu - theta_dot / (2 pi)) / 2``, ``g_I = X sin(psi) / 2`` and
    ``f_dot = -2 pi X cos(psi)``. Cancelling its integrated-by-parts form
    pointwise gives
    ``theta_dot / (2 pi) = Z - nu - 2 pi X cos(psi) int_0^t X sin(psi) ds``
    with ``psi = 2 pi nu t + theta``. The integral is evaluated at
    ``theta = 0`` and the right-hand side is expanded to first order in
    ``theta`` about zero, leaving ``theta_dot = a(t) + b(t) theta``.
    """
    J0 = float(ex.j_of_v(model, v_b0))
    dEz = float(ex.delta_ez_of_v(shift, v_b0, v_b0))
    nu = np.hypot(dEz, J0)
    # half-step tabulation for the Runge-Kutta stages
    th = np.linspace(t[0], t[-1], 2 * t.size - 1)
    vb1 = np.interp(th, t, v_b1)
    psi0 = 2 * np.pi * nu * th
    _, x0 = _swap_quadratures(model, shift, v_b0, vb1, psi0, J0, dEz, nu)
    inner = cumulative_trapezoid(x0 * np.sin(psi0), th, initial=0.0)

    def rhs(eps):
        z, x = _swap_quadratures(model, shift, v_b0, vb1, psi0 + eps, J0, dEz, nu)
        return 2 * np.pi * (z - 2 * np.pi * x * np.cos(psi0 + eps) * inner)

    h = 1e-6
    a = rhs(0.0)
    b = (rhs(h) - rhs(-h)) / (2 * h)
    dt = t[1] - t[0]
    a0, a1, a2 = a[:-2:2], a[1::2], a[2::2]
    b0, b1, b2 = b[:-2:2], b[1::2], b[2::2]

    def step(y):
        # one classical Runge-Kutta step of theta_dot = a + b theta, vectorized over steps
        k1 = a0 + b0 * y
        k2 = a1 + b1 * (y + dt * k1 / 2)
        k3 = a1 + b1 * (y + dt * k2 / 2)
        k4 = a2 + b2 * (y + dt * k3)
        return y + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6

    # the step is affine, theta_{k+1} = P_k theta_k + Q_k; solve the recurrence in closed form
    q = step(0.0)
    pk = step(1.0) - q
    prod = np.concatenate(([1.0], np.cumprod(pk)))
    theta = prod * np.concatenate(([0.0], np.cumsum(q / prod[1:])))
    bad = np.flatnonzero(~np.isfinite(theta))
    if bad.size:
        raise ValidationError(f"phase equation produced a non-finite value at step {bad[0]}")
    return theta


def swap_ac_pulse(window: WindowSpec, t_g: float, model: ex.ExchangeModel, shift: ex.ZeemanShiftModel,
                  phase_mode: str = "bessel", v_b0: float = 0.0, calibrate: bool = True,
                  k_max: int = ex.K_MAX, n: int | None = None) -> VoltagePulse:
    """Resonant exchange drive that flips the idle eigenstates of the odd block.

    The barrier carries ``v_b1(t) cos(2 pi nu_st t + theta_j(t))`` on top of
    ``v_b0`` with ``nu_st = sqrt(dEz^2 + J0^2)`` and ``J0 = J(v_b0)``. The
    envelope is ``log(c w / (4 J0 t_g) + 1) / (2 alpha)``. With
    ``calibrate`` the factor ``c`` is solved so the resonant Rabi rate
    integrates to exactly one half (a complete flip); otherwise ``c = 1``.

    ``phase_mode`` selects the phase ramp ``theta_j``:

    ``none``
        ``theta_j = 0``.
    ``bessel``
        Averaged detuning from the Bessel harmonics of the exchange,
        including the second-order shift from the off-resonant harmonics.
    ``ode``
        First-order linearization of the pointwise error-cancellation
        condition, integrated on the pulse grid.

    Only the exponential exchange model is accepted.
    """
    if model.kind != "exponential":
        raise ValidationError("the resonant swap pulse requires the exponential exchange model")
    if phase_mode not in PHASE_MODES:
        raise ValidationError(f"phase_mode must be one of {PHASE_MODES}")
    t = _fine_grid(t_g, n)
    w = window_value(window, t, t_g)
    J0 = float(ex.j_of_v(model, v_b0))
    dEz = float(ex.delta_ez_of_v(shift, v_b0, v_b0))
    nu = float(np.hypot(dEz, J0))
    if nu <= 0:
        raise ValidationError("nu_st must be positive")

    def envelope(c):
        return np.log(c * w / (4 * J0 * t_g) + 1.0) / (2 * model.alpha)

    def area(c):
        return np.trapezoid(swap_rabi_rate(model, shift, v_b0, envelope(c), k_max), t) - 0.5

    c = 1.0
    if calibrate:
        hi = 1.0
        while area(hi) < 0:
            hi *= 2
            if hi > 1e12:
                raise ValidationError("flip area not reachable")
        c = brentq(area, 0.0, hi, xtol=1e-14, rtol=1e-12)
    v_b1 = envelope(c)
    if phase_mode == "none":
        theta = np.zeros_like(t)
    elif phase_mode == "bessel":
        theta = _bessel_phase(model, shift, v_b0, v_b1, t, k_max)
    else:
        theta = _ode_phase(model, shift, v_b0, v_b1, t)
    jk = ex.fourier_coeffs_driven(model, v_b0, v_b1, 1)
    info = {"J": jk[:, 0], "J1": jk[:, 1], "calibration": c, "J0": J0,
            "swap_area": float(np.trapezoid(jk[:, 0], t))}
    return VoltagePulse(t_g, t, np.full_like(t, v_b0), v_b0, v_b1, theta, nu, label=f"swap-{phase_mode}", info=info)
