"""Analytical coherent-error framework.

A gate Hamiltonian is split as ``H = H_ideal + H_rest``. In the frame of the
ideal evolution ``U_ideal`` the remaining dynamics is generated by the error
Hamiltonian ``H_err = U_ideal^dag H_rest U_ideal`` and, to lowest Magnus
order, the error operator is ``E = exp(-2 pi i int H_err dt)``.

For sparse errors every dominant channel has the form
``|int g(t) exp(i f(t)) dt|^2``. Channels here are stored in angular
units: ``g`` is the transition-amplitude rate (rad/ns) and ``f_dot`` the
angular frequency of the rotating error (rad/ns), so the returned rate is
directly a transition probability. The factor ``2 pi`` between the GHz
Hamiltonian and these rates is applied once, when a channel is built.

All channels share one derivation. If the ideal generator rotates a
two-level system about ``x`` at ``r`` GHz while the rest is
``u S_z + v S_y``, then ``g = pi (u + i v)`` and ``f_dot = 2 pi r``. If
it rotates about ``z`` at ``r`` GHz while the rest is ``u S_x + v S_y``,
then ``g = pi (u + i v)`` and ``f_dot = -2 pi r``. A channel with
negative ``f_dot`` is replaced by its complex conjugate, which has the same
rate and positive ``f_dot``.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.linalg import expm

from . import exchange as ex
from . import shaper
from . import simulator as sim
from .qcore import (ODD_X, ODD_Y, ODD_Z, GateTarget, ValidationError, avg_gate_fidelity, dagger,
                    expm_hermitian_batch, fidelity_up_to_virtual_z, spin_op)
from .windows import SampledWaveform, dilation_map, esd

MAGNUS_WARN = 0.5
FAMILIES = ("one_qubit", "cz", "swap_ac")
_FAMILY_ALIASES = {"onequbit": "one_qubit", "one_qubit": "one_qubit", "1q": "one_qubit",
                   "cz": "cz", "swapac": "swap_ac", "swap_ac": "swap_ac", "swap": "swap_ac"}


@dataclass(frozen=True, eq=False)
class HamiltonianTrajectory:
    """Hamiltonian samples ``H[k]`` (GHz) at ``t[k]`` on a uniform grid."""

    t: np.ndarray
    H: np.ndarray
    frame: str = "rwa"

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        H = np.asarray(self.H, dtype=complex)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "H", H)
        if t.ndim != 1 or t.size < 2:
            raise ValidationError("a trajectory needs at least two time samples")
        if H.shape[0] != t.size or H.ndim != 3 or H.shape[1] != H.shape[2]:
            raise ValidationError("H must have shape (len(t), d, d)")
        steps = np.diff(t)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-8, atol=0):
            raise ValidationError("trajectory grid must be uniform and increasing")

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def dim(self) -> int:
        return self.H.shape[-1]


@dataclass(frozen=True, eq=False)
class ErrorChannel:
    """One dominant error channel ``|int g exp(i f) dt|^2``.

    ``O`` is the operator whose overlap with the error operator measures the
    channel. ``g`` (complex) and ``f_dot`` (real) are in rad/ns on the same grid.
    """

    label: str
    O: np.ndarray
    g: SampledWaveform
    f_dot: SampledWaveform

    def __post_init__(self):
        if self.g.samples.size != self.f_dot.samples.size or not (
                np.isclose(self.g.t0, self.f_dot.t0) and np.isclose(self.g.dt, self.f_dot.dt)):
            raise ValidationError("g and f_dot must share one time grid")

    @property
    def t(self) -> np.ndarray:
        return self.g.t


def _check_grids(a: HamiltonianTrajectory, b: HamiltonianTrajectory):
    if a.t.size != b.t.size or not np.allclose(a.t, b.t, rtol=1e-10, atol=1e-12):
        raise ValidationError("trajectories are sampled on different grids")
    if a.dim != b.dim:
        raise ValidationError("trajectories have different dimensions")


def ideal_propagators(H_ideal: HamiltonianTrajectory) -> np.ndarray:
    """``U_ideal(t_k)`` for every grid point, stepping with the interval-mean Hamiltonian."""
    mids = (H_ideal.H[1:] + H_ideal.H[:-1]) / 2
    steps = expm_hermitian_batch(mids, 2 * np.pi * H_ideal.dt)
    out = np.empty_like(H_ideal.H)
    out[0] = np.eye(H_ideal.dim)
    for k, s in enumerate(steps):
        out[k + 1] = s @ out[k]
    return out


def error_hamiltonian(H: HamiltonianTrajectory, H_ideal: HamiltonianTrajectory,
                      U_ideal: np.ndarray | None = None) -> HamiltonianTrajectory:
    """Interaction-frame error Hamiltonian ``U_ideal^dag (H - H_ideal) U_ideal``.

    The derivative term of the frame change cancels ``U_ideal^dag H_ideal
    U_ideal`` exactly, so only the rest ``H - H_ideal`` is transformed.

    Parameters
    ----------
    H, H_ideal : HamiltonianTrajectory
        Full and ideal Hamiltonians on the same grid.
    U_ideal : ndarray, optional
        Ideal propagators at the grid points, shape ``(N, d, d)``. Computed
        from ``H_ideal`` when omitted.

    Raises
    ------
    ValidationError
        If the grids or shapes disagree.
    """
    _check_grids(H, H_ideal)
    if U_ideal is None:
        U_ideal = ideal_propagators(H_ideal)
    U_ideal = np.asarray(U_ideal, dtype=complex)
    if U_ideal.shape != H.H.shape:
        raise ValidationError("U_ideal must have one propagator per grid point")
    rest = H.H - H_ideal.H
    herr = dagger(U_ideal) @ rest @ U_ideal
    herr = (herr + dagger(herr)) / 2
    return HamiltonianTrajectory(H.t, herr, frame=f"{H.frame}-interaction")


def magnus1_generator(H_err: HamiltonianTrajectory) -> np.ndarray:
    """Trapezoidal ``int H_err dt`` (GHz ns)."""
    return np.trapezoid(H_err.H, H_err.t, axis=0)


def magnus1_error_op(H_err: HamiltonianTrajectory) -> np.ndarray:
    """Lowest-order Magnus error operator ``exp(-2 pi i int H_err dt)``.

    Warns with ``RuntimeWarning`` when the rotation angle ``2 pi ||int H_err||``
    (spectral norm) exceeds 0.5 rad, where higher orders are no longer small.
    """
    omega = magnus1_generator(H_err)
    omega = (omega + dagger(omega)) / 2
    angle = 2 * np.pi * np.linalg.norm(omega, 2)
    if angle > MAGNUS_WARN:
        warnings.warn(f"Magnus generator norm {angle:.3g} rad is not small; first order is unreliable",
                      RuntimeWarning, stacklevel=2)
    return expm(-2j * np.pi * omega)


def error_rate(E: np.ndarray, O: np.ndarray) -> float:
    """``|tr(E O)|^2``."""
    E, O = np.asarray(E), np.asarray(O)
    if E.shape != O.shape:
        raise ValidationError("E and O must have the same shape")
    return float(abs(np.trace(E @ O)) ** 2)


def magnus1_infidelity(H: HamiltonianTrajectory, H_ideal: HamiltonianTrajectory,
                       target=None, U_ideal: np.ndarray | None = None) -> float:
    """Predicted ``1 - F`` of the lowest-order error operator.

    With a ``GateTarget`` the error operator is scored up to virtual z
    rotations against the identity, mirroring how the simulator scores
    ``U_ideal^dag U``; otherwise the plain average gate fidelity is used.
    """
    E = magnus1_error_op(error_hamiltonian(H, H_ideal, U_ideal))
    if target is None:
        return 1.0 - avg_gate_fidelity(E)
    ident = GateTarget.identity(allow_virtual_z=target.allow_virtual_z)
    return 1.0 - fidelity_up_to_virtual_z(E, ident).fidelity


# --------------------------------------------------------------------------- channels


def _waveform(t: np.ndarray, values) -> SampledWaveform:
    return SampledWaveform(float(t[0]), float(t[1] - t[0]), np.asarray(values))


def _channel(label: str, O: np.ndarray, t: np.ndarray, g: np.ndarray, f_dot: np.ndarray) -> ErrorChannel:
    g = np.asarray(g, dtype=complex) * np.ones_like(t)
    f_dot = np.asarray(f_dot, dtype=float) * np.ones_like(t)
    if np.mean(f_dot) < 0:
        g, f_dot, O = np.conj(g), -f_dot, dagger(O)
    return ErrorChannel(label, O, _waveform(t, g), _waveform(t, f_dot))


def _uniform_grid(pulse, n: int | None, max_step: float) -> np.ndarray:
    if n is None:
        n = max(2049, int(np.ceil(pulse.t_g / max_step)) + 1)
    return np.linspace(0.0, pulse.t_g, n)


def _one_qubit_channels(params: sim.SystemParams, pulse, n):
    t = _uniform_grid(pulse, n, 2.5e-3)
    ch = pulse.sample(t)
    bx, by = np.asarray(ch["bx"], float), np.asarray(ch["by"], float)
    theta_dot = np.asarray(ch.get("theta_dot", 0.0), float) * np.ones_like(t)
    nu_d = getattr(pulse, "nu_d", None)
    nu_d = params.Ez if nu_d is None else nu_d
    coupling = getattr(pulse, "coupling", None) or params.coupling
    q = getattr(pulse, "qubit", 1)
    spec = 2 if q == 1 else 1
    bz = {1: params.Ez + params.dEz / 2, 2: params.Ez - params.dEz / 2}
    c_q, c_s = coupling[q - 1], coupling[spec - 1]
    # driven qubit: ideal rotation about x, rest is detuning on z and quadrature on y
    det_q = bz[q] - nu_d - theta_dot / (2 * np.pi)
    g1 = np.pi * (det_q + 1j * c_q * by)
    f1 = 2 * np.pi * c_q * bx
    # spectator: ideal rotation about z at its detuning, rest is the drive on x and y
    det_s = bz[spec] - nu_d - theta_dot / (2 * np.pi)
    g2 = np.pi * c_s * (bx + 1j * by)
    f2 = -2 * np.pi * det_s
    O1 = spin_op("z", q) + 1j * spin_op("y", q)
    O2 = spin_op("x", spec) + 1j * spin_op("y", spec)
    return [_channel(f"axis-q{q}", O1, t, g1, f1), _channel(f"crosstalk-q{spec}", O2, t, g2, f2)]


def _cz_channels(params: sim.SystemParams, pulse, n):
    t = _uniform_grid(pulse, n, 2.5e-3)
    ch = pulse.sample(t)
    if "j" in ch:
        J = np.where(np.isnan(ch["j"]), params.idle_exchange, ch["j"])
        dEz = np.full_like(t, params.dEz)
    else:
        v = np.asarray(ch.get("v_b", params.v_b0), float) * np.ones_like(t)
        if params.exchange is None:
            raise ValidationError("a voltage pulse needs an exchange model")
        J = ex.j_of_v(params.exchange, v)
        dEz = ex.delta_ez_of_v(params.shift, v, params.v_b0) * np.ones_like(t)
    dt = t[1] - t[0]
    Jd = shaper.derivative(J, dt)
    dEzd = shaper.derivative(dEz, dt)
    nu = np.hypot(dEz, J)
    # adiabatic basis angle phi = atan(J / dEz); the frame change leaves -(phi_dot / 2 pi) S_y
    g = -(dEz * Jd - dEzd * J) / (2 * nu**2)
    O = (ODD_X + 1j * ODD_Y) / 2
    return [_channel("nonadiabatic", O, t, g, -2 * np.pi * nu)]


def _swap_channels(params: sim.SystemParams, pulse, n):
    model = params.exchange
    if model is None:
        raise ValidationError("the swap channel needs an exchange model")
    nu = getattr(pulse, "nu_st", None)
    if nu is None:
        raise ValidationError("the swap channel needs a carrier frequency nu_st")
    t = _uniform_grid(pulse, n, min(2.5e-3, 1 / (64 * nu)))
    ch = pulse.sample(t)
    v_b1 = np.asarray(ch["v_b1"], float)
    theta = np.asarray(ch.get("theta_j", 0.0), float) * np.ones_like(t)
    theta_dot = shaper.derivative(theta, t[1] - t[0])
    v_b0 = params.v_b0
    J0 = float(ex.j_of_v(model, v_b0))
    dEz = params.dEz
    psi = 2 * np.pi * nu * t + theta
    zmn, x = shaper._swap_quadratures(model, params.shift, v_b0, v_b1, psi, J0, dEz, nu)
    # ideal: x cos(psi) about x; rest: (Z - nu - theta_dot / 2 pi) S_z - x sin(psi) S_y
    g = np.pi * (zmn - theta_dot / (2 * np.pi) - 1j * x * np.sin(psi))
    f_dot = 2 * np.pi * x * np.cos(psi)
    O = ODD_Z + 1j * ODD_Y
    return [ErrorChannel("swap-axis", O, _waveform(t, g), _waveform(t, f_dot))]


def channels_for(family: str, params: sim.SystemParams, pulse, n: int | None = None) -> list:
    """Dominant error channels of a gate family.

    Parameters
    ----------
    family : {"one_qubit", "cz", "swap_ac"}
        ``one_qubit`` expects an ``IQPulse``-like drive; ``cz`` a barrier or
        exchange pulse; ``swap_ac`` a pulse with an ac barrier drive at ``nu_st``.
    n : int, optional
        Number of grid points on ``[0, t_g]``.

    Returns
    -------
    list of ErrorChannel
        ``one_qubit``: rotation-axis error of the driven qubit and crosstalk
        flip of the spectator. ``cz``: the non-adiabatic flip between the
        exchange eigenstates. ``swap_ac``: the rotation-axis error of the
        driven flip, whose ``f_dot`` changes sign within every carrier period.

    Notes
    -----
    Each pair of operators ``O`` and ``O^dag`` gives complex-conjugate
    amplitudes and hence equal rates, so one channel per pair is returned.
    """
    key = _FAMILY_ALIASES.get(str(family).lower().replace("-", "_"))
    if key is None:
        raise ValidationError(f"unknown gate family {family!r}; expected one of {FAMILIES}")
    return {"one_qubit": _one_qubit_channels, "cz": _cz_channels, "swap_ac": _swap_channels}[key](params, pulse, n)


def channel_error_rate(channel: ErrorChannel) -> float:
    """``|int g exp(i f) dt|^2`` evaluated directly in time (any sign of ``f_dot``)."""
    t = channel.t
    f = cumulative_trapezoid(channel.f_dot.samples, t, initial=0.0)
    return float(abs(np.trapezoid(channel.g.samples * np.exp(1j * f), t)) ** 2)


def esd_error_rate(channel: ErrorChannel, t_g: float | None = None) -> float:
    """Channel rate through the time dilation ``t -> s`` and the energy spectral density.

    ``g~(s) = g(t(s)) dt/ds`` is tabulated on a uniform ``s`` grid and the
    rate is ``esd(g~, nu_f t_g)`` with ``nu_f t_g = f(t_g) - f(0)`` in radians.

    Raises
    ------
    ValidationError
        If ``f_dot`` is not strictly positive, where the substitution is singular.
    """
    dmap = dilation_map(channel.f_dot, t_g)
    x = dmap.total_phase
    n = channel.g.samples.size
    s = np.linspace(0.0, 1.0, n)
    t_s = dmap.t_of_s(s) + channel.g.t0
    g_s = np.interp(t_s, channel.t, channel.g.samples.real) + 1j * np.interp(t_s, channel.t, channel.g.samples.imag)
    fd_s = np.interp(t_s, channel.t, channel.f_dot.samples)
    g_tilde = g_s * x / fd_s
    return esd(SampledWaveform(0.0, 1.0 / (n - 1), g_tilde), x)


def total_rate(channels) -> float:
    """Sum of the direct rates of ``channels``."""
    return float(sum(channel_error_rate(c) for c in channels))


# --------------------------------------------------------------------------- generalized RWA


def grwa_hamiltonian(H_rf: HamiltonianTrajectory, nu_d: float, H_dot: HamiltonianTrajectory | None = None) -> np.ndarray:
    """Effective Hamiltonian of one drive period to first order in ``1 / nu_d``.

    ``nu_d int H dt + nu_d int H_dot t dt + (2 pi nu_d / 2i) int_0^T int_0^t' [H(t'), H(t'')]``.

    ``H_dot`` is the derivative of the slowly varying envelopes only. When
    it is omitted the envelopes are taken as frozen over the period and the
    second term vanishes; differentiating the carrier itself would not
    describe envelope changes.

    Raises
    ------
    ValidationError
        If the grid does not span exactly one period ``1 / nu_d``.
    """
    t = H_rf.t - H_rf.t[0]
    period = 1.0 / nu_d
    if not np.isclose(t[-1], period, rtol=1e-9, atol=1e-12):
        raise ValidationError("trajectory must span exactly one drive period")
    H = H_rf.H
    out = nu_d * np.trapezoid(H, t, axis=0)
    if H_dot is not None:
        _check_grids(H_rf, H_dot)
        out = out + nu_d * np.trapezoid(H_dot.H * t[:, None, None], t, axis=0)
    # inner integral A(t') = int_0^t' H dt''; the double integral is int [H(t'), A(t')] dt'
    A = cumulative_trapezoid(H, t, axis=0, initial=0.0)
    comm = H @ A - A @ H
    out = out + (2 * np.pi * nu_d / 2j) * np.trapezoid(comm, t, axis=0)
    return (out + dagger(out)) / 2


def trajectory_from_coefficients(c) -> HamiltonianTrajectory:
    """Trajectory from simulator step coefficients sampled with ``include_start``."""
    n = c.z1.size
    t = c.dt * np.arange(n)
    return HamiltonianTrajectory(t, c.hamiltonians())


def one_qubit_ideal(c, qubit: int = 1):
    """Ideal part of single-qubit drive coefficients.

    The driven qubit keeps only its drive (resonant rotation). The spectator
    keeps its precession, dressed by the ac-Stark shift
    ``sign(D) sqrt(D^2 + |b|^2)`` of its detuning ``D`` under the drive
    ``b`` it sees, so the error frame follows the shifted frequency.
    """
    zero = np.zeros_like(c.z1)
    if qubit == 1:
        z2 = np.sign(c.z2) * np.sqrt(c.z2**2 + c.x2**2 + c.y2**2)
        return dataclasses.replace(c, z1=zero, z2=z2, x2=zero, y2=zero)
    z1 = np.sign(c.z1) * np.sqrt(c.z1**2 + c.x1**2 + c.y1**2)
    return dataclasses.replace(c, z1=z1, z2=zero, x1=zero, y1=zero)


def one_qubit_trajectories(params: sim.SystemParams, pulse, config: sim.SimConfig, qubit: int = 1):
    """Full and ideal trajectories of a single-qubit drive on the simulator grid."""
    c = sim.step_coefficients(params, pulse, config, include_start=True)
    return trajectory_from_coefficients(c), trajectory_from_coefficients(one_qubit_ideal(c, qubit))
