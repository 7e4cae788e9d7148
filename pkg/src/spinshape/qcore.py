"""Linear-algebra primitives, spin operators, gate targets and fidelities.

Matrices are plain complex ``numpy`` arrays. The two-spin basis is ordered
``{|uu>, |ud>, |du>, |dd>}`` (qubit 1 is the left tensor factor) with
``|d>`` the ground state, so ``sigma_z |u> = +|u>``.

Hamiltonians are stored in frequency units (GHz) and times in ns; a
propagator over ``dt`` is ``exp(-2j*pi*H*dt)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import optimize

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)
PAULI = {"x": SX, "y": SY, "z": SZ}


def spin_op(axis: str, qubit: int) -> np.ndarray:
    """Two-qubit embedding of ``S^axis_qubit = sigma_axis / 2``."""
    s = PAULI[axis] / 2
    if qubit == 1:
        return np.kron(s, ID2)
    if qubit == 2:
        return np.kron(ID2, s)
    raise ValueError(f"qubit must be 1 or 2, got {qubit}")


def spin_product(a: str, b: str) -> np.ndarray:
    """``S^a_1 S^b_2``."""
    return spin_op(a, 1) @ spin_op(b, 2)


# Odd-parity subspace operators {|ud>, |du>} embedded in 4x4.
ODD_X = np.zeros((4, 4), complex)
ODD_X[1, 2] = ODD_X[2, 1] = 1
ODD_Y = np.zeros((4, 4), complex)
ODD_Y[1, 2], ODD_Y[2, 1] = -1j, 1j
ODD_Z = np.diag([0, 1, -1, 0]).astype(complex)


class ValidationError(ValueError):
    """Input violates a documented precondition."""


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) < tol)


def is_unitary(m: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    eye = np.eye(m.shape[-1])
    return bool(np.max(np.abs(dagger(m) @ m - eye), initial=0.0) < tol)


def matexp_skew(h: np.ndarray, phase: float) -> np.ndarray:
    """Return ``exp(-1j * phase * h)`` for Hermitian ``h``.

    Uses the eigendecomposition, so the result is unitary to rounding.

    Raises
    ------
    ValidationError
        If ``h`` is not Hermitian within ``HERMITIAN_TOL`` (relative to its norm).
    """
    h = np.asarray(h, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)))
    if not is_hermitian(h / scale):
        raise ValidationError("matexp_skew requires a Hermitian matrix")
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * phase * w)) @ dagger(v)


def expm_hermitian_batch(h: np.ndarray, phase: float | np.ndarray) -> np.ndarray:
    """Batched ``exp(-1j * phase * h[k])`` for a stack of Hermitian matrices."""
    w, v = np.linalg.eigh(h)
    phase = np.asarray(phase, dtype=float)
    if phase.ndim:
        phase = phase[:, None]
    return (v * np.exp(-1j * phase * w)[..., None, :]) @ dagger(v)


def ordered_product(stack: np.ndarray) -> np.ndarray:
    """Time-ordered product ``stack[-1] @ ... @ stack[0]`` by pairwise reduction."""
    m = np.asarray(stack)
    if m.shape[0] == 0:
        raise ValidationError("empty propagator stack")
    eye = np.eye(m.shape[-1], dtype=m.dtype)[None]
    while m.shape[0] > 1:
        if m.shape[0] % 2:
            m = np.concatenate([m, eye], axis=0)
        m = m[1::2] @ m[0::2]
    return m[0]


def avg_gate_fidelity(e: np.ndarray) -> float:
    """Average gate fidelity ``(|tr E|^2 + d) / (d (d + 1))`` of a unitary error."""
    d = e.shape[0]
    # |tr E| can exceed d by rounding for a nearly perfect gate
    return float(min(1.0, (abs(np.trace(e)) ** 2 + d) / (d * (d + 1))))


def ensemble_fidelity(errors: Sequence[np.ndarray]) -> float:
    """Fidelity of the averaged process ``mean_j U_j^* (x) U_j``.

    ``tr(chi)`` of that superoperator is ``mean_j |tr E_j|^2``, which replaces
    ``|tr E|^2`` in the single-unitary formula.
    """
    if len(errors) == 0:
        raise ValidationError("ensemble_fidelity needs at least one realization")
    d = errors[0].shape[0]
    tr2 = np.mean([abs(np.trace(e)) ** 2 for e in errors])
    return float(min(1.0, (tr2 + d) / (d * (d + 1))))


@dataclass(frozen=True)
class GateTarget:
    """Target operation of a gate.

    ``kind`` is one of ``identity``, ``rx``, ``cz``, ``swap``, ``custom``.
    A ``swap`` target with ``phase=None`` leaves the conditional phase free
    (perfect phase compensation).
    """

    kind: str
    angle: float = 0.0
    qubit: int = 1
    phase: float | None = np.pi
    unitary: np.ndarray | None = field(default=None, compare=False)
    allow_virtual_z: bool = True

    @classmethod
    def identity(cls, allow_virtual_z: bool = True) -> "GateTarget":
        return cls("identity", allow_virtual_z=allow_virtual_z)

    @classmethod
    def rx(cls, angle: float, qubit: int = 1, allow_virtual_z: bool = True) -> "GateTarget":
        return cls("rx", angle=angle, qubit=qubit, allow_virtual_z=allow_virtual_z)

    @classmethod
    def cz(cls, phase: float = np.pi, allow_virtual_z: bool = True) -> "GateTarget":
        return cls("cz", phase=phase, allow_virtual_z=allow_virtual_z)

    @classmethod
    def swap_class(cls, phase: float | None = None, allow_virtual_z: bool = True) -> "GateTarget":
        return cls("swap", phase=phase, allow_virtual_z=allow_virtual_z)

    @classmethod
    def custom(cls, unitary: np.ndarray, allow_virtual_z: bool = True) -> "GateTarget":
        return cls("custom", unitary=np.asarray(unitary, complex), allow_virtual_z=allow_virtual_z)

    @property
    def free_conditional_phase(self) -> bool:
        return self.kind == "swap" and self.phase is None

    def matrix(self) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(4, dtype=complex)
        if self.kind == "rx":
            return matexp_skew(spin_op("x", self.qubit), self.angle)
        if self.kind == "cz":
            return np.diag([1, 1, 1, np.exp(1j * self.phase)]).astype(complex)
        if self.kind == "swap":
            ph = np.exp(1j * (self.phase if self.phase is not None else 0.0))
            u = np.zeros((4, 4), complex)
            u[0, 0] = u[3, 3] = 1
            u[1, 2] = u[2, 1] = ph
            return u
        if self.kind == "custom":
            return self.unitary
        raise ValidationError(f"unknown gate kind {self.kind!r}")


# Sign pattern of -(phi1*S1z + phi2*S2z) on the diagonal, per basis state.
_ZSIGNS = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], float) / 2


def virtual_z(phi1: float, phi2: float) -> np.ndarray:
    """``exp(-i (phi1 S^z_1 + phi2 S^z_2))``."""
    return np.diag(np.exp(-1j * (_ZSIGNS @ np.array([phi1, phi2])))).astype(complex)


class VirtualZResult(NamedTuple):
    fidelity: float
    phases: tuple
    converged: bool
    correction: np.ndarray


def fidelity_up_to_virtual_z(u: np.ndarray, target: GateTarget, grid: int = 129) -> VirtualZResult:
    """Best fidelity of ``T^dag V^dag U`` over post-gate software z rotations ``V``.

    The corrected gate is ``V^dag U`` with ``V`` applied after the gate, as a
    frame update of later pulses would. Since ``tr(T^dag V^dag U) =
    tr(V^dag U T^dag)``, only the diagonal of ``M = U T^dag`` enters. A dense grid
    over both phases is followed by BFGS refinement. With a free conditional
    phase (``swap`` target, ``phase=None``) every diagonal phase is free and
    the optimum is ``sum_k |M_kk|`` in closed form.
    """
    m = u @ dagger(target.matrix())
    d = m.shape[0]
    if not target.allow_virtual_z:
        return VirtualZResult(avg_gate_fidelity(m), (0.0, 0.0), True, np.eye(d, dtype=complex))
    if d != 4:
        raise ValidationError("virtual-z optimization is defined for two qubits")
    diag = np.diag(m)

    if target.free_conditional_phase:
        phases = np.angle(diag)
        corr = np.diag(np.exp(1j * phases))
        fid = avg_gate_fidelity(dagger(corr) @ m)
        return VirtualZResult(fid, tuple(phases), True, corr)

    axis = np.arange(grid) * (2 * np.pi / grid)
    p1, p2 = np.meshgrid(axis, axis, indexing="ij")
    ph = np.exp(1j * (_ZSIGNS[:, 0, None, None] * p1 + _ZSIGNS[:, 1, None, None] * p2))
    vals = np.abs(np.tensordot(diag, ph, axes=(0, 0))) ** 2
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    start = np.array([axis[i], axis[j]])
    best_grid = vals[i, j]

    def neg(phi):
        z = np.exp(1j * (_ZSIGNS @ phi)) * diag
        s = np.sum(z)
        grad = -2 * np.real(np.conj(s) * (1j * _ZSIGNS.T @ z))
        return -abs(s) ** 2, grad

    res = optimize.minimize(neg, start, jac=True, method="BFGS", options={"gtol": 1e-12})
    converged = bool(res.success) or np.linalg.norm(res.jac) < 1e-8
    if -res.fun >= best_grid:
        phi = np.mod(res.x, 2 * np.pi)
    else:
        phi, converged = start, False
    phi[np.isclose(phi, 2 * np.pi, atol=1e-12)] = 0.0
    corr = virtual_z(*phi)
    return VirtualZResult(avg_gate_fidelity(dagger(corr) @ m), (float(phi[0]), float(phi[1])), converged, corr)
