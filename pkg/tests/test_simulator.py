import numpy as np
import pytest
from scipy.linalg import expm

from spinshape import exchange as ex
from spinshape.noise import NoiseSpec
from spinshape.qcore import GateTarget, ValidationError, avg_gate_fidelity, spin_op
from spinshape.sigchain import FilterSpec
from spinshape.simulator import (ConstantDrive, ConstantExchange, IdlePulse, PulseSequence, SimConfig,
                                 SystemParams, build_hamiltonian, odd_block_rotation, propagate,
                                 run_ensemble, run_noiseless, rwa_gap)

NO_SHIFT = ex.ZeemanShiftModel(0.0, 0.0)


def params(dEz=0.1, J_res=0.0, coupling=(1.0, 1.0), **kw):
    return SystemParams(Ez=10.0, shift=ex.ZeemanShiftModel(dEz, 0.0), J_res=J_res, coupling=coupling, **kw)


def test_hamiltonian_convention():
    h = build_hamiltonian(params(0.1), {"J": 0.0})
    assert np.allclose(np.diag(h).real, [0, 0.05, -0.05, 0])
    h = build_hamiltonian(params(0.1), {"J": 0.02})
    odd = h[1:3, 1:3]
    ev = np.linalg.eigvalsh(odd)
    nu = np.hypot(0.1, 0.02)
    assert np.allclose(ev, [-0.01 - nu / 2, -0.01 + nu / 2])
    assert h[0, 0] == 0 and h[3, 3] == 0


def test_hamiltonian_validation():
    with pytest.raises(ValidationError):
        build_hamiltonian(params(), {"bogus": 1.0})
    with pytest.raises(ValidationError):
        build_hamiltonian(params(), {"bx": 0.01}, frame="lab")
    with pytest.raises(ValidationError):
        SimConfig(frame="interaction")


def test_rabi_flip_time():
    p = params(0.0, coupling=(1.0, 0.0))
    r = run_noiseless(GateTarget.rx(np.pi, 1), ConstantDrive(50.0, 0.01, nu_d=10.0), p, SimConfig())
    assert r.infidelity < 1e-3
    r_short = run_noiseless(GateTarget.rx(np.pi, 1), ConstantDrive(49.95, 0.01, nu_d=10.0), p, SimConfig())
    assert r_short.infidelity > r.infidelity


def test_exchange_swap():
    r = run_noiseless(GateTarget.swap_class(), ConstantExchange(10.0, 0.05), params(0.0), SimConfig())
    assert r.infidelity < 1e-12


def test_constant_hamiltonian_matches_expm():
    p = params(0.1)
    h = build_hamiltonian(p, {"J": 0.013})
    u = propagate(p, ConstantExchange(7.3, 0.013), SimConfig(dt=0.1))
    assert np.allclose(u, expm(-2j * np.pi * h * 7.3), atol=1e-12)


def test_driven_general_path_matches_expm():
    p = params(0.1, J_res=0.004)
    nu_d = 10.05
    h = build_hamiltonian(p, {"bx": 0.02, "by": -0.01, "nu_d": nu_d})
    u = propagate(p, ConstantDrive(12.0, 0.02, -0.01, nu_d=nu_d), SimConfig(dt=0.05))
    assert np.allclose(u, expm(-2j * np.pi * h * 12.0), atol=1e-11)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_synchronized_half_pi(m):
    tg = np.sqrt(16 * m * m - 1) / (4 * 0.1)
    r = run_noiseless(GateTarget.rx(np.pi / 2, 1), ConstantDrive(tg, 1 / (4 * tg), nu_d=10.05), params(),
                      SimConfig(dt=tg / 2000))
    assert r.infidelity < 1e-10


def test_frames_agree():
    pulse = ConstantDrive(25.0, 0.01, nu_d=10.05)
    tgt = GateTarget.rx(np.pi / 2, 1)
    f = {fr: run_noiseless(tgt, pulse, params(), SimConfig(frame=fr)).fidelity for fr in ("rwa", "rotating", "lab")}
    assert abs(f["rwa"] - f["lab"]) < 1e-5
    assert abs(f["rotating"] - f["lab"]) < 1e-5
    assert rwa_gap(tgt, pulse, params(), SimConfig()) < 1e-5


def test_idle_with_residual_exchange_phase():
    p = params(0.1, J_res=6e-5)
    u = propagate(p, IdlePulse(100.0), SimConfig())
    cond = u[0, 0] * u[3, 3] / (u[1, 1] * u[2, 2])
    nu = np.hypot(0.1, 6e-5)
    # conditional phase is -2 pi J T up to the small odd-block mixing
    assert np.angle(cond) == pytest.approx(-2 * np.pi * 6e-5 * 100.0, rel=1e-3)
    assert nu > 0.1


def test_sequence_and_filter_tail():
    seq = PulseSequence((ConstantExchange(5.0, 0.05), ConstantExchange(5.0, 0.05)))
    r = run_noiseless(GateTarget.swap_class(), seq, params(0.0), SimConfig())
    assert r.infidelity < 1e-12
    cfg = SimConfig(filter=FilterSpec())
    assert cfg.tail == pytest.approx(3 / (2 * np.pi * 0.15))


def test_odd_block_rotation():
    w = odd_block_rotation(0.3)
    assert np.allclose(w.conj().T @ w, np.eye(4))
    assert w[0, 0] == 1 and w[3, 3] == 1


def test_quasi_static_dephasing_oracle():
    sigma, T = 2e-3, 50.0
    cfg = SimConfig(noise=NoiseSpec(quasi_static_sigma=(sigma, 0.0), seed=3), realizations=4000)
    r = run_ensemble(GateTarget.identity(), IdlePulse(T), params(0.0), cfg)
    sx = np.pi * sigma * T
    expected = (16 * (1 + np.exp(-2 * sx**2)) / 2 + 4) / 20
    assert r.fidelity == pytest.approx(expected, abs=4 * r.stderr + 1e-6)
    assert r.stderr > 0


def test_ensemble_deterministic_and_parallel():
    p = params(0.1, exchange=ex.ExchangeModel.exponential(J0=1e-4, alpha=0.05))
    cfg = SimConfig(noise=NoiseSpec(charge_amp=0.05, seed=9), realizations=6, keep_unitaries=True)
    pulse = ConstantExchange(20.0, 0.0125)
    a = run_ensemble(GateTarget.cz(), pulse, p, cfg)
    b = run_ensemble(GateTarget.cz(), pulse, p, cfg, jobs=2)
    assert a.fidelity == b.fidelity
    assert all(np.array_equal(x, y) for x, y in zip(a.unitaries, b.unitaries))
    assert a.metadata["config_hash"] == b.metadata["config_hash"]


def test_charge_noise_reduces_fidelity():
    p = params(0.1, exchange=ex.ExchangeModel.exponential(J0=1e-4, alpha=0.05))
    quiet = run_ensemble(GateTarget.identity(), IdlePulse(20.0), p, SimConfig(noise=NoiseSpec(charge_amp=0.0)))
    noisy = run_ensemble(GateTarget.identity(), IdlePulse(20.0), p,
                         SimConfig(noise=NoiseSpec(charge_amp=2.0, seed=1), realizations=50))
    assert quiet.metadata["realizations"] == 0
    assert noisy.metadata["realizations"] == 50
    assert noisy.infidelity > quiet.infidelity + 1e-6


def test_rabi_fidelity_matches_unitary_formula():
    p = params(0.0, coupling=(1.0, 0.0))
    u = propagate(p, ConstantDrive(25.0, 0.01, nu_d=10.0), SimConfig())
    x = spin_op("x", 1)
    assert np.allclose(u, expm(-1j * np.pi / 2 * x), atol=1e-10)
    assert avg_gate_fidelity(u.conj().T @ u) == pytest.approx(1.0)
