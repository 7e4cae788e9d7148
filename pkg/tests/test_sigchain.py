import numpy as np
import pytest
from scipy import signal as sps

from spinshape import sigchain as S
from spinshape.qcore import ValidationError
from spinshape.sigchain import FilterSpec
from spinshape.windows import SampledWaveform, WindowSpec, sample_window

DT = 0.01


@pytest.mark.parametrize("order", [1, 2, 3, 5])
@pytest.mark.parametrize("cutoff", [0.05, 0.15, 2.0])
def test_matches_scipy_butter(order, cutoff):
    sos = S.butterworth_sos(FilterSpec(order, cutoff), DT)
    ref = sps.butter(order, cutoff, fs=1 / DT, output="sos")
    w, h = sps.sosfreqz(sos, worN=512, fs=1 / DT)
    _, h_ref = sps.sosfreqz(ref, worN=512, fs=1 / DT)
    assert np.allclose(h, h_ref, atol=1e-10)


def test_unity_dc_gain_and_constant_passthrough():
    spec = FilterSpec()
    x = np.full(20000, 3.7)
    y = S.lowpass(x, DT, spec)
    assert np.allclose(y, 3.7, rtol=1e-12)


def _steady_amplitude(f, spec, dt=DT):
    t = np.arange(0, 400, dt)
    x = np.sin(2 * np.pi * f * t)
    y = S.lowpass(x, dt, spec)
    tail = t > 200
    return np.sqrt(2 * np.mean(y[tail] ** 2))


@pytest.mark.parametrize("order", [1, 3, 4])
def test_half_power_at_cutoff(order):
    spec = FilterSpec(order, 0.15)
    assert _steady_amplitude(0.15, spec) == pytest.approx(1 / np.sqrt(2), rel=0.01)


def test_order3_rolloff_decade():
    spec = FilterSpec(3, 0.15)
    ratio = _steady_amplitude(1.5, spec, dt=0.002)
    assert 1e-3 / 1.5 < ratio < 1e-3 * 1.5


def test_linearity():
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=(2, 3000))
    spec = FilterSpec()
    lhs = S.lowpass(2.5 * x - 0.7 * y, DT, spec)
    rhs = 2.5 * S.lowpass(x, DT, spec) - 0.7 * S.lowpass(y, DT, spec)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_causal():
    x = np.zeros(2000)
    x[1000:] = 1.0
    y = S.lowpass(x, DT, FilterSpec())
    assert np.all(y[:1000] == 0)


def test_nyquist_violation():
    with pytest.raises(ValidationError):
        S.butterworth_lowpass(SampledWaveform(0, 1.0, np.ones(10)), FilterSpec(3, 0.6))


def test_disabled_filter_is_identity():
    x = np.linspace(0, 1, 50)
    assert np.array_equal(S.lowpass(x, DT, FilterSpec(enabled=False)), x)


def test_extend_holds_edges():
    sig = SampledWaveform(0.0, 0.5, np.array([1.0, 2.0, 3.0]))
    e = S.extend(sig, 1.0, 1.5)
    assert np.allclose(e.samples, [1, 1, 1, 2, 3, 3, 3, 3])
    assert e.t0 == pytest.approx(-1.0)


def test_resample_identity_and_affine():
    sig = SampledWaveform(0.0, 0.1, 2.0 + 3.0 * np.arange(101) * 0.1)
    same = S.resample(sig, 0.1)
    assert np.allclose(same.samples, sig.samples)
    fine = S.resample(sig, 0.013)
    assert np.allclose(fine.samples, 2.0 + 3.0 * fine.t)
    assert fine.t[-1] == pytest.approx(sig.t[-1])


def test_resample_hann_error_bound():
    tg = 20.0
    coarse = sample_window(WindowSpec.hann(), tg, 201)
    fine = S.resample(coarse, coarse.dt / 10)
    exact = 1 - np.cos(2 * np.pi * fine.t / tg)
    assert np.max(np.abs(fine.samples - exact)) < (np.pi * coarse.dt / tg) ** 2
