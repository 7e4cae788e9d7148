import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from spinshape import windows as W
from spinshape.qcore import ValidationError
from spinshape.windows import SampledWaveform, WindowSpec

ALL_SPECS = [
    WindowSpec.rect(),
    WindowSpec.hann(),
    WindowSpec.kaiser(0.5),
    WindowSpec.kaiser(3.0),
    WindowSpec.kaiser(8.0),
    WindowSpec.fourier(),
    WindowSpec.fourier((0.7, 0.1, 0.0, 0.0), (0.0, 0.2, 0.0, 0.0)),
    WindowSpec.tukey(0.0),
    WindowSpec.tukey(0.3),
    WindowSpec.tukey(1.0),
]


def test_window_examples():
    assert W.window_value(WindowSpec.hann(), 5.0, 10.0) == pytest.approx(2.0)
    assert W.window_value(WindowSpec.kaiser(1e-9), 3.0, 10.0) == pytest.approx(1.0)
    assert W.window_value(WindowSpec.tukey(0.5), 5.0, 10.0) == pytest.approx(4 / 3)


def test_window_rejects_out_of_range():
    with pytest.raises(ValidationError):
        W.window_value(WindowSpec.hann(), 10.5, 10.0)
    with pytest.raises(ValidationError):
        W.window_value(WindowSpec.hann(), -0.1, 10.0)


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: f"{s.kind}-{s.lam}")
def test_normalization(spec):
    tg = 7.3
    val, _ = integrate.quad(lambda t: W.window_value(spec, t, tg), 0, tg, epsabs=1e-13, limit=200,
                            points=[spec.lam * tg / 2, tg - spec.lam * tg / 2] if spec.kind == "tukey" else None)
    assert val / tg == pytest.approx(1.0, abs=1e-8)


def test_kaiser_matches_numpy_kaiser_shape():
    n = 101
    ref = np.kaiser(n, 4.2)
    w = W.sample_window(WindowSpec.kaiser(4.2), 1.0, n).samples
    assert np.allclose(w / w[n // 2], ref / ref[n // 2], rtol=1e-12)


def test_sample_window_examples():
    assert np.allclose(W.sample_window(WindowSpec.rect(), 10.0, 3).samples, [1, 1, 1])
    h = W.sample_window(WindowSpec.hann(), 20.0, 51).samples
    assert h[0] == pytest.approx(0.0) and h[-1] == pytest.approx(0.0)
    tk = W.sample_window(WindowSpec.tukey(1.0), 20.0, 51).samples
    assert np.allclose(tk, h, atol=1e-14)
    assert np.allclose(W.sample_window(WindowSpec.tukey(0.0), 20.0, 51).samples, 1.0)
    fh = W.sample_window(WindowSpec.fourier((1, 0, 0, 0)), 20.0, 51).samples
    assert np.allclose(fh, h, atol=1e-14)


@pytest.mark.parametrize("spec", [s for s in ALL_SPECS if not any(s.lam_odd)], ids=lambda s: s.kind)
def test_even_symmetry(spec):
    w = W.sample_window(spec, 9.0, 301).samples
    assert np.allclose(w, w[::-1], atol=1e-12)


def test_slepian_fourier_smooth_zero_ends():
    w = W.sample_window(WindowSpec.fourier(), 1.0, 1001).samples
    assert abs(w[0]) < 1e-12 and abs(w[-1]) < 1e-12
    assert np.max(np.abs(np.diff(w, 2))) < 1e-4


def test_dilation_constant():
    fd = SampledWaveform(0.0, 0.01, np.full(1001, 3.0))
    dm = W.dilation_map(fd, 10.0)
    s = np.linspace(0, 1, 17)
    assert np.allclose(dm.t_of_s(s), 10.0 * s, atol=1e-12)
    assert dm.total_phase == pytest.approx(30.0)


def test_dilation_scale_invariant():
    t = np.linspace(0, 5, 801)
    f1 = SampledWaveform(0.0, t[1], 1 + np.sin(t) ** 2)
    f2 = SampledWaveform(0.0, t[1], 2 * (1 + np.sin(t) ** 2))
    s = np.linspace(0, 1, 33)
    assert np.allclose(W.dilation_map(f1).t_of_s(s), W.dilation_map(f2).t_of_s(s), atol=1e-13)


def test_dilation_linear_rate_against_fine_quadrature():
    tg = 10.0
    n = 20001
    t = np.linspace(0, tg, n)
    dm = W.dilation_map(SampledWaveform(0.0, t[1], 1 + t / tg), tg)
    # independent oracle: 1e6-step midpoint quadrature of s(t) = int f_dot / int_total f_dot
    fine = np.linspace(0, tg, 1_000_001)
    mid = 0.5 * (fine[1:] + fine[:-1])
    cum = np.concatenate([[0], np.cumsum((1 + mid / tg) * np.diff(fine))])
    s_ref = cum / cum[-1]
    probe = np.linspace(0, tg, 41)
    assert np.allclose(dm.s_of_t(probe), np.interp(probe, fine, s_ref), atol=1e-8)
    u = probe / tg
    assert np.allclose(dm.s_of_t(probe), (u + u**2 / 2) / 1.5, atol=1e-8)


def test_dilation_round_trip():
    t = np.linspace(0, 3, 3001)
    dm = W.dilation_map(SampledWaveform(0.0, t[1], 2 + np.cos(3 * t)))
    s = np.linspace(0, 1, 257)
    assert np.max(np.abs(dm.s_of_t(dm.t_of_s(s)) - s)) < 1e-8


def test_dilation_singularity_names_index():
    fd = np.ones(50)
    fd[17] = 0.0
    with pytest.raises(ValidationError, match="17"):
        W.dilation_map(SampledWaveform(0.0, 0.1, fd))


def _unit_signal(n=4097):
    return SampledWaveform(0.0, 1.0 / (n - 1), np.ones(n))


def test_esd_examples():
    sig = _unit_signal()
    assert W.esd(sig, 0.0) == pytest.approx(1.0)
    for k in (1, 2, 5):
        assert W.esd(sig, 2 * np.pi * k) < 1e-10
    assert W.esd(sig, np.pi) == pytest.approx((2 / np.pi) ** 2, rel=1e-6)


def test_kaiser_below_hann_sidelobe_beyond_main_lobe():
    n = 8193
    s = np.linspace(0, 1, n)
    hann = SampledWaveform(0.0, s[1], W.window_value(WindowSpec.hann(), s, 1.0))
    kais = SampledWaveform(0.0, s[1], W.window_value(WindowSpec.kaiser(8.0), s, 1.0))
    xs = 2 * np.pi * np.linspace(2.5, 3.5, 41)
    first_sidelobe = max(W.esd(hann, x) for x in xs)
    beyond = 2 * np.pi * np.linspace(6.0, 20.0, 57)
    assert all(W.esd(kais, x) < first_sidelobe for x in beyond)


@settings(max_examples=30, deadline=None)
@given(st.one_of(st.just(0.0), st.floats(0.01, 1.0)), st.floats(0.1, 100.0))
def test_tukey_normalized_property(lam, tg):
    spec = WindowSpec.tukey(lam)
    w = W.sample_window(spec, tg, 20001)
    assert np.trapezoid(w.samples, w.t) / tg == pytest.approx(1.0, abs=5e-6)
