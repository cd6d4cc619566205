"""Tests for the transmit chain and the impaired receive front end:
16-QAM mapping, the Saleh amplifier, AWGN, and the biased mid-rise ADC."""
import numpy as np
import pytest

from elm_mimo.frontend import (QAM16, AdcConfig, SalehParams, attach_biases,
                               bias_quantize, calibrate_adc, draw_biases,
                               ideal_adc, pa_distort, quantize, quantize_iq,
                               signal_power, transmit)


# ---------------------------------------------------------------------------
# 16-QAM


def test_constellation_unit_power():
    assert np.mean(np.abs(QAM16.points) ** 2) == pytest.approx(1.0, abs=1e-15)


def test_gray_mapping_adjacent_levels():
    # within each dimension, neighbouring amplitude levels differ in one bit
    scale = np.sqrt(10.0)
    level_bits = {}
    for label in range(16):
        p = QAM16.points[label]
        level_bits[round(p.real * scale)] = (label >> 2) & 0b11
    for a, b in ((-3, -1), (-1, 1), (1, 3)):
        assert bin(level_bits[a] ^ level_bits[b]).count("1") == 1


def test_modulate_bits_roundtrip():
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, 400)
    x = QAM16.modulate_bits(bits)
    labels = QAM16.demap(x)
    again = QAM16.symbols(labels)
    assert np.allclose(again, x)


def test_modulate_bits_rejects_partial_symbol():
    with pytest.raises(ValueError):
        QAM16.modulate_bits([0, 1, 1])


def test_demap_exact_points():
    labels = np.arange(16)
    assert np.array_equal(QAM16.demap(QAM16.points), labels)


def test_demap_robust_within_half_min_distance():
    rng = np.random.default_rng(1)
    labels = rng.integers(0, 16, 500)
    x = QAM16.symbols(labels)
    r = 0.99 * QAM16.half_min_distance * rng.uniform(0, 1, 500)
    phi = rng.uniform(0, 2 * np.pi, 500)
    assert np.array_equal(QAM16.demap(x + r * np.exp(1j * phi)), labels)


def test_demap_tie_break_lowest_label():
    # 0 is equidistant from the four inner points; the smallest label wins
    d = np.abs(QAM16.points - 0.0)
    candidates = np.flatnonzero(d == d.min())
    assert QAM16.demap(np.array(0.0 + 0.0j)) == candidates.min()


# ---------------------------------------------------------------------------
# Saleh amplifier


def test_pa_zero_in_zero_out():
    assert pa_distort(np.array(0.0 + 0.0j), SalehParams()) == 0.0


def test_pa_values_at_unit_amplitude():
    out = pa_distort(np.array(1.0 + 0.0j), SalehParams())
    assert abs(out) == pytest.approx(1.96 / 1.99, abs=1e-12)
    assert np.angle(out) == pytest.approx(2.53 / 3.82, abs=1e-12)


def test_pa_amplitude_peak():
    # A(a) = alpha a / (1 + eps a^2) peaks at a = 1/sqrt(eps) with value
    # alpha / (2 sqrt(eps)); beyond the peak the gain compresses.
    p = SalehParams()
    a_star = 1.0 / np.sqrt(p.eps_a)
    peak = p.alpha_a / (2.0 * np.sqrt(p.eps_a))
    assert a_star == pytest.approx(1.00504, abs=1e-5)
    assert peak == pytest.approx(0.98494, abs=1e-5)
    grid = np.linspace(1e-4, 4.0, 100_000)
    amps = np.abs(pa_distort(grid.astype(complex), p))
    i = np.argmax(amps)
    assert grid[i] == pytest.approx(a_star, abs=1e-3)
    assert amps[i] == pytest.approx(peak, abs=1e-9)
    assert np.all(np.diff(amps[i:]) < 0)


def test_pa_phase_preserved_for_rotations():
    p = SalehParams()
    base = pa_distort(np.array(0.5 + 0.0j), p)
    rot = pa_distort(np.array(0.5j), p)
    assert abs(rot) == pytest.approx(abs(base), abs=1e-12)
    assert np.angle(rot) - np.angle(base) == pytest.approx(np.pi / 2,
                                                           abs=1e-12)


def test_saleh_params_validation():
    with pytest.raises(ValueError):
        SalehParams(eps_a=0.0)


def test_signal_power_post_pa_below_unity():
    assert signal_power(None) == pytest.approx(1.0)
    assert 0.0 < signal_power(SalehParams()) < 1.0


# ---------------------------------------------------------------------------
# transmit


def test_transmit_noise_free_unit_channel():
    H = np.ones((4, 1), dtype=complex)
    x = np.array([0.3 - 0.4j])
    p = SalehParams()
    y = transmit(H, x, 0.0, np.random.default_rng(0), p)
    assert np.allclose(y, pa_distort(x, p)[0])


def test_transmit_bypass_is_linear():
    rng = np.random.default_rng(2)
    H = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    assert np.allclose(transmit(H, x, 0.0, rng, None), H @ x)


def test_transmit_noise_variance():
    H = np.zeros((1, 1), dtype=complex)
    rng = np.random.default_rng(3)
    sigma2 = 0.7
    y = transmit(H, np.zeros((100_000, 1), dtype=complex), sigma2, rng, None)
    assert np.mean(np.abs(y) ** 2) == pytest.approx(sigma2, rel=0.02)


def test_transmit_batch_matches_loop():
    rng = np.random.default_rng(4)
    H = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
    X = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    batch = transmit(H, X, 0.0, rng, SalehParams())
    rows = [transmit(H, X[i], 0.0, rng, SalehParams()) for i in range(3)]
    assert np.allclose(batch, np.stack(rows))


# ---------------------------------------------------------------------------
# mid-rise quantizer


def test_quantizer_mid_rise_examples():
    adc = AdcConfig(bits=2, full_scale=1.0)  # step 0.5
    assert quantize(0.0, adc) == 0.25
    assert quantize(-0.1, adc) == -0.25
    assert quantize(5.0, adc) == 0.75       # saturates at the top level
    assert quantize(-5.0, adc) == -0.75
    assert np.allclose(adc.levels, [-0.75, -0.25, 0.25, 0.75])


@pytest.mark.parametrize("bits", range(1, 9))
def test_quantizer_law_suite(bits):
    adc = AdcConfig(bits=bits, full_scale=1.5)
    grid = np.linspace(-3.0, 3.0, 100_000)
    q = quantize(grid, adc)
    # codomain membership
    assert np.isin(q, adc.levels).all()
    # monotone non-decreasing
    assert np.all(np.diff(q) >= 0)
    # granular error bounded by step/2 inside the full-scale range
    inside = np.abs(grid) < adc.full_scale - 1e-9
    assert np.abs(q[inside] - grid[inside]).max() <= adc.step / 2 + 1e-12
    # clipping saturation at the extremes
    assert np.all(q[grid >= adc.full_scale] == adc.levels[-1])
    assert np.all(q[grid <= -adc.full_scale] == adc.levels[0])


def test_adc_config_validation():
    with pytest.raises(ValueError):
        AdcConfig(bits=0, full_scale=1.0)
    with pytest.raises(ValueError):
        AdcConfig(bits=4, full_scale=np.inf)
    with pytest.raises(ValueError):
        AdcConfig(bits=None, full_scale=1.0).step


def test_clip_only_mode():
    adc = AdcConfig(bits=None, full_scale=2.0)
    x = np.array([-5.0, -1.0, 0.3, 7.0])
    assert np.array_equal(quantize(x, adc), [-2.0, -1.0, 0.3, 2.0])


def test_quantize_iq_componentwise():
    adc = AdcConfig(bits=3, full_scale=1.0)
    y = np.array([0.1 - 0.6j, -0.2 + 0.9j])
    out = quantize_iq(y, adc)
    assert np.array_equal(out.real, quantize(y.real, adc))
    assert np.array_equal(out.imag, quantize(y.imag, adc))


# ---------------------------------------------------------------------------
# biased quantized stack


def test_bias_quantize_passthrough():
    rng = np.random.default_rng(5)
    y = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    out = bias_quantize(y, ideal_adc())
    assert np.array_equal(out, np.concatenate([y.real, y.imag], axis=-1))


def test_bias_quantize_codomain():
    rng = np.random.default_rng(6)
    adc = AdcConfig(bits=4, full_scale=2.0, bias_re=0.1, bias_im=-0.2)
    out = bias_quantize(rng.standard_normal((50, 8))
                        + 1j * rng.standard_normal((50, 8)), adc)
    assert out.shape == (50, 16)
    assert np.isin(out, adc.levels).all()


def test_bias_quantize_scalar_oracle():
    rng = np.random.default_rng(7)
    adc0 = AdcConfig(bits=5, full_scale=1.5)
    for _ in range(1000):
        y = complex(rng.standard_normal(), rng.standard_normal())
        b_re = rng.uniform(-0.3, 0.3)
        b_im = rng.uniform(-0.3, 0.3)
        adc = attach_biases(adc0, [b_re], [b_im])
        out = bias_quantize(np.array([y]), adc)
        assert out[0] == quantize(y.real + b_re, adc0)
        assert out[1] == quantize(y.imag + b_im, adc0)


def test_draw_biases_range_and_freeze():
    rng = np.random.default_rng(8)
    b_re, b_im = draw_biases(1000, 0.1, rng)
    assert np.abs(b_re).max() <= 0.1 and np.abs(b_im).max() <= 0.1
    adc = attach_biases(AdcConfig(bits=4, full_scale=1.0), b_re, b_im)
    y = rng.standard_normal(1000) + 1j * rng.standard_normal(1000)
    assert np.array_equal(bias_quantize(y, adc), bias_quantize(y, adc))


# ---------------------------------------------------------------------------
# calibration


def test_calibrate_formula():
    samples = np.concatenate([np.ones(50), -np.ones(50)])  # RMS exactly 1
    adc = calibrate_adc(samples, 6, headroom=3.0)
    assert adc.full_scale == pytest.approx(3.0)
    assert adc.step == pytest.approx(6.0 / 64.0)  # 0.09375


def test_calibrate_homogeneity():
    rng = np.random.default_rng(9)
    samples = rng.standard_normal(5000)
    a = calibrate_adc(samples, 4)
    b = calibrate_adc(2.0 * samples, 4)
    assert b.full_scale == pytest.approx(2.0 * a.full_scale)
    assert b.step == pytest.approx(2.0 * a.step)


def test_calibrate_clip_fraction_gaussian():
    rng = np.random.default_rng(10)
    samples = rng.standard_normal(200_000)
    adc = calibrate_adc(samples, 6, headroom=3.0)
    clipped = np.abs(samples) >= adc.full_scale
    assert clipped.mean() < 0.005  # 2 Phi(-3) ~ 0.27%


def test_calibrate_errors():
    with pytest.raises(ValueError):
        calibrate_adc(np.ones(10), 6)        # too few samples
    with pytest.raises(ValueError):
        calibrate_adc(np.zeros(500), 6)      # degenerate preamble
