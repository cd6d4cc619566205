"""Transmit chain and impaired receive front end.

Gray-mapped 16-QAM, the Saleh power-amplifier nonlinearity, AWGN, and a
uniform mid-rise ADC with per-antenna bias injection.  The biased,
quantized real/imaginary stack of the received vector is the hidden
layer of the natural ELM receiver.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "Qam16",
    "QAM16",
    "SalehParams",
    "pa_distort",
    "signal_power",
    "transmit",
    "AdcConfig",
    "ideal_adc",
    "quantize",
    "quantize_iq",
    "bias_quantize",
    "calibrate_adc",
    "draw_biases",
    "attach_biases",
]


# Per-dimension Gray code for 2 bits: adjacent amplitude levels differ
# in exactly one bit.
_GRAY_LEVELS = {0b00: -3.0, 0b01: -1.0, 0b11: 1.0, 0b10: 3.0}


class Qam16:
    """Unit-average-power 16-QAM with a fixed Gray bit mapping.

    Symbol label = 4-bit integer; the two MSBs Gray-map the in-phase
    level, the two LSBs the quadrature level, both over {-3,-1,1,3} and
    scaled by 1/sqrt(10).  Demapping ties break toward the smallest
    label.
    """

    order = 16
    bits_per_symbol = 4
    # half of the minimum distance 2/sqrt(10)
    half_min_distance = 1.0 / np.sqrt(10.0)

    def __init__(self):
        pts = np.empty(16, dtype=complex)
        for label in range(16):
            i = _GRAY_LEVELS[(label >> 2) & 0b11]
            q = _GRAY_LEVELS[label & 0b11]
            pts[label] = (i + 1j * q) / np.sqrt(10.0)
        self.points = pts
        self.points.setflags(write=False)

    def modulate_bits(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=int).ravel()
        if bits.size % 4 != 0:
            raise ValueError("bit count must be a multiple of 4")
        groups = bits.reshape(-1, 4)
        labels = groups[:, 0] * 8 + groups[:, 1] * 4 + groups[:, 2] * 2 + groups[:, 3]
        return self.points[labels]

    def symbols(self, labels) -> np.ndarray:
        return self.points[np.asarray(labels, dtype=int)]

    def demap(self, x) -> np.ndarray:
        """Nearest-point labels for x of any shape (first index wins ties)."""
        x = np.asarray(x)
        d = np.abs(x[..., None] - self.points) ** 2
        return np.argmin(d, axis=-1)

    def random_labels(self, rng: np.random.Generator, shape) -> np.ndarray:
        return rng.integers(0, self.order, shape)


QAM16 = Qam16()


@dataclass(frozen=True)
class SalehParams:
    """AM-AM / AM-PM coefficients of the Saleh amplifier model."""

    alpha_a: float = 1.96
    eps_a: float = 0.99
    alpha_phi: float = 2.53
    eps_phi: float = 2.82

    def __post_init__(self):
        if self.eps_a <= 0 or self.eps_phi <= 0:
            raise ValueError("eps_a and eps_phi must be positive")


def pa_distort(x, p: SalehParams):
    """Apply the Saleh nonlinearity elementwise; pa_distort(0) = 0."""
    x = np.asarray(x)
    a = np.abs(x)
    a2 = a * a
    amp = p.alpha_a * a / (1.0 + p.eps_a * a2)
    phase = p.alpha_phi * a2 / (1.0 + p.eps_phi * a2)
    return amp * np.exp(1j * (np.angle(x) + phase))


def signal_power(saleh: SalehParams | None, qam: Qam16 = QAM16) -> float:
    """Per-user transmitted power: mean |f(c)|^2 over the constellation."""
    pts = qam.points
    s = pa_distort(pts, saleh) if saleh is not None else pts
    return float(np.mean(np.abs(s) ** 2))


def transmit(H: np.ndarray, x: np.ndarray, sigma2: float,
             rng: np.random.Generator,
             saleh: SalehParams | None = None) -> np.ndarray:
    """y = H f(x) + n with circular complex Gaussian noise of variance sigma2.

    x may be a length-K vector or an (M, K) batch of symbol vectors; the
    result is (N,) or (M, N) accordingly.
    """
    x = np.asarray(x)
    s = pa_distort(x, saleh) if saleh is not None else x
    y = s @ H.T if x.ndim == 2 else H @ s
    if sigma2 > 0:
        scale = np.sqrt(sigma2 / 2.0)
        n = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
        y = y + scale * n
    return y


def transmit_tv(H_block: np.ndarray, x: np.ndarray, sigma2: float,
                rng: np.random.Generator,
                saleh: SalehParams | None = None) -> np.ndarray:
    """Per-symbol time-varying version: H_block is (M, N, K), x is (M, K)."""
    s = pa_distort(x, saleh) if saleh is not None else np.asarray(x)
    y = np.einsum("mnk,mk->mn", H_block, s)
    if sigma2 > 0:
        scale = np.sqrt(sigma2 / 2.0)
        n = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
        y = y + scale * n
    return y


@dataclass(frozen=True)
class AdcConfig:
    """Mid-rise ADC with clipping, plus frozen per-antenna bias vectors.

    bits = None disables quantization: with finite full_scale the input
    is still clipped (an infinite-resolution, range-limited converter);
    with full_scale = inf the converter is a pure passthrough.  Biases
    default to scalar 0 and broadcast against any antenna count.
    """

    bits: int | None
    full_scale: float
    bias_re: np.ndarray | float = 0.0
    bias_im: np.ndarray | float = 0.0

    def __post_init__(self):
        if self.bits is not None:
            if self.bits < 1:
                raise ValueError("bits must be >= 1")
            if not np.isfinite(self.full_scale) or self.full_scale <= 0:
                raise ValueError("full_scale must be positive and finite")

    @property
    def step(self) -> float:
        if self.bits is None:
            raise ValueError("step undefined without a bit width")
        return 2.0 * self.full_scale / (2 ** self.bits)

    @property
    def levels(self) -> np.ndarray:
        d = self.step
        half = 2 ** (self.bits - 1)
        return d * (np.arange(-half, half) + 0.5)


def ideal_adc(bias_re=0.0, bias_im=0.0) -> AdcConfig:
    """Infinite-resolution, unclipped converter (bias still applied)."""
    return AdcConfig(bits=None, full_scale=np.inf,
                     bias_re=bias_re, bias_im=bias_im)


def quantize(c, adc: AdcConfig):
    """Elementwise mid-rise quantization Q(c) = step (floor(c/step) + 0.5).

    Inputs beyond the full scale saturate to the extreme levels.  With
    bits = None the input is only clipped to [-F, F] (or passed through
    when F is infinite).
    """
    c = np.asarray(c, dtype=float)
    F = adc.full_scale
    if adc.bits is None:
        return np.clip(c, -F, F) if np.isfinite(F) else c
    d = adc.step
    half = 2 ** (adc.bits - 1)
    idx = np.clip(np.floor(c / d), -half, half - 1)
    return d * (idx + 0.5)


def quantize_iq(y, adc: AdcConfig):
    """Quantize real and imaginary parts separately; no biasing."""
    y = np.asarray(y)
    return quantize(y.real, adc) + 1j * quantize(y.imag, adc)


def bias_quantize(y, adc: AdcConfig):
    """Biased quantized real stack of y: Q([Re y; Im y] + [b_re; b_im]).

    y has shape (..., N); the result has shape (..., 2N) and is the
    hidden-layer output of the natural ELM receiver.
    """
    y = np.asarray(y)
    stacked = np.concatenate(
        [y.real + adc.bias_re, y.imag + adc.bias_im], axis=-1)
    return quantize(stacked, adc)


def calibrate_adc(samples, bits: int, headroom: float = 3.0) -> AdcConfig:
    """Set the full scale to headroom times the RMS of a real preamble."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 100:
        raise ValueError("need at least 100 calibration samples")
    rms = float(np.sqrt(np.mean(samples ** 2)))
    if rms == 0.0:
        raise ValueError("calibration samples are all zero")
    return AdcConfig(bits=bits, full_scale=headroom * rms)


def draw_biases(n: int, scale: float, rng: np.random.Generator):
    """Per-antenna bias pair, each uniform on [-scale, scale]."""
    return rng.uniform(-scale, scale, n), rng.uniform(-scale, scale, n)


def attach_biases(adc: AdcConfig, bias_re, bias_im) -> AdcConfig:
    return replace(adc, bias_re=np.asarray(bias_re, dtype=float),
                   bias_im=np.asarray(bias_im, dtype=float))
