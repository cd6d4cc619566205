"""Spatially correlated, temporally varying massive-MIMO channel.

Sum-of-rays model for a uniform linear array with half-wavelength
spacing: per user a mean angle of arrival is drawn uniformly, per ray
the AOA is perturbed by a truncated Laplacian offset (power angular
spectrum), ray gains have modulus 1/sqrt(R) with uniform phases, and
mobility enters as a deterministic per-ray Doppler phase rotation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

__all__ = [
    "ChannelConfig",
    "ChannelProcess",
    "steering_vector",
    "draw_process",
    "realize",
    "realize_block",
]


@dataclass(frozen=True)
class ChannelConfig:
    n_antennas: int = 64
    n_users: int = 10
    carrier_hz: float = 2e9
    symbol_duration_s: float = 1e-6
    angular_spread_deg: float = 10.0
    n_rays: int = 5
    velocity_mps: float = 0.0
    mean_aoa_range_rad: tuple = (-np.pi / 2, np.pi / 2)

    def __post_init__(self):
        if self.n_antennas < self.n_users or self.n_users < 1:
            raise ValueError("need n_antennas >= n_users >= 1")
        if self.symbol_duration_s <= 0:
            raise ValueError("symbol_duration_s must be positive")
        if self.n_rays < 1:
            raise ValueError("n_rays must be >= 1")
        if self.angular_spread_deg <= 0:
            raise ValueError("angular_spread_deg must be positive")
        if self.velocity_mps < 0:
            raise ValueError("velocity_mps must be nonnegative")

    @property
    def doppler_hz(self) -> float:
        return self.velocity_mps * self.carrier_hz / SPEED_OF_LIGHT


def steering_vector(theta: float, n_antennas: int) -> np.ndarray:
    """ULA response at half-wavelength spacing: exp(-j pi n sin(theta))."""
    n = np.arange(n_antennas)
    return np.exp(-1j * np.pi * n * np.sin(theta))


@dataclass(frozen=True)
class ChannelProcess:
    """Frozen ray geometry and Doppler state for all users.

    `gains` carry the initial ray phases (modulus 1/sqrt(R)); `steering`
    caches the per-ray array responses, shape (N, K, R).
    """

    config: ChannelConfig
    mean_aoa: np.ndarray       # (K,)
    aoas: np.ndarray           # (K, R)
    gains: np.ndarray          # (K, R) complex
    dopplers: np.ndarray       # (K, R) Hz
    steering: np.ndarray = field(repr=False, default=None)  # (N, K, R)


def _truncated_laplacian(rng: np.random.Generator, scale: float,
                         bound: float, size) -> np.ndarray:
    out = rng.laplace(0.0, scale, size)
    bad = np.abs(out) > bound
    while bad.any():
        out[bad] = rng.laplace(0.0, scale, int(bad.sum()))
        bad = np.abs(out) > bound
    return out


def draw_process(cfg: ChannelConfig, rng_seed) -> ChannelProcess:
    """Draw a channel process; bitwise deterministic for a given seed."""
    rng = np.random.default_rng(rng_seed)
    K, R, N = cfg.n_users, cfg.n_rays, cfg.n_antennas
    lo, hi = cfg.mean_aoa_range_rad
    mean_aoa = rng.uniform(lo, hi, K)
    spread_rad = np.deg2rad(cfg.angular_spread_deg)
    delta = _truncated_laplacian(rng, spread_rad / np.sqrt(2.0),
                                 np.pi / 2, (K, R))
    aoas = mean_aoa[:, None] + delta
    gains = np.exp(1j * rng.uniform(0.0, 2 * np.pi, (K, R))) / np.sqrt(R)
    psi = rng.uniform(0.0, 2 * np.pi, (K, R))
    dopplers = cfg.doppler_hz * np.cos(psi)
    n = np.arange(N)[:, None, None]
    steering = np.exp(-1j * np.pi * n * np.sin(aoas)[None, :, :])
    return ChannelProcess(config=cfg, mean_aoa=mean_aoa, aoas=aoas,
                          gains=gains, dopplers=dopplers, steering=steering)


def realize(proc: ChannelProcess, m: int) -> np.ndarray:
    """Channel matrix H(m) at symbol index m, shape (N, K)."""
    t = m * proc.config.symbol_duration_s
    rot = proc.gains * np.exp(2j * np.pi * proc.dopplers * t)
    return np.einsum("nkr,kr->nk", proc.steering, rot)


def realize_block(proc: ChannelProcess, m0: int, count: int) -> np.ndarray:
    """H(m) for m in [m0, m0 + count), shape (count, N, K)."""
    ts = proc.config.symbol_duration_s
    t = (m0 + np.arange(count)) * ts
    rot = proc.gains[None] * np.exp(
        2j * np.pi * proc.dopplers[None] * t[:, None, None])
    return np.einsum("nkr,mkr->mnk", proc.steering, rot)
