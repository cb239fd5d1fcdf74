"""MISO-OFDM signal model: steering vectors, pilots, the spoofing precoder and
noiseless responses.

All per-(g, n) quantities are also available vectorized over the full pilot
block; the scalar functions are thin views on those.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Paths, Scenario, SpoofShift, forward_geometry


@dataclass(frozen=True)
class SystemConfig:
    """Radio constants. Bandwidth in MHz, carrier in GHz, light speed in m/us."""

    n_subcarriers: int = 16
    n_symbols: int = 16
    n_tx: int = 16
    bandwidth: float = 30.0
    carrier_freq: float = 60.0
    light_speed: float = 300.0
    antenna_spacing: float | None = None
    snr_db: float = 20.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("n_subcarriers", "n_symbols", "n_tx"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be >= 2")
        if self.bandwidth <= 0 or self.carrier_freq <= 0 or self.light_speed <= 0:
            raise ValueError("bandwidth, carrier_freq and light_speed must be positive")
        if self.antenna_spacing is None:
            object.__setattr__(self, "antenna_spacing", self.wavelength / 2)
        elif self.antenna_spacing <= 0:
            raise ValueError("antenna_spacing must be positive")

    @property
    def ts(self) -> float:
        """Sampling period in microseconds."""
        return 1.0 / self.bandwidth

    @property
    def n_ts(self) -> float:
        return self.n_subcarriers * self.ts

    @property
    def wavelength(self) -> float:
        # GHz -> cycles per microsecond
        return self.light_speed / (self.carrier_freq * 1e3)

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    def replace(self, **changes) -> "SystemConfig":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        if "carrier_freq" in changes or "light_speed" in changes:
            values["antenna_spacing"] = None
        values.update(changes)
        return SystemConfig(**values)


@dataclass(frozen=True)
class PilotSet:
    """Pilot symbols s^(g,n), shape (G, N, Nt)."""

    symbols: np.ndarray

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.symbols.shape


@dataclass(frozen=True)
class VirtualChannelParams:
    paths: Paths
    gains: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        gains = np.asarray(self.gains, dtype=complex).reshape(-1)
        if gains.size != len(self.paths):
            raise ValueError("need one gain per path")
        object.__setattr__(self, "gains", gains)


def _phase_index(cfg: SystemConfig) -> np.ndarray:
    return 2j * math.pi * cfg.antenna_spacing / cfg.wavelength * np.arange(cfg.n_tx)


def steering_vector(theta: float, cfg: SystemConfig) -> np.ndarray:
    return np.exp(-_phase_index(cfg) * math.sin(theta))


def steering_derivative(theta: float, cfg: SystemConfig) -> np.ndarray:
    """d/dtheta of :func:`steering_vector`."""
    return -_phase_index(cfg) * math.cos(theta) * steering_vector(theta, cfg)


def generate_pilots(cfg: SystemConfig, seed: int | None = None) -> PilotSet:
    """Unit-circle pilots scaled by 1/sqrt(Nt), deterministic in the seed."""
    rng = np.random.default_rng([cfg.seed if seed is None else seed, 0])
    phase = rng.uniform(0.0, 2 * math.pi, size=(cfg.n_symbols, cfg.n_subcarriers, cfg.n_tx))
    return PilotSet(np.exp(1j * phase) / math.sqrt(cfg.n_tx))


def default_gains(
    alice, eve, scatterers, cfg: SystemConfig, seed: int | None = None
) -> np.ndarray:
    """Free-space-like gains: |gamma_k| = lambda / (4 pi c tau_k), seeded uniform phase."""
    probe = Scenario(alice, eve, tuple(scatterers), np.ones(len(scatterers) + 1))
    toa = forward_geometry(probe, cfg.light_speed).toa
    rng = np.random.default_rng([cfg.seed if seed is None else seed, 1])
    phase = rng.uniform(0.0, 2 * math.pi, size=toa.size)
    return cfg.wavelength / (4 * math.pi * cfg.light_speed * toa) * np.exp(1j * phase)


def build_precoder(shift: SpoofShift, n: int, cfg: SystemConfig) -> np.ndarray:
    """Diagonal precoder exp(-j 2 pi n dtau / (N Ts)) diag(conj(alpha(dtheta)))."""
    if not 0 <= n < cfg.n_subcarriers:
        raise IndexError(f"subcarrier {n} out of range")
    scalar = np.exp(-2j * math.pi * n * shift.delta_tau / cfg.n_ts)
    return scalar * np.diag(steering_vector(shift.delta_theta, cfg).conj())


def precode_pilots(pilots: PilotSet, shift: SpoofShift, cfg: SystemConfig) -> PilotSet:
    """Apply the per-subcarrier precoder to every pilot."""
    n = np.arange(cfg.n_subcarriers)
    scalar = np.exp(-2j * math.pi * n * shift.delta_tau / cfg.n_ts)
    diag = steering_vector(shift.delta_theta, cfg).conj()
    return PilotSet(pilots.symbols * scalar[None, :, None] * diag[None, None, :])


def path_terms(vc: VirtualChannelParams, pilots: PilotSet, cfg: SystemConfig):
    """Per-path building blocks over the whole pilot block.

    Returns ``(delay, beam, dbeam)``: ``delay[n, k] = exp(-j 2 pi n tau_k / (N Ts))``,
    ``beam[g, n, k] = alpha(theta_k)^H s^(g,n)`` and ``dbeam`` the same with the
    steering derivative.
    """
    n = np.arange(cfg.n_subcarriers)
    delay = np.exp(-2j * math.pi * np.outer(n, vc.paths.toa) / cfg.n_ts)
    alpha = np.stack([steering_vector(t, cfg) for t in vc.paths.aod], axis=1)
    dalpha = np.stack([steering_derivative(t, cfg) for t in vc.paths.aod], axis=1)
    s = pilots.symbols
    beam = np.einsum("mk,gnm->gnk", alpha.conj(), s)
    dbeam = np.einsum("mk,gnm->gnk", dalpha.conj(), s)
    return delay, beam, dbeam


def response_block(vc: VirtualChannelParams, pilots: PilotSet, cfg: SystemConfig) -> np.ndarray:
    """Noiseless responses u^(g,n) for all g, n; shape (G, N)."""
    delay, beam, _ = path_terms(vc, pilots, cfg)
    return np.einsum("k,nk,gnk->gn", vc.gains, delay, beam)


def noiseless_response(
    vc: VirtualChannelParams, pilots: PilotSet, cfg: SystemConfig, g: int, n: int
) -> complex:
    s = pilots.symbols[g, n]
    total = 0j
    for k, p in enumerate(vc.paths):
        phase = np.exp(-2j * math.pi * n * p.toa / cfg.n_ts)
        total += vc.gains[k] * phase * (steering_vector(p.aod, cfg).conj() @ s)
    return complex(total)


def snr_to_noise_variance(scenario: Scenario, pilots: PilotSet, cfg: SystemConfig) -> float:
    """Noise variance giving ``cfg.snr_db`` relative to the mean received power
    of the true (unshifted) channel."""
    vc = VirtualChannelParams(forward_geometry(scenario, cfg.light_speed), scenario.gains)
    power = float(np.mean(np.abs(response_block(vc, pilots, cfg)) ** 2))
    if power == 0.0:
        raise ValueError("channel has zero received power")
    return power / cfg.snr_linear
