"""Line-of-sight acoustic channel, band-limited noise, superposition."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .codec import apply_bandpass
from .types import Waveform, db, undb

SNR_FLOOR_DB = -100.0
SPEED_OF_SOUND = 343.0


@dataclass(frozen=True)
class ChannelSpec:
    attenuation: float = 1.0
    delay: float = 0.0
    label: str = "A->B"

    def __post_init__(self) -> None:
        if not math.isfinite(self.attenuation) or self.attenuation < 0:
            raise ValueError("attenuation must be finite and non-negative")
        if self.delay < 0:
            raise ValueError("propagation delay cannot be negative")


@dataclass(frozen=True)
class NoiseSpec:
    power: float = -87.0
    band: tuple[float, float] = (16_000.0, 20_000.0)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.power > 0:
            raise ValueError("noise power must be at most 0 dBFS")


@dataclass(frozen=True)
class Geometry:
    """Device distance, safe-area radius and speed of sound (meters, m/s)."""

    distance_ab: float = 0.3
    safe_radius: float = 0.4
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self) -> None:
        if self.distance_ab < 0 or self.safe_radius <= 0 or self.speed_of_sound <= 0:
            raise ValueError("geometry values must be positive")


def delay_samples(delay: float, sample_rate: float) -> int:
    if delay < 0:
        raise ValueError("delay cannot be negative")
    return int(round(delay * sample_rate))


def apply_los(x: Waveform, ch: ChannelSpec) -> Waveform:
    """alpha * x(t - tau) with tau rounded to whole samples."""
    if ch.delay < 0:
        raise ValueError("propagation delay cannot be negative")
    k = delay_samples(ch.delay, x.sample_rate)
    out = np.concatenate([np.zeros(k), ch.attenuation * x.samples])
    return Waveform(out, x.sample_rate)


def gen_noise(spec: NoiseSpec, duration: float, sample_rate: float) -> Waveform:
    """Gaussian noise limited to ``spec.band`` with exactly ``spec.power`` dBFS."""
    if not duration > 0:
        raise ValueError("noise duration must be positive")
    n = int(round(duration * sample_rate))
    rng = np.random.default_rng(spec.seed)
    raw = Waveform(rng.standard_normal(n), sample_rate)
    v = apply_bandpass(raw, spec.band).samples
    ms = float(np.mean(v * v))
    if ms == 0.0:
        return Waveform(v, sample_rate)
    return Waveform(v * math.sqrt(undb(spec.power) / ms), sample_rate)


def superpose(signals: Sequence[Waveform]) -> Waveform:
    """Sample-wise sum; shorter signals are zero-extended. No clipping."""
    signals = list(signals)
    if not signals:
        raise ValueError("nothing to superpose")
    fs = signals[0].sample_rate
    if any(s.sample_rate != fs for s in signals):
        raise ValueError("cannot superpose waveforms with different sample rates")
    out = np.zeros(max(len(s) for s in signals))
    for s in signals:
        out[: len(s)] += s.samples
    return Waveform(out, fs)


def measure_snr(signal_plus_attacker: Waveform, noise: Waveform) -> float:
    """Received SNR in dB, floored at -100 dB when the signal is cancelled."""
    if len(signal_plus_attacker) != len(noise):
        raise ValueError("signal and noise must have equal lengths")
    if signal_plus_attacker.sample_rate != noise.sample_rate:
        raise ValueError("signal and noise must share a sample rate")
    pn = float(np.sum(noise.samples ** 2))
    if pn == 0.0:
        raise ValueError("noise has zero power")
    ps = float(np.sum(signal_plus_attacker.samples ** 2))
    return max(SNR_FLOOR_DB, db(ps / pn))


def delay_from_distance(d: float, g: Geometry) -> float:
    if d < 0:
        raise ValueError("distance cannot be negative")
    return d / g.speed_of_sound
