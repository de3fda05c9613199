"""Core value types shared across the package."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

# Floor used when converting zero power to dB; anything at or below this is
# reported as -inf by `power_dbfs`.
_POWER_EPS = 1e-300


class CarrierKind(str, enum.Enum):
    WGN = "wgn"
    QPSK = "qpsk"


def db(x: float) -> float:
    """10*log10 with -inf for non-positive input."""
    return 10.0 * math.log10(x) if x > _POWER_EPS else -math.inf


def undb(x_db: float) -> float:
    return 0.0 if x_db == -math.inf else 10.0 ** (x_db / 10.0)


def power_dbfs(samples: np.ndarray) -> float:
    """Mean-square power in dBFS (full scale amplitude 1.0 is 0 dBFS)."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        return -math.inf
    return db(float(np.mean(samples * samples)))


@dataclass(frozen=True, eq=False)
class Waveform:
    """Uniformly sampled real signal. The sample buffer is made read-only."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self) -> None:
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        arr = np.array(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("waveform samples must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("waveform samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def power_dbfs(self) -> float:
        return power_dbfs(self.samples)

    def scaled(self, gain: float) -> Waveform:
        return Waveform(self.samples * gain, self.sample_rate)

    def __neg__(self) -> Waveform:
        return Waveform(-self.samples, self.sample_rate)

    def slice(self, start: int, stop: int | None = None) -> Waveform:
        return Waveform(self.samples[start:stop], self.sample_rate)

    @classmethod
    def zeros(cls, n: int, sample_rate: float) -> Waveform:
        return cls(np.zeros(int(n)), sample_rate)


@dataclass(frozen=True)
class AicParams:
    """Protocol parameters shared by transmitter and receiver.

    `target_snr` is the ratio of the full-frame mean-square signal power to
    the in-band noise power; on slots therefore sit about 3 dB higher.
    `detection_threshold` is the ternary threshold relative to the measured
    noise floor.
    """

    sample_rate: float = 44_100.0
    band: tuple[float, float] = (16_000.0, 20_000.0)
    slot_duration: float = 1.0 / 220.0
    carrier_kind: CarrierKind = CarrierKind.WGN
    qpsk_carrier_freq: float | None = None
    qpsk_minislot: float | None = None
    target_snr: float = 14.0
    noise_floor: float = -87.0
    detection_threshold: float = 11.0
    payload_length: int = 128
    carrier_taper: float = field(default=0.76)

    def __post_init__(self) -> None:
        object.__setattr__(self, "carrier_kind", CarrierKind(self.carrier_kind))
        object.__setattr__(self, "band", (float(self.band[0]), float(self.band[1])))
        f_low, f_high = self.band
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if not 0 < f_low < f_high <= self.sample_rate / 2:
            raise ValueError(f"band {self.band} invalid for sample rate {self.sample_rate}")
        if not self.slot_duration > 0:
            raise ValueError("slot_duration must be positive")
        if self.payload_length < 1:
            raise ValueError("payload_length must be at least 1")
        if not 0.5 <= self.carrier_taper <= 1.0:
            raise ValueError("carrier_taper must lie in [0.5, 1]")
        if self.carrier_kind is CarrierKind.QPSK:
            fc = self.carrier_freq
            if not f_low <= fc <= f_high:
                raise ValueError(f"QPSK carrier {fc} Hz outside band {self.band}")
            ratio = self.slot_duration / self.minislot
            if abs(ratio - round(ratio)) > 1e-6 or round(ratio) < 1:
                raise ValueError("QPSK minislot must divide the slot duration")

    @property
    def gross_bps(self) -> float:
        return 1.0 / self.slot_duration

    @property
    def slot_samples(self) -> int:
        return int(round(self.slot_duration * self.sample_rate))

    @property
    def frame_slots(self) -> int:
        return 6 + 2 * self.payload_length

    @property
    def frame_samples(self) -> int:
        return self.frame_slots * self.slot_samples

    @property
    def carrier_freq(self) -> float:
        if self.qpsk_carrier_freq is not None:
            return float(self.qpsk_carrier_freq)
        return 0.5 * (self.band[0] + self.band[1])

    @property
    def minislot(self) -> float:
        if self.qpsk_minislot is not None:
            return float(self.qpsk_minislot)
        return self.slot_duration / 4.0

    @property
    def frame_power_dbfs(self) -> float:
        return self.noise_floor + self.target_snr

    @classmethod
    def at_rate(cls, gross_bps: float, **kwargs) -> AicParams:
        return cls(slot_duration=1.0 / gross_bps, **kwargs)


@dataclass(frozen=True)
class CarrierProcess:
    kind: CarrierKind = CarrierKind.WGN
    rng_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", CarrierKind(self.kind))
