"""Simulated secure device pairing over the acoustic channel.

A repeatedly broadcasts its key material d. The user starts B at some point
during the broadcast; B decodes the first frame that synchronizes with the
ternary decision rule and reports one verdict. The human confirmation steps
are modelled only as that start offset.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .adversary import AttackSpec, attack_signal
from .channel import ChannelSpec, NoiseSpec, apply_los, delay_samples, gen_noise, superpose
from .codec import as_bits, build_frame, modulate
from .receiver import DecodeReport, Failure, Mode, demodulate
from .types import AicParams, CarrierKind, CarrierProcess, Waveform

LEADING_SILENCE = 0.2  # seconds before A's first frame, used for the noise floor
TRAILING_SILENCE = 0.05


class Verdict(str, enum.Enum):
    SUCCESS = "success"
    FAILED_NOISE = "failed_noise"
    FAILED_ATTACK_DETECTED = "failed_attack_detected"
    FAILED_NO_SIGNAL = "failed_no_signal"


_VERDICTS = {
    Failure.NONE: Verdict.SUCCESS,
    Failure.EPSILON_DETECTED: Verdict.FAILED_ATTACK_DETECTED,
    Failure.NO_SYNC: Verdict.FAILED_NO_SIGNAL,
    Failure.MANCHESTER_VIOLATION: Verdict.FAILED_NOISE,
}


def _reject_qpsk(params: AicParams) -> None:
    if params.carrier_kind is not CarrierKind.WGN:
        raise ValueError("pairing requires the WGN carrier; periodic carriers can be cancelled")


@dataclass(frozen=True)
class PairingSession:
    """One pairing attempt.

    `receiver_offset` is how far (seconds) into A's first repetition B
    starts listening; None draws it uniformly from the session seed when
    there is more than one repetition, and uses 0 otherwise. `noise`
    defaults to the nominal floor of `params` in its band.
    """

    key_material: tuple[int, ...]
    params: AicParams = field(default_factory=AicParams)
    repetitions: int = 3
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    noise: NoiseSpec | None = None
    attack: AttackSpec | None = None
    seed: int = 0
    receiver_offset: float | None = None
    mode: Mode = Mode.TERNARY

    def __post_init__(self) -> None:
        object.__setattr__(self, "key_material", tuple(int(b) for b in as_bits(self.key_material)))
        object.__setattr__(self, "mode", Mode(self.mode))
        _reject_qpsk(self.params)
        if len(self.key_material) != self.params.payload_length:
            raise ValueError(f"key material has {len(self.key_material)} bits, "
                             f"params expect {self.params.payload_length}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        frame_time = self.params.frame_samples / self.params.sample_rate
        if self.receiver_offset is not None and not 0 <= self.receiver_offset < frame_time:
            raise ValueError("receiver offset must lie within the first repetition")


@dataclass(frozen=True, eq=False)
class PairingOutcome:
    verdict: Verdict
    received: tuple[int, ...] | None
    report: DecodeReport
    receiver_offset: float


def transmitter_stream(d, params: AicParams, repetitions: int, seed: int) -> Waveform:
    """Leading silence followed by `repetitions` back-to-back frames of d."""
    _reject_qpsk(params)
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    frames = np.tile(build_frame(d), repetitions)
    x = modulate(frames, params, CarrierProcess(CarrierKind.WGN, seed))
    lead = int(round(LEADING_SILENCE * params.sample_rate))
    return Waveform(np.concatenate([np.zeros(lead), x.samples]), params.sample_rate)


def _noise_spec(session: PairingSession) -> NoiseSpec:
    if session.noise is not None:
        return session.noise
    return NoiseSpec(session.params.noise_floor, session.params.band, session.seed + 1)


def run_pairing(session: PairingSession) -> PairingOutcome:
    p = session.params
    fs = p.sample_rate
    rng = np.random.default_rng([session.seed, 0x5D9])
    offset = session.receiver_offset
    if offset is None:
        frame_time = p.frame_samples / fs
        offset = float(rng.uniform(0.0, frame_time)) if session.repetitions > 1 else 0.0

    x = transmitter_stream(session.key_material, p, session.repetitions, session.seed)
    x_rx = apply_los(x, session.channel)
    frame_start = int(round(LEADING_SILENCE * fs)) + delay_samples(session.channel.delay, fs)
    parts = [x_rx]
    if session.attack is not None:
        parts.append(attack_signal(session.attack, x_rx, frame_start, session.channel.delay))
    n = max(len(w) for w in parts) + int(round(TRAILING_SILENCE * fs))
    parts.append(gen_noise(_noise_spec(session), n / fs, fs))
    y = superpose(parts)

    search_from = frame_start + int(math.floor(offset * fs))
    report = demodulate(y, p, session.mode, leading_silence=LEADING_SILENCE,
                        search_from=search_from)
    verdict = _VERDICTS[report.failure]
    received = None if report.data is None else tuple(int(b) for b in report.data)
    return PairingOutcome(verdict, received, report, offset)
