"""Attack simulators: relay signal cancellation, overshadowing, energy injection.

Also the quantities used to judge cancellation: the cancellation delay, its
geometric lower bound, the attenuation achieved by a delayed inverted copy
and the normalized autocorrelation that governs it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSpec, Geometry, apply_los, delay_samples
from .codec import as_bits, build_frame, ook_modulate
from .types import AicParams, CarrierKind, CarrierProcess, Waveform, db

ATTENUATION_CAP_DB = 40.0


@dataclass(frozen=True)
class CancellationAttack:
    """Relay attacker M: listens on A->M, re-emits an inverted copy on M->B."""

    tau_1: float
    tau_2: float
    tau_r: float = 0.0
    gain_correction: float = 1.0
    geometry: Geometry = field(default_factory=Geometry)

    def __post_init__(self) -> None:
        if min(self.tau_1, self.tau_2, self.tau_r) < 0:
            raise ValueError("relay delays must be non-negative")


@dataclass(frozen=True)
class OvershadowAttack:
    """A full-power AIC transmission of the attacker's own payload.

    `power` is the full-frame mean-square power at the receiver (dBFS) and
    `alignment` the sample offset of the attacker's first frame relative to
    the legitimate frame it targets.
    """

    payload: tuple[int, ...]
    power: float
    params: AicParams
    alignment: int = 0
    repetitions: int = 1
    seed: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "payload", tuple(int(b) for b in as_bits(self.payload)))
        if self.power > 0:
            raise ValueError("attacker power must be at most 0 dBFS")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")


@dataclass(frozen=True)
class InjectionAttack:
    """Carrier energy added to chosen slots only (the attacker can add, not remove).

    `slots` indexes slots counted from the targeted frame start; each
    injected slot carries `power` dBFS of fresh Gaussian carrier.
    """

    slots: tuple[int, ...]
    power: float
    params: AicParams
    alignment: int = 0
    seed: int = 2

    def __post_init__(self) -> None:
        object.__setattr__(self, "slots", tuple(sorted({int(s) for s in self.slots})))
        if any(s < 0 for s in self.slots):
            raise ValueError("slot indices must be non-negative")
        if self.power > 0:
            raise ValueError("attacker power must be at most 0 dBFS")


AttackSpec = CancellationAttack | OvershadowAttack | InjectionAttack


def cancellation_delay(att: CancellationAttack, tau_a: float) -> float:
    """tau_M = tau_1 + tau_2 + tau_r - tau_A."""
    return att.tau_1 + att.tau_2 + att.tau_r - tau_a


def cancellation_delay_bound(g: Geometry) -> float:
    """Smallest delay an attacker outside the safe area can achieve, (2r - AB)/c_s."""
    bound = (2.0 * g.safe_radius - g.distance_ab) / g.speed_of_sound
    if bound < 0:
        warnings.warn("degenerate geometry: safe radius below half the device distance; "
                      "cancellation delay bound clamped to 0", RuntimeWarning, stacklevel=2)
        return 0.0
    return bound


def relay_cancellation_signal(x_prime: Waveform, tau_m: float, gain: float = 1.0) -> Waveform:
    """-gain * x'(t - tau_M); gain 1 is the best case of exact gain correction."""
    if tau_m < 0:
        raise ValueError("cancellation delay cannot be negative")
    return -apply_los(x_prime, ChannelSpec(gain, tau_m, "M->B"))


def _lag(x: Waveform, tau: float) -> int:
    k = delay_samples(tau, x.sample_rate)
    if k >= len(x):
        raise ValueError(f"lag of {k} samples does not fit in a {len(x)}-sample signal")
    return k


def attack_attenuation(x_prime: Waveform, tau_m: float) -> float:
    """Power reduction (dB) of x' when x'(t - tau_M) is subtracted.

    Measured on the overlapping support; positive means the attack removed
    energy, negative means it added energy. Capped at ATTENUATION_CAP_DB.
    """
    k = _lag(x_prime, tau_m)
    x = x_prime.samples
    head, tail = x[k:], x[: len(x) - k]
    p_sig = float(np.mean(head * head))
    if p_sig == 0.0:
        raise ValueError("signal has zero power over the overlapping support")
    r = head - tail
    p_res = float(np.mean(r * r))
    if p_res == 0.0:
        return ATTENUATION_CAP_DB
    return min(ATTENUATION_CAP_DB, db(p_sig / p_res))


def autocorrelation_coefficient(x: Waveform, tau: float) -> float:
    """Normalized autocorrelation at lag tau over the overlapping support."""
    k = _lag(x, tau)
    s = x.samples
    a, b = s[k:], s[: len(s) - k]
    ea, eb = float(np.dot(a, a)), float(np.dot(b, b))
    if ea == 0.0 or eb == 0.0:
        raise ValueError("autocorrelation of a zero-power signal is undefined")
    if k == 0:
        return 1.0
    return float(np.clip(np.dot(a, b) / math.sqrt(ea * eb), -1.0, 1.0))


def _pad_head(w: Waveform, n: int) -> Waveform:
    if n < 0:
        raise ValueError("alignment must be non-negative")
    return Waveform(np.concatenate([np.zeros(n), w.samples]), w.sample_rate)


def overshadow_signal(att: OvershadowAttack) -> Waveform:
    """The attacker's own AIC frames at the configured receiver power."""
    p = att.params
    if len(att.payload) != p.payload_length:
        raise ValueError(f"attacker payload has {len(att.payload)} bits, "
                         f"expected {p.payload_length}")
    frame = np.tile(build_frame(att.payload), att.repetitions)
    on_power = att.power + 10.0 * math.log10(frame.size / int(frame.sum()))
    x = ook_modulate(frame, p, CarrierProcess(CarrierKind.WGN, att.seed), on_power)
    return _pad_head(x, att.alignment)


def injection_signal(att: InjectionAttack) -> Waveform:
    """Fresh carrier in the selected slots, silence elsewhere."""
    if not att.slots:
        return Waveform.zeros(att.alignment, att.params.sample_rate)
    pattern = np.zeros(att.slots[-1] + 1, dtype=np.uint8)
    pattern[list(att.slots)] = 1
    x = ook_modulate(pattern, att.params, CarrierProcess(CarrierKind.WGN, att.seed), att.power)
    return _pad_head(x, att.alignment)


def attack_signal(att: AttackSpec, received: Waveform, frame_start: int = 0,
                  tau_a: float = 0.0) -> Waveform:
    """Render an attack as heard at the receiver.

    `received` is the legitimate signal at B (the relay's template),
    `tau_a` the A->B propagation delay it already contains, and
    `frame_start` the sample index of the legitimate frame that
    overshadowing and injection attacks align to.
    """
    if isinstance(att, CancellationAttack):
        return relay_cancellation_signal(received, cancellation_delay(att, tau_a),
                                         att.gain_correction)
    if isinstance(att, OvershadowAttack):
        return _pad_head(overshadow_signal(att), frame_start)
    if isinstance(att, InjectionAttack):
        return _pad_head(injection_signal(att), frame_start)
    raise TypeError(f"unsupported attack {type(att).__name__}")
