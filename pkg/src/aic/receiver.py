"""Receive side: filtering, noise floor, delimiter sync, slot powers, decisions."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .codec import DELIMITER, apply_bandpass, filter_delay
from .types import AicParams, Waveform, power_dbfs

GUARD_FRACTION = 0.10  # trimmed from each slot edge before measuring power
MIN_LEADING_SILENCE = 0.05
SYNC_MIN_CORRELATION = 0.8
SYNC_MIN_CONTRAST_DB = 6.0
SYNC_MIN_RISE_DB = 6.0  # delimiter on slots above the noise floor
SILENT_HEAD_DBFS = -200.0  # far below any real quantisation noise
SYNC_ENVELOPE_FLOOR_DB = 10.0  # envelope clamp below the noise floor

_TEMPLATE = np.array(DELIMITER, dtype=float) - np.mean(DELIMITER)
_TINY = 1e-30


class Trit(enum.Enum):
    ZERO = 0
    ONE = 1
    EPSILON = 2

    def __str__(self) -> str:
        return "ε" if self is Trit.EPSILON else str(self.value)


class Mode(str, enum.Enum):
    BINARY = "binary"
    TERNARY = "ternary"


class Failure(str, enum.Enum):
    NONE = "none"
    NO_SYNC = "no_sync"
    EPSILON_DETECTED = "epsilon_detected"
    MANCHESTER_VIOLATION = "manchester_violation"


@dataclass(frozen=True, eq=False)
class SlotPowers:
    powers: np.ndarray  # dBFS, -inf for an all-zero window
    slot_duration: float
    frame_offset: int

    def __len__(self) -> int:
        return self.powers.size


@dataclass(frozen=True, eq=False)
class FrameDecode:
    decisions: tuple[Trit, ...]
    data: np.ndarray | None
    failure: Failure


@dataclass(frozen=True, eq=False)
class DecodeReport:
    mode: Mode
    sync_offsets: tuple[int, ...]
    slot_powers: tuple[SlotPowers, ...]
    pair_decisions: tuple[Trit, ...]
    data: np.ndarray | None
    failure: Failure
    noise_floor_est: float
    threshold_used: float
    decoded_offset: int | None = field(default=None)

    def to_dict(self) -> dict:
        def num(x: float):
            return None if not math.isfinite(x) else round(float(x), 4)

        return {
            "mode": self.mode.value,
            "failure": self.failure.value,
            "data": None if self.data is None else "".join(map(str, self.data.tolist())),
            "sync_offsets": list(self.sync_offsets),
            "decoded_offset": self.decoded_offset,
            "noise_floor_dbfs": num(self.noise_floor_est),
            "threshold_dbfs": num(self.threshold_used),
            "pair_decisions": "".join(str(t) for t in self.pair_decisions),
            "epsilon_count": sum(t is Trit.EPSILON for t in self.pair_decisions),
        }


def estimate_noise_floor(w: Waveform, leading_silence: float,
                         band: tuple[float, float] | None = None) -> float:
    """Mean-square power (dBFS) of the noise-only head of a recording.

    With `band` given the recording is filtered first and the filter's
    start-up transient is left out of the measurement.
    """
    if band is None:
        return _head_power(w, leading_silence, 0)
    filtered = apply_bandpass(w, band)
    return _head_power(filtered, leading_silence, filter_delay(w.sample_rate, band))


def _head_power(w: Waveform, leading_silence: float, skip: int) -> float:
    if leading_silence < MIN_LEADING_SILENCE:
        raise ValueError(f"leading silence must be at least {MIN_LEADING_SILENCE} s")
    n = int(round(leading_silence * w.sample_rate))
    if n > len(w):
        raise ValueError("recording is shorter than the declared leading silence")
    # A zero-phase filter also rings ahead of the first frame, so the
    # same margin is dropped from the end of the head.
    skip = min(skip, n // 4)
    return power_dbfs(w.samples[skip:n - skip])


def _moving_power(x: np.ndarray, L: int) -> np.ndarray:
    c = np.concatenate([[0.0], np.cumsum(x * x)])
    return np.maximum(c[L:] - c[:-L], 0.0) / L


def _envelope_stack(lin: np.ndarray, L: int, m: int, n_slots: int) -> np.ndarray:
    return np.stack([lin[i * L: i * L + m] for i in range(n_slots)])


def delimiter_scores(w: Waveform, params: AicParams
                     ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Score every candidate frame start against the delimiter template.

    Returns (correlation of the dB envelope with the template, on/off
    contrast in dB, linear on-minus-off power, mean on-slot power in dBFS).
    """
    L = params.slot_samples
    span = len(DELIMITER) * L
    if len(w) < span:
        empty = np.empty(0)
        return empty, empty, empty, empty
    return _delimiter_scores(_moving_power(w.samples, L), L, len(w) - span + 1)


def _delimiter_scores(lin: np.ndarray, L: int, m: int, floor: float = _TINY):
    stack = _envelope_stack(lin, L, m, len(DELIMITER))
    env = 10.0 * np.log10(np.maximum(stack, floor))
    centred = env - env.mean(axis=0)
    norm = np.sqrt(np.sum(centred ** 2, axis=0)) * np.sqrt(np.sum(_TEMPLATE ** 2))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(norm > 0, (_TEMPLATE @ centred) / norm, 0.0)
    contrast_db = env[:3].mean(axis=0) - env[3:].mean(axis=0)
    excess = stack[:3].sum(axis=0) - stack[3:].sum(axis=0)
    on_db = 10.0 * np.log10(stack[:3].mean(axis=0) + _TINY)
    return corr, contrast_db, excess, on_db


def _frame_timing_metric(lin: np.ndarray, starts: np.ndarray, params: AicParams) -> np.ndarray:
    """Delimiter excess plus the on/off difference of every Manchester pair.

    Each pair has exactly one on slot whatever the data, so the summed
    absolute difference peaks at the true slot grid; averaging over the
    whole frame suppresses the power fluctuation of individual slots.
    """
    L = params.slot_samples
    n = min(params.frame_slots, (lin.size - 1 - int(starts.max())) // L + 1)
    idx = starts[:, None] + L * np.arange(n)[None, :]
    e = lin[idx]
    score = e[:, :3].sum(axis=1) - e[:, 3:6].sum(axis=1)
    n_pairs = (n - len(DELIMITER)) // 2
    if n_pairs > 0:
        pairs = e[:, len(DELIMITER): len(DELIMITER) + 2 * n_pairs]
        score = score + np.abs(pairs[:, 0::2] - pairs[:, 1::2]).sum(axis=1)
    return score


def synchronize(w: Waveform, params: AicParams,
                min_correlation: float = SYNC_MIN_CORRELATION,
                min_contrast_db: float = SYNC_MIN_CONTRAST_DB,
                noise_floor: float | None = None) -> np.ndarray:
    """Candidate frame starts (sample indices, ascending) in a filtered recording.

    A start qualifies when the slot-power envelope correlates with the
    delimiter shape and the on/off contrast reaches `min_contrast_db`.
    Given a `noise_floor`, the on slots must also rise SYNC_MIN_RISE_DB
    above it, which rejects chance dips in pure noise. Each qualifying
    region yields one start, first placed at the peak of the linear
    on-minus-off delimiter power and then refined within half a slot on
    the whole-frame timing metric.
    """
    L = params.slot_samples
    span = len(DELIMITER) * L
    if len(w) < span:
        return np.empty(0, dtype=np.int64)
    lin = _moving_power(w.samples, L)
    m = len(w) - span + 1
    has_floor = noise_floor is not None and math.isfinite(noise_floor)
    # Clamp the dB envelope well below the noise floor so near-silent off
    # slots (noiseless input) do not dominate the template correlation.
    floor = 10.0 ** ((noise_floor - SYNC_ENVELOPE_FLOOR_DB) / 10.0) if has_floor else _TINY
    corr, contrast_db, excess, on_db = _delimiter_scores(lin, L, m, floor)
    ok = (corr >= min_correlation) & (contrast_db >= min_contrast_db)
    if has_floor:
        ok &= on_db >= noise_floor + SYNC_MIN_RISE_DB
    if not np.any(ok):
        return np.empty(0, dtype=np.int64)
    low = float(excess.min()) - 1.0
    score = np.where(ok, excess, low)
    padded = np.concatenate([[low - 1.0], score, [low - 1.0]])
    peaks, _ = signal.find_peaks(padded, height=low + 0.5, distance=3 * L)
    half = L // 2
    out = []
    for k in peaks - 1:
        cand = np.arange(max(0, k - half), min(m, k + half + 1))
        out.append(int(cand[np.argmax(_frame_timing_metric(lin, cand, params))]))
    return np.unique(np.asarray(out, dtype=np.int64))


def slot_powers(w: Waveform, offset: int, params: AicParams,
                n_slots: int | None = None) -> SlotPowers:
    """Mean-square power of the interior 80% of each slot, in dBFS."""
    n_slots = params.frame_slots if n_slots is None else n_slots
    L = params.slot_samples
    if offset < 0 or offset + n_slots * L > len(w):
        raise ValueError(f"frame at offset {offset} does not fit in the recording")
    g = int(round(GUARD_FRACTION * L))
    blocks = w.samples[offset: offset + n_slots * L].reshape(n_slots, L)[:, g: L - g]
    ms = np.mean(blocks * blocks, axis=1)
    with np.errstate(divide="ignore"):
        p = np.where(ms > 0, 10.0 * np.log10(np.where(ms > 0, ms, 1.0)), -np.inf)
    p.setflags(write=False)
    return SlotPowers(p, params.slot_duration, int(offset))


def decide_binary(p1: float, p2: float) -> int:
    return 1 if p1 > p2 else 0


def decide_ternary(p1: float, p2: float, p_th: float) -> Trit:
    if p1 < p_th < p2:
        return Trit.ZERO
    if p2 < p_th < p1:
        return Trit.ONE
    return Trit.EPSILON


def decode_frame(sp: SlotPowers, mode: Mode | str, p_th: float) -> FrameDecode:
    """Skip the delimiter and decide every Manchester pair."""
    mode = Mode(mode)
    n_pairs, rem = divmod(len(sp) - len(DELIMITER), 2)
    if n_pairs < 1 or rem:
        raise ValueError(f"{len(sp)} slot powers do not form a complete frame")
    pairs = sp.powers[len(DELIMITER):].reshape(n_pairs, 2)
    if mode is Mode.BINARY:
        decisions = tuple(Trit(decide_binary(a, b)) for a, b in pairs)
    else:
        decisions = tuple(decide_ternary(a, b, p_th) for a, b in pairs)
    if any(t is Trit.EPSILON for t in decisions):
        return FrameDecode(decisions, None, Failure.EPSILON_DETECTED)
    data = np.array([t.value for t in decisions], dtype=np.uint8)
    return FrameDecode(decisions, data, Failure.NONE)


@dataclass(frozen=True, eq=False)
class Reception:
    """Everything the receiver measures before applying a decision rule."""

    noise_floor: float
    sync_offsets: tuple[int, ...]
    frames: tuple[SlotPowers, ...]


def receive(w: Waveform, params: AicParams, leading_silence: float = 0.2,
            noise_floor: float | None = None, search_from: int = 0) -> Reception:
    """Filter, estimate the noise floor, sync and measure every complete frame.

    Frames starting before sample `search_from` are ignored.
    """
    filtered = apply_bandpass(w, params.band)
    if noise_floor is None:
        noise_floor = _head_power(filtered, leading_silence,
                                  filter_delay(w.sample_rate, params.band))
    if noise_floor < SILENT_HEAD_DBFS:
        # Digitally silent head (noiseless simulation, only FFT round-off
        # left after filtering): use the nominal floor.
        noise_floor = params.noise_floor
    offsets = synchronize(filtered, params, noise_floor=noise_floor)
    offsets = offsets[offsets >= search_from]
    frames = tuple(slot_powers(filtered, int(k), params) for k in offsets
                   if k + params.frame_samples <= len(filtered))
    return Reception(noise_floor, tuple(int(k) for k in offsets), frames)


def decode_reception(rx: Reception, params: AicParams, mode: Mode | str = Mode.TERNARY,
                     threshold_db: float | None = None) -> DecodeReport:
    mode = Mode(mode)
    snr_th = params.detection_threshold if threshold_db is None else threshold_db
    p_th = rx.noise_floor + snr_th
    if not rx.frames:
        return DecodeReport(mode, rx.sync_offsets, rx.frames, (), None, Failure.NO_SYNC,
                            rx.noise_floor, p_th)
    first = rx.frames[0]
    fd = decode_frame(first, mode, p_th)
    return DecodeReport(mode, rx.sync_offsets, rx.frames, fd.decisions, fd.data, fd.failure,
                        rx.noise_floor, p_th, first.frame_offset)


def demodulate(w: Waveform, params: AicParams, mode: Mode | str = Mode.TERNARY,
               leading_silence: float = 0.2, noise_floor: float | None = None,
               threshold_db: float | None = None, search_from: int = 0) -> DecodeReport:
    """Bandpass, estimate the noise floor, sync, measure, decode the first frame.

    The detection threshold is ``noise_floor + params.detection_threshold``
    unless `threshold_db` overrides the relative threshold.
    """
    rx = receive(w, params, leading_silence, noise_floor, search_from)
    return decode_reception(rx, params, mode, threshold_db)
