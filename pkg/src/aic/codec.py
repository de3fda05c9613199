"""Transmit side: Manchester coding, framing, OOK over a stochastic carrier."""

from __future__ import annotations

import functools
import math
from typing import Sequence

import numpy as np
from scipy import signal

from .types import AicParams, CarrierKind, CarrierProcess, Waveform, undb

DELIMITER = (1, 1, 1, 0, 0, 0)
# Pair table shared with the receiver. 1 -> on/off, 0 -> off/on.
MANCHESTER = {1: (1, 0), 0: (0, 1)}

MIN_SLOT_SAMPLES = 8
STOPBAND_DB = 60.0
TRANSITION_FRACTION = 0.10


def as_bits(bits: Sequence[int] | np.ndarray | str) -> np.ndarray:
    """Coerce a bit sequence (iterable of 0/1 or a '0101' string) to uint8."""
    if isinstance(bits, str):
        bits = [int(c) for c in bits.strip()]
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise ValueError("bit sequence must be one-dimensional")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise ValueError("bit sequence may only contain 0 and 1")
    return arr.astype(np.uint8)


def manchester_encode(data) -> np.ndarray:
    d = as_bits(data)
    if d.size == 0:
        raise ValueError("cannot encode an empty payload")
    out = np.empty(2 * d.size, dtype=np.uint8)
    out[0::2] = d
    out[1::2] = 1 - d
    return out


def build_frame(data) -> np.ndarray:
    """Delimiter followed by the Manchester-coded payload."""
    return np.concatenate([np.array(DELIMITER, dtype=np.uint8), manchester_encode(data)])


def bit_rates(params: AicParams) -> tuple[float, float]:
    """(gross, net) bit rate in bits/s, net accounting for the delimiter."""
    n = params.payload_length
    gross = 1.0 / params.slot_duration
    return gross, gross * n / (6 + 2 * n)


@functools.lru_cache(maxsize=64)
def design_bandpass(sample_rate: float, band: tuple[float, float]) -> np.ndarray:
    """Odd-length linear-phase Kaiser-windowed sinc bandpass taps."""
    f_low, f_high = band
    nyq = sample_rate / 2.0
    if not 0 < f_low < f_high <= nyq:
        raise ValueError(f"band {band} invalid for sample rate {sample_rate}")
    width = TRANSITION_FRACTION * (f_high - f_low)
    numtaps, beta = signal.kaiserord(STOPBAND_DB, width / nyq)
    numtaps |= 1
    if f_high + width / 2 >= nyq:
        taps = signal.firwin(numtaps, f_low, window=("kaiser", beta), pass_zero=False, fs=sample_rate)
    else:
        taps = signal.firwin(numtaps, [f_low, f_high], window=("kaiser", beta),
                             pass_zero=False, fs=sample_rate)
    taps.setflags(write=False)
    return taps


def filter_delay(sample_rate: float, band: tuple[float, float]) -> int:
    return design_bandpass(sample_rate, band).size // 2


def apply_bandpass(w: Waveform, band: tuple[float, float]) -> Waveform:
    """Zero-phase-aligned FIR bandpass; output has the input's length."""
    taps = design_bandpass(float(w.sample_rate), (float(band[0]), float(band[1])))
    if len(w) == 0:
        return w
    # 'same' on an odd-length filter removes exactly the group delay.
    y = signal.oaconvolve(w.samples, taps, mode="same")
    return Waveform(y, w.sample_rate)


def _shaped_gaussian(rng: np.random.Generator, n: int, fs: float,
                     band: tuple[float, float], taper: float) -> np.ndarray:
    # Gaussian noise shaped in the frequency domain: zero outside the band,
    # a raised-cosine power profile inside it (taper=1 is flat).
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    f_low, f_high = band
    inband = (freqs >= f_low) & (freqs <= f_high)
    if not np.any(inband):
        raise ValueError("carrier duration too short to resolve the band")
    pos = (freqs[inband] - f_low) / (f_high - f_low)
    psd = taper - (1.0 - taper) * np.cos(2 * np.pi * pos)
    gain = np.zeros_like(freqs)
    gain[inband] = np.sqrt(psd)
    return np.fft.irfft(spec * gain, n)


def _qpsk(rng: np.random.Generator, n: int, params: AicParams) -> np.ndarray:
    fs = params.sample_rate
    t = np.arange(n) / fs
    symbol = np.floor(t / params.minislot + 1e-9).astype(np.int64)
    phases = np.pi / 4 + (np.pi / 2) * rng.integers(0, 4, size=int(symbol[-1]) + 1)
    return np.sqrt(2.0) * np.cos(2 * np.pi * params.carrier_freq * t + phases[symbol])


def synthesize_carrier(proc: CarrierProcess, duration: float, params: AicParams) -> Waveform:
    """Unit-variance band-limited carrier, deterministic for a given seed."""
    if not duration > 0:
        raise ValueError("carrier duration must be positive")
    fs = params.sample_rate
    n = int(round(duration * fs))
    if n < 1:
        raise ValueError("carrier duration shorter than one sample")
    rng = np.random.default_rng(proc.rng_seed)
    if proc.kind is CarrierKind.WGN:
        x = _shaped_gaussian(rng, n, fs, params.band, params.carrier_taper)
    else:
        fc = params.carrier_freq
        if not params.band[0] <= fc <= params.band[1]:
            raise ValueError(f"QPSK carrier {fc} Hz outside band {params.band}")
        x = apply_bandpass(Waveform(_qpsk(rng, n, params), fs), params.band).samples
    rms = math.sqrt(float(np.mean(x * x)))
    if rms == 0.0:
        raise ValueError("degenerate carrier")
    return Waveform(x / rms, fs)


def ook_modulate(slots, params: AicParams, proc: CarrierProcess,
                 on_power_dbfs: float) -> Waveform:
    """Gate a fresh carrier stream with an arbitrary on/off slot pattern.

    Every on slot is scaled to exactly `on_power_dbfs` mean-square power;
    off slots are exactly zero.
    """
    pattern = as_bits(slots)
    L = params.slot_samples
    if L < MIN_SLOT_SAMPLES:
        raise ValueError(f"slot of {L} samples is too short (minimum {MIN_SLOT_SAMPLES})")
    if pattern.size == 0:
        return Waveform.zeros(0, params.sample_rate)
    n = pattern.size * L
    carrier = synthesize_carrier(proc, n / params.sample_rate, params).samples
    blocks = carrier.reshape(pattern.size, L).copy()
    ms = np.mean(blocks * blocks, axis=1)
    ms[ms == 0] = 1.0
    blocks *= (np.sqrt(undb(on_power_dbfs) / ms) * pattern)[:, None]
    return Waveform(blocks.ravel(), params.sample_rate)


def modulate(frame, params: AicParams, proc: CarrierProcess | None = None) -> Waveform:
    """OOK-modulate one or more back-to-back frames.

    The full-signal mean-square power equals
    ``params.noise_floor + params.target_snr`` dBFS.
    """
    b = as_bits(frame)
    if b.size < len(DELIMITER) + 2 or tuple(b[: len(DELIMITER)]) != DELIMITER:
        raise ValueError("frame must start with the delimiter and carry a payload")
    if proc is None:
        proc = CarrierProcess(params.carrier_kind, 0)
    n_on = int(b.sum())
    on_power = params.frame_power_dbfs + 10.0 * math.log10(b.size / n_on)
    return ook_modulate(b, params, proc, on_power)
