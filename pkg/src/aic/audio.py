"""WAV persistence (PCM16 mono) and spectrogram export."""

from __future__ import annotations

import csv
import os
import wave
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .types import Waveform

PCM_SCALE = 32767.0
_DB_FLOOR = 1e-20


class WavFormatError(ValueError):
    """The file is not a readable PCM16 mono WAV."""


def write_wav(w: Waveform, path: str | os.PathLike) -> int:
    """Write `w` as 16-bit mono PCM and return the number of clipped samples."""
    rate = int(round(w.sample_rate))
    if abs(rate - w.sample_rate) > 1e-6:
        raise ValueError(f"WAV needs an integer sample rate, got {w.sample_rate}")
    x = w.samples
    clipped = int(np.count_nonzero(np.abs(x) > 1.0))
    pcm = np.round(np.clip(x, -1.0, 1.0) * PCM_SCALE).astype("<i2")
    try:
        with open(path, "wb") as fh, wave.open(fh, "wb") as f:
            f.setnchannels(1)
            f.setsampwidth(2)
            f.setframerate(rate)
            f.writeframes(pcm.tobytes())
    except OSError as exc:
        raise OSError(f"cannot write WAV file {os.fspath(path)!r}: {exc}") from exc
    return clipped


def read_wav(path: str | os.PathLike) -> Waveform:
    p = os.fspath(path)
    try:
        f = wave.open(p, "rb")
    except wave.Error as exc:
        raise WavFormatError(f"{p}: not a PCM WAV file ({exc})") from exc
    except EOFError as exc:
        raise WavFormatError(f"{p}: truncated WAV header") from exc
    except OSError as exc:
        raise OSError(f"cannot read WAV file {p!r}: {exc}") from exc
    with f:
        if f.getnchannels() != 1:
            raise WavFormatError(f"{p}: {f.getnchannels()} channels, only mono is supported")
        if f.getsampwidth() != 2:
            raise WavFormatError(f"{p}: {8 * f.getsampwidth()}-bit samples, "
                                 "only 16-bit PCM is supported")
        n = f.getnframes()
        raw = f.readframes(n)
        rate = f.getframerate()
    if len(raw) != 2 * n:
        raise WavFormatError(f"{p}: truncated data, expected {n} frames, got {len(raw) // 2}")
    pcm = np.frombuffer(raw, dtype="<i2").astype(np.float64)
    return Waveform(pcm / PCM_SCALE, float(rate))


@dataclass(frozen=True, eq=False)
class SpectrogramMatrix:
    """Power spectral density in dB, rows are time frames, columns frequencies."""

    magnitudes: np.ndarray
    freqs: np.ndarray
    times: np.ndarray
    freq_resolution: float

    def band_power(self) -> np.ndarray:
        """Mean-square power of each frame, summed over frequency."""
        return np.sum(10.0 ** (self.magnitudes / 10.0), axis=1) * self.freq_resolution


def spectrogram(w: Waveform, freq_resolution: float = 50.0) -> SpectrogramMatrix:
    """Hann-windowed short-time PSD with 50% overlap.

    The window spans sample_rate / freq_resolution samples, so adjacent
    frequency bins are `freq_resolution` apart.
    """
    if not freq_resolution > 0:
        raise ValueError("frequency resolution must be positive")
    nperseg = int(round(w.sample_rate / freq_resolution))
    if nperseg > len(w) or nperseg < 2:
        raise ValueError(f"resolution {freq_resolution} Hz needs {nperseg} samples, "
                         f"signal has {len(w)}")
    f, t, sxx = signal.spectrogram(w.samples, fs=w.sample_rate, window="hann",
                                   nperseg=nperseg, noverlap=nperseg // 2,
                                   detrend=False, scaling="density", mode="psd")
    mag = 10.0 * np.log10(sxx.T + _DB_FLOOR)
    return SpectrogramMatrix(mag, f, t, float(w.sample_rate / nperseg))


def write_spectrogram_csv(s: SpectrogramMatrix, path: str | os.PathLike) -> None:
    """First row holds the frequency axis, first column the time axis."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["time_s\\freq_hz"] + [f"{v:.6g}" for v in s.freqs])
        for t, row in zip(s.times, s.magnitudes):
            out.writerow([f"{t:.6f}"] + [f"{v:.3f}" for v in row])
