"""Monte-Carlo experiment driver: BER sweeps, cancellation sweeps, overshadowing table.

Every trial draws its randomness from a seed hashed from the base seed, the
grid coordinates and the trial index, so grid points are independent and a
single point can be re-run on its own. Rows are emitted sorted by their
coordinates, which makes the CSV output byte-identical across runs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .adversary import OvershadowAttack, attack_attenuation, autocorrelation_coefficient, overshadow_signal
from .channel import NoiseSpec, gen_noise, superpose
from .codec import DELIMITER, as_bits, build_frame, modulate
from .receiver import (DecodeReport, Failure, Mode, Reception, Trit, decide_binary,
                       decide_ternary, receive)
from .types import AicParams, CarrierKind, CarrierProcess, Waveform, db

BER_RULE = "epsilon=bit-error, nosync=all-errored"
LEADING_SILENCE = 0.2
TRAILING_SILENCE = 0.05
BAND_TOP = 20_000.0
CANCELLATION_RATES = (5.46, 21.8, 109.0, 218.0)
CANCELLATION_BAND = (200.0, 800.0)


def bit_errors(sent, report: DecodeReport) -> int:
    """Pairs that disagree with the sent bit; an ε is one error, no sync is all."""
    d = as_bits(sent)
    if report.failure is Failure.NO_SYNC or not report.pair_decisions:
        return int(d.size)
    if len(report.pair_decisions) != d.size:
        raise ValueError("decoded frame and sent payload differ in length")
    return sum(1 for t, b in zip(report.pair_decisions, d) if t is Trit.EPSILON or t.value != b)


def ber(sent, report: DecodeReport) -> float:
    d = as_bits(sent)
    return bit_errors(d, report) / d.size


def trial_seed(base_seed: int, coords: Sequence[float], trial: int) -> int:
    """Stable 64-bit seed for one trial at one grid point."""
    key = f"{int(base_seed)}|{'|'.join(f'{float(c):.9g}' for c in coords)}|{int(trial)}"
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "little")


@dataclass(frozen=True)
class SweepGrid:
    """Robustness grid. A bandwidth B places the band at [BAND_TOP - B, BAND_TOP]."""

    snr_values: tuple[float, ...] = (14.0,)
    gross_bit_rates: tuple[float, ...] = (200.0,)
    bandwidths: tuple[float, ...] = (4000.0,)
    thresholds: tuple[float, ...] = (11.0,)
    repetitions: int = 200
    payload_bits: int = 128
    base_seed: int = 0
    mode: Mode = Mode.TERNARY
    noise_floor: float = -87.0
    sample_rate: float = 44_100.0

    def __post_init__(self) -> None:
        for name in ("snr_values", "gross_bit_rates", "bandwidths", "thresholds"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must not be empty")
            object.__setattr__(self, name, vals)
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.payload_bits < 1:
            raise ValueError("payload_bits must be at least 1")
        if any(b <= 0 or b >= BAND_TOP for b in self.bandwidths):
            raise ValueError(f"bandwidths must lie in (0, {BAND_TOP}) Hz")

    def params(self, snr: float, gross_bps: float, bandwidth: float) -> AicParams:
        return AicParams(sample_rate=self.sample_rate, band=(BAND_TOP - bandwidth, BAND_TOP),
                         slot_duration=1.0 / gross_bps, target_snr=snr,
                         noise_floor=self.noise_floor, payload_length=self.payload_bits)


@dataclass(frozen=True)
class SweepRow:
    snr: float
    gross_bps: float
    bandwidth: float
    threshold: float
    ber: float
    trials: int
    failures: dict[str, int] = field(default_factory=dict)

    FIELDS = ("snr_db", "gross_bps", "bandwidth_hz", "threshold_db", "ber", "trials",
              "fail_none", "fail_no_sync", "fail_epsilon", "fail_manchester")

    def as_record(self) -> list[str]:
        f = self.failures
        return [_num(self.snr), _num(self.gross_bps), _num(self.bandwidth), _num(self.threshold),
                f"{self.ber:.6f}", str(self.trials),
                *(str(f.get(k.value, 0)) for k in Failure)]


def _num(x: float) -> str:
    return f"{x:.6g}"


def simulate_reception(params: AicParams, seed: int) -> tuple[np.ndarray, Reception]:
    """One transmission of a random payload over the noisy channel, measured by B."""
    rng = np.random.default_rng(seed)
    d = rng.integers(0, 2, params.payload_length).astype(np.uint8)
    carrier_seed, noise_seed = (int(s) for s in rng.integers(0, 2 ** 63, 2))
    x = modulate(build_frame(d), params, CarrierProcess(CarrierKind.WGN, carrier_seed))
    fs = params.sample_rate
    lead = int(round(LEADING_SILENCE * fs))
    tail = int(round(TRAILING_SILENCE * fs))
    sig = Waveform(np.concatenate([np.zeros(lead), x.samples, np.zeros(tail)]), fs)
    noise = gen_noise(NoiseSpec(params.noise_floor, params.band, noise_seed), sig.duration, fs)
    return d, receive(superpose([sig, noise]), params, LEADING_SILENCE)


def count_errors(d: np.ndarray, rx: Reception, p_th: float, mode: Mode) -> tuple[int, Failure]:
    """Vectorised equivalent of decoding the first frame and applying `bit_errors`."""
    if not rx.frames:
        return int(d.size), Failure.NO_SYNC
    pairs = rx.frames[0].powers[len(DELIMITER):].reshape(-1, 2)
    p1, p2 = pairs[:, 0], pairs[:, 1]
    if mode is Mode.BINARY:
        dec = (p1 > p2).astype(np.int64)
    else:
        dec = np.where((p1 < p_th) & (p_th < p2), 0, np.where((p2 < p_th) & (p_th < p1), 1, 2))
    errors = int(np.count_nonzero(dec != d))
    failure = Failure.EPSILON_DETECTED if np.any(dec == 2) else Failure.NONE
    return errors, failure


def sweep_robustness(grid: SweepGrid) -> list[SweepRow]:
    """BER at every grid point. Receptions are shared across thresholds."""
    rows = []
    for snr in sorted(grid.snr_values):
        for rate in sorted(grid.gross_bit_rates):
            for bw in sorted(grid.bandwidths):
                params = grid.params(snr, rate, bw)
                ths = sorted(grid.thresholds)
                errs = {th: 0 for th in ths}
                hist = {th: {k.value: 0 for k in Failure} for th in ths}
                for i in range(grid.repetitions):
                    d, rx = simulate_reception(params, trial_seed(grid.base_seed, (snr, rate, bw), i))
                    for th in ths:
                        e, fail = count_errors(d, rx, rx.noise_floor + th, grid.mode)
                        errs[th] += e
                        hist[th][fail.value] += 1
                total = grid.repetitions * grid.payload_bits
                rows.extend(SweepRow(snr, rate, bw, th, errs[th] / total, grid.repetitions, hist[th])
                            for th in ths)
    return rows


def sweep_threshold(gross_bps: float = 220.0, snr_values: Iterable[float] = range(10, 21),
                    thresholds: Iterable[float] = tuple(np.arange(0.0, 30.01, 0.5)),
                    reps: int = 200, base_seed: int = 0, bandwidth: float = 4000.0) -> list[SweepRow]:
    """BER against the relative detection threshold, one curve per SNR."""
    grid = SweepGrid(tuple(snr_values), (gross_bps,), (bandwidth,), tuple(thresholds),
                     reps, base_seed=base_seed)
    return sweep_robustness(grid)


def knee_crossing(thresholds: Sequence[float], bers: Sequence[float], level: float = 0.5) -> float:
    """Threshold where BER first rises through `level` after its minimum.

    Linear interpolation between grid points; nan when it never rises.
    """
    th = np.asarray(thresholds, dtype=float)
    b = np.asarray(bers, dtype=float)
    order = np.argsort(th)
    th, b = th[order], b[order]
    i0 = int(np.argmin(b))
    for i in range(i0, th.size - 1):
        if b[i] < level <= b[i + 1]:
            return float(th[i] + (level - b[i]) * (th[i + 1] - th[i]) / (b[i + 1] - b[i]))
    return math.nan


@dataclass(frozen=True)
class CancellationRow:
    carrier: str
    gross_bps: float
    tau_m: float
    attenuation_db: float
    rho: float

    FIELDS = ("carrier", "gross_bps", "tau_m_ms", "attenuation_db", "rho")

    def as_record(self) -> list[str]:
        return [self.carrier, _num(self.gross_bps), f"{self.tau_m * 1e3:.4f}",
                f"{self.attenuation_db:.4f}", f"{self.rho:.5f}"]


def sweep_cancellation(carrier: CarrierKind | str = CarrierKind.WGN,
                       slot_rates: Iterable[float] = CANCELLATION_RATES,
                       tau_range: Iterable[float] = tuple(np.arange(0, 49) * 0.25e-3),
                       band: tuple[float, float] = CANCELLATION_BAND,
                       seeds: int = 20, payload_bits: int = 16,
                       base_seed: int = 0) -> list[CancellationRow]:
    """Relay-attack attenuation and autocorrelation of modulated AIC signals.

    For each rate, `seeds` random payloads are modulated and both
    quantities are averaged over them at every delay.
    """
    kind = CarrierKind(carrier)
    taus = sorted(float(t) for t in tau_range)
    rows = []
    for rate in sorted(float(r) for r in slot_rates):
        params = AicParams(band=band, slot_duration=1.0 / rate, carrier_kind=kind,
                           payload_length=payload_bits)
        att = np.zeros(len(taus))
        rho = np.zeros(len(taus))
        for s in range(seeds):
            rng = np.random.default_rng(trial_seed(base_seed, (rate, float(kind is CarrierKind.QPSK)), s))
            d = rng.integers(0, 2, payload_bits)
            x = modulate(build_frame(d), params, CarrierProcess(kind, int(rng.integers(0, 2 ** 63))))
            att += [attack_attenuation(x, t) for t in taus]
            rho += [autocorrelation_coefficient(x, t) for t in taus]
        rows.extend(CancellationRow(kind.value, rate, t, a / seeds, r / seeds)
                    for t, a, r in zip(taus, att, rho))
    return rows


@dataclass(frozen=True)
class OvershadowRow:
    d: int
    d_m: int | None
    p1: float
    p2: float
    binary: int
    ternary: Trit
    pairs: int

    FIELDS = ("d", "d_m", "p1_dbfs", "p2_dbfs", "binary", "ternary", "pairs")

    def as_record(self) -> list[str]:
        return [str(self.d), "-" if self.d_m is None else str(self.d_m),
                f"{self.p1:.2f}", f"{self.p2:.2f}", str(self.binary),
                str(self.ternary), str(self.pairs)]


def overshadow_table(noise_floor: float = -90.0, legit_snr: float = 20.0,
                     attacker_snr: float = 30.0, p_th: float = -80.0,
                     gross_bps: float = 50.0, payload_bits: int = 128,
                     seed: int = 0) -> list[OvershadowRow]:
    """Slot powers and decisions for every (d, d_M) combination.

    SNRs here are on-slot powers over the noise floor. A random legitimate
    payload is received once alone and once under a perfectly aligned
    attacker with an independent random payload; the linear slot powers of
    all pairs in each (d, d_M) class are averaged.
    """
    on_to_frame = 10.0 * math.log10(2.0)  # half of all slots are on
    params = AicParams(slot_duration=1.0 / gross_bps, noise_floor=noise_floor,
                       target_snr=legit_snr - on_to_frame, payload_length=payload_bits)
    rng = np.random.default_rng(seed)
    d = rng.integers(0, 2, payload_bits)
    d_m = rng.integers(0, 2, payload_bits)
    s_legit, s_att, s_noise = (int(s) for s in rng.integers(0, 2 ** 63, 3))
    fs = params.sample_rate
    lead = int(round(LEADING_SILENCE * fs))
    x = modulate(build_frame(d), params, CarrierProcess(CarrierKind.WGN, s_legit))
    x = Waveform(np.concatenate([np.zeros(lead), x.samples,
                                 np.zeros(int(round(TRAILING_SILENCE * fs)))]), fs)
    m = overshadow_signal(OvershadowAttack(tuple(d_m), noise_floor + attacker_snr - on_to_frame,
                                           params, alignment=lead, seed=s_att))
    noise = gen_noise(NoiseSpec(noise_floor, params.band, s_noise), x.duration, fs)

    rows = []
    for attacked in (False, True):
        y = superpose([x, m, noise] if attacked else [x, noise])
        rx = receive(y, params, LEADING_SILENCE, noise_floor=noise_floor)
        if not rx.frames:
            raise RuntimeError("overshadow simulation failed to synchronize")
        pairs = undb_array(rx.frames[0].powers[len(DELIMITER):]).reshape(-1, 2)
        for bit in (0, 1):
            for mb in ((0, 1) if attacked else (None,)):
                mask = d == bit if mb is None else (d == bit) & (d_m == mb)
                p1, p2 = (db(v) for v in pairs[mask].mean(axis=0))
                rows.append(OvershadowRow(bit, mb, p1, p2, decide_binary(p1, p2),
                                          decide_ternary(p1, p2, p_th), int(mask.sum())))
    # Per d: no attacker, then d_M = d, then the attempted flip.
    rows.sort(key=lambda r: (r.d, 0 if r.d_m is None else 1 + (r.d_m != r.d)))
    return rows


def undb_array(p_db: np.ndarray) -> np.ndarray:
    return np.where(np.isneginf(p_db), 0.0, 10.0 ** (np.asarray(p_db) / 10.0))


def write_csv(rows: Sequence, path: str | os.PathLike | None, seed: int,
              extra: str = "") -> str:
    """Metadata comment line, header, rows. Returns the text; writes it when `path` is set."""
    if not rows:
        raise ValueError("no rows to write")
    buf = io.StringIO()
    meta = f"# rule: {BER_RULE}; seed={int(seed)}"
    if extra:
        meta += f"; {extra}"
    buf.write(meta + "\n")
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(rows[0].FIELDS)
    for r in rows:
        out.writerow(r.as_record())
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    return text
