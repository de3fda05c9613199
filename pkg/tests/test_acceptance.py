"""Acceptance criteria. Each test carries a `criterion` marker; the terminal
summary prints one PASS/FAIL line per criterion with its measured values."""

import math
import time

import numpy as np
import pytest

from aic.adversary import (CancellationAttack, InjectionAttack, OvershadowAttack,
                           cancellation_delay_bound)
from aic.audio import read_wav, write_wav
from aic.channel import ChannelSpec, Geometry, NoiseSpec, gen_noise
from aic.cli import main
from aic.harness import (SweepGrid, knee_crossing, overshadow_table, simulate_reception,
                         sweep_cancellation, sweep_robustness, sweep_threshold, write_csv)
from aic.pairing import PairingOutcome, PairingSession, Verdict, run_pairing
from aic.receiver import Failure, Mode, Trit, decode_reception
from aic.types import AicParams, Waveform

HEADLINE = AicParams.at_rate(200, target_snr=14.0)


@pytest.mark.criterion(1, "robustness headline: ~100 bps net, SNR 14 dB, BER <= 0.5%")
def test_c1_robustness_headline(record_property):
    t0 = time.perf_counter()
    rows = sweep_robustness(SweepGrid((14.0,), (200.0,), (4000.0,), (11.0,), 200))
    elapsed = time.perf_counter() - t0
    record_property("ber", f"{rows[0].ber:.5f}")
    record_property("runtime_s", f"{elapsed:.1f}")
    assert HEADLINE.band == (16_000.0, 20_000.0)
    assert rows[0].trials == 200
    assert rows[0].ber <= 0.005
    assert elapsed <= 300.0


@pytest.mark.criterion(2, "operating envelope: 440 bps, 4 kHz, SNR 12 dB, BER < 1%")
def test_c2_operating_envelope(record_property):
    rows = sweep_robustness(SweepGrid((12.0,), (440.0,), (4000.0,), (11.0,), 200))
    record_property("ber", f"{rows[0].ber:.5f}")
    assert rows[0].ber < 0.01


@pytest.mark.criterion(3, "transmission time: 128 bits at ~100 bps net, 1.31 s +/- 0.05")
def test_c3_frame_duration(record_property):
    p = AicParams.at_rate(200, payload_length=128)
    duration = p.frame_samples / p.sample_rate
    record_property("duration_s", f"{duration:.4f}")
    assert p.frame_slots == 262
    assert duration == pytest.approx(1.31, abs=0.05)


@pytest.mark.criterion(4, "threshold knee: BER crosses 50% within 1.5 dB of SNR + 3")
def test_c4_threshold_knee(record_property):
    snrs = tuple(float(s) for s in range(10, 21))
    rows = sweep_threshold(220.0, snrs, tuple(np.arange(0.0, 30.01, 0.5)), reps=200)
    worst = 0.0
    knees = {}
    for snr in snrs:
        curve = sorted((r.threshold, r.ber) for r in rows if r.snr == snr)
        knee = knee_crossing([c[0] for c in curve], [c[1] for c in curve])
        knees[snr] = knee
        worst = max(worst, abs(knee - (snr + 3.0))) if not math.isnan(knee) else math.inf
    record_property("max_dev_db", f"{worst:.2f}")
    record_property("knees", " ".join(f"{k:.0f}:{v:.2f}" for k, v in knees.items()))
    assert worst <= 1.5


@pytest.mark.criterion(5, "WGN cancellation: attenuation < 0 dB and |rho| < 0.1 (20 seeds)")
def test_c5_wgn_cancellation(record_property):
    bound = cancellation_delay_bound(Geometry(distance_ab=0.4, safe_radius=0.4))
    assert bound == pytest.approx(1.166e-3, abs=1e-6)
    taus = tuple(sorted({1.17e-3, *np.arange(1.25e-3, 12.0001e-3, 0.25e-3)}))
    rows = sweep_cancellation("wgn", (5.46, 21.8, 109.0, 218.0), taus, seeds=20)
    max_att = max(r.attenuation_db for r in rows)
    max_rho = max(abs(r.rho) for r in rows if r.tau_m >= 1.5e-3 - 1e-12)
    record_property("max_attenuation_db", f"{max_att:.2f}")
    record_property("max_abs_rho", f"{max_rho:.3f}")
    assert {r.gross_bps for r in rows} == {5.46, 21.8, 109.0, 218.0}
    assert max_att < 0.0
    assert max_rho < 0.1


@pytest.mark.criterion(6, "QPSK cancellation: attenuation >= 5 dB, rho >= 0.7 at 2 and 4 ms")
def test_c6_qpsk_cancellation(record_property):
    rows = sweep_cancellation("qpsk", (5.46,), (2e-3, 4e-3), seeds=20)
    for r in rows:
        record_property(f"a@{r.tau_m * 1e3:.0f}ms", f"{r.attenuation_db:.2f}")
        record_property(f"rho@{r.tau_m * 1e3:.0f}ms", f"{r.rho:.3f}")
    assert len(rows) == 2
    for r in rows:
        assert r.attenuation_db >= 5.0
        assert r.rho >= 0.7


COMBINED = 10 * math.log10(1e-7 + 1e-6)
EXPECTED_TABLE = [
    # d, d_M, p1, p2, binary, ternary
    (0, None, -90.0, -70.0, 0, Trit.ZERO),
    (0, 0, -90.0, -59.6, 0, Trit.ZERO),
    (0, 1, -60.0, -70.0, 1, Trit.EPSILON),
    (1, None, -70.0, -90.0, 1, Trit.ONE),
    (1, 1, -59.6, -90.0, 1, Trit.ONE),
    (1, 0, -70.0, -60.0, 0, Trit.EPSILON),
]


@pytest.mark.criterion(7, "overshadowing table: six rows, powers +/- 1.5 dB, ternary exact")
def test_c7_overshadow_table(record_property):
    rows = overshadow_table(noise_floor=-90.0, legit_snr=20.0, attacker_snr=30.0, p_th=-80.0)
    assert len(rows) == 6
    worst = 0.0
    for r, (d, d_m, p1, p2, binary, ternary) in zip(rows, EXPECTED_TABLE):
        assert (r.d, r.d_m) == (d, d_m)
        assert r.binary == binary
        assert r.ternary is ternary
        for got, want in ((r.p1, p1), (r.p2, p2)):
            worst = max(worst, abs(got - want))
            assert got == pytest.approx(want, abs=1.5)
            if want == -59.6:
                assert got == pytest.approx(COMBINED, abs=0.5)
    record_property("max_dev_db", f"{worst:.2f}")
    assert COMBINED == pytest.approx(-59.59, abs=0.01)


def _soundness_trial(i: int) -> tuple[str, tuple[int, ...], PairingOutcome]:
    rng = np.random.default_rng([8, i])
    p = HEADLINE
    d = tuple(int(b) for b in rng.integers(0, 2, p.payload_length))
    kind = ("overshadow", "inject", "cancel")[i % 3]
    channel = ChannelSpec()
    if kind == "overshadow":
        d_m = np.array(d)
        flips = rng.choice(p.payload_length, int(rng.integers(1, p.payload_length + 1)), replace=False)
        d_m[flips] ^= 1
        align = 0 if rng.random() < 0.5 else int(rng.integers(0, p.slot_samples))
        att = OvershadowAttack(tuple(d_m), p.frame_power_dbfs + float(rng.uniform(-10, 30)), p,
                               alignment=align, repetitions=4, seed=int(rng.integers(2 ** 31)))
    elif kind == "inject":
        n = int(rng.integers(1, 3 * p.frame_slots))
        slots = rng.choice(3 * p.frame_slots, n, replace=False)
        att = InjectionAttack(tuple(slots), p.frame_power_dbfs + float(rng.uniform(-10, 30)), p,
                              seed=int(rng.integers(2 ** 31)))
    else:
        tau_a = 0.4 / 343.0
        channel = ChannelSpec(delay=tau_a)
        tau_m = float(rng.uniform(1.17e-3, 12e-3))
        att = CancellationAttack(tau_1=(tau_m + tau_a) / 2, tau_2=(tau_m + tau_a) / 2)
    session = PairingSession(d, p, channel=channel, attack=att, seed=int(rng.integers(2 ** 31)))
    return kind, d, run_pairing(session)


@pytest.mark.criterion(8, "soundness: 1000 mixed attacks, zero forgeries; binary witness")
def test_c8_soundness(record_property):
    forgeries = 0
    verdicts: dict[str, int] = {}
    for i in range(1000):
        kind, d, out = _soundness_trial(i)
        key = f"{kind}/{out.verdict.value}"
        verdicts[key] = verdicts.get(key, 0) + 1
        if out.verdict is Verdict.SUCCESS and out.received != d:
            forgeries += 1
        assert (out.verdict is Verdict.SUCCESS) == (out.received is not None)
    record_property("forgeries", forgeries)
    record_property("verdicts", " ".join(f"{k}={v}" for k, v in sorted(verdicts.items())))

    p = HEADLINE
    d = tuple(int(b) for b in np.random.default_rng(99).integers(0, 2, 128))
    d_m = tuple(1 - b for b in d)
    att = OvershadowAttack(d_m, p.frame_power_dbfs + 10, p, repetitions=3, seed=5)
    witness = run_pairing(PairingSession(d, p, attack=att, seed=99, mode=Mode.BINARY))
    record_property("binary_witness", witness.received == d_m)
    assert forgeries == 0
    assert witness.verdict is Verdict.SUCCESS and witness.received == d_m


@pytest.mark.criterion(9, "deterministic reproducibility: byte-identical CSV reruns")
def test_c9_reproducibility(tmp_path, record_property):
    def runs():
        yield "robustness", lambda: write_csv(sweep_robustness(
            SweepGrid((10.0, 14.0), (200.0, 440.0), (2000.0, 4000.0), (9.0, 11.0), 5,
                      base_seed=42)), None, 42)
        yield "threshold", lambda: write_csv(sweep_threshold(
            220.0, (10.0, 20.0), (0.0, 11.0, 23.0), reps=5, base_seed=42), None, 42)
        yield "cancellation", lambda: write_csv(sweep_cancellation(
            "wgn", (109.0,), (0.0, 2e-3), seeds=3, base_seed=42), None, 42) + write_csv(
            sweep_cancellation("qpsk", (5.46,), (2e-3,), seeds=3, base_seed=42), None, 42)
        yield "overshadow", lambda: write_csv(overshadow_table(seed=42), None, 42)

    checked = []
    for name, run in runs():
        first, second = run().encode("utf-8"), run().encode("utf-8")
        assert first == second, name
        checked.append(name)

    files = []
    for k in range(2):
        out = tmp_path / f"cli{k}.csv"
        assert main(["sweep-robustness", "--snr", "12,14", "--reps", "3", "--seed", "42",
                     "--out", str(out)]) == 0
        files.append(out.read_bytes())
    assert files[0] == files[1]
    checked.append("cli")
    record_property("identical", "+".join(checked))


@pytest.mark.criterion(10, "round trips: WAV <= 1 LSB, noise +/- 0.5 dB, codec exact at 20 dB")
def test_c10_round_trips(tmp_path, record_property):
    rng = np.random.default_rng(10)
    x = Waveform(rng.uniform(-1.0, 1.0, 100_000), 44_100.0)
    path = tmp_path / "rt.wav"
    write_wav(x, path)
    wav_err = float(np.max(np.abs(read_wav(path).samples - x.samples)))
    assert wav_err <= 2.0 ** -15

    noise_dev = 0.0
    for seed in range(100):
        v = gen_noise(NoiseSpec(-87.0, (16_000.0, 20_000.0), seed), 1.0, 44_100.0)
        noise_dev = max(noise_dev, abs(v.power_dbfs() + 87.0))
    assert noise_dev <= 0.5

    failures = 0
    for trial in range(500):
        n = int(rng.integers(1, 257))
        p = AicParams.at_rate(200, target_snr=20.0, payload_length=n)
        d, rx = simulate_reception(p, int(rng.integers(2 ** 63)))
        rep = decode_reception(rx, p)
        if rep.failure is not Failure.NONE or rep.data.tolist() != d.tolist():
            failures += 1
    record_property("wav_max_err", f"{wav_err:.2e}")
    record_property("noise_max_dev_db", f"{noise_dev:.3f}")
    record_property("codec_failures", failures)
    assert failures == 0

