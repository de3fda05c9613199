"""Command-line interface: aic <subcommand> [options]."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import harness
from .adversary import CancellationAttack, InjectionAttack, OvershadowAttack
from .audio import WavFormatError, read_wav, spectrogram, write_spectrogram_csv, write_wav
from .channel import NoiseSpec, gen_noise, superpose
from .codec import as_bits, bit_rates, build_frame, modulate
from .pairing import LEADING_SILENCE, PairingSession, Verdict, run_pairing, transmitter_stream
from .receiver import Failure, demodulate
from .types import AicParams, CarrierKind, CarrierProcess, Waveform

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_BITS = 128


class UsageError(Exception):
    pass


def _band(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must look like LOW:HIGH, got {text!r}") from None
    return lo, hi


def _floats(text: str) -> tuple[float, ...]:
    """Comma list ("10,12,14") or inclusive range START:STOP:STEP."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return tuple(round(start + i * step, 9) for i in range(n))
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number list or START:STOP:STEP, "
                                         f"got {text!r}") from None


def _add_link(p: argparse.ArgumentParser, band=(16_000.0, 20_000.0), rate=200.0) -> None:
    p.add_argument("--snr", type=float, default=14.0, help="frame SNR over the noise floor (dB)")
    p.add_argument("--gross-bps", type=float, default=rate)
    p.add_argument("--band", type=_band, default=band, metavar="LOW:HIGH")
    p.add_argument("--noise-floor", type=float, default=-87.0, help="dBFS")
    p.add_argument("--threshold-db", type=float, default=11.0,
                   help="detection threshold over the noise floor (dB)")
    p.add_argument("--carrier", choices=[k.value for k in CarrierKind], default="wgn")
    p.add_argument("--bits", type=int, help="payload length (default 128, or that of --payload)")


def _add_payload(p: argparse.ArgumentParser) -> None:
    p.add_argument("--payload", help="bit string such as 1011; random bits when omitted")
    p.add_argument("--seed", type=int, default=0)


def _params(a: argparse.Namespace, payload_length: int | None = None) -> AicParams:
    try:
        return AicParams(band=a.band, slot_duration=1.0 / a.gross_bps,
                         carrier_kind=a.carrier, target_snr=a.snr, noise_floor=a.noise_floor,
                         detection_threshold=a.threshold_db,
                         payload_length=payload_length or a.bits or DEFAULT_BITS)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(str(exc)) from None


def _payload(a: argparse.Namespace) -> np.ndarray:
    if a.payload:
        try:
            d = as_bits(a.payload)
        except ValueError as exc:
            raise UsageError(f"--payload: {exc}") from None
        if a.bits is not None and a.bits != d.size:
            raise UsageError(f"--payload has {d.size} bits but --bits is {a.bits}")
        return d
    n = DEFAULT_BITS if a.bits is None else a.bits
    if n < 1:
        raise UsageError("--bits must be at least 1")
    return np.random.default_rng(a.seed).integers(0, 2, n).astype(np.uint8)


def cmd_tx(a: argparse.Namespace) -> int:
    d = _payload(a)
    p = _params(a, d.size)
    if p.carrier_kind is CarrierKind.WGN:
        x = transmitter_stream(d, p, a.reps, a.seed)
    else:
        # Periodic carriers are not allowed for pairing but can still be rendered.
        body = modulate(np.tile(build_frame(d), a.reps), p, CarrierProcess(p.carrier_kind, a.seed))
        lead = np.zeros(int(round(LEADING_SILENCE * p.sample_rate)))
        x = Waveform(np.concatenate([lead, body.samples]), p.sample_rate)
    if not a.clean:
        v = gen_noise(NoiseSpec(p.noise_floor, p.band, a.seed + 1), x.duration, p.sample_rate)
        x = superpose([x, v])
    clipped = write_wav(x, a.out)
    gross, net = bit_rates(p)
    print(json.dumps({"out": a.out, "payload": "".join(map(str, d.tolist())),
                      "duration_s": round(x.duration, 4), "gross_bps": gross,
                      "net_bps": round(net, 3), "clipped": clipped}))
    return EXIT_OK


def cmd_rx(a: argparse.Namespace) -> int:
    w = read_wav(a.wav)
    p = _params(a)
    report = demodulate(w, p, a.mode, leading_silence=a.leading_silence)
    print(json.dumps(report.to_dict(), ensure_ascii=False))
    return EXIT_OK if report.failure is Failure.NONE else EXIT_FAIL


def _attack(a: argparse.Namespace, p: AicParams, d: np.ndarray):
    if a.attack == "none":
        return None
    power = p.noise_floor + a.attacker_snr
    if a.attack == "overshadow":
        d_m = 1 - d if a.attacker_payload is None else as_bits(a.attacker_payload)
        return OvershadowAttack(tuple(d_m), power, p, repetitions=a.reps, seed=a.seed + 7)
    if a.attack == "inject":
        rng = np.random.default_rng(a.seed + 11)
        slots = rng.choice(a.reps * p.frame_slots, size=p.frame_slots // 4, replace=False)
        return InjectionAttack(tuple(slots), power, p, seed=a.seed + 7)
    return CancellationAttack(a.tau_m / 2, a.tau_m / 2)


def cmd_pair(a: argparse.Namespace) -> int:
    d = _payload(a)
    p = _params(a, d.size)
    if p.carrier_kind is not CarrierKind.WGN:
        raise UsageError("pairing requires the wgn carrier")
    session = PairingSession(tuple(d), p, a.reps, attack=_attack(a, p, d), seed=a.seed,
                             mode=a.mode)
    out = run_pairing(session)
    print(json.dumps({"verdict": out.verdict.value,
                      "received": None if out.received is None else "".join(map(str, out.received)),
                      "matches_sent": out.received == tuple(int(b) for b in d),
                      "receiver_offset_s": round(out.receiver_offset, 6),
                      "report": out.report.to_dict()}, ensure_ascii=False))
    return EXIT_OK if out.verdict is Verdict.SUCCESS else EXIT_FAIL


def _emit(rows, a: argparse.Namespace, extra: str = "") -> int:
    text = harness.write_csv(rows, a.out, a.seed, extra)
    if a.out is None:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_sweep_robustness(a: argparse.Namespace) -> int:
    grid = harness.SweepGrid(a.snr, a.gross_bps, a.bandwidth, a.threshold_db, a.reps,
                             a.bits, a.seed, a.mode)
    return _emit(harness.sweep_robustness(grid), a, f"mode={grid.mode.value}")


def cmd_sweep_threshold(a: argparse.Namespace) -> int:
    rows = harness.sweep_threshold(a.gross_bps, a.snr, a.threshold_db, a.reps, a.seed, a.bandwidth)
    return _emit(rows, a)


def cmd_sweep_cancellation(a: argparse.Namespace) -> int:
    taus = [t * 1e-3 for t in a.tau_ms]
    rows = []
    for kind in a.carrier:
        rows.extend(harness.sweep_cancellation(kind, a.gross_bps, taus, a.band, a.reps,
                                               a.bits, a.seed))
    return _emit(rows, a, f"band={a.band[0]:g}:{a.band[1]:g}")


def cmd_overshadow_table(a: argparse.Namespace) -> int:
    rows = harness.overshadow_table(a.noise_floor, a.snr, a.attacker_snr, a.p_th,
                                    a.gross_bps, a.bits, a.seed)
    return _emit(rows, a, f"p_th={a.p_th:g}")


def cmd_spectrogram(a: argparse.Namespace) -> int:
    s = spectrogram(read_wav(a.wav), a.resolution)
    if a.out is None:
        raise UsageError("spectrogram needs --out")
    write_spectrogram_csv(s, a.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aic", description="Acoustic integrity code toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tx", help="modulate a payload into a WAV file")
    _add_link(p)
    _add_payload(p)
    p.add_argument("--reps", type=int, default=1, help="back-to-back frame repetitions")
    p.add_argument("--clean", action="store_true", help="omit channel noise")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tx)

    p = sub.add_parser("rx", help="decode a WAV recording")
    p.add_argument("wav")
    _add_link(p)
    p.add_argument("--mode", choices=["binary", "ternary"], default="ternary")
    p.add_argument("--leading-silence", type=float, default=LEADING_SILENCE)
    p.set_defaults(func=cmd_rx)

    p = sub.add_parser("pair", help="simulate one pairing session")
    _add_link(p)
    _add_payload(p)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--mode", choices=["binary", "ternary"], default="ternary")
    p.add_argument("--attack", choices=["none", "overshadow", "inject", "cancel"], default="none")
    p.add_argument("--attacker-snr", type=float, default=24.0)
    p.add_argument("--attacker-payload")
    p.add_argument("--tau-m", type=float, default=1.5e-3, help="relay delay in seconds")
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("sweep-robustness", help="BER over an SNR/rate/bandwidth grid")
    p.add_argument("--snr", type=_floats, default=(14.0,))
    p.add_argument("--gross-bps", type=_floats, default=(200.0,))
    p.add_argument("--bandwidth", type=_floats, default=(4000.0,))
    p.add_argument("--threshold-db", type=_floats, default=(11.0,))
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--bits", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["binary", "ternary"], default="ternary")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep_robustness)

    p = sub.add_parser("sweep-threshold", help="BER against the detection threshold")
    p.add_argument("--gross-bps", type=float, default=220.0)
    p.add_argument("--snr", type=_floats, default=_floats("10:20:1"))
    p.add_argument("--threshold-db", type=_floats, default=_floats("0:30:0.5"))
    p.add_argument("--bandwidth", type=float, default=4000.0)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep_threshold)

    p = sub.add_parser("sweep-cancellation", help="relay-attack attenuation and autocorrelation")
    p.add_argument("--carrier", type=lambda s: tuple(CarrierKind(v) for v in s.split(",")),
                   default=(CarrierKind.WGN, CarrierKind.QPSK), help="wgn, qpsk or wgn,qpsk")
    p.add_argument("--gross-bps", type=_floats, default=harness.CANCELLATION_RATES)
    p.add_argument("--tau-ms", type=_floats, default=_floats("0:12:0.25"))
    p.add_argument("--band", type=_band, default=harness.CANCELLATION_BAND, metavar="LOW:HIGH")
    p.add_argument("--reps", type=int, default=20, help="random payloads per rate")
    p.add_argument("--bits", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep_cancellation)

    p = sub.add_parser("overshadow-table", help="decisions under an overshadowing attacker")
    p.add_argument("--noise-floor", type=float, default=-90.0)
    p.add_argument("--snr", type=float, default=20.0, help="legitimate on-slot SNR (dB)")
    p.add_argument("--attacker-snr", type=float, default=30.0)
    p.add_argument("--p-th", type=float, default=-80.0, help="absolute threshold (dBFS)")
    p.add_argument("--gross-bps", type=float, default=50.0)
    p.add_argument("--bits", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_overshadow_table)

    p = sub.add_parser("spectrogram", help="WAV to spectrogram CSV")
    p.add_argument("wav")
    p.add_argument("--resolution", type=float, default=50.0, help="Hz")
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectrogram)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, WavFormatError, OSError, ValueError) as exc:
        print(f"aic {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
