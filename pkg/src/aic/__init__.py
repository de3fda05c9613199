"""Acoustic integrity codes: OOK over a stochastic carrier with tamper-evident decoding."""

from .channel import ChannelSpec, Geometry, NoiseSpec, apply_los, gen_noise, measure_snr, superpose
from .codec import bit_rates, build_frame, manchester_encode, modulate, synthesize_carrier
from .receiver import DecodeReport, Failure, Mode, Trit, demodulate
from .types import AicParams, CarrierKind, CarrierProcess, Waveform

__version__ = "0.1.0"

__all__ = [
    "AicParams", "CarrierKind", "CarrierProcess", "ChannelSpec", "DecodeReport", "Failure",
    "Geometry", "Mode", "NoiseSpec", "Trit", "Waveform", "apply_los", "bit_rates",
    "build_frame", "demodulate", "gen_noise", "manchester_encode", "measure_snr", "modulate",
    "superpose", "synthesize_carrier",
]
