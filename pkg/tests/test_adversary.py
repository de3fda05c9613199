import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import signal as sps

from aic.adversary import (ATTENUATION_CAP_DB, CancellationAttack, InjectionAttack,
                           OvershadowAttack, attack_attenuation, attack_signal,
                           autocorrelation_coefficient, cancellation_delay,
                           cancellation_delay_bound, injection_signal, overshadow_signal,
                           relay_cancellation_signal)
from aic.channel import Geometry, NoiseSpec, gen_noise, superpose
from aic.codec import build_frame, modulate
from aic.receiver import Failure, demodulate
from aic.types import AicParams, CarrierProcess, Waveform, power_dbfs

FS = 44_100.0
LOW_BAND = (200.0, 800.0)


def _qpsk_signal(seed=0, rate=5.46, bits=16):
    p = AicParams(band=LOW_BAND, slot_duration=1 / rate, carrier_kind="qpsk",
                  payload_length=bits)
    d = np.random.default_rng(seed).integers(0, 2, bits)
    return modulate(build_frame(d), p, CarrierProcess("qpsk", seed))


def _wgn_signal(seed=0, rate=218.0, bits=16):
    p = AicParams(band=LOW_BAND, slot_duration=1 / rate, payload_length=bits)
    d = np.random.default_rng(seed).integers(0, 2, bits)
    return modulate(build_frame(d), p, CarrierProcess("wgn", seed))


# delays

def test_cancellation_delay_arithmetic():
    att = CancellationAttack(tau_1=2e-3, tau_2=2e-3)
    assert cancellation_delay(att, 1e-3) == pytest.approx(3e-3)


def test_cancellation_delay_on_path_is_zero():
    att = CancellationAttack(tau_1=0.6e-3, tau_2=0.4e-3)
    assert cancellation_delay(att, 1e-3) == pytest.approx(0.0)


def test_cancellation_attack_rejects_negative_delay():
    with pytest.raises(ValueError):
        CancellationAttack(tau_1=1e-3, tau_2=1e-3, tau_r=-1e-4)


@pytest.mark.parametrize("r,ab,expected", [(0.4, 0.4, 1.166e-3), (0.2, 0.4, 0.0),
                                            (1.0, 0.5, 4.373e-3)])
def test_cancellation_delay_bound(r, ab, expected):
    g = Geometry(distance_ab=ab, safe_radius=r)
    assert cancellation_delay_bound(g) == pytest.approx(expected, abs=1e-6)


def test_cancellation_delay_bound_oracle():
    # (2r - AB) / c_s computed independently
    assert cancellation_delay_bound(Geometry(0.4, 0.4, 343.0)) == pytest.approx(0.4 / 343.0)


def test_degenerate_geometry_warns_and_clamps():
    with pytest.warns(RuntimeWarning):
        assert cancellation_delay_bound(Geometry(distance_ab=1.0, safe_radius=0.1)) == 0.0


# relay cancellation

def test_relay_at_zero_delay_cancels_completely():
    x = _wgn_signal(1)
    y = superpose([x, relay_cancellation_signal(x, 0.0)])
    assert power_dbfs(y.samples) <= -100.0


def test_relay_is_negated_delayed_copy():
    x = Waveform([1.0, 2.0, 3.0], FS)
    m = relay_cancellation_signal(x, 2 / FS)
    assert m.samples.tolist() == [0.0, 0.0, -1.0, -2.0, -3.0]


def test_relay_rejects_negative_delay():
    with pytest.raises(ValueError):
        relay_cancellation_signal(_wgn_signal(), -1e-3)


def test_relay_through_attack_signal():
    x = _wgn_signal(2)
    att = CancellationAttack(tau_1=1.5e-3, tau_2=1.5e-3)
    m = attack_signal(att, x, tau_a=1e-3)
    expected = relay_cancellation_signal(x, 2e-3)
    assert np.array_equal(m.samples, expected.samples)


# attenuation and autocorrelation

def test_attenuation_capped_at_zero_delay():
    assert attack_attenuation(_wgn_signal(3), 0.0) == ATTENUATION_CAP_DB


def test_wgn_attenuation_negative_at_2ms():
    assert attack_attenuation(_wgn_signal(4), 2e-3) < 0.0


def test_wgn_attenuation_negative_beyond_bound():
    bound = cancellation_delay_bound(Geometry(0.4, 0.4))
    for seed in range(3):
        x = _wgn_signal(seed)
        for tau in np.arange(bound, 12e-3, 0.25e-3):
            assert attack_attenuation(x, tau) < 0.0


def test_qpsk_attenuation_negative_at_half_period():
    assert attack_attenuation(_qpsk_signal(5), 1e-3) < 0.0


def test_qpsk_attenuation_positive_at_period():
    x = _qpsk_signal(6)
    a = attack_attenuation(x, 2e-3)
    rho = autocorrelation_coefficient(x, 2e-3)
    assert a >= 5.0
    assert 0.7 <= rho <= 1.0
    assert a == pytest.approx(-10 * math.log10(2 * (1 - rho)), abs=0.5)


def test_qpsk_attenuation_peaks_at_carrier_period_multiples():
    x = _qpsk_signal(7)
    taus = np.arange(1, int(0.0055 * FS)) / FS
    a = np.array([attack_attenuation(x, t) for t in taus])
    peaks, _ = sps.find_peaks(a, height=0.0)
    found = taus[peaks]
    assert found.size == 2
    for k, t in enumerate(found, start=1):
        assert t == pytest.approx(k / 500.0, rel=0.05)


def test_autocorrelation_at_zero_is_one():
    assert autocorrelation_coefficient(_wgn_signal(8), 0.0) == 1.0


def test_autocorrelation_rejects_zero_power_and_long_lag():
    with pytest.raises(ValueError):
        autocorrelation_coefficient(Waveform.zeros(100, FS), 1e-4)
    with pytest.raises(ValueError):
        autocorrelation_coefficient(Waveform([1.0, 2.0], FS), 1e-3)
    with pytest.raises(ValueError):
        attack_attenuation(Waveform([1.0, 2.0], FS), 1e-3)


@given(st.integers(0, 10_000), st.integers(1, 200), st.floats(0.0, 0.999))
def test_attenuation_positive_iff_rho_above_half(seed, lag, mix):
    # A stationary process whose correlation at `lag` is tuned through 0.5.
    rng = np.random.default_rng(seed)
    n = 20_000
    base = rng.standard_normal(n + lag)
    fresh = rng.standard_normal(n + lag)
    x = math.sqrt(mix) * base + math.sqrt(1 - mix) * fresh
    x[lag:] = math.sqrt(mix) * base[:-lag] + math.sqrt(1 - mix) * fresh[lag:]
    w = Waveform(x, FS)
    tau = lag / FS
    rho = autocorrelation_coefficient(w, tau)
    a = attack_attenuation(w, tau)
    if abs(rho - 0.5) > 0.05:
        assert (a > 0) == (rho > 0.5)


@given(st.integers(0, 10_000), st.floats(0.1e-3, 10e-3))
def test_autocorrelation_bounded(seed, tau):
    w = _wgn_signal(seed % 50, bits=4)
    assert -1.0 <= autocorrelation_coefficient(w, tau) <= 1.0


# overshadowing

def test_overshadow_superposition_power_consistency():
    # -70 dBFS legitimate plus -60 dBFS attacker on slots
    assert 10 * math.log10(1e-7 + 1e-6) == pytest.approx(-59.59, abs=0.01)


def test_overshadow_signal_power_and_alignment():
    p = AicParams()
    d_m = np.random.default_rng(1).integers(0, 2, 128)
    att = OvershadowAttack(tuple(d_m), -77.0, p, alignment=500)
    m = overshadow_signal(att)
    assert len(m) == 500 + p.frame_samples
    assert np.all(m.samples[:500] == 0.0)
    assert power_dbfs(m.samples[500:]) == pytest.approx(-77.0, abs=0.01)


def test_overshadow_rejects_bad_payload_and_power():
    p = AicParams(payload_length=4)
    with pytest.raises(ValueError):
        overshadow_signal(OvershadowAttack((1, 0, 1), -70.0, p))
    with pytest.raises(ValueError):
        OvershadowAttack((1, 0, 1, 1), 1.0, p)


def test_injection_signal_hits_only_chosen_slots():
    p = AicParams()
    inj = injection_signal(InjectionAttack((2, 5), -70.0, p))
    L = p.slot_samples
    blocks = inj.samples.reshape(-1, L)
    assert blocks.shape[0] == 6
    for i, blk in enumerate(blocks):
        assert (power_dbfs(blk) > -math.inf) == (i in (2, 5))


def _legit(d, p, seed):
    x = modulate(build_frame(d), p, CarrierProcess("wgn", seed))
    body = np.concatenate([np.zeros(8820), x.samples, np.zeros(2205)])
    w = Waveform(body, FS)
    return superpose([w, gen_noise(NoiseSpec(p.noise_floor, p.band, seed + 1), w.duration, FS)])


def test_silent_attacker_leaves_payload_intact():
    p = AicParams()
    d = np.random.default_rng(2).integers(0, 2, 128)
    y = _legit(d, p, 20)
    att = OvershadowAttack(tuple(1 - d), -300.0, p, alignment=8820)
    r = demodulate(superpose([y, overshadow_signal(att)]), p)
    assert r.failure is Failure.NONE and r.data.tolist() == d.tolist()


@pytest.mark.parametrize("excess_db", [-10.0, 0.0, 10.0, 20.0, 30.0])
def test_overshadow_ternary_never_yields_attacker_payload(excess_db):
    p = AicParams()
    rng = np.random.default_rng(int(excess_db) + 50)
    d = rng.integers(0, 2, 128)
    d_m = d.copy()
    d_m[rng.choice(128, 3, replace=False)] ^= 1
    y = _legit(d, p, 30)
    att = OvershadowAttack(tuple(d_m), p.frame_power_dbfs + excess_db, p, alignment=8820, seed=31)
    r = demodulate(superpose([y, overshadow_signal(att)]), p, "ternary")
    assert r.data is None or r.data.tolist() != d_m.tolist()
    if excess_db >= 0:
        assert r.failure is not Failure.NONE


def test_overshadow_binary_yields_attacker_payload():
    p = AicParams()
    rng = np.random.default_rng(60)
    d = rng.integers(0, 2, 128)
    d_m = 1 - d
    y = _legit(d, p, 40)
    att = OvershadowAttack(tuple(d_m), p.frame_power_dbfs + 10, p, alignment=8820, seed=41)
    r = demodulate(superpose([y, overshadow_signal(att)]), p, "binary")
    assert r.failure is Failure.NONE and r.data.tolist() == d_m.tolist()


def test_attack_signal_rejects_unknown_attack():
    with pytest.raises(TypeError):
        attack_signal("jam", _wgn_signal())
