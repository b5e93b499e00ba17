import numpy as np
import pytest

from hirs_relay.model import (
    ChannelSet,
    ElementPartition,
    Geometry,
    NetworkState,
    SystemConfig,
    achievable_rate,
    dbm_to_watts,
    draw_channels,
    evaluate_snr,
    feasibility_report,
    is_feasible,
    path_loss_db,
    power_irs_slot1,
    power_irs_slot2,
    power_relay,
    snr_terms,
    watts_to_dbm,
)

from reference import random_instance, reference_powers, reference_snr


def unit_channels(M=1, N=1):
    return ChannelSet(
        h_si=np.ones(N), h_sr=np.ones(M), H_ir=np.ones((M, N)), h_rd=np.ones(M), h_id=np.ones(N)
    )


# --- units and path loss ----------------------------------------------------


def test_dbm_conversion():
    assert dbm_to_watts(30) == pytest.approx(1.0)
    assert dbm_to_watts(-80) == pytest.approx(1e-11)
    assert watts_to_dbm(2.0) == pytest.approx(33.0103, abs=1e-4)


@pytest.mark.parametrize("d, alpha, expected", [(1.0, 2.0, -30.0), (10.0, 2.0, -50.0), (100.0, 3.0, -90.0)])
def test_path_loss_db(d, alpha, expected):
    assert path_loss_db(d, alpha) == pytest.approx(expected, abs=1e-12)


def test_path_loss_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        path_loss_db(0.0, 2.0)


def test_default_geometry_path_loss():
    pl = Geometry().path_loss()
    # S=(0,0,0) to IRS=(-10,50,20): d^2 = 3000, alpha 2
    assert pl["si"] == pytest.approx(3.333333333333332e-07, rel=1e-12)
    # relay=(10,50,10) to IRS: d^2 = 500, alpha 2
    assert pl["ir"] == pytest.approx(2.0000000000000003e-06, rel=1e-12)
    # S to relay uses alpha 3
    d_sr = np.sqrt(10**2 + 50**2 + 10**2)
    assert pl["sr"] == pytest.approx(1e-3 * d_sr**-3.0, rel=1e-12)


# --- config -----------------------------------------------------------------


def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        SystemConfig(K=5, N=4)
    with pytest.raises(ValueError):
        SystemConfig(P_s=0.0)
    with pytest.raises(ValueError):
        SystemConfig(sigma2=-1.0)
    with pytest.raises(ValueError):
        SystemConfig(P_i=-1.0)
    SystemConfig(P_i=0.0)


def test_config_from_dbm():
    cfg = SystemConfig.from_dbm(P_s_dbm=10, P_r_dbm=30, P_i_dbm=40)
    assert cfg.gamma_s == pytest.approx(1e-2 / 1e-11)
    assert cfg.gamma_r == pytest.approx(1e11)
    assert cfg.gamma_i == pytest.approx(1e12)


# --- channels and partitions ------------------------------------------------


def test_draw_channels_shapes_and_determinism():
    cfg = SystemConfig(M=2, N=32, K=4)
    ch = draw_channels(7, Geometry(), cfg)
    assert ch.h_si.shape == (32,)
    assert ch.h_sr.shape == (2,)
    assert ch.H_ir.shape == (2, 32)
    assert ch.h_rd.shape == (2,)
    assert ch.h_id.shape == (32,)
    again = draw_channels(7, Geometry(), cfg)
    for name in ("h_si", "h_sr", "H_ir", "h_rd", "h_id"):
        assert np.array_equal(getattr(ch, name), getattr(again, name))
    assert ch.digest() == again.digest()


def test_channel_second_moment_matches_path_loss():
    cfg = SystemConfig(M=1, N=100_000, K=0)
    ch = draw_channels(11, Geometry(), cfg)
    emp = np.mean(np.abs(ch.h_si) ** 2)
    assert emp == pytest.approx(Geometry().path_loss()["si"], rel=0.02)


def test_channels_are_immutable():
    ch = unit_channels(2, 3)
    with pytest.raises(ValueError):
        ch.h_si[0] = 2.0


def test_channel_shape_validation():
    with pytest.raises(ValueError):
        ChannelSet(h_si=np.ones(3), h_sr=np.ones(2), H_ir=np.ones((2, 4)), h_rd=np.ones(2), h_id=np.ones(4))


def test_partition_random_counts():
    part = ElementPartition.random(32, 4, 3)
    assert part.K == 4 and part.N == 32
    assert len(part.active) == 4 and len(part.passive) == 28
    assert np.array_equal(part.E, np.diag(part.e))
    assert np.allclose(part.E + part.E_bar, np.eye(32))


def test_partition_from_indices():
    part = ElementPartition.from_indices(5, [1, 3])
    assert list(part.active) == [1, 3]
    with pytest.raises(ValueError):
        ElementPartition.from_indices(5, [7])


# --- SNR and rate -----------------------------------------------------------


def test_snr_zero_relay():
    ch = unit_channels(2, 3)
    st = NetworkState(np.zeros((2, 2)), np.ones(3), np.ones(3))
    assert evaluate_snr(st, ch, ElementPartition.from_indices(3, [0]), SystemConfig(M=2, N=3, K=1)) == 0.0


@pytest.mark.parametrize("a", [0.1, 1.0, 3.0])
def test_snr_unit_channels(a):
    # u = 1 + 1 = 2 and v = 1 + 1 = 2, so |v a u|^2 = 16 a^2 and ||v a||^2 = 4 a^2
    cfg = SystemConfig(M=1, N=1, K=0, P_s=1e-9, sigma2=1e-11)
    st = NetworkState(np.array([[a]]), np.ones(1), np.ones(1))
    snr = evaluate_snr(st, unit_channels(), ElementPartition.from_indices(1, []), cfg)
    assert snr == pytest.approx(16 * cfg.gamma_s * a**2 / (4 * a**2 + 1), rel=1e-13)


def test_snr_matches_frozen_oracle_value():
    rng = np.random.default_rng(20240501)
    ch, part, st = random_instance(rng, 2, 4, 2)
    cfg = SystemConfig(M=2, N=4, K=2, P_s=10.0, sigma2=1.0)
    assert evaluate_snr(st, ch, part, cfg) == pytest.approx(18.61766043120891, rel=1e-12)
    powers = (power_irs_slot1(st, ch, part, cfg), power_relay(st, ch, part, cfg), power_irs_slot2(st, ch, part, cfg))
    assert powers == pytest.approx((12.495886284673249, 224.67614350317518, 342.44132441425955), rel=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_snr_and_powers_match_signal_chain(seed):
    rng = np.random.default_rng(seed)
    M, N = rng.integers(1, 4), rng.integers(1, 7)
    K = rng.integers(0, N + 1)
    ch, part, st = random_instance(rng, M, N, K)
    cfg = SystemConfig(M=M, N=N, K=K, P_s=3.0, sigma2=1.0)
    ref = reference_snr(st.A, st.theta1, st.theta2, part.e, ch, cfg.gamma_s)
    assert evaluate_snr(st, ch, part, cfg) == pytest.approx(ref, rel=1e-10)
    p_ref = reference_powers(st.A, st.theta1, st.theta2, part.e, ch, cfg.gamma_s)
    got = (power_irs_slot1(st, ch, part, cfg), power_relay(st, ch, part, cfg), power_irs_slot2(st, ch, part, cfg))
    assert got == pytest.approx(p_ref, rel=1e-10)


def test_snr_without_active_elements_drops_injected_noise():
    rng = np.random.default_rng(5)
    ch, _, st = random_instance(rng, 2, 5, 0)
    part = ElementPartition.from_indices(5, [])
    cfg = SystemConfig(M=2, N=5, K=0, P_s=2.0, sigma2=1.0)
    num, (irs1, relay, irs2, one) = snr_terms(st, ch, part, cfg)
    assert irs1 == 0.0 and irs2 == 0.0 and one == 1.0
    w = (ch.h_rd.conj() + (ch.h_id.conj() * st.theta2) @ ch.H_ir.conj().T) @ st.A
    assert relay == pytest.approx(np.linalg.norm(w) ** 2, rel=1e-12)


@pytest.mark.parametrize("snr, rate", [(0.0, 0.0), (1.0, 0.5), (3.0, 1.0)])
def test_rate_values(snr, rate):
    assert achievable_rate(snr) == pytest.approx(rate)


def test_rate_rejects_negative_snr():
    with pytest.raises(ValueError):
        achievable_rate(-1.0)


# --- power expressions -----------------------------------------------------


def test_irs_slot1_power_special_cases():
    rng = np.random.default_rng(1)
    ch, _, st = random_instance(rng, 2, 4, 0)
    cfg = SystemConfig(M=2, N=4, K=0, P_s=5.0, sigma2=1.0)
    assert power_irs_slot1(st, ch, ElementPartition.from_indices(4, []), cfg) == 0.0
    full = ElementPartition.from_indices(4, range(4))
    ones = NetworkState(st.A, np.ones(4), np.ones(4))
    expected = cfg.gamma_s * np.sum(np.abs(ch.h_si) ** 2) + 4
    assert power_irs_slot1(ones, ch, full, cfg.replace(K=4)) == pytest.approx(expected, rel=1e-12)


def test_relay_and_slot2_power_special_cases():
    rng = np.random.default_rng(2)
    ch, part, st = random_instance(rng, 2, 4, 2)
    cfg = SystemConfig(M=2, N=4, K=2, P_s=5.0, sigma2=1.0)
    zero = NetworkState(np.zeros((2, 2)), st.theta1, st.theta2)
    assert power_relay(zero, ch, part, cfg) == 0.0
    passive = ElementPartition.from_indices(4, [])
    assert power_irs_slot2(st, ch, passive, cfg.replace(K=0)) == 0.0
    # identity relay with the IRS reflection switched off
    off = NetworkState(np.eye(2), np.zeros(4), st.theta2)
    assert power_relay(off, ch, part, cfg) == pytest.approx(cfg.gamma_s * np.sum(np.abs(ch.h_sr) ** 2) + 2, rel=1e-12)


def test_feasibility_report_and_zero_budget():
    rng = np.random.default_rng(3)
    ch, part, st = random_instance(rng, 2, 4, 2)
    cfg = SystemConfig(M=2, N=4, K=2, P_s=1.0, P_r=1e6, P_i=1e6, sigma2=1.0)
    rep = feasibility_report(st, ch, part, cfg)
    assert set(rep) == {"unit_modulus", "irs_slot1", "relay", "irs_slot2"}
    assert is_feasible(st, ch, part, cfg)
    starved = feasibility_report(st, ch, part, cfg.replace(P_i=0.0))
    assert starved["irs_slot1"] > 0 and not is_feasible(st, ch, part, cfg.replace(P_i=0.0))


def test_unit_modulus_violation_is_reported():
    rng = np.random.default_rng(4)
    ch, part, st = random_instance(rng, 2, 4, 2)
    th = st.theta1.copy()
    th[part.passive[0]] *= 1.5
    bad = NetworkState(st.A, th, st.theta2)
    assert feasibility_report(bad, ch, part, SystemConfig(M=2, N=4, K=2))["unit_modulus"] == pytest.approx(0.5)
    assert not bad.check_passive_unit_modulus(part)


def test_dimension_mismatch_raises():
    rng = np.random.default_rng(6)
    ch, part, st = random_instance(rng, 2, 4, 2)
    with pytest.raises(ValueError):
        evaluate_snr(NetworkState(np.eye(3), st.theta1, st.theta2), ch, part, SystemConfig(M=2, N=4, K=2))


def test_without_irs_zeros_irs_links():
    rng = np.random.default_rng(7)
    ch, _, _ = random_instance(rng, 2, 4, 0)
    ch0 = ch.without_irs()
    assert not ch0.H_ir.any() and not ch0.h_si.any() and not ch0.h_id.any()
    assert np.array_equal(ch0.h_sr, ch.h_sr)
