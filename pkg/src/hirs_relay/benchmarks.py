"""Baseline schemes compared against the hybrid optimizers.

All baselines run with the relay budget raised to ``P_R = P_r + P_i`` (added in
watts) so that they spend the same total power as the hybrid schemes.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_random_state
from .model import (
    ElementPartition,
    NetworkState,
    achievable_rate,
    evaluate_snr,
    forward_row,
    incident_vector,
    power_relay,
)
from . import hp_sdr_fp

SCHEMES = ("relay_only", "passive_unit", "passive_opt", "random_phase", "hp_sdr_fp", "wf_gpi_grr")


@dataclass
class BenchmarkResult:
    state: NetworkState
    rate: float
    config: object
    partition: ElementPartition
    channels: object
    n_iter: int = 0


def matched_power(cfg):
    """Benchmark config: relay budget ``P_r + P_i`` in watts, ``P_s`` unchanged."""
    return cfg.replace(P_r=cfg.P_r + cfg.P_i)


def all_passive(N):
    return ElementPartition(np.zeros(N, dtype=bool))


def relay_only(ch, cfg_R):
    """Matched-filter AF relay with every IRS link removed."""
    ch0 = ch.without_irs()
    nr, ns = np.linalg.norm(ch.h_rd), np.linalg.norm(ch.h_sr)
    if nr == 0 or ns == 0:
        raise ValueError("degenerate channel: zero direct link")
    Gamma = np.outer(ch.h_rd, ch.h_sr.conj()) / (nr * ns)
    scale = np.sqrt(cfg_R.gamma_r / (cfg_R.gamma_s * np.sum(np.abs(Gamma @ ch.h_sr) ** 2) + np.sum(np.abs(Gamma) ** 2)))
    A = scale * Gamma
    part = all_passive(ch.N)
    state = NetworkState(A, np.ones(ch.N, dtype=complex), np.ones(ch.N, dtype=complex))
    rate = achievable_rate(evaluate_snr(state, ch0, part, cfg_R))
    return BenchmarkResult(state, rate, cfg_R, part, ch0)


def matched_relay(ch, part, cfg, theta1, theta2):
    """Closed-form relay for fixed reflections: matched receive and transmit
    directions, full relay power."""
    A = hp_sdr_fp.mrc_mrt_direction(incident_vector(ch, theta1), forward_row(ch, theta2))
    return hp_sdr_fp.scale_relay_to_power(A, ch, part, cfg, theta1)


def _fixed_phase_relay(ch, cfg_R, theta1, theta2, route, rng, n_samples):
    part = all_passive(ch.N)
    if route == "closed_form":
        A = matched_relay(ch, part, cfg_R, theta1, theta2)
    elif route == "sdp":
        probe = NetworkState(np.eye(ch.M, dtype=complex), theta1, theta2)
        sub = hp_sdr_fp.build_relay_subproblem(ch, probe, part, cfg_R)
        A, _ = hp_sdr_fp.solve_relay(sub, cfg_R, rng, n_samples)
    else:
        raise ValueError(f"unknown route {route!r}")
    state = NetworkState(A, theta1, theta2)
    rate = achievable_rate(evaluate_snr(state, ch, part, cfg_R))
    return BenchmarkResult(state, rate, cfg_R, part, ch)


def passive_unit(ch, cfg_R, route="closed_form", random_state=None, n_samples=200):
    """All-passive surface with every coefficient fixed to 1; only ``A`` is chosen."""
    ones = np.ones(ch.N, dtype=complex)
    return _fixed_phase_relay(ch, cfg_R, ones, ones.copy(), route, check_random_state(random_state), n_samples)


def random_phase(ch, cfg_R, random_state=None, route="closed_form", n_samples=200):
    """All-passive surface with uniform random phases in both slots."""
    rng = check_random_state(random_state)
    theta1 = np.exp(2j * np.pi * rng.random(ch.N))
    theta2 = np.exp(2j * np.pi * rng.random(ch.N))
    return _fixed_phase_relay(ch, cfg_R, theta1, theta2, route, rng, n_samples)


def passive_opt(ch, cfg_R, opt=None):
    """All-passive surface with phases and relay optimised by the SDR method."""
    part = all_passive(ch.N)
    res = hp_sdr_fp.optimize(ch, part, cfg_R, opt)
    return BenchmarkResult(res.state, res.rate, cfg_R, part, ch, res.n_iter)


def relay_power_ok(result, rtol=1e-8):
    p = power_relay(result.state, result.channels, result.partition, result.config)
    return p <= result.config.gamma_r * (1 + rtol)
