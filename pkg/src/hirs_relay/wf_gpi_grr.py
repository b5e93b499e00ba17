"""Low-complexity optimizer: fixed active gains, whitening, closed-form steps.

Every active element uses the same amplitude in a slot (``beta1`` in slot 1,
``beta2`` in slot 2), chosen from the power budgets.  The reflection
coefficients are then ``(E_bar + beta E) Theta_hat`` with ``Theta_hat``
unit-modulus everywhere, so the alternation only has to pick phases:

* relay: rank-one matched filter on the whitened relay input, matched
  transmit towards the destination, scaled to full relay power;
* slot-1 phases: generalised power iteration on a ratio of quadratic forms;
* slot-2 phases: dominant generalised eigenvector of a pencil.

The slot-1 noise at the relay is coloured by the active elements; whitening
with ``W = C^{-1/2}`` makes it white before matched filtering, so the physical
relay matrix is ``A @ W``.
"""

from dataclasses import dataclass, field
import logging
import warnings

import numpy as np

from ._validation import check_int, check_positive, check_random_state
from .model import (
    NetworkState,
    achievable_rate,
    evaluate_snr,
    forward_row,
    incident_vector,
    power_irs_slot2,
    power_relay,
)
from .numerics import generalized_eig_max, hermitian_part, inv_sqrt_hermitian, quad_form

logger = logging.getLogger(__name__)

SAFETY = 1.0 - 1e-10


@dataclass(frozen=True)
class GpiConfig:
    tol: float = 1e-6
    max_iter: int = 100

    def __post_init__(self):
        check_positive(self.tol, "tol")
        check_int(self.max_iter, "max_iter", low=1)


@dataclass(frozen=True)
class WfConfig:
    max_iter: int = 30
    tol: float = 1e-3
    gpi: GpiConfig = field(default_factory=GpiConfig)
    random_state: object = None
    early_stop: bool = True
    lambda_si: float = 1.0
    lambda_ri: float = 1.0

    def __post_init__(self):
        check_int(self.max_iter, "max_iter", low=1)
        check_positive(self.tol, "tol")
        check_positive(self.lambda_si, "lambda_si")
        check_positive(self.lambda_ri, "lambda_ri")


@dataclass(frozen=True)
class AmplifyingCoefficients:
    beta1: float
    beta2: float
    lambda_si: float = 1.0
    lambda_ri: float = 1.0
    PL_si: float = np.nan
    PL_ri: float = np.nan
    # no active elements: the surface is purely passive
    passive_only: bool = False


# ---------------------------------------------------------------------------
# amplitude gains


def amp_coeff_slot1(cfg, part, PL_si, lambda_si=1.0):
    """``sqrt(P_i / (K P_s PL_si lambda_si + K sigma2))``; 0 when K = 0."""
    K = part.K
    if K == 0:
        logger.info("no active elements, slot-1 gain set to 0")
        return 0.0
    return float(np.sqrt(cfg.P_i / (K * cfg.P_s * PL_si * lambda_si + K * cfg.sigma2)))


def amp_coeff_slot2(cfg, part, PL_ri, lambda_ri=1.0):
    """``sqrt(P_i / (K M P_r PL_ri lambda_ri + sigma2))``; 0 when K = 0."""
    K = part.K
    if K == 0:
        logger.info("no active elements, slot-2 gain set to 0")
        return 0.0
    return float(np.sqrt(cfg.P_i / (K * cfg.M * cfg.P_r * PL_ri * lambda_ri + cfg.sigma2)))


def amplifying_coefficients(ch, part, cfg, lambda_si=1.0, lambda_ri=1.0):
    try:
        PL_si, PL_ri = ch.path_loss["si"], ch.path_loss["ir"]
    except KeyError as exc:
        raise ValueError("channel set carries no path-loss figures") from exc
    return AmplifyingCoefficients(
        beta1=amp_coeff_slot1(cfg, part, PL_si, lambda_si),
        beta2=amp_coeff_slot2(cfg, part, PL_ri, lambda_ri),
        lambda_si=lambda_si,
        lambda_ri=lambda_ri,
        PL_si=PL_si,
        PL_ri=PL_ri,
        passive_only=part.K == 0,
    )


def slot1_gain_cap(ch, part, cfg):
    """Largest common slot-1 gain that meets the slot-1 IRS budget for this draw."""
    if part.K == 0:
        return 0.0
    load = cfg.gamma_s * np.sum(np.abs(ch.h_si[part.active]) ** 2) + part.K
    return float(np.sqrt(cfg.gamma_i / load))


def slot2_gain_cap(A_eff, theta1, theta2_hat, ch, part, cfg):
    """Largest common slot-2 gain that meets the slot-2 IRS budget given the
    physical relay matrix; every term of that budget scales with gain^2."""
    if part.K == 0:
        return 0.0
    unit = NetworkState(A_eff, theta1, theta2_hat)
    q = power_irs_slot2(unit, ch, part, cfg)
    return float(np.sqrt(cfg.gamma_i / q))


def assemble_theta(theta_hat, beta, part):
    """``(E_bar + beta E) theta_hat``."""
    return (part.e_bar + beta * part.e) * theta_hat


# ---------------------------------------------------------------------------
# whitening and relay


def whitening_matrix(ch, part, theta1_hat, beta1, sigma2):
    """Slot-1 relay noise covariance and its inverse square root.

    ``C = beta1^2 sigma2 H E Theta_hat Theta_hat^H E H^H + sigma2 I``.  Pass
    ``sigma2=1`` for the noise-normalised version.
    """
    X = ch.H_ir * (part.e * theta1_hat)
    C = beta1**2 * sigma2 * (X @ X.conj().T) + sigma2 * np.eye(ch.M)
    C = hermitian_part(C)
    return C, inv_sqrt_hermitian(C)


def _effective_vectors(ch, part, theta1_hat, theta2_hat, beta1, beta2):
    u = incident_vector(ch, assemble_theta(theta1_hat, beta1, part))
    v = forward_row(ch, assemble_theta(theta2_hat, beta2, part))
    return u, v


def relay_beamformer_mrcmrt(ch, part, theta1_hat, theta2_hat, beta1, beta2, W, cfg):
    """Rank-one relay matrix applied after whitening; ``A @ W`` spends exactly
    ``gamma_r`` of relay power."""
    u, v = _effective_vectors(ch, part, theta1_hat, theta2_hat, beta1, beta2)
    Wu = W @ u
    nv, nwu = np.linalg.norm(v), np.linalg.norm(Wu)
    if nv == 0 or nwu == 0:
        raise ValueError("degenerate channel: zero effective link")
    Upsilon = np.outer(v.conj(), Wu.conj()) / (nv * nwu)
    return rescale_to_relay_power(Upsilon, W, ch, part, theta1_hat, beta1, cfg)


def rescale_to_relay_power(A, W, ch, part, theta1_hat, beta1, cfg):
    theta1 = assemble_theta(theta1_hat, beta1, part)
    p = power_relay(NetworkState(A @ W, theta1, np.ones_like(theta1)), ch, part, cfg)
    return A * np.sqrt(cfg.gamma_r / p)


def physical_state(A, W, theta1_hat, theta2_hat, beta1, beta2, part):
    return NetworkState(A @ W, assemble_theta(theta1_hat, beta1, part), assemble_theta(theta2_hat, beta2, part))


def whitened_snr(state, ch, part, cfg, beta1, beta2, W):
    """SNR of the whitened link; ``state`` holds the pre-whitening relay matrix
    and the unit-modulus phase vectors."""
    phys = physical_state(state.A, W, state.theta1, state.theta2, beta1, beta2, part)
    return evaluate_snr(phys, ch, part, cfg)


# ---------------------------------------------------------------------------
# slot-1 phases


def build_whitened_theta1(ch, A, theta2_hat, part, cfg, beta1, beta2, W):
    """``(F1_hat, F2_hat)`` in ``v1 = [theta1_hat; 1]``."""
    e = part.e
    H = ch.H_ir
    H_sir = np.hstack([H * ((part.e_bar + beta1 * e) * ch.h_si), ch.h_sr[:, None]])
    v = forward_row(ch, assemble_theta(theta2_hat, beta2, part))
    h_rid = (v @ A @ W).conj()
    g = H_sir.conj().T @ h_rid
    F1 = cfg.gamma_s * np.outer(g, g.conj())
    irs2 = beta2**2 * np.sum(np.abs(ch.h_id * e * theta2_hat) ** 2)
    F2 = np.diag(np.append(beta1**2 * np.abs(H.conj().T @ h_rid) ** 2 * e, np.sum(np.abs(h_rid) ** 2) + irs2 + 1.0))
    return hermitian_part(F1), F2


def generalized_power_iteration(F1, F2, gpi=None, v0=None):
    """Fixed-point ascent for ``v^H F1 v / v^H F2 v`` on the unit sphere.

    Returns ``(v, quotients, n_iter)``; ``quotients`` holds the ratio at the
    start and after every update.
    """
    gpi = gpi or GpiConfig()
    n = F1.shape[0]
    v = np.ones(n, dtype=complex) / np.sqrt(n) if v0 is None else np.asarray(v0, dtype=complex)
    v = v / np.linalg.norm(v)
    I = np.eye(n)
    quotients = [quad_form(F1, v) / quad_form(F2, v)]
    n_iter = 0
    for n_iter in range(1, gpi.max_iter + 1):
        vv = np.real(np.vdot(v, v))
        Omega = quad_form(F1, v) * I + vv * F1
        Xi = quad_form(F2, v) * I + vv * F2
        rhs = Omega @ v
        try:
            y = np.linalg.solve(Xi, rhs)
            if not np.all(np.isfinite(y)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            warnings.warn("GPI system matrix is singular, using the pseudo-inverse", RuntimeWarning)
            y = np.linalg.pinv(Xi) @ rhs
        v_new = y / np.linalg.norm(y)
        step = np.linalg.norm(v_new - v)
        v = v_new
        quotients.append(quad_form(F1, v) / quad_form(F2, v))
        if step <= gpi.tol:
            break
    return v, quotients, n_iter


def project_unit_modulus(v, conjugate=False):
    """Entries ``0..N-1`` of ``v`` to unit modulus relative to entry ``N``."""
    ref = v[-1]
    x = v[:-1] / ref if abs(ref) > 0 else v[:-1]
    theta = np.exp(1j * np.angle(x))
    return np.conj(theta) if conjugate else theta


def spread_constant(Q, c=None):
    """Move ``c`` (default: the whole last diagonal entry) from ``Q[-1, -1]``
    evenly onto the diagonal.

    For ``v = [x; 1]`` with unit-modulus ``x`` both forms agree, since
    ``|v_n|^2 = 1`` for every entry.  The spread form is positive definite
    whenever that entry is positive, which keeps the quotient bounded on the
    sphere even though the passive coordinates carry no weight of their own.
    """
    n = Q.shape[0]
    c = np.real(Q[-1, -1]) if c is None else c
    out = np.array(Q, dtype=complex)
    out[-1, -1] -= c
    out[np.diag_indices(n)] += c / n
    return out


def gpi_theta1(ch, A, theta2_hat, part, cfg, beta1, beta2, W, gpi=None):
    """Slot-1 phases.  Returns ``(theta1_hat, info)``."""
    F1, F2 = build_whitened_theta1(ch, A, theta2_hat, part, cfg, beta1, beta2, W)
    F2 = spread_constant(F2)
    v, quotients, n_iter = generalized_power_iteration(F1, F2, gpi)
    q = np.asarray(quotients)
    drops = -np.diff(q) / np.maximum(np.abs(q[:-1]), 1e-300)
    if drops.size and drops.max() > 1e-6:
        warnings.warn(f"GPI quotient decreased by {drops.max():.2e} (relative)", RuntimeWarning)
    return project_unit_modulus(v), {"quotients": quotients, "n_iter": n_iter}


# ---------------------------------------------------------------------------
# slot-2 phases


def build_whitened_theta2(ch, A, theta1_hat, part, cfg, beta1, beta2, W):
    """``(H1_hat, H2_hat)`` in ``v2 = [conj(theta2_hat); 1]``."""
    e = part.e
    H = ch.H_ir
    H_rid = np.vstack([((part.e_bar + beta2 * e) * ch.h_id.conj())[:, None] * H.conj().T, ch.h_rd.conj()[None, :]])
    u = incident_vector(ch, assemble_theta(theta1_hat, beta1, part))
    Y = H_rid @ A @ W
    g = Y @ u
    H1 = cfg.gamma_s * np.outer(g, g.conj())
    X = H * (e * theta1_hat)
    noise = beta1**2 * (X @ X.conj().T) + np.eye(ch.M)
    H2 = Y @ noise @ Y.conj().T + np.diag(np.append(beta2**2 * np.abs(ch.h_id) ** 2 * e, 1.0))
    return hermitian_part(H1), hermitian_part(H2)


def grr_theta2(ch, A, theta1_hat, part, cfg, beta1, beta2, W):
    """Slot-2 phases.  Returns ``(theta2_hat, info)``."""
    H1, H2 = build_whitened_theta2(ch, A, theta1_hat, part, cfg, beta1, beta2, W)
    # H2 alone is singular on the passive coordinates once N + 1 > M + K + 1
    # so the additive unit noise term is spread over the diagonal
    lam, v = generalized_eig_max(H1, spread_constant(H2, 1.0))
    return project_unit_modulus(v, conjugate=True), {"lambda_max": lam, "vector": v}


# ---------------------------------------------------------------------------
# driver


@dataclass
class WfResult:
    state: NetworkState
    rate: float
    trace: list
    iterate_rates: list
    n_iter: int
    coefficients: AmplifyingCoefficients
    beta1: float
    beta2: float
    whitened: dict = field(default_factory=dict)
    history: list = field(default_factory=list)


def optimize(ch, part, cfg, opt=None):
    """Alternate matched relay, GPI slot-1 phases and GRR slot-2 phases.

    The closed-form gains are clipped to what the budgets allow for this draw:
    ``beta1`` once (the slot-1 budget does not depend on phases) and ``beta2``
    after every relay update.  Rates are scored on the physical model.
    """
    opt = opt or WfConfig()
    rng = check_random_state(opt.random_state)
    coeffs = amplifying_coefficients(ch, part, cfg, opt.lambda_si, opt.lambda_ri)
    beta1 = min(coeffs.beta1, slot1_gain_cap(ch, part, cfg))
    beta2_nominal = coeffs.beta2

    N = ch.N
    th1 = np.exp(2j * np.pi * rng.random(N))
    th2 = np.exp(2j * np.pi * rng.random(N))
    _, W = whitening_matrix(ch, part, th1, beta1, 1.0)

    def cap_beta2(A, b2):
        if part.K == 0:
            return 0.0
        cap = slot2_gain_cap(A @ W, assemble_theta(th1, beta1, part), th2, ch, part, cfg)
        return min(b2, cap * SAFETY)

    def score(A, b2):
        phys = physical_state(A, W, th1, th2, beta1, b2, part)
        return phys, achievable_rate(evaluate_snr(phys, ch, part, cfg))

    A = relay_beamformer_mrcmrt(ch, part, th1, th2, beta1, beta2_nominal, W, cfg)
    beta2 = cap_beta2(A, beta2_nominal)
    phys, rate = score(A, beta2)
    best = (rate, phys, A, th1, th2, beta2)
    trace, iterate_rates, history = [rate], [rate], []
    n_iter = 0
    for t in range(opt.max_iter):
        A = relay_beamformer_mrcmrt(ch, part, th1, th2, beta1, beta2, W, cfg)
        beta2 = cap_beta2(A, beta2_nominal)
        th1, gpi_info = gpi_theta1(ch, A, th2, part, cfg, beta1, beta2, W, opt.gpi)
        # W depends on the phases only through |theta_hat| = 1, so it is unchanged
        A = rescale_to_relay_power(A, W, ch, part, th1, beta1, cfg)
        beta2 = cap_beta2(A, beta2_nominal)
        th2, grr_info = grr_theta2(ch, A, th1, part, cfg, beta1, beta2, W)
        n_iter = t + 1
        phys, rate = score(A, beta2)
        iterate_rates.append(rate)
        history.append({"gpi": gpi_info, "grr": grr_info, "beta2": beta2})
        if rate > best[0]:
            best = (rate, phys, A, th1, th2, beta2)
        trace.append(best[0])
        if opt.early_stop and abs(trace[-1] - trace[-2]) <= opt.tol:
            break
    rate, phys, A, th1, th2, beta2 = best
    return WfResult(
        state=phys,
        rate=rate,
        trace=trace,
        iterate_rates=iterate_rates,
        n_iter=n_iter,
        coefficients=coeffs,
        beta1=beta1,
        beta2=beta2,
        whitened={"A": A, "W": W, "theta1_hat": th1, "theta2_hat": th2},
        history=history,
    )
