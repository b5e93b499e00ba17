"""Alternating SDR optimizer for the relay matrix and both reflection vectors.

Each outer pass solves three subproblems in turn, each with the other two
blocks held fixed:

* relay matrix ``A``: the SNR is a ratio of quadratic forms in ``vec(A)``;
* slot-1 coefficients: ratio of quadratic forms in ``[theta1; 1]``;
* slot-2 coefficients: ratio of quadratic forms in ``[conj(theta2); 1]``.

A ratio is linearised with a Charnes-Cooper scalar, the rank-one constraint is
dropped, and the SDP is solved with :mod:`hirs_relay.sdp`.  A rank-one point is
recovered from the principal eigenvector plus Gaussian samples, each repaired
into the feasible set.  The incumbent is always a candidate, so no step can
lower the SNR.
"""

from dataclasses import dataclass, field, replace
import logging

import numpy as np

from ._validation import check_int, check_positive, check_random_state
from .model import (
    NetworkState,
    achievable_rate,
    evaluate_snr,
    forward_row,
    incident_vector,
    power_irs_slot1,
    power_irs_slot2,
    power_relay,
)
from .numerics import hermitian_part, kron, vec, unvec
from .sdp import SdpError, SdpProblem, SdpStatus, extract_rank1, solve_sdp

logger = logging.getLogger(__name__)

RANK1_TOL = 1e-6
MIN_CC_SCALAR = 1e-9
# shrink factor applied after a feasibility repair, guards against round-off
REPAIR_MARGIN = 1.0 - 1e-10


class OptimizationError(RuntimeError):
    """A subproblem failed; carries the best state and the trace so far."""

    def __init__(self, message, state=None, trace=None, status=None):
        super().__init__(message)
        self.state = state
        self.trace = list(trace or [])
        self.status = status


@dataclass(frozen=True)
class OptimizerConfig:
    max_iter: int = 30
    tol: float = 1e-3
    n_samples: int = 200
    random_state: object = None
    # keep iterating to max_iter even after the rate settles
    early_stop: bool = True
    # slot-1 step rescales A instead of holding it fixed
    rescale_relay: bool = True

    def __post_init__(self):
        check_int(self.max_iter, "max_iter", low=1)
        check_positive(self.tol, "tol")
        check_int(self.n_samples, "n_samples", low=1)


@dataclass
class RelaySubproblem:
    B1: np.ndarray
    B2: np.ndarray
    B3: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    D3: np.ndarray
    noise_const: float
    irs2_self_power: float
    M: int

    def snr(self, a, gamma_s):
        num = gamma_s * _qf(self.B1, a)
        return num / (_qf(self.B2 + self.B3, a) + self.noise_const)

    def relay_power(self, a, gamma_s):
        return gamma_s * _qf(self.C1, a) + _qf(self.C2, a) + np.sum(np.abs(a) ** 2, axis=-1)

    def irs2_power(self, a, gamma_s):
        return gamma_s * _qf(self.D1, a) + _qf(self.D2, a) + _qf(self.D3, a) + self.irs2_self_power


@dataclass
class PhaseSubproblem:
    """``max v^H F v / v^H Fn v`` over ``v = [x; 1]`` subject to
    ``v^H G_k v <= cap_k`` and unit modulus on ``passive``.

    ``F``/``Fn`` are the numerator/denominator matrices; for slot 1 they are
    the ``F1``/``F2`` pair, for slot 2 the ``H1``/``H2`` pair.
    """

    F: np.ndarray
    Fn: np.ndarray
    G: list
    caps: list
    passive: np.ndarray
    active: np.ndarray
    conjugate: bool = False
    names: tuple = field(default_factory=tuple)
    # parts of Fn's corner and of the slot-2 cap that do not scale with A
    noise_const: float = 1.0
    irs2_self_power: float = 0.0

    @property
    def N(self):
        return self.F.shape[0] - 1

    def ratio(self, v):
        return _qf(self.F, v) / _qf(self.Fn, v)

    def to_vector(self, theta):
        x = np.conj(theta) if self.conjugate else np.asarray(theta)
        return np.append(x, 1.0)

    def to_theta(self, v):
        x = v[:-1] / v[-1]
        return np.conj(x) if self.conjugate else x


def _qf(X, v):
    """Real ``v^H X v``, vectorised over leading axes of ``v``."""
    v = np.asarray(v)
    return np.real(np.einsum("...i,ij,...j->...", v.conj(), X, v))


def _outer(x, y=None):
    y = x if y is None else y
    return np.outer(x, np.conj(y))


# ---------------------------------------------------------------------------
# builders


def build_relay_subproblem(ch, state, part, cfg):
    """Quadratic-form data in ``a = vec(A)`` for fixed reflection vectors."""
    M = ch.M
    if state.theta1.shape != (ch.N,) or part.N != ch.N:
        raise ValueError("dimension mismatch between state, channels and partition")
    e = part.e
    u = incident_vector(ch, state.theta1)
    v = forward_row(ch, state.theta2)
    X = ch.H_ir * (e * state.theta1)  # H E Theta1
    P = (e * state.theta2)[:, None] * ch.H_ir.conj().T  # E Theta2 H^H
    vv = np.outer(v.conj(), v)  # v^H v
    uu = np.outer(u.conj(), u)  # u^* u^T
    XX = np.conj(X @ X.conj().T)  # X^* X^T
    PP = P.conj().T @ P
    I = np.eye(M)
    return RelaySubproblem(
        B1=kron(uu, vv),
        B2=kron(XX, vv),
        B3=kron(I, vv),
        C1=kron(uu, I),
        C2=kron(XX, I),
        D1=kron(uu, PP),
        D2=kron(XX, PP),
        D3=kron(I, PP),
        noise_const=float(np.sum(np.abs(ch.h_id * e * state.theta2) ** 2) + 1.0),
        irs2_self_power=float(np.sum(np.abs(e * state.theta2) ** 2)),
        M=M,
    )


def build_theta1_subproblem(ch, state, part, cfg):
    """``F1, F2, G1, G2, G3`` in ``v1 = [theta1; 1]``."""
    A, H, e = state.A, ch.H_ir, part.e
    gs = cfg.gamma_s
    H_sir = np.hstack([H * ch.h_si, ch.h_sr[:, None]])
    h_rid = (forward_row(ch, state.theta2) @ A).conj()
    g = H_sir.conj().T @ h_rid
    F1 = gs * _outer(g)
    irs2 = np.sum(np.abs(ch.h_id * e * state.theta2) ** 2)
    F2 = np.diag(np.append(np.abs(H.conj().T @ h_rid) ** 2 * e, np.sum(np.abs(h_rid) ** 2) + irs2 + 1.0))
    G1 = np.diag(np.append(gs * np.abs(ch.h_si) ** 2 * e + e, 0.0))

    AH = A @ H
    AHs = A @ H_sir
    G2 = gs * AHs.conj().T @ AHs + np.diag(np.append(np.sum(np.abs(AH) ** 2, axis=0) * e, np.sum(np.abs(A) ** 2)))

    R = (e * state.theta2)[:, None] * (H.conj().T @ A)  # E Theta2 H^H A
    RH = R @ H
    RHs = R @ H_sir
    G3 = gs * RHs.conj().T @ RHs + np.diag(
        np.append(np.sum(np.abs(RH) ** 2, axis=0) * e, np.sum(np.abs(R) ** 2) + np.sum(np.abs(e * state.theta2) ** 2))
    )
    return PhaseSubproblem(
        F=hermitian_part(F1),
        Fn=F2,
        G=[G1, hermitian_part(G2), hermitian_part(G3)],
        caps=[cfg.gamma_i, cfg.gamma_r, cfg.gamma_i],
        passive=part.passive,
        active=part.active,
        conjugate=False,
        names=("irs_slot1", "relay", "irs_slot2"),
        noise_const=float(irs2 + 1.0),
        irs2_self_power=float(np.sum(np.abs(e * state.theta2) ** 2)),
    )


def build_theta2_subproblem(ch, state, part, cfg):
    """``H1, H2, J`` in ``v2 = [conj(theta2); 1]``."""
    A, H, e = state.A, ch.H_ir, part.e
    gs = cfg.gamma_s
    N = ch.N
    H_rid = np.vstack([ch.h_id.conj()[:, None] * H.conj().T, ch.h_rd.conj()[None, :]])
    u = incident_vector(ch, state.theta1)
    g = H_rid @ A @ u
    H1 = gs * _outer(g)
    X = H * (e * state.theta1)
    Y = H_rid @ A
    H2 = Y @ (X @ X.conj().T + np.eye(ch.M)) @ Y.conj().T + np.diag(np.append(np.abs(ch.h_id) ** 2 * e, 1.0))

    HA = H.conj().T @ A
    H4 = HA @ X
    jd = gs * np.abs(HA @ u) ** 2 + np.sum(np.abs(H4) ** 2, axis=1) + np.sum(np.abs(HA) ** 2, axis=1) + 1.0
    J = np.diag(np.append(jd * e, 0.0))
    assert J.shape == (N + 1, N + 1)
    return PhaseSubproblem(
        F=hermitian_part(H1),
        Fn=hermitian_part(H2),
        G=[J],
        caps=[cfg.gamma_i],
        passive=part.passive,
        active=part.active,
        conjugate=True,
        names=("irs_slot2",),
    )


# ---------------------------------------------------------------------------
# recovery helpers


def _gaussian_samples(Xs, count, rng):
    """``count`` rows drawn from CN(0, Xs)."""
    lam, Q = np.linalg.eigh(hermitian_part(Xs))
    L = Q * np.sqrt(np.clip(lam, 0.0, None))
    n = Xs.shape[0]
    z = (rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))) / np.sqrt(2.0)
    return z @ L.T


def _largest_scale(a, b, d, cap):
    """Largest ``c`` in [0, 1] with ``a c^2 + 2 b c + d <= cap``, or -1 if none."""
    if a + 2 * b + d <= cap:
        return 1.0
    if d > cap:
        return -1.0
    if a <= 0:
        return (cap - d) / (2 * b) if b > 0 else 1.0
    disc = max(b * b - a * (d - cap), 0.0)
    return min(1.0, (-b + np.sqrt(disc)) / a)


def _repair_phase_candidate(sub, v):
    """Normalise by the last entry, project passive entries to unit modulus and
    shrink active amplitudes until every cap holds.  Returns None if the
    passive part alone breaks a cap."""
    if abs(v[-1]) < 1e-300:
        return None
    x = v / v[-1]
    x[sub.passive] = np.exp(1j * np.angle(x[sub.passive]))
    if sub.active.size == 0:
        for G, cap in zip(sub.G, sub.caps):
            if _qf(G, x) > cap * (1 + 1e-9):
                return None
        return x
    xa = np.zeros_like(x)
    xa[sub.active] = x[sub.active]
    xp = x - xa
    c = 1.0
    for G, cap in zip(sub.G, sub.caps):
        a = _qf(G, xa)
        b = float(np.real(np.vdot(xa, G @ xp)))
        d = _qf(G, xp)
        ci = _largest_scale(a, b, d, cap)
        if ci < 0:
            return None
        c = min(c, ci)
    if c < 1.0:
        c *= REPAIR_MARGIN
    return c * xa + xp


def _pick_best(values):
    """Index of the maximum, ties to the lowest index."""
    values = np.asarray(values)
    best = np.max(values)
    return int(np.flatnonzero(values == best)[0])


# ---------------------------------------------------------------------------
# relay step


def _relay_sdp(sub, cfg):
    M2 = sub.M**2
    gs = cfg.gamma_s
    Cmat = hermitian_part(gs * sub.C1 + sub.C2 + np.eye(M2))
    Dmat = hermitian_part(gs * sub.D1 + sub.D2 + sub.D3)
    Den = hermitian_part(sub.B2 + sub.B3)
    # Atilde = alpha^2 * Ascaled keeps the unknown O(1)
    alpha2 = cfg.gamma_r / np.real(np.trace(Cmat))
    ineq = [(alpha2 * Cmat, -cfg.gamma_r, 0.0)]
    if np.any(Dmat):
        ineq.append((alpha2 * Dmat, sub.irs2_self_power - cfg.gamma_i, 0.0))
    prob = SdpProblem(
        C=hermitian_part(alpha2 * gs * sub.B1),
        equalities=[(alpha2 * Den, sub.noise_const, 1.0)],
        inequalities=ineq,
        scalar=True,
    )
    return prob, alpha2


def solve_relay(sub, cfg, rng=None, n_samples=200, incumbent=None):
    """Relay step.  Returns ``(A, info)``; ``info`` has the SDP bound, the
    rank-one gap and whether randomisation ran."""
    rng = check_random_state(rng)
    M = sub.M
    gs = cfg.gamma_s
    prob, alpha2 = _relay_sdp(sub, cfg)
    sol = solve_sdp(prob)
    if not sol.ok:
        raise SdpError(sol.status, "relay subproblem")
    if sol.scalar < MIN_CC_SCALAR:
        raise SdpError(SdpStatus.NUMERICAL_FAILURE, "relay subproblem: vanishing normaliser")
    Xs = sol.X / sol.scalar
    pc, gap = extract_rank1(Xs)
    cands = [pc]
    randomized = gap > RANK1_TOL
    if randomized:
        cands.extend(_gaussian_samples(Xs, n_samples, rng))
    cands = np.sqrt(alpha2) * np.array(cands)

    # put each candidate on the binding power constraint
    pr = sub.relay_power(cands, gs)
    scale2 = cfg.gamma_r / pr
    if np.any(sub.D1) or np.any(sub.D3):
        q = sub.irs2_power(cands, gs) - sub.irs2_self_power
        with np.errstate(divide="ignore"):
            scale2 = np.minimum(scale2, np.where(q > 0, (cfg.gamma_i - sub.irs2_self_power) / q, np.inf))
    ok = np.isfinite(scale2) & (scale2 > 0)
    cands = cands[ok] * np.sqrt(scale2[ok] * REPAIR_MARGIN)[:, None]
    snrs = sub.snr(cands, gs) if len(cands) else np.array([])

    info = {"bound": sol.primal_objective, "dual_bound": sol.dual_objective, "rank1_gap": gap,
            "randomized": randomized, "sdp_iterations": sol.iterations}
    if incumbent is not None:
        a0 = vec(incumbent)
        snr0 = float(sub.snr(a0, gs))
        if len(snrs) == 0 or snr0 >= np.max(snrs):
            info["kept_incumbent"] = True
            return np.array(incumbent, dtype=complex), info
    if len(snrs) == 0:
        raise OptimizationError("relay randomisation produced no feasible candidate")
    k = _pick_best(snrs)
    info["kept_incumbent"] = False
    return unvec(cands[k], M), info


# ---------------------------------------------------------------------------
# phase steps


def _phase_sdp(sub):
    N = sub.N
    n = N + 1
    # variable scaling: V = s * D V' D, tau = s * tau'
    # active entries get the amplitude that would spend an equal share of each cap
    d = np.ones(n)
    K = sub.active.size
    if K:
        amp2 = np.full(K, np.inf)
        for G, cap in zip(sub.G, sub.caps):
            gd = np.real(np.diag(G))[sub.active]
            pos = gd > 0
            amp2[pos] = np.minimum(amp2[pos], cap / (K * gd[pos]))
        amp2[~np.isfinite(amp2) | (amp2 <= 0)] = 1.0
        d[sub.active] = np.sqrt(amp2)
    Dm = np.diag(d)
    s = 1.0 / np.real(np.trace(Dm @ sub.Fn @ Dm))
    scale = lambda X: s * (Dm @ X @ Dm)

    eqs = [(scale(sub.Fn), 0.0, 1.0)]
    for i in list(sub.passive) + [N]:
        Ei = np.zeros((n, n))
        Ei[i, i] = 1.0
        eqs.append((Ei, -1.0, 0.0))
    ineqs = []
    for G, cap in zip(sub.G, sub.caps):
        if np.any(G):
            ineqs.append((scale(G), -s * cap, 0.0))
    prob = SdpProblem(C=scale(sub.F), equalities=eqs, inequalities=ineqs, scalar=True)
    return prob, d


def solve_phase(sub, rng=None, n_samples=200, incumbent=None, scorer=None):
    """Solve a phase subproblem.  ``incumbent`` is the current coefficient
    vector (theta).  ``scorer(x) -> (value, extra)`` ranks candidates; the
    default is the subproblem ratio.  Returns ``(theta, extra, info)``."""
    rng = check_random_state(rng)
    scorer = scorer or (lambda x: (sub.ratio(x), None))
    prob, d = _phase_sdp(sub)
    sol = solve_sdp(prob)
    if not sol.ok:
        raise SdpError(sol.status, "phase subproblem")
    if sol.scalar < MIN_CC_SCALAR:
        raise SdpError(SdpStatus.NUMERICAL_FAILURE, "phase subproblem: vanishing normaliser")
    Vs = sol.X / sol.scalar  # scaled space, last diagonal entry = 1
    pc, gap = extract_rank1(Vs)
    raw = [pc]
    randomized = gap > RANK1_TOL
    if randomized:
        raw.extend(_gaussian_samples(Vs, n_samples, rng))
    cands, scores, extras = [], [], []
    for w in raw:
        x = _repair_phase_candidate(sub, d * w)
        if x is not None:
            val, extra = scorer(x)
            cands.append(x)
            scores.append(val)
            extras.append(extra)
    info = {"bound": sol.primal_objective, "dual_bound": sol.dual_objective, "rank1_gap": gap,
            "randomized": randomized, "n_feasible": len(cands), "sdp_iterations": sol.iterations}
    if incumbent is not None:
        val0, extra0 = scorer(sub.to_vector(incumbent))
        if not scores or val0 >= max(scores):
            info["kept_incumbent"] = True
            return np.array(incumbent, dtype=complex), extra0, info
    if not scores:
        raise OptimizationError("phase randomisation produced no feasible candidate")
    info["kept_incumbent"] = False
    k = _pick_best(scores)
    info["score"] = scores[k]
    return sub.to_theta(cands[k]), extras[k], info


def _relay_rescaled_score(sub, x, gamma_r, gamma_i):
    """SNR at ``[theta1; 1] = x`` once ``A`` is rescaled by ``c`` to the tighter
    of the relay and slot-2 caps.  Every term of ``G2`` and the A-dependent
    part of ``G3`` and ``Fn`` scale with ``c^2``."""
    G1, G2, G3 = sub.G
    c2 = gamma_r / _qf(G2, x)
    q3 = _qf(G3, x) - sub.irs2_self_power
    if q3 > 0:
        c2 = min(c2, (gamma_i - sub.irs2_self_power) / q3)
    c2 *= REPAIR_MARGIN
    last = abs(x[-1]) ** 2
    num = c2 * _qf(sub.F, x)
    den = c2 * (_qf(sub.Fn, x) - sub.noise_const * last) + sub.noise_const * last
    return num / den, float(np.sqrt(c2))


def solve_theta1(sub, rng=None, n_samples=200, incumbent=None, rescale_relay=True, cfg=None):
    """Slot-1 step.  Returns ``(theta1, relay_scale, info)``.

    With ``rescale_relay`` the relay and slot-2 caps are not SDP constraints;
    instead ``A`` is rescaled by ``relay_scale`` for each candidate so those
    caps hold, and candidates are ranked by the SNR after rescaling.  Without
    it all three caps constrain the SDP, ``A`` stays fixed and the scale is 1.
    """
    if not rescale_relay:
        theta, _, info = solve_phase(sub, rng, n_samples, incumbent)
        return theta, 1.0, info
    if cfg is None:
        raise ValueError("rescale_relay needs the system config")
    reduced = replace(sub, G=sub.G[:1], caps=sub.caps[:1], names=sub.names[:1])
    scorer = lambda x: _relay_rescaled_score(sub, x, cfg.gamma_r, cfg.gamma_i)
    return solve_phase(reduced, rng, n_samples, incumbent, scorer)


def solve_theta2(sub, rng=None, n_samples=200, incumbent=None):
    """Slot-2 step.  Returns ``(theta2, info)``."""
    theta, _, info = solve_phase(sub, rng, n_samples, incumbent)
    return theta, info


# ---------------------------------------------------------------------------
# driver


def mrc_mrt_direction(u, v):
    """Unit-Frobenius rank-one ``v^H u^H / (||v|| ||u||)``; ``v`` is the
    forward row, ``u`` the incident column."""
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("degenerate channel: zero effective link")
    return np.outer(v.conj(), u.conj()) / (nu * nv)


def scale_relay_to_power(A, ch, part, cfg, theta1):
    """Scale ``A`` so the relay power equals ``gamma_r``."""
    probe = NetworkState(A, theta1, np.ones_like(theta1))
    p = power_relay(probe, ch, part, cfg)
    return A * np.sqrt(cfg.gamma_r / p)


def _downscale_active(theta, part, power, cap):
    """Shrink active amplitudes so that ``power(theta) <= cap``; power is
    ``a * c^2 + rest`` in the active scale ``c``."""
    p1 = power(theta)
    if p1 <= cap:
        return theta
    t0 = theta.copy()
    t0[part.active] = 0.0
    p0 = power(t0)
    if p0 > cap:
        raise OptimizationError("initial point infeasible even with active elements off")
    c = np.sqrt((cap - p0) / (p1 - p0)) * REPAIR_MARGIN
    out = theta.copy()
    out[part.active] *= c
    return out


def initial_state(ch, part, cfg, rng=None):
    """Random unit phases on every element, matched-filter relay at full power,
    active amplitudes shrunk where an IRS cap would bind."""
    rng = check_random_state(rng)
    N = ch.N
    theta1 = np.exp(2j * np.pi * rng.random(N))
    theta2 = np.exp(2j * np.pi * rng.random(N))
    A0 = np.eye(ch.M, dtype=complex)
    theta1 = _downscale_active(
        theta1, part, lambda t: power_irs_slot1(NetworkState(A0, t, theta2), ch, part, cfg), cfg.gamma_i
    )
    A = mrc_mrt_direction(incident_vector(ch, theta1), forward_row(ch, theta2))
    A = scale_relay_to_power(A, ch, part, cfg, theta1)
    theta2 = _downscale_active(
        theta2, part, lambda t: power_irs_slot2(NetworkState(A, theta1, t), ch, part, cfg), cfg.gamma_i
    )
    return NetworkState(A, theta1, theta2)


def _seed_sequence(random_state):
    """Fresh SeedSequence for ``random_state``; a SeedSequence argument is
    copied so that spawning from it is repeatable."""
    if isinstance(random_state, np.random.SeedSequence):
        return np.random.SeedSequence(random_state.entropy, spawn_key=random_state.spawn_key)
    if isinstance(random_state, np.random.Generator):
        return np.random.SeedSequence(int(random_state.integers(2**63)))
    return np.random.SeedSequence(random_state)


@dataclass
class OptimizeResult:
    state: NetworkState
    rate: float
    trace: list
    iterate_rates: list
    n_iter: int
    history: list = field(default_factory=list)


def optimize(ch, part, cfg, opt=None, init=None, fixed_phases=False):
    """Alternate the three steps until the rate settles.

    ``trace`` holds the best-so-far rate after initialisation and after each
    outer pass.  With ``fixed_phases`` only the relay step runs (used by the
    fixed-phase benchmarks).
    """
    opt = opt or OptimizerConfig()
    init_seed, loop_seed = _seed_sequence(opt.random_state).spawn(2)
    state = init if init is not None else initial_state(ch, part, cfg, np.random.default_rng(init_seed))
    rate = achievable_rate(evaluate_snr(state, ch, part, cfg))
    best_state, best_rate = state, rate
    trace, iterate_rates, history = [rate], [rate], []
    it_seeds = loop_seed.spawn(opt.max_iter)
    n_iter = 0
    for t in range(opt.max_iter):
        r_relay, r_t1, r_t2 = (np.random.default_rng(s) for s in it_seeds[t].spawn(3))
        step = {}
        try:
            sub = build_relay_subproblem(ch, state, part, cfg)
            A, step["relay"] = solve_relay(sub, cfg, r_relay, opt.n_samples, incumbent=state.A)
            state = NetworkState(A, state.theta1, state.theta2)
            if not fixed_phases:
                sub1 = build_theta1_subproblem(ch, state, part, cfg)
                th1, c, step["theta1"] = solve_theta1(
                    sub1, r_t1, opt.n_samples, incumbent=state.theta1, rescale_relay=opt.rescale_relay, cfg=cfg
                )
                state = NetworkState(c * state.A, th1, state.theta2)
                sub2 = build_theta2_subproblem(ch, state, part, cfg)
                th2, step["theta2"] = solve_theta2(sub2, r_t2, opt.n_samples, incumbent=state.theta2)
                state = NetworkState(state.A, state.theta1, th2)
        except (SdpError, OptimizationError) as exc:
            status = getattr(exc, "status", None)
            raise OptimizationError(f"outer iteration {t + 1}: {exc}", best_state, trace, status) from exc
        n_iter = t + 1
        rate = achievable_rate(evaluate_snr(state, ch, part, cfg))
        iterate_rates.append(rate)
        history.append(step)
        if rate > best_rate:
            best_state, best_rate = state, rate
        trace.append(best_rate)
        if opt.early_stop and abs(trace[-1] - trace[-2]) <= opt.tol:
            break
    return OptimizeResult(best_state, best_rate, trace, iterate_rates, n_iter, history)
