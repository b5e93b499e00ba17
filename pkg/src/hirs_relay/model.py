"""Signal model of the hybrid IRS-aided two-hop AF relay link.

Everything here works in linear units.  Powers that enter the SNR and the
power constraints are normalised by the noise power, so ``gamma_x = P_x / sigma2``.

Channel conventions (all stored as plain column objects):

* ``h_si``  (N,)   source -> IRS
* ``h_sr``  (M,)   source -> relay
* ``H_ir``  (M, N) IRS -> relay; its conjugate transpose is relay -> IRS
* ``h_rd``  (M,)   relay -> destination, the model uses ``h_rd^H``
* ``h_id``  (N,)   IRS -> destination, the model uses ``h_id^H``
"""

from dataclasses import dataclass, field, replace
import hashlib

import numpy as np

from ._validation import check_complex_array, check_int, check_positive, check_random_state

PL0_DB = -30.0
D0_M = 1.0

LINKS = ("si", "sr", "ir", "rd", "id")


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(watts):
    return 10.0 * np.log10(np.asarray(watts, dtype=float)) + 30.0


def path_loss_db(d, alpha):
    """Log-distance path loss ``PL0 - 10 alpha log10(d / d0)`` in dB (a negative gain)."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = PL0_DB - 10.0 * alpha * np.log10(d / D0_M)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SystemConfig:
    """Array sizes, power budgets (watts) and noise power (watts).

    Use :meth:`from_dbm` to build one from the dBm figures quoted for the
    simulation setup.
    """

    M: int = 2
    N: int = 32
    K: int = 4
    P_s: float = 1.0
    P_r: float = 1.0
    P_i: float = 1.0
    sigma2: float = 1e-11

    def __post_init__(self):
        check_int(self.M, "M", low=1)
        check_int(self.N, "N", low=1)
        check_int(self.K, "K", low=0, high=self.N)
        for name in ("P_s", "P_r", "sigma2"):
            check_positive(getattr(self, name), name)
        # a hybrid surface with no active budget is allowed (active elements then stay off)
        if not np.isfinite(self.P_i) or self.P_i < 0:
            raise ValueError(f"P_i must be a nonnegative finite number, got {self.P_i!r}")

    @classmethod
    def from_dbm(cls, M=2, N=32, K=4, P_s_dbm=30.0, P_r_dbm=30.0, P_i_dbm=30.0, sigma2_dbm=-80.0):
        return cls(
            M=M,
            N=N,
            K=K,
            P_s=float(dbm_to_watts(P_s_dbm)),
            P_r=float(dbm_to_watts(P_r_dbm)),
            P_i=float(dbm_to_watts(P_i_dbm)),
            sigma2=float(dbm_to_watts(sigma2_dbm)),
        )

    @property
    def gamma_s(self):
        return self.P_s / self.sigma2

    @property
    def gamma_r(self):
        return self.P_r / self.sigma2

    @property
    def gamma_i(self):
        return self.P_i / self.sigma2

    def replace(self, **changes):
        return replace(self, **changes)


def _as_point(p):
    arr = np.asarray(p, dtype=float)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"expected a 3-D coordinate, got {p!r}")
    return arr


@dataclass(frozen=True)
class Geometry:
    """Node positions in metres and per-link path-loss exponents."""

    source: tuple = (0.0, 0.0, 0.0)
    destination: tuple = (0.0, 100.0, 0.0)
    irs: tuple = (-10.0, 50.0, 20.0)
    relay: tuple = (10.0, 50.0, 10.0)
    alpha_si: float = 2.0
    alpha_ir: float = 2.0
    alpha_id: float = 2.0
    alpha_sr: float = 3.0
    alpha_rd: float = 3.0

    def __post_init__(self):
        for name in ("source", "destination", "irs", "relay"):
            object.__setattr__(self, name, tuple(_as_point(getattr(self, name))))
        for link in LINKS:
            check_positive(getattr(self, f"alpha_{link}"), f"alpha_{link}")
        for link, d in self.distances().items():
            if d <= 0:
                raise ValueError(f"link {link} has zero length")

    def _ends(self, link):
        names = {"s": self.source, "d": self.destination, "i": self.irs, "r": self.relay}
        return np.asarray(names[link[0]]), np.asarray(names[link[1]])

    def distances(self):
        return {link: float(np.linalg.norm(np.subtract(*self._ends(link)))) for link in LINKS}

    def path_loss_db(self):
        return {link: path_loss_db(d, getattr(self, f"alpha_{link}")) for link, d in self.distances().items()}

    def path_loss(self):
        """Linear power gains per link."""
        return {link: 10.0 ** (pl / 10.0) for link, pl in self.path_loss_db().items()}


@dataclass(frozen=True)
class ElementPartition:
    """Which IRS elements are active (the 0/1 diagonal of ``E_K``)."""

    active_mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.active_mask).astype(bool)
        if mask.ndim != 1 or mask.size == 0:
            raise ValueError("active_mask must be a non-empty 1-D array")
        mask.setflags(write=False)
        object.__setattr__(self, "active_mask", mask)

    @classmethod
    def random(cls, N, K, random_state=None):
        check_int(N, "N", low=1)
        check_int(K, "K", low=0, high=N)
        rng = check_random_state(random_state)
        mask = np.zeros(N, dtype=bool)
        mask[rng.choice(N, size=K, replace=False)] = True
        return cls(mask)

    @classmethod
    def from_indices(cls, N, active):
        idx = np.asarray(list(active), dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() >= N):
            raise ValueError(f"active indices must lie in [0, {N}), got {idx.tolist()}")
        mask = np.zeros(N, dtype=bool)
        mask[idx] = True
        return cls(mask)

    @property
    def N(self):
        return self.active_mask.size

    @property
    def K(self):
        return int(self.active_mask.sum())

    @property
    def e(self):
        """Diagonal of ``E_K`` as floats."""
        return self.active_mask.astype(float)

    @property
    def e_bar(self):
        return 1.0 - self.e

    @property
    def E(self):
        return np.diag(self.e)

    @property
    def E_bar(self):
        return np.diag(self.e_bar)

    @property
    def active(self):
        return np.flatnonzero(self.active_mask)

    @property
    def passive(self):
        return np.flatnonzero(~self.active_mask)


@dataclass(frozen=True)
class ChannelSet:
    h_si: np.ndarray
    h_sr: np.ndarray
    H_ir: np.ndarray
    h_rd: np.ndarray
    h_id: np.ndarray
    path_loss: dict = field(default_factory=dict)

    def __post_init__(self):
        H = check_complex_array(self.H_ir, "H_ir")
        if H.ndim != 2:
            raise ValueError("H_ir must be a matrix")
        M, N = H.shape
        shapes = {"h_si": (N,), "h_sr": (M,), "H_ir": (M, N), "h_rd": (M,), "h_id": (N,)}
        for name, shape in shapes.items():
            arr = check_complex_array(getattr(self, name), name, shape)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def M(self):
        return self.H_ir.shape[0]

    @property
    def N(self):
        return self.H_ir.shape[1]

    def digest(self):
        """Short content hash, used to check that methods shared a draw."""
        h = hashlib.sha1()
        for name in ("h_si", "h_sr", "H_ir", "h_rd", "h_id"):
            h.update(np.ascontiguousarray(getattr(self, name)).tobytes())
        return h.hexdigest()[:16]

    def without_irs(self):
        """Same direct links with every IRS channel zeroed."""
        return replace(
            self,
            h_si=np.zeros_like(self.h_si),
            H_ir=np.zeros_like(self.H_ir),
            h_id=np.zeros_like(self.h_id),
        )


def _cn(rng, shape, variance):
    return np.sqrt(variance / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_channels(random_state, geometry, config):
    """Draw one Rayleigh realisation; each entry is CN(0, linear path loss of its link)."""
    rng = check_random_state(random_state)
    pl = geometry.path_loss()
    M, N = config.M, config.N
    return ChannelSet(
        h_si=_cn(rng, (N,), pl["si"]),
        h_sr=_cn(rng, (M,), pl["sr"]),
        H_ir=_cn(rng, (M, N), pl["ir"]),
        h_rd=_cn(rng, (M,), pl["rd"]),
        h_id=_cn(rng, (N,), pl["id"]),
        path_loss=pl,
    )


@dataclass(frozen=True)
class NetworkState:
    """Relay matrix ``A`` and the diagonals of the two slot reflection matrices."""

    A: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray

    def __post_init__(self):
        A = check_complex_array(self.A, "A")
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        t1 = check_complex_array(self.theta1, "theta1")
        t2 = check_complex_array(self.theta2, "theta2", t1.shape)
        if t1.ndim != 1:
            raise ValueError("theta1/theta2 hold the diagonals and must be 1-D")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "theta1", t1)
        object.__setattr__(self, "theta2", t2)

    @property
    def Theta1(self):
        return np.diag(self.theta1)

    @property
    def Theta2(self):
        return np.diag(self.theta2)

    def check_passive_unit_modulus(self, partition, atol=1e-9):
        idx = partition.passive
        dev = max(
            np.max(np.abs(np.abs(self.theta1[idx]) - 1.0), initial=0.0),
            np.max(np.abs(np.abs(self.theta2[idx]) - 1.0), initial=0.0),
        )
        return dev <= atol


def _check_dims(state, ch, part):
    if state.A.shape != (ch.M, ch.M) or state.theta1.shape != (ch.N,) or part.N != ch.N:
        raise ValueError(
            f"dimension mismatch: A {state.A.shape}, theta {state.theta1.shape}, "
            f"channels (M={ch.M}, N={ch.N}), partition N={part.N}"
        )


def incident_vector(ch, theta1):
    """``h_sr + H_ir Theta1 h_si``: the signal part reaching the relay in slot 1."""
    return ch.h_sr + ch.H_ir @ (theta1 * ch.h_si)


def forward_row(ch, theta2):
    """``h_rd^H + h_id^H Theta2 H_ir^H`` as a 1-D row."""
    return ch.h_rd.conj() + (ch.h_id.conj() * theta2) @ ch.H_ir.conj().T


def snr_terms(state, ch, part, cfg):
    """Numerator and the four denominator terms of the end-to-end SNR."""
    _check_dims(state, ch, part)
    e = part.e
    u = incident_vector(ch, state.theta1)
    w = forward_row(ch, state.theta2) @ state.A
    num = cfg.gamma_s * abs(w @ u) ** 2
    irs1_noise = np.sum(np.abs((w @ ch.H_ir) * e * state.theta1) ** 2)
    relay_noise = np.sum(np.abs(w) ** 2)
    irs2_noise = np.sum(np.abs(ch.h_id.conj() * e * state.theta2) ** 2)
    return num, (irs1_noise, relay_noise, irs2_noise, 1.0)


def evaluate_snr(state, ch, part, cfg):
    num, den = snr_terms(state, ch, part, cfg)
    return float(num / sum(den))


def achievable_rate(snr):
    """Half-duplex rate ``0.5 log2(1 + snr)`` in bits/s/Hz."""
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise ValueError("snr must be nonnegative")
    out = 0.5 * np.log2(1.0 + snr)
    return float(out) if out.ndim == 0 else out


def power_irs_slot1(state, ch, part, cfg):
    """Active-element power in slot 1 over sigma2 (compare with ``gamma_i``)."""
    _check_dims(state, ch, part)
    et = part.e * state.theta1
    return float(cfg.gamma_s * np.sum(np.abs(et * ch.h_si) ** 2) + np.sum(np.abs(et) ** 2))


def power_relay(state, ch, part, cfg):
    """Relay transmit power over sigma2 (compare with ``gamma_r``)."""
    _check_dims(state, ch, part)
    A = state.A
    u = incident_vector(ch, state.theta1)
    AHE = (A @ ch.H_ir) * (part.e * state.theta1)
    return float(
        cfg.gamma_s * np.sum(np.abs(A @ u) ** 2) + np.sum(np.abs(AHE) ** 2) + np.sum(np.abs(A) ** 2)
    )


def power_irs_slot2(state, ch, part, cfg):
    """Active-element power in slot 2 over sigma2 (compare with ``gamma_i``)."""
    _check_dims(state, ch, part)
    A = state.A
    et2 = part.e * state.theta2
    # rows of E_K Theta2 H_ir^H A
    R = et2[:, None] * (ch.H_ir.conj().T @ A)
    u = incident_vector(ch, state.theta1)
    RHE = (R @ ch.H_ir) * (part.e * state.theta1)
    return float(
        cfg.gamma_s * np.sum(np.abs(R @ u) ** 2)
        + np.sum(np.abs(RHE) ** 2)
        + np.sum(np.abs(R) ** 2)
        + np.sum(np.abs(et2) ** 2)
    )


def _excess(p, cap):
    # with a zero budget any spent power is an (absolute) violation
    return p / cap - 1.0 if cap > 0 else p


def feasibility_report(state, ch, part, cfg):
    """Relative excess of each power constraint (<= 0 means satisfied) and the
    worst passive unit-modulus deviation."""
    idx = part.passive
    dev = max(
        np.max(np.abs(np.abs(state.theta1[idx]) - 1.0), initial=0.0),
        np.max(np.abs(np.abs(state.theta2[idx]) - 1.0), initial=0.0),
    )
    return {
        "unit_modulus": float(dev),
        "irs_slot1": _excess(power_irs_slot1(state, ch, part, cfg), cfg.gamma_i),
        "relay": _excess(power_relay(state, ch, part, cfg), cfg.gamma_r),
        "irs_slot2": _excess(power_irs_slot2(state, ch, part, cfg), cfg.gamma_i),
    }


def is_feasible(state, ch, part, cfg, rtol=1e-6):
    rep = feasibility_report(state, ch, part, cfg)
    return rep["unit_modulus"] <= rtol and all(rep[k] <= rtol for k in ("irs_slot1", "relay", "irs_slot2"))
