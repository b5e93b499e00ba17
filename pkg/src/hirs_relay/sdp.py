"""Small dense complex-Hermitian SDP solver.

Problems are posed in trace form, as maximisations::

    maximize    tr(C X) + cost * t
    subject to  tr(A_i X) + g_i t  = b_i        (equalities)
                tr(A_j X) + h_j t <= c_j        (inequalities)
                X Hermitian PSD,  t >= 0        (t only if ``scalar=True``)

The optional scalar ``t`` is the Charnes-Cooper normaliser; it is carried as a
1x1 PSD block next to ``X``.  The solver is an infeasible-start primal-dual
path-following method (HKM search direction, Mehrotra predictor-corrector)
that works on complex Hermitian data directly.  Setting ``embed=True`` maps
the problem to a real symmetric one through
``T(X) = [[Re X, -Im X], [Im X, Re X]]`` first; that route doubles the size and
its optimal face is degenerate (a complex rank-one optimum becomes rank two),
so it converges less reliably and is kept mainly for cross-checks.  Constraint matrices that are
diagonal are detected and handled without forming dense products, which is what
keeps the IRS subproblems (mostly diagonal selectors) cheap.
"""

from dataclasses import dataclass, field
from enum import Enum
import io
import logging

import numpy as np
import scipy.linalg as sla

from .numerics import hermitian_part, is_hermitian, NotHermitianError

logger = logging.getLogger(__name__)

MAX_DIM = 512


class SdpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITERATIONS = "max-iterations"
    NUMERICAL_FAILURE = "numerical-failure"


class SdpError(RuntimeError):
    """Raised by callers that need an optimal solve and did not get one."""

    def __init__(self, status, message=""):
        self.status = SdpStatus(status)
        super().__init__(f"SDP solve failed: {self.status.value}" + (f" ({message})" if message else ""))


@dataclass(frozen=True)
class LinearConstraint:
    A: np.ndarray
    rhs: float
    scalar_coef: float = 0.0


def _as_constraint(c):
    if isinstance(c, LinearConstraint):
        return c
    if len(c) == 2:
        return LinearConstraint(np.asarray(c[0]), float(c[1]))
    A, g, rhs = c
    return LinearConstraint(np.asarray(A), float(rhs), float(g))


@dataclass
class SdpProblem:
    C: np.ndarray
    equalities: list = field(default_factory=list)
    inequalities: list = field(default_factory=list)
    scalar: bool = False
    scalar_cost: float = 0.0

    def __post_init__(self):
        self.C = np.asarray(self.C)
        n = self.C.shape[0]
        if self.C.ndim != 2 or self.C.shape != (n, n):
            raise ValueError("C must be square")
        if n > MAX_DIM:
            raise ValueError(f"matrix dimension {n} exceeds the limit of {MAX_DIM}")
        self.equalities = [_as_constraint(c) for c in self.equalities]
        self.inequalities = [_as_constraint(c) for c in self.inequalities]
        for k, mat in enumerate([self.C] + [c.A for c in self.equalities + self.inequalities]):
            if mat.shape != (n, n):
                raise ValueError(f"data matrix {k} has shape {mat.shape}, expected {(n, n)}")
            if not is_hermitian(mat):
                raise NotHermitianError(f"data matrix {k} is not Hermitian")
        if not self.scalar and any(c.scalar_coef for c in self.equalities + self.inequalities):
            raise ValueError("scalar coefficients given but scalar=False")

    @property
    def n(self):
        return self.C.shape[0]

    @property
    def constraints(self):
        return self.equalities + self.inequalities

    def evaluate(self, X, t=0.0):
        return float(np.real(np.trace(self.C @ X))) + self.scalar_cost * t

    def residuals(self, X, t=0.0):
        """Signed residual of every constraint (equalities first); an
        inequality is satisfied when its residual is <= 0."""
        return np.array([np.real(np.trace(c.A @ X)) + c.scalar_coef * t - c.rhs for c in self.constraints])


@dataclass(frozen=True)
class SdpSettings:
    max_iter: int = 200
    feastol: float = 1e-9
    gaptol: float = 1e-8
    # fallback acceptance when progress stalls
    loose_feastol: float = 1e-7
    loose_gaptol: float = 1e-6
    infeas_tol: float = 1e-8
    step: float = 0.98
    embed: bool = False


@dataclass
class SdpSolution:
    status: SdpStatus
    X: np.ndarray = None
    scalar: float = 0.0
    primal_objective: float = np.nan
    dual_objective: float = np.nan
    y: np.ndarray = None
    iterations: int = 0
    max_violation: float = np.nan
    info: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status is SdpStatus.OPTIMAL

    def raise_for_status(self):
        if not self.ok:
            raise SdpError(self.status, self.info.get("message", ""))
        return self


def embed_hermitian_as_real(X):
    """Real symmetric ``[[Re X, -Im X], [Im X, Re X]]`` of a Hermitian matrix."""
    X = np.asarray(X)
    if not is_hermitian(X):
        raise NotHermitianError("embedding needs a Hermitian matrix")
    R, I = X.real, X.imag
    return np.block([[R, -I], [I, R]])


def unembed_real(Y):
    """Inverse of :func:`embed_hermitian_as_real`, averaging away any
    departure from the block structure."""
    n = Y.shape[0] // 2
    re = 0.5 * (Y[:n, :n] + Y[n:, n:])
    im = 0.5 * (Y[n:, :n] - Y[:n, n:])
    return hermitian_part(re + 1j * im)


def extract_rank1(X):
    """Principal component ``sqrt(lam_max) q_max`` and ``1 - lam_max / tr(X)``."""
    X = hermitian_part(np.asarray(X))
    tr = float(np.real(np.trace(X)))
    if not tr > 0:
        raise ValueError("extract_rank1 needs a matrix with positive trace")
    lam, Q = np.linalg.eigh(X)
    lmax = max(lam[-1], 0.0)
    gap = min(max(1.0 - lmax / tr, 0.0), 1.0)
    return np.sqrt(lmax) * Q[:, -1], gap


def dump_problem(problem, fh=None):
    """Plain-text listing of a problem, matrices row-major as ``re im`` pairs.

    Returns the text when ``fh`` is None.
    """
    out = io.StringIO() if fh is None else fh

    def write_matrix(M):
        for row in np.asarray(M, dtype=complex):
            out.write(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row) + "\n")

    out.write(f"n {problem.n}\n")
    out.write(f"scalar {int(problem.scalar)} cost {problem.scalar_cost:.17g}\n")
    out.write("objective maximize\n")
    write_matrix(problem.C)
    for kind, group in (("eq", problem.equalities), ("le", problem.inequalities)):
        for c in group:
            out.write(f"constraint {kind} rhs {c.rhs:.17g} scalar_coef {c.scalar_coef:.17g}\n")
            write_matrix(c.A)
    if fh is None:
        return out.getvalue()
    return None


# ---------------------------------------------------------------------------
# interior-point core


class _Cone:
    """Standard-form data: min <C,X> + c.x  s.t.  A(X) + Alp x = b,  X PSD, x >= 0."""

    def __init__(self, C, rows, Alp, b, c):
        self.n = C.shape[0]
        self.C = C
        self.c = c
        self.Alp = Alp
        self.b = b
        self.m = len(rows)
        self.dtype = C.dtype
        diag_rows, dense_rows = [], []
        for i, A in enumerate(rows):
            (diag_rows if _is_diagonal(A) else dense_rows).append(i)
        self.diag_rows = np.array(diag_rows, dtype=int)
        self.dense_rows = np.array(dense_rows, dtype=int)
        n = self.n
        self.Dg = np.array([np.real(np.diag(rows[i])) for i in diag_rows]).reshape(len(diag_rows), n)
        self.Ad = np.array([rows[i] for i in dense_rows], dtype=self.dtype).reshape(len(dense_rows), n, n)

    def A(self, Z):
        out = np.empty(self.m)
        if len(self.dense_rows):
            out[self.dense_rows] = np.real(np.einsum("kij,ji->k", self.Ad, Z))
        if len(self.diag_rows):
            out[self.diag_rows] = self.Dg @ np.real(np.diag(Z))
        return out

    def AT(self, y):
        Z = np.zeros((self.n, self.n), dtype=self.dtype)
        if len(self.dense_rows):
            Z += np.einsum("k,kij->ij", y[self.dense_rows], self.Ad)
        if len(self.diag_rows):
            Z[np.diag_indices(self.n)] += self.Dg.T @ y[self.diag_rows]
        return Z

    def schur(self, X, Sinv, w):
        """``M_ij = Re tr(A_i X A_j S^-1) + sum_k Alp_ik w_k Alp_jk``."""
        m = self.m
        M = np.zeros((m, m))
        dr, gr = self.dense_rows, self.diag_rows
        if len(dr):
            G = X @ self.Ad @ Sinv
            M[np.ix_(dr, dr)] = np.real(np.einsum("kij,lji->kl", self.Ad, G))
            if len(gr):
                dG = np.real(np.diagonal(G, axis1=1, axis2=2))
                block = self.Dg @ dG.T
                M[np.ix_(gr, dr)] = block
                M[np.ix_(dr, gr)] = block.T
        if len(gr):
            M[np.ix_(gr, gr)] = self.Dg @ np.real(X * Sinv.T) @ self.Dg.T
        M += (self.Alp * w) @ self.Alp.T
        return 0.5 * (M + M.T)


def _is_diagonal(A):
    return not np.any(A - np.diag(np.diag(A)))


def _inner(X, S):
    return float(np.real(np.vdot(X, S)))


def _max_psd_step(X, dX):
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    Y = sla.solve_triangular(L, dX, lower=True)
    Z = sla.solve_triangular(L, Y.conj().T, lower=True)
    lam = np.linalg.eigvalsh(hermitian_part(Z))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _max_lp_step(x, dx):
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


def _inv_pd(S):
    L = np.linalg.cholesky(S)
    Linv = sla.solve_triangular(L, np.eye(S.shape[0], dtype=S.dtype), lower=True)
    return Linv.conj().T @ Linv


def _ipm(cone, settings):
    n, m = cone.n, cone.m
    p = cone.c.size
    nu = n + p
    b, C, c, Alp = cone.b, cone.C, cone.c, cone.Alp
    normb = 1.0 + np.linalg.norm(b)
    normC = 1.0 + np.linalg.norm(C) + np.linalg.norm(c)

    row_norms = np.ones(m)
    xi = max(10.0, np.sqrt(n), np.max(n * (1.0 + np.abs(b)) / (1.0 + row_norms), initial=0.0))
    eta = max(10.0, np.sqrt(n), 1.0 + np.linalg.norm(C))
    eye = np.eye(n, dtype=cone.dtype)
    X, S = xi * eye, eta * eye
    x, s = np.full(p, xi), np.full(p, eta)
    y = np.zeros(m)

    best = None
    history = []
    status = SdpStatus.MAX_ITERATIONS
    it = 0
    for it in range(settings.max_iter + 1):
        rp = b - cone.A(X) - Alp @ x
        Rd = C - cone.AT(y) - S
        rd = c - Alp.T @ y - s
        mu = (_inner(X, S) + x @ s) / nu
        pobj = _inner(C, X) + c @ x
        dobj = b @ y
        pinf = np.linalg.norm(rp) / normb
        dinf = np.sqrt(np.linalg.norm(Rd) ** 2 + np.linalg.norm(rd) ** 2) / normC
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        history.append((pobj, dobj, pinf, dinf, gap))
        merit = max(pinf, dinf, gap)
        if best is None or merit < best[0]:
            best = (merit, X.copy(), x.copy(), y.copy(), S.copy(), s.copy(), pinf, dinf, gap)

        if pinf <= settings.feastol and dinf <= settings.feastol and gap <= settings.gaptol:
            status = SdpStatus.OPTIMAL
            break
        # infeasibility certificates from diverging iterates
        if dobj > 0:
            ray = np.sqrt(np.linalg.norm(cone.AT(y) + S) ** 2 + np.linalg.norm(Alp.T @ y + s) ** 2)
            if ray / dobj < settings.infeas_tol:
                status = SdpStatus.INFEASIBLE
                break
        if pobj < 0:
            ray = np.linalg.norm(cone.A(X) + Alp @ x)
            if ray / -pobj < settings.infeas_tol:
                status = SdpStatus.UNBOUNDED
                break
        if it == settings.max_iter:
            break

        try:
            Sinv = _inv_pd(S)
            w = x / s
            M = cone.schur(X, Sinv, w)
            factor = sla.cho_factor(M)
        except (np.linalg.LinAlgError, ValueError):
            try:
                M = M + 1e-12 * np.trace(M) / m * np.eye(m)
                factor = sla.cho_factor(M)
            except (np.linalg.LinAlgError, ValueError, UnboundLocalError):
                status = SdpStatus.NUMERICAL_FAILURE
                break
        XRdS = X @ Rd @ Sinv

        def direction(target, CorrX, corr_lp):
            K = target * Sinv - X
            if CorrX is not None:
                K = K - CorrX @ Sinv
            lp_term = (target - x * s - corr_lp) / s
            rhs = rp - cone.A(hermitian_part(K)) + cone.A(hermitian_part(XRdS)) - Alp @ (lp_term - x * rd / s)
            dy = sla.cho_solve(factor, rhs)
            dS = Rd - cone.AT(dy)
            ds = rd - Alp.T @ dy
            dX = hermitian_part(K - X @ dS @ Sinv)
            dx = lp_term - x * ds / s
            return dX, dx, dy, dS, ds

        def steps(dX, dx, dS, ds):
            ap = min(_max_psd_step(X, dX), _max_lp_step(x, dx))
            ad = min(_max_psd_step(S, dS), _max_lp_step(s, ds))
            return ap, ad

        dXa, dxa, dya, dSa, dsa = direction(0.0, None, np.zeros(p))
        ap, ad = steps(dXa, dxa, dSa, dsa)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = (_inner(X + ap * dXa, S + ad * dSa) + (x + ap * dxa) @ (s + ad * dsa)) / nu
        sigma = float(np.clip((max(mu_aff, 0.0) / mu) ** 3, 0.0, 1.0))

        dX, dx, dy, dS, ds = direction(sigma * mu, dXa @ dSa, dxa * dsa)
        ap, ad = steps(dX, dx, dS, ds)
        ap = min(1.0, settings.step * ap)
        ad = min(1.0, settings.step * ad)
        if ap < 1e-10 and ad < 1e-10:
            status = SdpStatus.NUMERICAL_FAILURE
            break
        X = X + ap * dX
        x = x + ap * dx
        y = y + ad * dy
        S = S + ad * dS
        s = s + ad * ds

    if status in (SdpStatus.MAX_ITERATIONS, SdpStatus.NUMERICAL_FAILURE) and best is not None:
        _, bX, bx, by, bS, bs, pinf, dinf, gap = best
        if pinf <= settings.loose_feastol and dinf <= settings.loose_feastol and gap <= settings.loose_gaptol:
            X, x, y, S, s = bX, bx, by, bS, bs
            status = SdpStatus.OPTIMAL
    return dict(status=status, X=X, x=x, y=y, S=S, s=s, iterations=it, history=history)


def _presolve(rows, Alp, b):
    """Drop linearly dependent rows; report inconsistency.

    Returns ``(keep, consistent)``.
    """
    m = len(rows)
    R = np.hstack([np.array([np.concatenate([A.real.ravel(), A.imag.ravel()]) for A in rows]), Alp])
    norms = np.linalg.norm(R, axis=1)
    norms[norms == 0] = 1.0
    Rn = R / norms[:, None]
    _, r, piv = sla.qr(Rn.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    rank = int(np.sum(d > 1e-10 * max(d[0], 1e-300))) if d.size else 0
    if rank == m:
        return np.arange(m), True
    keep = np.sort(piv[:rank])
    drop = np.setdiff1d(np.arange(m), keep)
    coef, *_ = np.linalg.lstsq(Rn[keep].T, Rn[drop].T, rcond=None)
    bn = b / norms
    mismatch = np.abs(coef.T @ bn[keep] - bn[drop])
    return keep, bool(np.all(mismatch <= 1e-8 * (1.0 + np.abs(bn[drop]))))


def solve_sdp(problem, settings=None):
    """Solve ``problem`` and return an :class:`SdpSolution` whose objective
    values are in the caller's (complex, unscaled) units."""
    settings = settings or SdpSettings()
    n = problem.n
    cons = problem.constraints
    n_eq, n_in = len(problem.equalities), len(problem.inequalities)
    m = len(cons)
    p = int(problem.scalar) + n_in

    # LP block: [t, slack_1, ..., slack_q]
    Alp = np.zeros((m, p))
    off = int(problem.scalar)
    for i, con in enumerate(cons):
        if problem.scalar:
            Alp[i, 0] = con.scalar_coef
        if i >= n_eq:
            Alp[i, off + i - n_eq] = 1.0
    c_lp = np.zeros(p)
    if problem.scalar:
        c_lp[0] = -problem.scalar_cost
    b = np.array([con.rhs for con in cons], dtype=float)
    mats = [hermitian_part(con.A.astype(complex)) for con in cons]
    C = hermitian_part(problem.C.astype(complex))

    if m:
        keep, consistent = _presolve(mats, Alp, b)
        if not consistent:
            return SdpSolution(SdpStatus.INFEASIBLE, info={"message": "inconsistent linear equalities"})
    else:
        keep = np.arange(0)

    # scale rows and objective
    rows_used = [mats[i] for i in keep]
    Alp_u, b_u = Alp[keep], b[keep]
    lead = Alp_u[:, :off]
    norms = np.array([np.sqrt(np.linalg.norm(A) ** 2 + np.linalg.norm(a) ** 2) for A, a in zip(rows_used, lead)])
    norms[norms == 0] = 1.0
    # slacks live in normalised units so a wrong-signed multiplier is never cheap
    Alp_n = Alp_u / norms[:, None]
    Alp_n[:, off:] = Alp_u[:, off:]
    cnorm = max(np.linalg.norm(C), abs(problem.scalar_cost))
    cnorm = cnorm if cnorm > 0 else 1.0

    if settings.embed:
        emb = lambda A: 0.5 * np.block([[A.real, -A.imag], [A.imag, A.real]])
        rows_int = [emb(A) / r for A, r in zip(rows_used, norms)]
        C_int = -emb(C) / cnorm
    else:
        rows_int = [A / r for A, r in zip(rows_used, norms)]
        C_int = -C / cnorm
    cone = _Cone(C_int, rows_int, Alp_n, b_u / norms, c_lp / cnorm)
    res = _ipm(cone, settings)

    status = res["status"]
    Xi = res["X"]
    X = unembed_real(Xi) if settings.embed else hermitian_part(Xi)
    t = float(res["x"][0]) if problem.scalar else 0.0
    y_full = np.zeros(m)
    y_full[keep] = -cnorm * res["y"] / norms
    info = {"history": res["history"], "kept_rows": keep}
    if settings.embed:
        info["X_embedded"] = Xi
    sol = SdpSolution(status=status, iterations=res["iterations"], info=info)
    if status is SdpStatus.OPTIMAL or status in (SdpStatus.MAX_ITERATIONS, SdpStatus.NUMERICAL_FAILURE):
        sol.X = X
        sol.scalar = t
        sol.y = y_full
        sol.primal_objective = problem.evaluate(X, t)
        sol.dual_objective = float(b @ y_full)
        sol.max_violation = _max_violation(problem, X, t)
    if status is SdpStatus.INFEASIBLE:
        info["message"] = "primal infeasibility certificate found"
    elif status is SdpStatus.UNBOUNDED:
        info["message"] = "objective unbounded (dual infeasibility certificate found)"
    logger.debug("sdp n=%d m=%d status=%s iters=%d", n, m, status.value, res["iterations"])
    return sol


def _max_violation(problem, X, t):
    res = problem.residuals(X, t)
    n_eq = len(problem.equalities)
    viol = np.abs(res)
    viol[n_eq:] = np.maximum(res[n_eq:], 0.0)
    xnorm = np.linalg.norm(X)
    scale = np.array(
        [max(1.0, abs(c.rhs), np.linalg.norm(c.A) * xnorm + abs(c.scalar_coef * t)) for c in problem.constraints]
    )
    return float(np.max(viol / scale, initial=0.0))
