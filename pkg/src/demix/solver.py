"""Nuclear-norm minimization for the lifted demixing problem.

The convex program

    minimize    sum_i ||X_i||_*
    subject to  sum_i A_i(X_i) = y                  (equality mode)
    or          ||sum_i A_i(X_i) - y||_2 <= eta     (ball mode)

is solved by an over-relaxed ADMM splitting: the nuclear term is handled
per block by singular-value thresholding, the measurement constraint by an
affine (or norm-ball) projection built on the Gram machinery in `lifting`,
and a scaled dual variable ties the two halves together.  With a fixed
penalty the iteration is a Krasnosel'skii-Mann fixed-point scheme, so the
recorded stationarity merit (objective proximal progress plus constraint
penalty, measured as the fixed-point residual) is non-increasing.

When the ground truth is real -- the standard signal model here -- the
minimization is carried out over real lifted matrices by stacking the
real and imaginary parts of the constraint rows.  That restriction halves
the unknowns, which moves the empirical recovery boundary down to roughly
L ~ 1.5 r (K + N) and matches the phase transitions this package is
calibrated against; the general complex program needs visibly more
measurements.  `SolverConfig.variables` controls the choice ("auto" picks
real exactly when the ensemble's truth is real).

Everything here is deterministic: no randomness enters the iteration.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import ConfigError, ConvergenceError, DimensionError
from .lifting import (
    GramSolver,
    LiftedBlocks,
    apply_composite,
    apply_composite_adjoint,
    composite_matrix,
    pack,
    unpack,
)

EQUALITY = "equality"
BALL = "ball"
MODES = (EQUALITY, BALL)

VARIABLES = ("auto", "real", "complex")

# Global relative error below this counts a trial as an exact recovery.
SUCCESS_TOL = 1e-3

# Assemble the composite matrix densely when L * sum(K_i N_i) stays below
# this; beyond it, fall back to matrix-free FFT/BLAS application.
_DENSE_ENTRY_LIMIT = 4_000_000

# Ball-mode residual may exceed eta by at most this relative slack.
_BALL_SLACK = 1e-6

# Relative inconsistency of the equality system that triggers a hard error.
_CONSISTENCY_TOL = 1e-8


def nuclear_norm(M):
    """Sum of singular values of a dense matrix."""
    return float(np.linalg.svd(np.asarray(M), compute_uv=False).sum())


def svt(M, tau):
    """Singular-value soft-thresholding: the prox of tau*||.||_* at M."""
    if tau < 0:
        raise ConfigError("svt threshold must be nonnegative, got %r" % (tau,))
    M = np.asarray(M)
    if tau == 0:
        return M.copy()
    U, sig, Vh = np.linalg.svd(M, full_matrices=False)
    sig = np.maximum(sig - tau, 0.0)
    return (U * sig) @ Vh


def extract_rank1(X):
    """Leading rank-one factors of X.

    Returns (h, x, sigma1, gap) with h x^* equal to the best rank-one
    approximation of X, split symmetrically (both factors carry
    sqrt(sigma1)).  The free global phase is fixed so that the
    largest-magnitude entry of h is real and positive; gap = sigma2/sigma1
    is reported as a rank-one-ness diagnostic.  A zero matrix yields zero
    factors with sigma1 = gap = 0.
    """
    X = np.asarray(X)
    if X.ndim != 2:
        raise DimensionError("extract_rank1 expects a matrix, got shape %r" % (X.shape,))
    K, N = X.shape
    if not np.any(X):
        return np.zeros(K, dtype=complex), np.zeros(N, dtype=complex), 0.0, 0.0
    U, sig, Vh = np.linalg.svd(X, full_matrices=False)
    s1 = float(sig[0])
    gap = float(sig[1] / sig[0]) if sig.size > 1 and s1 > 0 else 0.0
    u1 = U[:, 0].astype(complex)
    v1 = np.conj(Vh[0]).astype(complex)
    j = int(np.argmax(np.abs(u1)))
    phase = u1[j] / abs(u1[j])
    root = math.sqrt(s1)
    return root * u1 / phase, root * v1 / phase, s1, gap


def align_and_score(truth, estimates):
    """Score lifted estimates against factor truth modulo per-user scaling.

    truth is a list of (h_i, x_i) pairs; estimates is a LiftedBlocks (or a
    plain list of K_i x N_i matrices).  Returns (per_user, rel_error):
    per_user holds one (h_err, x_err, c) triple per user, where
    c = <hhat, h>/||hhat||^2 minimizes ||h - c*hhat|| over scalars and the
    errors are the aligned residual norms ||h - c*hhat|| and
    ||x - xhat/conj(c)||; rel_error is the lifted-matrix metric
    sqrt(sum_i ||Xhat_i - X_i||_F^2) / sqrt(sum_i ||X_i||_F^2).

    A zero (or rank-zero) estimate skips alignment and reports the truth
    norms as errors with c = 0.
    """
    blocks = list(estimates)
    if len(blocks) != len(truth):
        raise DimensionError(
            "truth has %d users but estimates has %d" % (len(truth), len(blocks))
        )
    num_sq = 0.0
    den_sq = 0.0
    per_user = []
    for (h, x), Xhat in zip(truth, blocks):
        h = np.asarray(h)
        x = np.asarray(x)
        Xhat = np.asarray(Xhat)
        if Xhat.shape != (h.size, x.size):
            raise DimensionError(
                "estimate shape %r does not match truth dims (%d, %d)"
                % (Xhat.shape, h.size, x.size)
            )
        X = np.outer(h, np.conj(x))
        num_sq += float(np.linalg.norm(Xhat - X) ** 2)
        den_sq += float(np.linalg.norm(X) ** 2)
        hhat, xhat, s1, _gap = extract_rank1(Xhat)
        c = 0.0 + 0.0j
        if s1 > 0:
            c = complex(np.vdot(hhat, h) / np.vdot(hhat, hhat))
        if c == 0:
            per_user.append((float(np.linalg.norm(h)), float(np.linalg.norm(x)), 0j))
        else:
            h_err = float(np.linalg.norm(h - c * hhat))
            x_err = float(np.linalg.norm(x - xhat / np.conj(c)))
            per_user.append((h_err, x_err, c))
    if den_sq > 0:
        rel_error = math.sqrt(num_sq) / math.sqrt(den_sq)
    else:
        rel_error = 0.0 if num_sq == 0 else math.inf
    return per_user, rel_error


@dataclass(frozen=True)
class SolverConfig:
    """Tuning knobs for `solve`.

    mode is "equality" or "ball"; eta is the ball radius (ignored in
    equality mode).  rho is the ADMM penalty, over_relaxation the
    relaxation factor in [1, 1.9].  rho_adapt enables residual-balancing
    updates of rho (capped at x10 / /10 of the initial value); it is off
    by default because the merit-monotonicity guarantee needs a fixed rho.
    variables selects the search space: "real" restricts the lifted
    matrices to real entries, "complex" solves the general program, and
    "auto" picks real exactly when the ensemble's truth is real.
    """

    mode: str = EQUALITY
    eta: float = 0.0
    rho: float = 1.0
    max_iters: int = 20000
    tol_primal: float = 1e-7
    tol_dual: float = 1e-7
    over_relaxation: float = 1.6
    rho_adapt: bool = False
    variables: str = "auto"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError("mode must be one of %r, got %r" % (MODES, self.mode))
        if self.variables not in VARIABLES:
            raise ConfigError(
                "variables must be one of %r, got %r" % (VARIABLES, self.variables)
            )
        if not self.rho > 0:
            raise ConfigError("rho must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if not (self.tol_primal > 0 and self.tol_dual > 0):
            raise ConfigError("tolerances must be positive")
        if not 1.0 <= self.over_relaxation <= 1.9:
            raise ConfigError(
                "over_relaxation must lie in [1, 1.9], got %r" % (self.over_relaxation,)
            )
        if self.eta < 0:
            raise ConfigError("eta must be nonnegative")


@dataclass
class SolverReport:
    """Everything `solve` knows at exit.

    estimates holds the lifted blocks Xhat_i in original units; factors is
    a list of (hhat_i, xhat_i, c_i) with c_i the truth-alignment scalar
    (None when the ensemble carries no truth); gaps are the per-block
    sigma2/sigma1 diagnostics.  per_user_errors are relative aligned
    factor errors (h, x) per user; rel_error is the global lifted metric
    and success is rel_error < 1e-3.  merit_history / objective_history
    trace the iteration (original units).
    """

    mode: str
    variables: str
    converged: bool
    iterations: int
    primal_residual: float
    dual_residual: float
    feasibility: float
    objective: float
    estimates: LiftedBlocks
    factors: list
    gaps: list
    per_user_errors: list | None
    rel_error: float | None
    success: bool | None
    eta: float
    rho_final: float
    merit_history: np.ndarray = field(repr=False)
    objective_history: np.ndarray = field(repr=False)

    CSV_FIELDS = (
        "mode",
        "variables",
        "converged",
        "iterations",
        "primal_residual",
        "dual_residual",
        "feasibility",
        "objective",
        "rel_error",
        "success",
        "eta",
        "rho_final",
        "gaps",
    )

    def csv_row(self):
        """One CSV row (strings), aligned with CSV_FIELDS."""
        return (
            self.mode,
            self.variables,
            str(self.converged),
            str(self.iterations),
            repr(self.primal_residual),
            repr(self.dual_residual),
            repr(self.feasibility),
            repr(self.objective),
            "" if self.rel_error is None else repr(self.rel_error),
            "" if self.success is None else str(self.success),
            repr(self.eta),
            repr(self.rho_final),
            ";".join(repr(g) for g in self.gaps),
        )

    def write_trace(self, path):
        """Write the per-iteration merit/objective trace as CSV."""
        with open(path, "w") as fh:
            fh.write("iter,merit,objective\n")
            for k, (m, o) in enumerate(zip(self.merit_history, self.objective_history)):
                fh.write("%d,%r,%r\n" % (k + 1, m, o))


def _offsets(dims):
    out = []
    lo = 0
    for K, N in dims:
        out.append((lo, lo + K * N, K, N))
        lo += K * N
    return out


def _blocks_svt(vec, offsets, tau):
    """Per-block SVT on a packed vector; returns (result, objective)."""
    out = np.empty_like(vec)
    obj = 0.0
    for lo, hi, K, N in offsets:
        U, sig, Vh = np.linalg.svd(vec[lo:hi].reshape(K, N), full_matrices=False)
        sig = np.maximum(sig - tau, 0.0)
        out[lo:hi] = ((U * sig) @ Vh).reshape(-1)
        obj += float(sig.sum())
    return out, obj


def _operators(ens, dims):
    """Forward/adjoint closures for the composite measurement map."""
    if ens.L * ens.sum_kn <= _DENSE_ENTRY_LIMIT:
        Phi = composite_matrix(ens)
        PhiH = np.ascontiguousarray(Phi.conj().T)
        return (lambda vec: Phi @ vec), (lambda res: PhiH @ res)

    def mv(vec):
        return apply_composite(ens, unpack(vec, dims))

    def rmv(res):
        return pack(apply_composite_adjoint(ens, res))

    return mv, rmv


def _real_operators(ens, dims):
    """Real-stacked forward/adjoint closures: rows are [Re(Phi); Im(Phi)].

    For a real unknown z the complex constraint Phi z = y is equivalent to
    the 2L real equations P z = [Re y; Im y] with P = [Re Phi; Im Phi];
    P^T w equals Re(Phi^H (w_re + i w_im)).  Returns (mv, rmv, P) with P
    None in the matrix-free regime.
    """
    if ens.L * ens.sum_kn <= _DENSE_ENTRY_LIMIT:
        Phi = composite_matrix(ens)
        P = np.ascontiguousarray(np.vstack([Phi.real, Phi.imag]))
        PT = np.ascontiguousarray(P.T)
        return (lambda vec: P @ vec), (lambda res: PT @ res), P
    L = ens.L

    def mv(vec):
        c = apply_composite(ens, unpack(vec.astype(complex), dims))
        return np.concatenate([c.real, c.imag])

    def rmv(res):
        g = pack(apply_composite_adjoint(ens, res[:L] + 1j * res[L:]))
        return np.ascontiguousarray(g.real)

    return mv, rmv, None


class _StackedGram:
    """Cached solver for (shift*I + P P^T) on the real-stacked row space.

    Mirrors lifting.GramSolver: Cholesky with a pivot check, eigh
    pseudo-inverse when the unshifted Gram is singular (always the case
    when sum K_i N_i < 2L), conjugate gradients when P was never
    assembled.
    """

    def __init__(self, ens, P, mv, rmv, shift=0.0):
        self.shift = float(shift)
        self._mv, self._rmv = mv, rmv
        self._mode = None
        two_l = 2 * ens.L
        if P is not None:
            G = P @ P.T
            if self.shift:
                G = G + self.shift * np.eye(two_l)
            singular = self.shift == 0.0 and ens.sum_kn < two_l
            if not singular:
                try:
                    cho = scipy.linalg.cho_factor(G)
                    piv = np.abs(np.diagonal(cho[0]))
                    if piv.min() <= piv.max() * 1e-7:
                        singular = True
                    else:
                        self._cho = cho
                        self._mode = "chol"
                except scipy.linalg.LinAlgError:
                    singular = True
            if singular:
                w, V = np.linalg.eigh(G)
                cut = max(float(w[-1]), 0.0) * 1e-12
                winv = np.where(w > cut, 1.0 / np.where(w > cut, w, 1.0), 0.0)
                self._eig = (V, winv)
                self._mode = "pinv"
        else:
            self._mode = "cg"
            self._two_l = two_l

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if self._mode == "chol":
            return scipy.linalg.cho_solve(self._cho, rhs)
        if self._mode == "pinv":
            V, winv = self._eig
            return V @ (winv * (V.T @ rhs))
        mv, rmv, shift = self._mv, self._rmv, self.shift

        def gmul(w):
            return shift * w + mv(rmv(w))

        op = scipy.sparse.linalg.LinearOperator(
            (self._two_l, self._two_l), matvec=gmul, dtype=float
        )
        out, info = scipy.sparse.linalg.cg(op, rhs, rtol=1e-10, atol=0.0, maxiter=20000)
        if info != 0:
            raise ConvergenceError(
                f"CG on the stacked Gram system did not converge (info={info})"
            )
        return out


def _resolve_variables(ens, cfg):
    """Apply the "auto" rule: real variables iff the truth is real."""
    if cfg.variables != "auto":
        return cfg.variables
    if ens.truth is None:
        return "complex"
    for h, x in ens.truth:
        if np.any(np.asarray(h).imag != 0) or np.any(np.asarray(x).imag != 0):
            return "complex"
    return "real"


def _report(ens, cfg, variables, z_scaled, scale, converged, iterations, r_pri,
            s_dual, feas, rho, merit_hist, obj_hist):
    """Unscale, factor, align, and assemble the SolverReport."""
    dims = tuple(ens.dims)
    estimates = unpack((z_scaled * scale).astype(complex), dims)
    objective = sum(nuclear_norm(Xi) for Xi in estimates)
    raw = [extract_rank1(Xi) for Xi in estimates]
    gaps = [g for _h, _x, _s, g in raw]
    if ens.truth is not None:
        per_user_abs, rel_error = align_and_score(ens.truth, estimates)
        factors = [
            (h, x, c) for (h, x, _s, _g), (_he, _xe, c) in zip(raw, per_user_abs)
        ]
        per_user_errors = []
        for (h_err, x_err, _c), (ht, xt) in zip(per_user_abs, ens.truth):
            hn = float(np.linalg.norm(ht))
            xn = float(np.linalg.norm(xt))
            per_user_errors.append(
                (h_err / hn if hn > 0 else h_err, x_err / xn if xn > 0 else x_err)
            )
        success = bool(rel_error < SUCCESS_TOL)
    else:
        factors = [(h, x, None) for h, x, _s, _g in raw]
        per_user_errors = None
        rel_error = None
        success = None
    return SolverReport(
        mode=cfg.mode,
        variables=variables,
        converged=converged,
        iterations=iterations,
        primal_residual=float(r_pri),
        dual_residual=float(s_dual),
        feasibility=float(feas),
        objective=float(objective),
        estimates=estimates,
        factors=factors,
        gaps=gaps,
        per_user_errors=per_user_errors,
        rel_error=rel_error,
        success=success,
        eta=cfg.eta,
        rho_final=float(rho),
        merit_history=np.asarray(merit_hist, dtype=float) * scale,
        objective_history=np.asarray(obj_hist, dtype=float) * scale,
    )


def _adapt_rho(rho, rho0, r_pri, s_dual, u_blocks):
    """Residual-balancing rho update (capped), rescaling scaled duals."""
    new_rho = rho
    if r_pri > 10.0 * s_dual:
        new_rho = min(rho * 2.0, rho0 * 10.0)
    elif s_dual > 10.0 * r_pri:
        new_rho = max(rho / 2.0, rho0 / 10.0)
    if new_rho != rho:
        for u in u_blocks:
            u *= rho / new_rho
    return new_rho


def solve(ens, config=None):
    """Minimize sum_i ||X_i||_* under the measurement constraint on ens.y.

    Equality mode enforces sum_i A_i(X_i) = y exactly; ball mode relaxes it
    to ||sum_i A_i(X_i) - y|| <= config.eta.  The problem is scaled by
    ||y|| internally, solved by over-relaxed ADMM, and the report is
    returned in original units.  Deterministic for a fixed (ens, config).
    """
    cfg = config if config is not None else SolverConfig()
    dims = tuple(ens.dims)
    y = np.asarray(ens.y, dtype=complex)
    if y.shape != (ens.L,):
        raise DimensionError("observation must have length L=%d" % ens.L)
    ynorm = float(np.linalg.norm(y))
    variables = _resolve_variables(ens, cfg)

    if cfg.mode == BALL and cfg.eta > ynorm:
        raise ConfigError(
            "ball radius eta=%r exceeds ||y||=%r; the zero solution is "
            "trivially optimal and the program is degenerate" % (cfg.eta, ynorm)
        )
    if len(dims) == 0:
        if ynorm > 0:
            raise ConfigError("ensemble has no users but a nonzero observation")
        return _report(ens, cfg, variables, np.zeros(0, dtype=complex), 1.0,
                       True, 0, 0.0, 0.0, 0.0, cfg.rho, [], [])
    if ynorm == 0.0 or (cfg.mode == BALL and cfg.eta == ynorm):
        # Zero blocks are feasible with objective 0, hence optimal.
        z0 = np.zeros(ens.sum_kn, dtype=complex)
        return _report(ens, cfg, variables, z0, 1.0, True, 0, 0.0, 0.0,
                       ynorm, cfg.rho, [], [])

    scale = ynorm
    ys = y / scale
    eta_s = cfg.eta / scale
    if variables == "real":
        mv, rmv, P = _real_operators(ens, dims)
        ys_vec = np.concatenate([ys.real, ys.imag])

        def make_gram(shift):
            return _StackedGram(ens, P, mv, rmv, shift=shift)

        dt = float
    else:
        mv, rmv = _operators(ens, dims)
        ys_vec = ys

        def make_gram(shift):
            return GramSolver(ens, shift=shift)

        dt = complex
    offsets = _offsets(dims)
    D = ens.sum_kn
    alpha = cfg.over_relaxation
    rho = cfg.rho
    merit_hist = np.empty(cfg.max_iters)
    obj_hist = np.empty(cfg.max_iters)
    converged = False
    iterations = cfg.max_iters
    r_pri = math.inf
    s_dual = math.inf

    if cfg.mode == EQUALITY:
        gs = make_gram(0.0)
        # Consistency probe: the affine projection can only reach the
        # least-squares-closest right-hand side, so an inconsistent system
        # would silently converge to the wrong constraint.
        z = rmv(gs.solve(ys_vec))
        gap = float(np.linalg.norm(mv(z) - ys_vec))
        if gap > _CONSISTENCY_TOL:
            raise ConfigError(
                "equality constraint is inconsistent (relative residual %.3e); "
                "use ball mode with a positive eta" % gap
            )
        v = np.zeros(D, dtype=dt)
        u = np.zeros(D, dtype=dt)
        for k in range(cfg.max_iters):
            w = v - u
            z = w - rmv(gs.solve(mv(w) - ys_vec))
            merit_hist[k] = np.linalg.norm(z - v)
            zhat = alpha * z + (1.0 - alpha) * v
            v_new, obj = _blocks_svt(zhat + u, offsets, 1.0 / rho)
            u += zhat - v_new
            obj_hist[k] = obj
            r_pri = float(np.linalg.norm(z - v_new))
            s_dual = float(rho * np.linalg.norm(v_new - v))
            eps_pri = cfg.tol_primal * (
                1.0 + max(float(np.linalg.norm(z)), float(np.linalg.norm(v_new)))
            )
            eps_dual = cfg.tol_dual * (1.0 + rho * float(np.linalg.norm(u)))
            v = v_new
            if r_pri <= eps_pri and s_dual <= eps_dual:
                converged = True
                iterations = k + 1
                break
            if cfg.rho_adapt and (k + 1) % 50 == 0:
                rho = _adapt_rho(rho, cfg.rho, r_pri, s_dual, (u,))
        feas = float(np.linalg.norm(mv(z) - ys_vec))
    else:
        gs_shift = make_gram(1.0)
        m_rows = ys_vec.size
        v = np.zeros(D, dtype=dt)
        # Start w at the ball center: a prox fixed point, so the merit is
        # monotone from the very first iterate (w = 0 generally is not one).
        w = ys_vec.copy()
        uv = np.zeros(D, dtype=dt)
        uw = np.zeros(m_rows, dtype=dt)
        z = np.zeros(D, dtype=dt)
        phz = np.zeros(m_rows, dtype=dt)
        for k in range(cfg.max_iters):
            rhs = (v - uv) + rmv(w - uw)
            z = rhs - rmv(gs_shift.solve(mv(rhs)))
            phz = mv(z)
            merit_hist[k] = math.hypot(
                float(np.linalg.norm(z - v)), float(np.linalg.norm(phz - w))
            )
            zh_v = alpha * z + (1.0 - alpha) * v
            zh_w = alpha * phz + (1.0 - alpha) * w
            v_new, obj = _blocks_svt(zh_v + uv, offsets, 1.0 / rho)
            q = zh_w + uw
            d = q - ys_vec
            dn = float(np.linalg.norm(d))
            w_new = ys_vec + d * (eta_s / dn) if dn > eta_s else q
            uv += zh_v - v_new
            uw += zh_w - w_new
            obj_hist[k] = obj
            r_pri = math.hypot(
                float(np.linalg.norm(z - v_new)), float(np.linalg.norm(phz - w_new))
            )
            s_dual = float(rho * np.linalg.norm((v_new - v) + rmv(w_new - w)))
            eps_pri = cfg.tol_primal * (
                1.0 + max(
                    math.hypot(float(np.linalg.norm(z)), float(np.linalg.norm(phz))),
                    math.hypot(float(np.linalg.norm(v_new)), float(np.linalg.norm(w_new))),
                )
            )
            eps_dual = cfg.tol_dual * (
                1.0 + rho * math.hypot(float(np.linalg.norm(uv)), float(np.linalg.norm(uw)))
            )
            v = v_new
            w = w_new
            if r_pri <= eps_pri and s_dual <= eps_dual:
                converged = True
                iterations = k + 1
                break
            if cfg.rho_adapt and (k + 1) % 50 == 0:
                rho = _adapt_rho(rho, cfg.rho, r_pri, s_dual, (uv, uw))
        # Snap onto the ball surface: the optimum is boundary-active
        # whenever eta < ||y||, so any residual overshoot is removed by one
        # exact Gram correction. Only the component of the residual inside
        # the range of the measurement map can be moved, so shrink exactly
        # that component to sqrt(eta^2 - ||out-of-range part||^2); when the
        # map has full row rank this reduces to scaling the whole residual.
        d = phz - ys_vec
        dn = float(np.linalg.norm(d))
        if dn > eta_s:
            gs_plain = make_gram(0.0)
            g = rmv(gs_plain.solve(d))
            d_range = mv(g)
            rn = float(np.linalg.norm(d_range))
            perp2 = max(dn * dn - rn * rn, 0.0)
            target = math.sqrt(max(eta_s * eta_s - perp2, 0.0))
            if rn > 0.0:
                z = z - (1.0 - target / rn) * g
            dn = float(np.linalg.norm(mv(z) - ys_vec))
        feas = dn
        if converged and dn > eta_s * (1.0 + _BALL_SLACK) + 1e-15:
            converged = False

    return _report(
        ens, cfg, variables, z, scale, converged, iterations, r_pri, s_dual,
        feas * scale, rho, merit_hist[:iterations], obj_hist[:iterations],
    )
