"""Lifted measurement operators and their Gram structure.

User i's lifted operator maps a K_i x N_i matrix Z to the L-vector

    A_i(Z) = { b_{i,l}^* Z a_{i,l} }_{l=1..L},

where b_{i,l} / a_{i,l} are the l-th columns of B_i^* / A_i^*; with rows
written out, A_i(Z)_l = B_i[l] @ Z @ A_i[l]. Its adjoint is
A_i^*(z) = B_i^* diag(z) A_i. The composite map over all users,
Phi, acts on the concatenation of row-major vec(Z_i) and has the L x L
Gram

    Phi Phi^* = sum_i (B_i B_i^*) .* (A_i A_i^T)      (entrywise product),

which is how gram_matrix assembles it without forming Phi.

Restricted versions keep only the rows in one partition block Gamma_p;
their Grams T_{i,p} = sum_{l in Gamma_p} b_{i,l} b_{i,l}^* drive the
certificate construction.

Two evaluation paths exist for the operators: a dense path that follows
the definition with the stored matrices, and a fast path (FFT-based for
partial-DFT B). They agree to near machine precision and the fast path
becomes the default above L = 64.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .ensemble import PARTIAL_DFT, dft_matmul, dft_rmatmul
from .errors import ConvergenceError, DimensionError, SingularGramError

_FAST_PATH_MIN_L = 64
_ASSEMBLE_LIMIT = 4096
_COND_WARN = 1e10


class LiftedBlocks:
    """A tuple of per-user K_i x N_i complex matrices (one lifted variable)."""

    __slots__ = ("blocks",)

    def __init__(self, blocks):
        self.blocks = [np.asarray(Z) for Z in blocks]

    @classmethod
    def zeros(cls, dims):
        return cls([np.zeros((k, n), dtype=complex) for k, n in dims])

    @classmethod
    def from_truth(cls, ens):
        if ens.truth is None:
            raise DimensionError("ensemble has no ground truth")
        return cls([np.outer(h, np.conj(x)) for h, x in ens.truth])

    @property
    def dims(self):
        return tuple(Z.shape for Z in self.blocks)

    def copy(self):
        return LiftedBlocks([Z.copy() for Z in self.blocks])

    def norm(self):
        """Frobenius norm of the stacked variable, sqrt(sum_i ||Z_i||_F^2)."""
        return math.sqrt(sum(float(np.vdot(Z, Z).real) for Z in self.blocks))

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __getitem__(self, i):
        return self.blocks[i]


def pack(blocks):
    """Concatenate row-major vec(Z_i) over users into one complex vector."""
    arrs = [np.asarray(Z).reshape(-1) for Z in blocks]
    if not arrs:
        return np.zeros(0, dtype=complex)
    return np.concatenate(arrs).astype(complex, copy=False)


def unpack(vec, dims):
    """Inverse of pack for the given ((K_i, N_i), ...) dims."""
    if len(vec) != sum(k * n for k, n in dims):
        raise DimensionError(f"vector length {len(vec)} does not match dims {dims}")
    out = []
    at = 0
    for k, n in dims:
        out.append(vec[at : at + k * n].reshape(k, n))
        at += k * n
    return LiftedBlocks(out)


def _check_block(ens, i, Z):
    if not (0 <= i < ens.r):
        raise DimensionError(f"user index {i} out of range for r={ens.r}")
    Z = np.asarray(Z)
    if Z.shape != ens.dims[i]:
        raise DimensionError(f"block shape {Z.shape} != dims {ens.dims[i]}")
    return Z


def apply_op(ens, i, Z, method="auto"):
    """A_i(Z): the L measurements of one lifted block."""
    Z = _check_block(ens, i, Z)
    B, A = ens.B[i], ens.A[i]
    if method == "auto":
        method = "fast" if ens.L > _FAST_PATH_MIN_L else "dense"
    if method == "dense":
        return np.einsum("lk,kn,ln->l", B, Z, A)
    if ens.b_kind == PARTIAL_DFT:
        BZ = dft_matmul(Z, ens.L)
    else:
        BZ = B @ Z
    return (BZ * A).sum(axis=1)


def apply_adjoint(ens, i, z, method="auto"):
    """A_i^*(z) = B_i^* diag(z) A_i."""
    if not (0 <= i < ens.r):
        raise DimensionError(f"user index {i} out of range for r={ens.r}")
    z = np.asarray(z)
    if z.shape != (ens.L,):
        raise DimensionError(f"z has shape {z.shape}, expected ({ens.L},)")
    B, A = ens.B[i], ens.A[i]
    # both factors are conjugated in the adjoint; A is real for the
    # standard ensembles, but explicit matrices may be complex
    M = z[:, None] * np.conj(A)
    if method == "auto":
        method = "fast" if ens.L > _FAST_PATH_MIN_L else "dense"
    if method != "dense" and ens.b_kind == PARTIAL_DFT:
        return dft_rmatmul(M, ens.L, ens.dims[i][0])
    return B.conj().T @ M


def apply_composite(ens, blocks, method="auto"):
    """Phi acting on LiftedBlocks: sum_i A_i(Z_i)."""
    if len(blocks) != ens.r:
        raise DimensionError(f"{len(blocks)} blocks for r={ens.r}")
    y = np.zeros(ens.L, dtype=complex)
    for i, Z in enumerate(blocks):
        y += apply_op(ens, i, Z, method=method)
    return y


def apply_composite_adjoint(ens, z, method="auto"):
    """Phi^*: per-user adjoints gathered into LiftedBlocks."""
    return LiftedBlocks([apply_adjoint(ens, i, z, method=method) for i in range(ens.r)])


def apply_restricted(ens, i, p, partition, Z):
    """A_{i,p}(Z): the measurements on partition block Gamma_p only."""
    Z = _check_block(ens, i, Z)
    idx = partition.block(p)
    B, A = ens.B[i], ens.A[i]
    return ((B[idx] @ Z) * A[idx]).sum(axis=1)


def restricted_adjoint(ens, i, p, partition, zq):
    """A_{i,p}^*(z_q) for a vector living on Gamma_p."""
    idx = partition.block(p)
    zq = np.asarray(zq)
    if zq.shape != (len(idx),):
        raise DimensionError(f"z has shape {zq.shape}, expected ({len(idx)},)")
    B, A = ens.B[i], ens.A[i]
    return B[idx].conj().T @ (zq[:, None] * np.conj(A[idx]))


@dataclass
class BlockGram:
    """Gram T_{i,p} of one user's rows on one partition block, with its inverse.

    solve() applies S_{i,p} = T_{i,p}^{-1} through a cached Hermitian
    factorization; the S property materializes the explicit inverse
    (used where S is needed as a matrix).
    """

    i: int
    p: int
    T: np.ndarray
    _cho: tuple = field(default=None, repr=False)
    _S: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        K = self.T.shape[0]
        try:
            self._cho = scipy.linalg.cho_factor(self.T)
        except scipy.linalg.LinAlgError as exc:
            raise SingularGramError(
                f"T for user {self.i}, block {self.p} ({K}x{K}) is singular"
            ) from exc
        cond = float(np.linalg.cond(self.T))
        if cond > _COND_WARN:
            warnings.warn(
                f"T for user {self.i}, block {self.p} has condition number "
                f"{cond:.3e}; applying its inverse anyway",
                RuntimeWarning,
                stacklevel=2,
            )

    def solve(self, rhs):
        return scipy.linalg.cho_solve(self._cho, rhs)

    @property
    def S(self):
        if self._S is None:
            self._S = self.solve(np.eye(self.T.shape[0], dtype=complex))
        return self._S


def block_gram(ens, i, p, partition):
    """T_{i,p} = sum_{l in Gamma_p} b_{i,l} b_{i,l}^* and its solver."""
    idx = partition.block(p)
    K = ens.dims[i][0]
    if len(idx) < K:
        raise SingularGramError(
            f"block {p} has {len(idx)} rows < K_{i}={K}; T is singular"
        )
    Bp = ens.B[i][idx]
    T = Bp.conj().T @ Bp
    T = 0.5 * (T + T.conj().T)
    return BlockGram(i=i, p=p, T=T)


def composite_matrix(ens):
    """Dense Phi, shape L x sum(K_i N_i); row l is kron(B_i[l], A_i[l]) per user."""
    cols = []
    for B, A in zip(ens.B, ens.A):
        L, K = B.shape
        N = A.shape[1]
        cols.append((B[:, :, None] * A[:, None, :]).reshape(L, K * N))
    if not cols:
        return np.zeros((ens.L, 0), dtype=complex)
    return np.concatenate(cols, axis=1)


def gram_matrix(ens):
    """Phi Phi^* assembled as sum_i (B_i B_i^*) .* (A_i A_i^*)."""
    G = np.zeros((ens.L, ens.L), dtype=complex)
    for B, A in zip(ens.B, ens.A):
        G += (B @ B.conj().T) * (A @ A.conj().T)
    return 0.5 * (G + G.conj().T)


def _gram_extremes_matfree(ens, tol=1e-7, cap=10000):
    """Extreme eigenvalues of Phi Phi^* without assembling it (large-L path)."""

    def gmul(z):
        return apply_composite(ens, apply_composite_adjoint(ens, z))

    op = scipy.sparse.linalg.LinearOperator(
        (ens.L, ens.L), matvec=gmul, dtype=complex
    )
    lam_max = float(
        scipy.sparse.linalg.eigsh(op, k=1, which="LA", tol=tol, maxiter=cap,
                                  return_eigenvectors=False)[0]
    )

    def smul(z):
        return lam_max * z - gmul(z)

    shifted = scipy.sparse.linalg.LinearOperator(
        (ens.L, ens.L), matvec=smul, dtype=complex
    )
    shift_top = float(
        scipy.sparse.linalg.eigsh(shifted, k=1, which="LA", tol=tol, maxiter=cap,
                                  return_eigenvectors=False)[0]
    )
    return max(lam_max - shift_top, 0.0), lam_max


def gram_spectrum(ens):
    """(lambda^2_min, lambda^2_max) of Phi Phi^*, to 1e-6 relative or better."""
    if ens.L <= _ASSEMBLE_LIMIT:
        w = np.linalg.eigvalsh(gram_matrix(ens))
        return max(float(w[0]), 0.0), max(float(w[-1]), 0.0)
    return _gram_extremes_matfree(ens)


class GramSolver:
    """Cached solver for (shift*I + Phi Phi^*) z = rhs.

    Assembles and Cholesky-factorizes the Gram when L is moderate. A
    singular unshifted Gram (possible when sum K_i N_i < L) falls back
    to an eigendecomposition pseudo-inverse, which is exact on
    consistent right-hand sides. Above the assembly limit, solves run
    matrix-free through conjugate gradients at tolerance 1e-10.
    """

    def __init__(self, ens, shift=0.0, assemble_limit=_ASSEMBLE_LIMIT):
        self.ens = ens
        self.shift = float(shift)
        self._mode = None
        if ens.L <= assemble_limit:
            G = gram_matrix(ens)
            if self.shift:
                G = G + self.shift * np.eye(ens.L)
            # rank(Phi Phi^*) <= sum K_i N_i, so the unshifted Gram of an
            # underdetermined lifting is singular by construction; Cholesky
            # can also "succeed" with near-zero pivots on a degenerate draw.
            singular = self.shift == 0.0 and ens.sum_kn < ens.L
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

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=complex)
        if self._mode == "chol":
            return scipy.linalg.cho_solve(self._cho, rhs)
        if self._mode == "pinv":
            V, winv = self._eig
            return V @ (winv * (V.conj().T @ rhs))
        ens, shift = self.ens, self.shift

        def gmul(z):
            return shift * z + apply_composite(ens, apply_composite_adjoint(ens, z))

        op = scipy.sparse.linalg.LinearOperator(
            (ens.L, ens.L), matvec=gmul, dtype=complex
        )
        out, info = scipy.sparse.linalg.cg(op, rhs, rtol=1e-10, atol=0.0, maxiter=20000)
        if info != 0:
            raise ConvergenceError(f"CG on the Gram system did not converge (info={info})")
        return out
