"""Linear operator primitives: adjoint pairs, self-adjoint PSD operators,
block quadratics with their symmetric Gauss-Seidel (sGS) machinery, and
power-iteration spectral estimation.

Operators are dense at the scales this library targets; the callable-based
``LinearMap`` interface leaves room for matrix-free implementations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.io
import scipy.linalg


class BlockSolveError(RuntimeError):
    """A per-block linear solve (or block-1 prox) could not be carried out."""

    def __init__(self, block: int, message: str):
        super().__init__(f"block {block}: {message}")
        self.block = block


class LinearMap:
    """A linear operator ``M`` together with its adjoint.

    ``apply`` maps R^cols -> R^rows and ``adjoint_apply`` maps
    R^rows -> R^cols, with <Mv, w> = <v, M*w>.
    """

    def __init__(self, rows: int, cols: int,
                 apply: Callable[[np.ndarray], np.ndarray],
                 adjoint_apply: Callable[[np.ndarray], np.ndarray],
                 matrix: Optional[np.ndarray] = None):
        if rows < 1 or cols < 1:
            raise ValueError("LinearMap dimensions must be positive")
        self.rows = int(rows)
        self.cols = int(cols)
        self._apply = apply
        self._adjoint = adjoint_apply
        self.matrix = matrix  # dense representation when known

    @classmethod
    def from_matrix(cls, mat: np.ndarray) -> "LinearMap":
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2:
            raise ValueError("expected a 2-D matrix")
        return cls(mat.shape[0], mat.shape[1],
                   apply=lambda v, _m=mat: _m @ v,
                   adjoint_apply=lambda w, _m=mat: _m.T @ w,
                   matrix=mat)

    @classmethod
    def identity(cls, dim: int) -> "LinearMap":
        return cls(dim, dim, apply=lambda v: np.array(v, dtype=float),
                   adjoint_apply=lambda w: np.array(w, dtype=float),
                   matrix=np.eye(dim))

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.cols,):
            raise ValueError(f"apply expects a vector of length {self.cols}, "
                             f"got shape {v.shape}")
        out = np.asarray(self._apply(v), dtype=float)
        if out.shape != (self.rows,):
            raise ValueError("apply produced a vector of the wrong length")
        return out

    def adjoint_apply(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.rows,):
            raise ValueError(f"adjoint_apply expects a vector of length "
                             f"{self.rows}, got shape {w.shape}")
        out = np.asarray(self._adjoint(w), dtype=float)
        if out.shape != (self.cols,):
            raise ValueError("adjoint_apply produced a vector of the wrong "
                             "length")
        return out

    def gram_matrix(self) -> np.ndarray:
        """Dense matrix of v -> M(M*(v)), acting on R^rows."""
        if self.matrix is not None:
            g = self.matrix @ self.matrix.T
            return 0.5 * (g + g.T)
        cols = np.empty((self.rows, self.rows))
        for i in range(self.rows):
            e = np.zeros(self.rows)
            e[i] = 1.0
            cols[:, i] = self.apply(self.adjoint_apply(e))
        return 0.5 * (cols + cols.T)


class SelfAdjointOp:
    """Symmetric positive semidefinite operator backed by a dense matrix."""

    def __init__(self, mat: np.ndarray):
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("expected a square matrix")
        # symmetrize defensively; callers should already pass symmetric data
        self.mat = 0.5 * (mat + mat.T)
        self.dim = mat.shape[0]

    @classmethod
    def zero(cls, dim: int) -> "SelfAdjointOp":
        return cls(np.zeros((dim, dim)))

    @classmethod
    def scaled_identity(cls, dim: int, alpha: float) -> "SelfAdjointOp":
        return cls(alpha * np.eye(dim))

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.mat @ np.asarray(v, dtype=float)

    def quadform(self, v: np.ndarray) -> float:
        v = np.asarray(v, dtype=float)
        return float(v @ (self.mat @ v))

    def seminorm(self, v: np.ndarray) -> float:
        # quadform may dip an ulp below zero for PSD operators
        return float(np.sqrt(max(self.quadform(v), 0.0)))

    def __add__(self, other: "SelfAdjointOp") -> "SelfAdjointOp":
        return SelfAdjointOp(self.mat + other.mat)


def is_diagonal(mat: np.ndarray, rtol: float = 1e-12) -> bool:
    """True when off-diagonal mass is negligible relative to the matrix scale."""
    off = mat - np.diag(np.diag(mat))
    scale = max(np.abs(mat).max(), 1e-300)
    return bool(np.abs(off).max() <= rtol * scale)


@dataclass(frozen=True)
class PowerIterationResult:
    value: float
    converged: bool
    iterations: int


def estimate_lambda_max(op: SelfAdjointOp, tol: float = 1e-10,
                        max_iter: int = 10000) -> PowerIterationResult:
    """Largest eigenvalue of a symmetric PSD operator by power iteration.

    Starts from the normalized all-ones vector so repeated calls are
    deterministic, and inflates the converged Rayleigh quotient by
    (1 + 10*tol) so that ``value * I - op`` stays positive semidefinite.
    """
    if op.dim < 1:
        raise ValueError("operator dimension must be at least 1")
    if tol <= 0:
        raise ValueError("tol must be positive")

    v = np.ones(op.dim) / np.sqrt(op.dim)
    w = op.apply(v)
    if np.linalg.norm(w) == 0.0:
        # all-ones lies in the null space; fall back to basis vectors
        for i in range(op.dim):
            e = np.zeros(op.dim)
            e[i] = 1.0
            w = op.apply(e)
            if np.linalg.norm(w) > 0.0:
                v = e
                break
        else:
            return PowerIterationResult(0.0, True, 0)

    lam = float(v @ w)
    for it in range(1, max_iter + 1):
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return PowerIterationResult(0.0, True, it)
        v = w / nrm
        w = op.apply(v)
        lam_new = float(v @ w)
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1.0):
            return PowerIterationResult(lam_new * (1.0 + 10.0 * tol), True, it)
        lam = lam_new
    return PowerIterationResult(lam * (1.0 + 10.0 * tol), False, max_iter)


class BlockQuadratic:
    """Symmetric PSD matrix split into blocks, Q = U + Sigma + U^T.

    ``Sigma`` collects the diagonal blocks (each must be symmetric positive
    definite) and ``U`` the strictly block-upper part.  Cholesky factors of
    the diagonal blocks are cached for the sweep solves.
    """

    def __init__(self, q: np.ndarray, block_dims: Sequence[int]):
        q = np.asarray(q, dtype=float)
        dims = [int(d) for d in block_dims]
        if any(d < 1 for d in dims):
            raise ValueError("block dimensions must be positive")
        n = sum(dims)
        if q.shape != (n, n):
            raise ValueError(f"matrix shape {q.shape} does not match block "
                             f"dims summing to {n}")
        if np.abs(q - q.T).max() > 1e-10 * max(np.abs(q).max(), 1.0):
            raise ValueError("matrix must be symmetric")
        self.q = 0.5 * (q + q.T)
        self.block_dims = tuple(dims)
        self.offsets = np.concatenate([[0], np.cumsum(dims)])
        self._chol = []
        for i, di in enumerate(dims):
            blk = self.block(i, i)
            eigs = np.linalg.eigvalsh(blk)
            if eigs[0] <= 1e-12 * max(np.abs(eigs).max(), 1e-300):
                raise BlockSolveError(i, "diagonal block is singular or "
                                         "indefinite")
            self._chol.append(scipy.linalg.cho_factor(blk))

    @property
    def dim(self) -> int:
        return int(self.offsets[-1])

    @property
    def nblocks(self) -> int:
        return len(self.block_dims)

    def block(self, i: int, j: int) -> np.ndarray:
        return self.q[self.offsets[i]:self.offsets[i + 1],
                      self.offsets[j]:self.offsets[j + 1]]

    def block_solve(self, i: int, rhs: np.ndarray) -> np.ndarray:
        try:
            return scipy.linalg.cho_solve(self._chol[i], rhs)
        except Exception as exc:  # pragma: no cover - cho_solve rarely fails
            raise BlockSolveError(i, str(exc)) from exc

    def strict_upper(self) -> np.ndarray:
        u = np.zeros_like(self.q)
        for i in range(self.nblocks):
            for j in range(i + 1, self.nblocks):
                u[self.offsets[i]:self.offsets[i + 1],
                  self.offsets[j]:self.offsets[j + 1]] = self.block(i, j)
        return u


def sgs_operator(q: BlockQuadratic) -> SelfAdjointOp:
    """The sGS proximal operator S = U Sigma^{-1} U^T of a block quadratic."""
    u = q.strict_upper()
    if not u.any():
        return SelfAdjointOp.zero(q.dim)
    sigma_inv_ut = np.zeros_like(u)
    for i in range(q.nblocks):
        rows = slice(q.offsets[i], q.offsets[i + 1])
        sigma_inv_ut[rows, :] = q.block_solve(i, u.T[rows, :])
    return SelfAdjointOp(u @ sigma_inv_ut)


def sgs_sweep(q: BlockQuadratic, prox_first, linear_term: np.ndarray,
              anchor: np.ndarray) -> np.ndarray:
    """Backward-then-forward block sweep.

    Returns the minimizer of

        g(x_1) + 0.5 <x, Q x> + <linear_term, x> + 0.5 ||x - anchor||_S^2

    with S = sgs_operator(q), where ``g`` is carried by ``prox_first`` and
    acts on block 1 only (``prox_first=None`` drops the nonsmooth term, in
    which case the result solves (Q + S) x = -linear_term + S anchor).
    The backward pass runs over blocks s..2 anchored at ``anchor``, the
    forward pass over 1..s.
    """
    linear_term = np.asarray(linear_term, dtype=float)
    anchor = np.asarray(anchor, dtype=float)
    if linear_term.shape != (q.dim,) or anchor.shape != (q.dim,):
        raise ValueError("linear_term and anchor must match the block "
                         "quadratic dimension")

    nb = q.nblocks
    parts_hat = [anchor[q.offsets[i]:q.offsets[i + 1]].copy()
                 for i in range(nb)]
    # backward: blocks s..2 with earlier blocks frozen at the anchor
    for i in range(nb - 1, 0, -1):
        rhs = -linear_term[q.offsets[i]:q.offsets[i + 1]].copy()
        for j in range(i):
            rhs -= q.block(j, i).T @ parts_hat[j]
        for j in range(i + 1, nb):
            rhs -= q.block(i, j) @ parts_hat[j]
        parts_hat[i] = q.block_solve(i, rhs)

    parts = list(parts_hat)
    # forward: block 1 (with the nonsmooth term), then 2..s
    rhs = -linear_term[q.offsets[0]:q.offsets[1]].copy()
    for j in range(1, nb):
        rhs -= q.block(0, j) @ parts_hat[j]
    if prox_first is None:
        parts[0] = q.block_solve(0, rhs)
    else:
        sigma1 = q.block(0, 0)
        diag1 = np.diag(sigma1)
        if not is_diagonal(sigma1):
            raise BlockSolveError(0, "prox on block 1 requires a diagonal "
                                     "leading block")
        if np.any(diag1 <= 0):
            raise BlockSolveError(0, "leading block has nonpositive diagonal")
        parts[0] = prox_first.prox(rhs / diag1, diag1)
    for i in range(1, nb):
        rhs = -linear_term[q.offsets[i]:q.offsets[i + 1]].copy()
        for j in range(i):
            rhs -= q.block(j, i).T @ parts[j]
        for j in range(i + 1, nb):
            rhs -= q.block(i, j) @ parts_hat[j]
        parts[i] = q.block_solve(i, rhs)

    return np.concatenate(parts)


def load_matrix(path) -> np.ndarray:
    """Read a dense array or coordinate matrix in Matrix Market format."""
    mat = scipy.io.mmread(path)
    if hasattr(mat, "toarray"):
        mat = mat.toarray()
    return np.asarray(mat, dtype=float)


def save_matrix(path, mat: np.ndarray) -> None:
    """Write a dense matrix in Matrix Market array format."""
    scipy.io.mmwrite(path, np.atleast_2d(np.asarray(mat, dtype=float)))
