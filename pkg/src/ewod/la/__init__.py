"""Sparse linear algebra: CSR storage, Krylov solvers, constraint helpers.

The mat-vec and the Krylov loops run in a compiled extension when it is
importable; otherwise an equivalent numpy implementation is used. Set
``EWOD_PURE_PYTHON=1`` to force the fallback, or call :func:`set_backend`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_backend = "python" if (_compiled is None or os.environ.get("EWOD_PURE_PYTHON")) else "compiled"


def available_backends() -> list[str]:
    return ["compiled", "python"] if _compiled is not None else ["python"]


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "compiled" and _compiled is None:
        raise RuntimeError("compiled kernels are not built")
    _backend = name


@dataclass
class CsrMatrix:
    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.row_offsets = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        self.col_indices = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @classmethod
    def from_coo(cls, rows, cols, vals, shape) -> "CsrMatrix":
        """Build from triplets; duplicate entries are summed."""
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        n_rows, n_cols = shape
        key = rows * n_cols + cols
        uniq, inv = np.unique(key, return_inverse=True)
        data = np.bincount(inv, weights=vals, minlength=uniq.size)
        r = uniq // n_cols
        offsets = np.zeros(n_rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(r, minlength=n_rows), out=offsets[1:])
        return cls(n_rows, n_cols, offsets, uniq % n_cols, data)

    @classmethod
    def from_dense(cls, a) -> "CsrMatrix":
        a = np.atleast_2d(np.asarray(a, dtype=float))
        r, c = np.nonzero(a)
        return cls.from_coo(r, c, a[r, c], a.shape)

    @classmethod
    def identity(cls, n: int) -> "CsrMatrix":
        idx = np.arange(n)
        return cls(n, n, np.arange(n + 1), idx, np.ones(n))

    def row_indices(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        np.add.at(out, (self.row_indices(), self.col_indices), self.values)
        return out

    def to_scipy(self):
        import scipy.sparse as sp

        return sp.csr_matrix((self.values, self.col_indices, self.row_offsets), shape=self.shape)

    def copy(self) -> "CsrMatrix":
        return CsrMatrix(self.n_rows, self.n_cols, self.row_offsets, self.col_indices, self.values.copy())

    def with_values(self, values) -> "CsrMatrix":
        return CsrMatrix(self.n_rows, self.n_cols, self.row_offsets, self.col_indices, values)

    def same_pattern(self, other: "CsrMatrix") -> bool:
        if self.shape != other.shape or self.nnz != other.nnz:
            return False
        if self.col_indices is other.col_indices and self.row_offsets is other.row_offsets:
            return True
        return np.array_equal(self.row_offsets, other.row_offsets) and np.array_equal(
            self.col_indices, other.col_indices
        )

    def matvec(self, x) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape[0] != self.n_cols:
            raise ValueError(f"dimension mismatch: {self.shape} @ {x.shape}")
        if _backend == "compiled":
            return _compiled.csr_matvec(self.row_offsets, self.col_indices, self.values, x)
        return _fallback.csr_matvec(self.row_offsets, self.col_indices, self.values, x)

    def __matmul__(self, x):
        return self.matvec(x)

    def diagonal(self) -> np.ndarray:
        rows = self.row_indices()
        d = np.zeros(min(self.shape))
        on = rows == self.col_indices
        d[rows[on]] = self.values[on]
        return d

    def transpose(self) -> "CsrMatrix":
        return CsrMatrix.from_coo(self.col_indices, self.row_indices(), self.values, (self.n_cols, self.n_rows))

    @property
    def T(self) -> "CsrMatrix":
        return self.transpose()

    def __mul__(self, s: float) -> "CsrMatrix":
        return self.with_values(self.values * s)

    __rmul__ = __mul__

    def __neg__(self) -> "CsrMatrix":
        return self * -1.0

    def __add__(self, other: "CsrMatrix") -> "CsrMatrix":
        if self.same_pattern(other):
            return self.with_values(self.values + other.values)
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        return CsrMatrix.from_coo(
            np.concatenate([self.row_indices(), other.row_indices()]),
            np.concatenate([self.col_indices, other.col_indices]),
            np.concatenate([self.values, other.values]),
            self.shape,
        )

    def __sub__(self, other: "CsrMatrix") -> "CsrMatrix":
        return self + (-other)

    def check(self) -> None:
        """Raise ``ValueError`` if the CSR invariants are violated."""
        off = self.row_offsets
        if off.size != self.n_rows + 1 or off[0] != 0 or off[-1] != self.nnz:
            raise ValueError("bad row offsets")
        if np.any(np.diff(off) < 0):
            raise ValueError("row offsets not monotone")
        c = self.col_indices
        if c.size and (c.min() < 0 or c.max() >= self.n_cols):
            raise ValueError("column index out of range")
        for i in range(self.n_rows):
            row = c[off[i]:off[i + 1]]
            if np.any(np.diff(row) <= 0):
                raise ValueError(f"row {i}: columns not strictly increasing")


def bmat(blocks) -> CsrMatrix:
    """Assemble a block matrix from a nested list of CsrMatrix (or None)."""
    row_sizes = [next(b.n_rows for b in brow if b is not None) for brow in blocks]
    col_sizes = [next(blocks[i][j].n_cols for i in range(len(blocks)) if blocks[i][j] is not None)
                 for j in range(len(blocks[0]))]
    r0 = np.concatenate([[0], np.cumsum(row_sizes)])
    c0 = np.concatenate([[0], np.cumsum(col_sizes)])
    rows, cols, vals = [], [], []
    for i, brow in enumerate(blocks):
        for j, b in enumerate(brow):
            if b is None:
                continue
            rows.append(b.row_indices() + r0[i])
            cols.append(b.col_indices + c0[j])
            vals.append(b.values)
    return CsrMatrix.from_coo(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
                              (int(r0[-1]), int(c0[-1])))


@dataclass
class SolverReport:
    iterations: int
    final_residual: float
    converged: bool


Operator = Union[CsrMatrix, Callable[[np.ndarray], np.ndarray]]


def _preconditioner(A, precond, n):
    if callable(precond):
        return precond, None
    if precond in (None, "none"):
        return (lambda r: r.copy()), np.ones(n)
    if precond == "jacobi":
        if not isinstance(A, CsrMatrix):
            raise ValueError("jacobi preconditioning needs an assembled matrix")
        d = A.diagonal()
        inv = np.where(d != 0.0, 1.0 / np.where(d != 0.0, d, 1.0), 1.0)
        return (lambda r: inv * r), inv
    raise ValueError(f"unknown preconditioner {precond!r}")


def _prepare(A, b, x0):
    b = np.array(b, dtype=np.float64)
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    return b, x, n


def cg_solve(A: Operator, b, x0=None, tol: float = 1e-10, max_iter: int | None = None,
             precond="jacobi", zero_mean_weights=None) -> tuple[np.ndarray, SolverReport]:
    """Conjugate gradients for symmetric positive (semi)definite systems.

    With ``zero_mean_weights`` the system is treated as singular with the
    constants in its kernel: the right-hand side is made compatible, and the
    iterate is kept at zero weighted mean.
    """
    b, x, n = _prepare(A, b, x0)
    max_iter = max_iter if max_iter is not None else max(2 * n, 200)
    apply, inv = _preconditioner(A, precond, n)
    w = None if zero_mean_weights is None else np.ascontiguousarray(zero_mean_weights, dtype=np.float64)
    if _backend == "compiled" and isinstance(A, CsrMatrix) and inv is not None:
        it, res = _compiled.cg(A.row_offsets, A.col_indices, A.values, b, x, tol, max_iter, inv, w)
    else:
        op = A.matvec if isinstance(A, CsrMatrix) else A
        it, res = _fallback.cg(op, b, x, tol, max_iter, apply, w)
    return x, SolverReport(int(it), float(res), bool(res <= tol))


def bicgstab_solve(A: Operator, b, x0=None, tol: float = 1e-9, max_iter: int | None = None,
                   precond="jacobi") -> tuple[np.ndarray, SolverReport]:
    """BiCGStab for general nonsingular systems (right preconditioning)."""
    b, x, n = _prepare(A, b, x0)
    max_iter = max_iter if max_iter is not None else max(5 * n, 500)
    apply, inv = _preconditioner(A, precond, n)
    if _backend == "compiled" and isinstance(A, CsrMatrix) and inv is not None:
        it, res = _compiled.bicgstab(A.row_offsets, A.col_indices, A.values, b, x, tol, max_iter, inv)
    else:
        op = A.matvec if isinstance(A, CsrMatrix) else A
        it, res = _fallback.bicgstab(op, b, x, tol, max_iter, apply)
    return x, SolverReport(int(it), float(res), bool(res <= tol))


def project_zero_mean(v, m) -> np.ndarray:
    """Subtract the ``m``-weighted mean of ``v``."""
    v = np.asarray(v, dtype=float)
    m = np.asarray(m, dtype=float)
    return v - np.dot(m, v) / m.sum()


def apply_dirichlet(A: CsrMatrix, b, dofs, values=None, symmetric: bool = True):
    """Impose ``x[dofs] = values`` by row replacement.

    With ``symmetric`` the constrained columns are also eliminated (their
    contribution moved to the right-hand side), which keeps SPD systems SPD.
    Returns a new matrix and right-hand side.
    """
    dofs = np.asarray(dofs, dtype=np.int64)
    b = np.array(b, dtype=float)
    g = np.zeros(A.n_cols)
    if values is not None:
        g[dofs] = values
    mask = np.zeros(A.n_rows, dtype=bool)
    mask[dofs] = True
    vals = A.values.copy()
    rows = A.row_indices()
    if symmetric:
        if values is not None:
            b -= A.matvec(g)
        vals[mask[A.col_indices]] = 0.0
    vals[mask[rows]] = 0.0
    diag = mask[rows] & (rows == A.col_indices)
    vals[diag] = 1.0
    b[dofs] = g[dofs]
    return A.with_values(vals), b


__all__ = [
    "CsrMatrix",
    "SolverReport",
    "apply_dirichlet",
    "available_backends",
    "bicgstab_solve",
    "bmat",
    "cg_solve",
    "get_backend",
    "project_zero_mean",
    "set_backend",
]
