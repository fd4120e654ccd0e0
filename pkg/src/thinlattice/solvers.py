"""Shift-invert eigensolver and sparse complex linear solves."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .operators import SparseOperator

__all__ = ["EigResult", "SolverError", "smallest_eigenpairs", "solve_linear_complex"]

DEFAULT_TOL = 1e-8
DEFAULT_SEED = 20240607
_DENSE_LIMIT = 1000
# extra Ritz pairs so that a multiple eigenvalue at the k-th position is not split
_GUARD = 3


class SolverError(RuntimeError):
    """Factorisation breakdown, singular system or non-convergence."""

    def __init__(self, message: str, best_residual: float | None = None):
        super().__init__(message)
        self.best_residual = best_residual


@dataclass
class EigResult:
    """Eigenpairs in ascending order.

    ``vectors[:, k]`` has unit discrete L2 norm (weight ``h**3`` times the
    mass weights); ``residuals`` are ``||A v - lam W v|| / (max(1, |lam|) ||v||)``
    measured in the symmetrised Euclidean norm.
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    iterations: int
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.values.size


def _sign_convention(vectors: np.ndarray) -> np.ndarray:
    """First entry with non-negligible modulus gets a positive real part."""
    out = vectors.copy()
    for k in range(out.shape[1]):
        v = out[:, k]
        big = np.flatnonzero(np.abs(v) > 1e-8 * np.abs(v).max())
        if big.size == 0:
            continue
        c = v[big[0]]
        if np.iscomplexobj(v):
            out[:, k] = v * (abs(c) / c)
        elif c < 0:
            out[:, k] = -v
    return out


def smallest_eigenpairs(
    op: SparseOperator,
    k: int = 1,
    shift: float = 0.0,
    tol: float = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    method: str = "auto",
    maxiter: int | None = None,
) -> EigResult:
    """The ``k`` eigenvalues of ``A v = lam W v`` closest to ``shift``.

    With ``shift`` below the spectrum these are the ``k`` smallest.  The
    generalised problem is symmetrised with ``W^{-1/2}`` and solved by ARPACK
    in shift-invert mode around a sparse LU factorisation; ``method="dense"``
    forces a full LAPACK solve (used automatically up to 1000 dofs).
    ARPACK is asked for a few guard pairs beyond ``k``: Lanczos may otherwise
    return only some copies of a multiple eigenvalue at the cut-off.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = op.dimension
    if k > n:
        raise ValueError(f"k = {k} exceeds the dimension {n}")
    s = 1.0 / np.sqrt(op.weights)
    C = (sp.diags(s) @ op.matrix @ sp.diags(s)).tocsc()
    is_complex = np.iscomplexobj(C.data)
    dtype = complex if is_complex else float

    if method == "auto":
        method = "dense" if (n <= _DENSE_LIMIT or k >= n - 1) else "arpack"
    if method == "dense":
        vals, vecs = la.eigh(C.toarray())
        order = np.argsort(np.abs(vals - shift), kind="stable")[:k]
        order = order[np.argsort(vals[order], kind="stable")]
        vals, vecs = vals[order], vecs[:, order]
        iterations = 1
    elif method == "arpack":
        try:
            lu = spla.splu((C - shift * sp.identity(n, dtype=dtype, format="csc")).tocsc())
        except RuntimeError as exc:
            raise SolverError(f"factorisation failed at shift {shift}: {exc}; re-shift") from exc
        count = [0]

        def solve(x):
            count[0] += 1
            return lu.solve(np.asarray(x, dtype=dtype))

        opinv = spla.LinearOperator((n, n), matvec=solve, dtype=dtype)
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        if is_complex:
            v0 = v0 + 1j * rng.standard_normal(n)
        try:
            vals, vecs = spla.eigsh(
                C, k=min(k + _GUARD, n - 1), sigma=shift, which="LM", OPinv=opinv, v0=v0,
                tol=min(tol, 1e-10) * 1e-2, maxiter=maxiter,
            )
        except spla.ArpackNoConvergence as exc:
            best = None
            if exc.eigenvalues.size:
                r = C @ exc.eigenvectors - exc.eigenvectors * exc.eigenvalues
                best = float(np.max(np.linalg.norm(r, axis=0)))
            raise SolverError("ARPACK did not converge", best_residual=best) from exc
        order = np.argsort(np.abs(vals - shift), kind="stable")[:k]
        vals, vecs = vals[order], vecs[:, order]
        vals, vecs = _recover_missed(solve, vals, vecs, shift, n, dtype, rng, k)
        order = np.argsort(vals, kind="stable")
        vals, vecs = vals[order], vecs[:, order]
        iterations = count[0]
    else:
        raise ValueError(f"unknown method {method!r}")

    vals = np.real(vals)
    r = C @ vecs - vecs * vals
    residuals = np.linalg.norm(r, axis=0) / (np.maximum(1.0, np.abs(vals)) * np.linalg.norm(vecs, axis=0))
    if np.any(residuals > tol):
        raise SolverError(
            f"eigen-residual {residuals.max():.3e} above tolerance {tol:.1e}",
            best_residual=float(residuals.max()),
        )
    vecs = vecs * s[:, None]
    norms = np.sqrt(np.sum(op.mass[:, None] * np.abs(vecs) ** 2, axis=0))
    vecs = _sign_convention(vecs / norms)
    return EigResult(vals, vecs, residuals, iterations, {"shift": shift, "method": method, "kind": op.kind})


def _recover_missed(solve, vals, vecs, shift, n, dtype, rng, k):
    """Deflated restarts: look for eigenvalues closer to ``shift`` than the found ones.

    Lanczos can converge before every copy of a multiple eigenvalue appears.
    The shift-inverted operator restricted to the orthogonal complement of the
    found vectors has the remaining eigenvalues only; its dominant one is
    compared with the farthest found value and swapped in when closer.
    """
    for _ in range(k):
        if n - vecs.shape[1] < 2:
            break
        V = vecs

        def deflated(x, V=V):
            x = x - V @ (V.conj().T @ x)
            y = solve(x)
            return y - V @ (V.conj().T @ y)

        op = spla.LinearOperator((n, n), matvec=deflated, dtype=dtype)
        v0 = rng.standard_normal(n).astype(dtype)
        mu, w = spla.eigsh(op, k=1, which="LM", v0=v0 - V @ (V.conj().T @ v0), tol=1e-14)
        lam = shift + 1.0 / float(np.real(mu[0]))
        far = int(np.argmax(np.abs(vals - shift)))
        if abs(lam - shift) >= abs(vals[far] - shift) * (1 - 1e-10):
            break
        vals = np.concatenate([np.delete(vals, far), [lam]])
        vecs = np.concatenate([np.delete(vecs, far, axis=1), w], axis=1)
    return vals, vecs


def solve_linear_complex(
    op: SparseOperator | sp.spmatrix,
    rhs: np.ndarray,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """Sparse LU solve with a relative-residual guarantee ``<= tol``.

    ``rhs`` may be a vector or a matrix of right-hand sides (one factorisation).
    """
    A = op.matrix if isinstance(op, SparseOperator) else sp.csr_matrix(op)
    b = np.asarray(rhs, dtype=complex)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise ValueError(f"shape mismatch: operator {A.shape}, rhs {b.shape}")
    bnorm = np.linalg.norm(b, axis=0)
    if np.all(bnorm == 0):
        return np.zeros_like(b)
    try:
        lu = spla.splu(sp.csc_matrix(A, dtype=complex))
    except RuntimeError as exc:
        raise SolverError(f"singular or ill-posed system: {exc}") from exc
    x = lu.solve(b)
    for _ in range(3):
        res = np.linalg.norm(b - A @ x, axis=0) / np.where(bnorm > 0, bnorm, 1.0)
        if np.all(res <= tol):
            break
        x = x + lu.solve(b - A @ x)
    res = np.linalg.norm(b - A @ x, axis=0) / np.where(bnorm > 0, bnorm, 1.0)
    if not np.all(np.isfinite(x)) or np.any(res > tol):
        raise SolverError(f"relative residual {np.max(res):.3e} above {tol:.1e}", float(np.max(res)))
    return x
