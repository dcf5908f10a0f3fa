"""Primitives on the cone of symmetric positive definite matrices.

All functions accept stacked inputs of shape ``(..., m, m)`` and operate on
the trailing two axes, so ensembles of matrices can be processed in one call.
Validation (symmetry check, positive definiteness with a small clamping
band for roundoff) happens in :func:`make_spd`; the numerical kernels assume
their inputs are already valid.
"""

from __future__ import annotations

import io

import numpy as np

SYMMETRY_RTOL = 1e-12
EIG_CLAMP_REL = 1e-10
ORTHOGONALITY_TOL = 1e-10


class SpdConstructionError(ValueError):
    """Input matrix is not (numerically) symmetric positive definite."""


class EigenSolverError(RuntimeError):
    """The symmetric eigensolver failed to converge."""


def make_spd(entries) -> np.ndarray:
    """Validate and return a single SPD matrix as a float64 array.

    Symmetry is required up to ``|a_ij - a_ji| <= 1e-12 * max(1, |a_ij|)``.
    Eigenvalues in ``(-tol, 0]`` with ``tol = 1e-10 * ||A||_2`` are clamped
    up to ``tol`` (composition chains accumulate roundoff while staying
    positive definite in exact arithmetic); anything more negative is an
    error.

    Parameters
    ----------
    entries : array_like, shape (m, m)

    Returns
    -------
    ndarray, shape (m, m)
        The symmetrized (and possibly clamped) matrix.
    """
    a = np.asarray(entries, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SpdConstructionError(f"expected a square matrix, got shape {a.shape}")
    asym = np.abs(a - a.T)
    limit = SYMMETRY_RTOL * np.maximum(1.0, np.abs(a))
    if np.any(asym > limit):
        i, j = np.unravel_index(np.argmax(asym - limit), a.shape)
        raise SpdConstructionError(
            f"matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {asym[i, j]:.3e}"
        )
    a = 0.5 * (a + a.T)
    w, q = _eigh(a)
    tol = EIG_CLAMP_REL * max(np.abs(w).max(), np.finfo(float).tiny)
    wmin = w.min()
    if wmin <= -tol:
        raise SpdConstructionError(
            f"matrix is not positive definite: min eigenvalue {wmin:.3e} "
            f"below clamp tolerance {-tol:.3e}"
        )
    if wmin <= 0.0:
        w = np.maximum(w, tol)
        a = (q * w) @ q.T
        a = 0.5 * (a + a.T)
    return a


def _eigh(a):
    """eigh with a diagnostic error instead of a bare LinAlgError."""
    try:
        return np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        scale = float(np.abs(a).max())
        raise EigenSolverError(
            f"symmetric eigendecomposition failed (dim {a.shape[-1]}, "
            f"max |entry| {scale:.3e}): {exc}"
        ) from exc


def sym_eigenvalues(a) -> np.ndarray:
    """Ascending eigenvalues of symmetric matrices, shape ``(..., m)``."""
    a = np.asarray(a, dtype=float)
    try:
        return np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigvalsh failed: {exc}") from exc


def matrix_sqrt(a) -> np.ndarray:
    """Principal square root of SPD matrices via eigendecomposition."""
    a = np.asarray(a, dtype=float)
    w, q = _eigh(a)
    root = np.sqrt(np.maximum(w, 0.0))
    s = (q * root[..., None, :]) @ np.swapaxes(q, -1, -2)
    return 0.5 * (s + np.swapaxes(s, -1, -2))


def _check_same_dim(a, b):
    if a.shape[-1] != b.shape[-1] or a.shape[-2] != a.shape[-1] or b.shape[-2] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def _whitened_eigenvalues(a, b):
    """Eigenvalues of A^{-1/2} B A^{-1/2} (similar to A^{-1} B, but symmetric)."""
    inv_root = inv_sqrt(a)
    c = inv_root @ b @ inv_root
    c = 0.5 * (c + np.swapaxes(c, -1, -2))
    w = sym_eigenvalues(c)
    # roundoff on near-singular pairs can graze zero; a clipped eigenvalue
    # maps to a huge but finite distance instead of a NaN
    return np.clip(w, np.finfo(float).tiny, None)


def inv_sqrt(a) -> np.ndarray:
    """Inverse principal square root of SPD matrices."""
    a = np.asarray(a, dtype=float)
    w, q = _eigh(a)
    inv_root = 1.0 / np.sqrt(w)
    s = (q * inv_root[..., None, :]) @ np.swapaxes(q, -1, -2)
    return 0.5 * (s + np.swapaxes(s, -1, -2))


def riemannian_distance(a, b):
    """Geodesic distance on the SPD cone under the affine-invariant metric.

    ``d_R(A, B) = sqrt(sum_j log^2 lambda_j(A^{-1/2} B A^{-1/2}))``.  The
    whitened pencil is used rather than ``A^{-1} B`` because symmetric
    eigensolvers are backward stable; the nonsymmetric formula gives the
    same spectrum and is kept as a test oracle only.

    Parameters
    ----------
    a, b : array_like, shape (..., m, m)
        SPD matrices (broadcast against each other).

    Returns
    -------
    float or ndarray
        Nonnegative distances, shape ``(...)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_same_dim(a, b)
    w = _whitened_eigenvalues(a, b)
    d = np.sqrt((np.log(w) ** 2).sum(axis=-1))
    return float(d) if d.ndim == 0 else d


def thompson_distance(a, b):
    """Thompson part metric: ``log max(lambda_max(A^-1 B), 1/lambda_min(A^-1 B))``.

    Sandwiches the Riemannian distance: ``d_T <= d_R <= sqrt(m) d_T``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_same_dim(a, b)
    w = _whitened_eigenvalues(a, b)
    logw = np.log(w)
    d = np.maximum(logw[..., -1], -logw[..., 0])
    # coincident spectra give max(x, -x) = |x| ~ 0, keep exact nonnegativity
    d = np.maximum(d, 0.0)
    return float(d) if d.ndim == 0 else d


def dist_from_identity(x):
    """Riemannian distance from the identity, ``sqrt(sum_j log^2 lambda_j(X))``.

    Cheaper than ``riemannian_distance(I, x)``: no whitening is needed.
    """
    x = np.asarray(x, dtype=float)
    w = sym_eigenvalues(x)
    # guard: roundoff in long composition chains may graze zero; a clipped
    # eigenvalue maps to a huge distance, which only fattens tail estimates
    w = np.clip(w, np.finfo(float).tiny, None)
    d = np.sqrt((np.log(w) ** 2).sum(axis=-1))
    return float(d) if d.ndim == 0 else d


def compose(a, b) -> np.ndarray:
    """Composition ``A^{1/2} B A^{1/2}`` of SPD matrices.

    Keeps determinants multiplicative and is commutative/associative in
    distribution for independent orthogonally invariant random matrices,
    though not as a pointwise operation.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_same_dim(a, b)
    root = matrix_sqrt(a)
    c = root @ b @ root
    return 0.5 * (c + np.swapaxes(c, -1, -2))


def is_orthogonal(q, tol: float = ORTHOGONALITY_TOL) -> bool:
    """Check ``||Q^T Q - I||_max <= tol``."""
    q = np.asarray(q, dtype=float)
    m = q.shape[-1]
    resid = np.swapaxes(q, -1, -2) @ q - np.eye(m)
    return bool(np.abs(resid).max() <= tol)


# ---------------------------------------------------------------------------
# serialization: row-major JSON array-of-arrays and CSV, 17 significant digits

def matrix_to_json(a) -> str:
    a = np.asarray(a, dtype=float)
    rows = ", ".join(
        "[" + ", ".join(f"{x:.17g}" for x in row) + "]" for row in a
    )
    return "[" + rows + "]"


def matrix_from_json(text: str) -> np.ndarray:
    import json

    return np.asarray(json.loads(text), dtype=float)


def matrix_to_csv(a) -> str:
    a = np.asarray(a, dtype=float)
    buf = io.StringIO()
    for row in a:
        buf.write(",".join(f"{x:.17g}" for x in row))
        buf.write("\n")
    return buf.getvalue()


def matrix_from_csv(text: str) -> np.ndarray:
    rows = [
        [float(tok) for tok in line.split(",")]
        for line in text.strip().splitlines()
        if line.strip()
    ]
    return np.asarray(rows, dtype=float)
