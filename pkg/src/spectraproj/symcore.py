"""Symmetric-matrix kernel: isometric vectorization, spectral splits, cone projections.

Everything downstream works with dense real symmetric matrices of modest order
(n <= 200 or so).  Matrices are plain ``(n, n)`` numpy arrays; the half-vector
form produced by :func:`svec` is the storage format for linear maps and files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SQRT2 = np.sqrt(2.0)

#: relative threshold below which an eigenvalue counts as zero
DEFAULT_ZERO_TOL = 1e-10


def tri_len(n: int) -> int:
    """Length n*(n+1)/2 of the half-vectorization of an order-n symmetric matrix."""
    return n * (n + 1) // 2


def tri_order(t: int) -> int:
    """Inverse of :func:`tri_len`; raises if ``t`` is not a triangular number."""
    n = int((np.sqrt(8 * t + 1) - 1) / 2 + 0.5)
    if tri_len(n) != t:
        raise ValueError(f"{t} is not n*(n+1)/2 for any integer n")
    return n


def svec(M: np.ndarray) -> np.ndarray:
    """Half-vectorize a symmetric matrix isometrically.

    Upper triangle in row-major order; off-diagonal entries are scaled by
    sqrt(2) so that ``svec(A) @ svec(B) == trace(A @ B)``.

    Parameters
    ----------
    M : (n, n) ndarray
        Symmetric matrix.  Symmetry is trusted, only the upper triangle is read.

    Returns
    -------
    (n*(n+1)/2,) ndarray
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    n = M.shape[0]
    iu, ju = np.triu_indices(n)
    v = M[iu, ju].copy()
    v[iu != ju] *= SQRT2
    return v


def smat(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`svec`."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError("expected a 1-d vector")
    n = tri_order(v.size)
    iu, ju = np.triu_indices(n)
    w = v.copy()
    w[iu != ju] /= SQRT2
    M = np.zeros((n, n))
    M[iu, ju] = w
    M[ju, iu] = w
    return M


@dataclass
class SpectralDecomp:
    """Eigendecomposition of a symmetric matrix with a thresholded sign split.

    ``lam`` is nonincreasing, ``U`` orthogonal with matching columns.  The index
    lists partition ``range(n)``: ``alpha`` strictly positive eigenvalues,
    ``beta`` those within ``zero_tol * max(1, |lam[0]|, |lam[-1]|)`` of zero,
    ``gamma`` strictly negative.
    """

    U: np.ndarray
    lam: np.ndarray
    alpha: list[int] = field(default_factory=list)
    beta: list[int] = field(default_factory=list)
    gamma: list[int] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.lam.size

    def recompose(self) -> np.ndarray:
        return (self.U * self.lam) @ self.U.T


def _normalize_sign(U: np.ndarray) -> np.ndarray:
    # flip each column so its first component of nontrivial size is positive;
    # keeps eigenvectors reproducible across runs on the same data
    out = U.copy()
    n = U.shape[0]
    for j in range(U.shape[1]):
        col = out[:, j]
        big = np.abs(col) > 1e-12 * max(1.0, np.abs(col).max())
        idx = np.argmax(big)
        if big[idx] and col[idx] < 0:
            out[:, j] = -col
    return out


def eig_sym(S: np.ndarray, zero_tol: float = DEFAULT_ZERO_TOL) -> SpectralDecomp:
    """Ordered symmetric eigendecomposition with alpha/beta/gamma classification.

    Parameters
    ----------
    S : (n, n) ndarray
        Symmetric input; it is symmetrized as (S + S.T)/2 before factoring.
    zero_tol : float
        Relative threshold for the zero bucket.

    Returns
    -------
    SpectralDecomp
    """
    S = np.asarray(S, dtype=float)
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    order = np.argsort(w, kind="stable")[::-1]
    lam = w[order]
    U = _normalize_sign(V[:, order])
    scale = max(1.0, abs(lam[0]), abs(lam[-1])) if lam.size else 1.0
    thr = zero_tol * scale
    alpha = [i for i, x in enumerate(lam) if x > thr]
    beta = [i for i, x in enumerate(lam) if abs(x) <= thr]
    gamma = [i for i, x in enumerate(lam) if x < -thr]
    return SpectralDecomp(U=U, lam=lam, alpha=alpha, beta=beta, gamma=gamma)


def project_psd(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest positive semidefinite matrix and the complementary part.

    Returns ``(X, Zneg)`` with ``X`` the Frobenius-nearest PSD matrix and
    ``Zneg = X - S``.  The pair satisfies ``Zneg >= 0`` and ``<X, Zneg> = 0``
    up to roundoff, which is the decomposition the dual side of everything
    here is built on.
    """
    dec = eig_sym(S, zero_tol=0.0)
    pos = np.maximum(dec.lam, 0.0)
    X = (dec.U * pos) @ dec.U.T
    X = 0.5 * (X + X.T)
    Zneg = X - np.asarray(S, dtype=float)
    return X, 0.5 * (Zneg + Zneg.T)


def check_face_range(V: np.ndarray, tol: float = 1e-12) -> None:
    """Validate that V has orthonormal columns; raises ValueError if not."""
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise ValueError("face range must be a 2-d array")
    defect = np.linalg.norm(V.T @ V - np.eye(V.shape[1]))
    if defect > tol:
        raise ValueError(f"columns of V are not orthonormal: ||V'V - I|| = {defect:.3e}")


def project_face(u: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Project onto the face ``{V R V' : R psd}`` of the PSD cone.

    Equals ``V P(V' u V) V'`` with ``P`` the PSD projection on the reduced
    order; this is the exact nearest point because conjugation by an isometry
    preserves the Frobenius geometry.
    """
    check_face_range(V)
    u = np.asarray(u, dtype=float)
    R, _ = project_psd(V.T @ u @ V)
    return V @ R @ V.T


def moreau_envelope(S: np.ndarray) -> float:
    """Value 0.5*||P(S)||^2 of the squared-norm envelope at S.

    Differentiable everywhere with gradient P(S), the PSD projection of S,
    which is what makes the Newton residual downstream a gradient map.
    """
    dec = eig_sym(S, zero_tol=0.0)
    pos = np.maximum(dec.lam, 0.0)
    return 0.5 * float(pos @ pos)
