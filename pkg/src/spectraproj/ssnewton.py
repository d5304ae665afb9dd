"""Semismooth Newton solver for the projection root function.

The root function is F(y) = A(P(W + A*y)) - b with P the PSD projection.  P is
not differentiable everywhere, but it has directional derivatives with a closed
spectral form, and on the complement of a thin set F has an honest Jacobian
that is symmetric positive semidefinite.  The solver below runs damped Newton
steps on F with an LM-style regularization and stops on one of three flags:
converged, suspected-degenerate (conditioning has eaten the attainable digits),
or iteration limit.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .model import BapInstance, KktTriple
from .symcore import DEFAULT_ZERO_TOL, SpectralDecomp, eig_sym, project_psd

__all__ = [
    "NewtonOptions",
    "NewtonStatus",
    "NewtonIterate",
    "NewtonTrace",
    "omega_block",
    "b_matrix",
    "dir_deriv_proj",
    "jacobian",
    "jacobian_spectrum",
    "newton_solve",
    "trace_to_csv",
]


def omega_block(lam: np.ndarray, alpha: list[int], gamma: list[int]) -> np.ndarray:
    """First-divided-difference block of max(., 0) on positive/negative pairs.

    Entry (i, j) is lam_a / (lam_a - lam_g) for a in alpha, g in gamma; all
    entries lie in (0, 1) when the index sets are clean.
    """
    lam = np.asarray(lam, dtype=float)
    la = lam[list(alpha)]
    lg = lam[list(gamma)]
    if la.size and lg.size:
        return la[:, None] / (la[:, None] - lg[None, :])
    return np.zeros((la.size, lg.size))


def b_matrix(x: np.ndarray) -> np.ndarray:
    """Pairwise weight matrix of the projection derivative for a nonzero spectrum.

    For x sorted nonincreasing with p positive and q negative entries the
    matrix is 1 on the leading p-by-p block, 0 on the trailing q-by-q block,
    and x_i/(x_i - x_j) on the mixed blocks.  Raises on zeros or misordering.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("expected a vector of eigenvalues")
    if np.any(np.diff(x) > 0):
        raise ValueError("eigenvalues must be sorted nonincreasing")
    if np.any(x == 0):
        raise ValueError("b_matrix is defined for nonzero spectra only")
    n = x.size
    p = int(np.sum(x > 0))
    B = np.zeros((n, n))
    B[:p, :p] = 1.0
    if p and p < n:
        Bu = x[:p, None] / (x[:p, None] - x[None, p:])
        B[:p, p:] = Bu
        B[p:, :p] = Bu.T
    return B


def _split_sizes(dec: SpectralDecomp) -> tuple[int, int, int]:
    return len(dec.alpha), len(dec.beta), len(dec.gamma)


def _dir_deriv_from_dec(dec: SpectralDecomp, H: np.ndarray) -> np.ndarray:
    p, z, q = _split_sizes(dec)
    U, lam = dec.U, dec.lam
    Ht = U.T @ H @ U
    M = np.zeros_like(Ht)
    M[:p, :p] = Ht[:p, :p]
    if z:
        M[:p, p : p + z] = Ht[:p, p : p + z]
        M[p : p + z, :p] = Ht[p : p + z, :p]
        Bzz, _ = project_psd(Ht[p : p + z, p : p + z])
        M[p : p + z, p : p + z] = Bzz
    if p and q:
        om = lam[:p, None] / (lam[:p, None] - lam[None, p + z :])
        M[:p, p + z :] = om * Ht[:p, p + z :]
        M[p + z :, :p] = M[:p, p + z :].T
    return U @ M @ U.T


def dir_deriv_proj(
    S: np.ndarray, H: np.ndarray, zero_tol: float = DEFAULT_ZERO_TOL
) -> np.ndarray:
    """Directional derivative of the PSD projection at S in direction H.

    Uses the spectral divided-difference form: with the eigenbasis of S split
    into positive / zero / negative buckets, the derivative keeps the positive
    block of H, damps the mixed positive-negative block by the omega weights,
    projects the zero block, and kills the rest.  At a definite S this reduces
    to H (positive definite) or 0 (negative definite).
    """
    S = np.asarray(S, dtype=float)
    H = np.asarray(H, dtype=float)
    if S.shape != H.shape or S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("S and H must be square matrices of equal order")
    dec = eig_sym(S, zero_tol=zero_tol)
    return _dir_deriv_from_dec(dec, 0.5 * (H + H.T))


def _jacobian_from_dec(
    rows: np.ndarray, mats: np.ndarray, dec: SpectralDecomp
) -> np.ndarray:
    """Assemble the m-by-m Newton matrix from a cached eigendecomposition.

    Zero eigenvalues are folded into the negative bucket (a Clarke
    generalized-Jacobian choice), which leaves the clean two-block weight
    pattern: ones on alpha-alpha, omega weights on the mixed block, zero on
    the rest.  The result is a nonnegatively weighted Gram matrix, hence
    symmetric positive semidefinite.
    """
    m = rows.shape[0]
    p = len(dec.alpha)
    n = dec.n
    if p == 0:
        return np.zeros((m, m))
    if p == n:
        return rows @ rows.T
    U, lam = dec.U, dec.lam
    G = np.matmul(U.T[None, :, :], np.matmul(mats, U))
    w = np.zeros((n, n))
    w[:p, :p] = 1.0
    Bu = lam[:p, None] / (lam[:p, None] - lam[None, p:])
    w[:p, p:] = Bu
    w[p:, :p] = Bu.T
    Gf = G.reshape(m, n * n)
    J = (Gf * w.ravel()) @ Gf.T
    return 0.5 * (J + J.T)


def jacobian(
    inst: BapInstance, y: np.ndarray, zero_tol: float = DEFAULT_ZERO_TOL
) -> np.ndarray:
    """Newton matrix J(y) of the root function at y (m-by-m, psd)."""
    dec = eig_sym(inst.W + inst.map.adjoint(y), zero_tol=zero_tol)
    return _jacobian_from_dec(inst.map.rows, inst.map.matrices(), dec)


def jacobian_spectrum(J: np.ndarray) -> tuple[np.ndarray, float]:
    """Eigenvalues of J sorted nonincreasing and the ratio largest/smallest.

    The smallest eigenvalue is floored at 1e-300 in the ratio so that an exactly
    singular J reports a huge but finite condition number.
    """
    w = np.linalg.eigvalsh(0.5 * (J + J.T))
    eigs = w[::-1].copy()
    cond = float(eigs[0] / max(eigs[-1], 1e-300)) if eigs.size else 0.0
    return eigs, cond


class NewtonStatus(enum.Enum):
    SOLVED = "Solved"
    SUSPECTED_DEGENERATE = "SuspectedDegenerate"
    ITER_LIMIT = "IterLimit"


@dataclass
class NewtonOptions:
    """Knobs for :func:`newton_solve`; defaults match the reference protocol."""

    eps_final: float = 1e-13
    cond_budget: float = 16.0
    max_iter: int = 2000
    reg_kappa: float = 0.2
    zero_tol: float = DEFAULT_ZERO_TOL


@dataclass
class NewtonIterate:
    k: int
    y: np.ndarray
    relres: float
    cond: float
    eig_J: np.ndarray
    lam_min_X: float
    wallclock: float


@dataclass
class NewtonTrace:
    iterates: list[NewtonIterate]
    status: NewtonStatus
    triple: KktTriple
    options: NewtonOptions

    @property
    def k_final(self) -> int:
        return self.iterates[-1].k

    @property
    def relres_final(self) -> float:
        return self.iterates[-1].relres

    @property
    def cond_final(self) -> float:
        return self.iterates[-1].cond

    def relres_history(self) -> np.ndarray:
        return np.array([it.relres for it in self.iterates])


def _digits_lost(cond: float) -> int:
    # cond = beta * 10^s with beta in [1, 10)
    if not np.isfinite(cond) or cond <= 0:
        return 0
    return int(math.floor(math.log10(cond)))


def _digits_gained(relres: float) -> int:
    # relres = alpha * 10^-t with alpha in [1, 10)
    if relres <= 0:
        return 400
    return int(math.ceil(-math.log10(relres)))


def newton_solve(
    inst: BapInstance,
    y0: np.ndarray | None = None,
    opts: NewtonOptions | None = None,
) -> NewtonTrace:
    """Run the regularized semismooth Newton iteration on F(y) = A(P(W+A*y)) - b.

    One eigendecomposition per iteration feeds the residual, the Newton matrix
    and its spectrum.  The step solves (J + lam*I) d = -F by Cholesky with
    lam = reg_kappa*||F|| (floored at 1e-14), escalating lam tenfold if the
    factorization fails and falling back to least squares as a last resort.
    No line search; a step-norm cap of 1e8 guards against overflow on
    divergent dual sequences.

    Stopping, checked in this order at each iterate k:

    * relres <= eps_final                      -> SOLVED
    * digits lost to cond(J) + digits gained
      in relres exceed cond_budget             -> SUSPECTED_DEGENERATE
    * k reached max_iter                       -> ITER_LIMIT
    """
    opts = opts or NewtonOptions()
    m = inst.m
    y = np.zeros(m) if y0 is None else np.asarray(y0, dtype=float).copy()
    b_scale = 1.0 + np.linalg.norm(inst.b)
    mats = inst.map.matrices()
    rows = inst.map.rows
    t0 = time.perf_counter()
    iterates: list[NewtonIterate] = []
    status = NewtonStatus.ITER_LIMIT
    X = np.zeros((inst.n, inst.n))
    Z = np.zeros_like(X)

    for k in range(opts.max_iter + 1):
        Y = inst.W + inst.map.adjoint(y)
        dec = eig_sym(Y, zero_tol=opts.zero_tol)
        pos = np.maximum(dec.lam, 0.0)
        X = (dec.U * pos) @ dec.U.T
        X = 0.5 * (X + X.T)
        Z = X - Y
        F = inst.map.apply(X) - inst.b
        normF = float(np.linalg.norm(F))
        relres = min(1.0, normF / b_scale)
        J = _jacobian_from_dec(rows, mats, dec)
        eig_J, cond = jacobian_spectrum(J)
        iterates.append(
            NewtonIterate(
                k=k,
                y=y.copy(),
                relres=relres,
                cond=cond,
                eig_J=eig_J,
                lam_min_X=float(pos[-1] if pos.size else 0.0),
                wallclock=time.perf_counter() - t0,
            )
        )
        if relres <= opts.eps_final:
            status = NewtonStatus.SOLVED
            break
        if _digits_lost(cond) + _digits_gained(relres) > opts.cond_budget:
            status = NewtonStatus.SUSPECTED_DEGENERATE
            break
        if k >= opts.max_iter:
            status = NewtonStatus.ITER_LIMIT
            break

        reg = max(opts.reg_kappa * normF, 1e-14)
        d = None
        for _ in range(40):
            try:
                cf = scipy.linalg.cho_factor(J + reg * np.eye(m), lower=True)
                d = scipy.linalg.cho_solve(cf, -F)
                break
            except scipy.linalg.LinAlgError:
                reg *= 10.0
        if d is None:
            d, *_ = np.linalg.lstsq(J + reg * np.eye(m), -F, rcond=None)
        nd = float(np.linalg.norm(d))
        if nd > 1e8:
            d *= 1e8 / nd
        y = y + d

    return NewtonTrace(
        iterates=iterates,
        status=status,
        triple=KktTriple(X=X, y=y.copy(), Z=Z),
        options=opts,
    )


def trace_to_csv(trace: NewtonTrace) -> str:
    """Render a trace as CSV: iter, relres, cond, then the Newton-matrix spectrum."""
    m = trace.iterates[0].eig_J.size if trace.iterates else 0
    header = ",".join(["iter", "relres", "cond"] + [f"eigJ_{i+1}" for i in range(m)])
    lines = [header]
    for it in trace.iterates:
        vals = [str(it.k), format(it.relres, ".17g"), format(it.cond, ".17g")]
        vals += [format(v, ".17g") for v in it.eig_J]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"
