"""Facial reduction for projection problems without a strictly feasible point.

When the feasible spectrahedron has empty interior there is, by a theorem of
the alternative, a nonzero multiplier lam with A*(lam) psd, nonzero, and
orthogonal to b.  Such a certificate exposes a proper face of the cone; pulling
the problem onto that face and deleting the constraint rows that became
dependent yields a smaller, better behaved instance.  Repeating until no
certificate exists restores a strictly feasible formulation.  The number of
rounds taken is an upper estimate of the singularity degree of the feasible
set, and the total number of deleted rows counts the implicit redundancies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .model import BapInstance, LinearMap, preprocess_surjective, residual_F_face
from .ssnewton import NewtonStatus, NewtonTrace, _dir_deriv_from_dec, jacobian
from .symcore import DEFAULT_ZERO_TOL, eig_sym, svec, tri_len


class FaceCollapsedError(Exception):
    """Facial reduction drove the face to {0}; only X = 0 could be feasible."""


@dataclass
class AuxCertificate:
    """Solution of the auxiliary system: unit lam with A*(lam) psd and <b, lam> = 0."""

    lam: np.ndarray
    Z: np.ndarray
    residual: float
    b_inner: float

    def validate(self, b: np.ndarray, tol: float = 1e-9) -> None:
        if abs(np.linalg.norm(self.lam) - 1.0) > 1e-8:
            raise ValueError("certificate multiplier is not unit norm")
        eZ = np.linalg.eigvalsh(0.5 * (self.Z + self.Z.T))
        if eZ.size and eZ[0] < -tol * max(1.0, abs(eZ[-1])):
            raise ValueError(f"exposing matrix is not psd: min eig {eZ[0]:.3e}")
        if abs(self.b_inner) > tol * (1.0 + np.linalg.norm(b)):
            raise ValueError("certificate is not orthogonal to b")
        if np.linalg.norm(self.Z) < 1e-8:
            raise ValueError("exposing matrix is numerically zero")


@dataclass
class FrStep:
    """One facial-reduction round."""

    lam: np.ndarray          # certificate in the coordinates of the step's instance
    lam_lifted: np.ndarray   # same certificate zero-padded to the original rows
    Q: np.ndarray            # basis of the step's face inside the previous one
    rows_removed: list[int]  # indices (step-local) of rows dropped as dependent
    r_after: int             # face dimension after the step
    residual: float


@dataclass
class FaceChain:
    """Composed outcome of a facial-reduction loop."""

    V: np.ndarray            # n x r basis of the final face in original coordinates
    steps: list[FrStep] = field(default_factory=list)

    @property
    def sd_hat(self) -> int:
        return len(self.steps)

    @property
    def iips_hat(self) -> int:
        return sum(len(s.rows_removed) for s in self.steps)


def _aux_residual(inst: BapInstance, lam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    M = inst.map.adjoint(lam)
    dec = eig_sym(M, zero_tol=0.0)
    neg = np.minimum(dec.lam, 0.0)
    Mneg = (dec.U * neg) @ dec.U.T
    r = np.concatenate([svec(Mneg), [float(inst.b @ lam)]])
    return r, M


def _aux_jacobian(inst: BapInstance, lam: np.ndarray) -> np.ndarray:
    # residual row block is svec(M - P(M)); its derivative in lam_j is
    # svec(A_j - P'(M; A_j))
    M = inst.map.adjoint(lam)
    dec = eig_sym(M, zero_tol=DEFAULT_ZERO_TOL)
    m = inst.m
    cols = np.empty((tri_len(inst.n) + 1, m))
    for j in range(m):
        Aj = inst.map.matrix(j)
        cols[:-1, j] = svec(Aj - _dir_deriv_from_dec(dec, Aj))
        cols[-1, j] = inst.b[j]
    return cols


def _polish_certificate(inst: BapInstance, lam: np.ndarray, rn: float) -> tuple[np.ndarray, float]:
    """Snap a near-certificate onto the exact face it is trying to expose.

    A residual of ``rn`` still tolerates spurious multiplier components of
    order sqrt(rn), because their contribution to the negative part is
    quadratic; those inflate the rank of the exposing matrix and over-restrict
    the face.  For a few candidate rank cuts this solves the exact linear
    system (complement block of A* vanishes, b-orthogonality) and keeps the
    null vector closest to ``lam`` whenever that strictly improves the
    residual.
    """
    best_lam, best_rn = lam, rn
    for theta in (1e-4, 1e-6, 1e-8):
        mu = lam
        # the cut basis inherits the pollution it is meant to remove, so one
        # projection only shrinks it quadratically; a few passes reach machine
        for _ in range(4):
            Z = inst.map.adjoint(mu)
            w, U = np.linalg.eigh(Z)
            scale = float(np.abs(w).max())
            if scale == 0.0:
                break
            keep = w < theta * scale
            k = int(np.count_nonzero(keep))
            if k == 0 or k == inst.n:
                break
            N = U[:, keep]
            rows = np.array(
                [svec(N.T @ inst.map.matrix(j) @ N) for j in range(inst.m)]
            )
            K = np.vstack([rows.T, inst.b])
            _, sig, Vt = np.linalg.svd(K, full_matrices=True)
            null_mask = np.zeros(inst.m, dtype=bool)
            null_mask[len(sig):] = True
            null_mask[: len(sig)] |= sig <= 1e-8 * (sig[0] if len(sig) else 1.0)
            if not null_mask.any():
                break
            B = Vt[null_mask].T
            cand = B @ (B.T @ mu)
            nm = float(np.linalg.norm(cand))
            if nm < 1e-8:
                break
            mu = cand / nm
            r_new, _ = _aux_residual(inst, mu)
            rn_new = float(np.linalg.norm(r_new))
            if rn_new < best_rn:
                best_lam, best_rn = mu, rn_new
            if rn_new == 0.0:
                break
    return best_lam, best_rn


def solve_aux_gauss_newton(
    inst: BapInstance,
    lam0: np.ndarray | None = None,
    restarts: int = 20,
    max_iter: int = 60,
    tol: float = 1e-9,
) -> AuxCertificate | None:
    """Search for an auxiliary-system certificate by projected Gauss-Newton.

    Minimizes ||(negative part of A*(lam), <b, lam>)|| over the unit sphere,
    renormalizing after every step and halving the step while it does not
    decrease the residual.  The residual is positively homogeneous of degree
    one, so the unconstrained least-squares step is always the useless
    direction -lam (Euler's identity); the step is therefore restricted to the
    tangent space of the sphere at the current point.  Deterministic
    multi-start: the optional warm start first, then ``restarts`` unit
    Gaussians seeded from the instance seed.  Returns None when no start
    reaches residual ``tol`` with a nontrivially nonzero exposing matrix; on a
    feasible instance that outcome is evidence of strict feasibility.
    """
    m = inst.m
    if m == 0:
        return None
    seed = int(inst.meta.get("seed", 0))
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(97,)))
    starts: list[np.ndarray] = []
    if lam0 is not None:
        lam0 = np.asarray(lam0, dtype=float)
        if np.linalg.norm(lam0) > 0:
            starts.append(lam0 / np.linalg.norm(lam0))
    for _ in range(restarts):
        v = rng.standard_normal(m)
        starts.append(v / np.linalg.norm(v))

    for lam in starts:
        lam = lam.copy()
        r, M = _aux_residual(inst, lam)
        rn = float(np.linalg.norm(r))
        for _ in range(max_iter):
            if rn <= tol or m == 1:
                break
            J = _aux_jacobian(inst, lam)
            # tangent basis at lam: trailing columns of a full QR of [lam]
            Q, _ = np.linalg.qr(lam.reshape(-1, 1), mode="complete")
            T = Q[:, 1:]
            c, *_ = np.linalg.lstsq(J @ T, -r, rcond=None)
            d = T @ c
            step = 1.0
            improved = False
            for _ in range(25):
                cand = lam + step * d
                nc = np.linalg.norm(cand)
                if nc < 1e-14:
                    step *= 0.5
                    continue
                cand /= nc
                rc, Mc = _aux_residual(inst, cand)
                rcn = float(np.linalg.norm(rc))
                if rcn < rn:
                    lam, r, rn, M = cand, rc, rcn, Mc
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
        if rn <= tol and np.linalg.norm(M) >= 1e-8:
            lam, rn = _polish_certificate(inst, lam, rn)
            M = inst.map.adjoint(lam)
            if np.linalg.norm(M) < 1e-8:
                continue
            # first success wins, in start order, so the outcome is seed-stable
            return AuxCertificate(
                lam=lam, Z=M, residual=rn, b_inner=float(inst.b @ lam)
            )
    return None


def certificate_from_stall(trace: NewtonTrace, inst: BapInstance) -> np.ndarray:
    """Candidate certificate from a stalled Newton run.

    The eigenvector of the smallest eigenvalue of the terminal Newton matrix is
    the natural stall direction; entries below a thousandth of the largest are
    zeroed (small supports are typical for planted redundancy) and the result is
    renormalized.  Raises if the run actually solved the problem.
    """
    if trace.status == NewtonStatus.SOLVED:
        raise ValueError("run converged; there is no stall to extract a certificate from")
    y = trace.triple.y
    J = jacobian(inst, y, zero_tol=trace.options.zero_tol)
    w, V = np.linalg.eigh(0.5 * (J + J.T))
    lam = V[:, 0].copy()
    lam[np.abs(lam) <= 1e-3 * np.abs(lam).max()] = 0.0
    nl = np.linalg.norm(lam)
    if nl == 0:
        lam = V[:, 0].copy()
        nl = np.linalg.norm(lam)
    lam /= nl
    # orient toward the psd side so the Gauss-Newton polish starts closer
    M = inst.map.adjoint(lam)
    e = np.linalg.eigvalsh(M)
    if abs(e[0]) > abs(e[-1]):
        lam = -lam
    return lam


def fr_step(
    inst: BapInstance,
    cert: AuxCertificate,
    zero_tol: float = DEFAULT_ZERO_TOL,
) -> tuple[BapInstance, np.ndarray, list[int]]:
    """Restrict the instance to the face exposed by a certificate.

    The face is spanned by the (thresholded) null space Q of the psd part of
    the exposing matrix; constraints become Q' A_i Q, the anchor W becomes
    Q' W Q, and rows that lost rank are deleted after a consistency check.
    Raises :class:`FaceCollapsedError` when the exposing matrix has full-rank
    positive part.
    """
    dec = eig_sym(cert.Z, zero_tol=zero_tol)
    keep = sorted(dec.beta + dec.gamma)
    if not keep:
        raise FaceCollapsedError("exposing matrix is positive definite; face is {0}")
    Q = dec.U[:, keep]
    r = Q.shape[1]
    reduced_rows = np.array([svec(Q.T @ inst.map.matrix(i) @ Q) for i in range(inst.m)])
    amap = LinearMap(n=r, rows=reduced_rows)
    red_map, red_b, removed = preprocess_surjective(amap, inst.b)
    meta = dict(inst.meta)
    meta["reduced_from"] = inst.n
    reduced = BapInstance(map=red_map, b=red_b, W=Q.T @ inst.W @ Q, meta=meta)
    return reduced, Q, removed


def fr_loop(
    inst: BapInstance,
    lam0: np.ndarray | None = None,
    restarts: int = 20,
    zero_tol: float = DEFAULT_ZERO_TOL,
) -> tuple[FaceChain, BapInstance]:
    """Alternate certificate search and face restriction until none is found.

    ``lam0`` warm-starts the first round only (it usually comes from a stalled
    Newton run).  Returns the composed chain and the final reduced instance,
    on which strict feasibility is expected to hold.
    """
    current = inst
    V = np.eye(inst.n)
    kept_orig = list(range(inst.m))
    steps: list[FrStep] = []
    warm = lam0
    for _ in range(inst.n):
        cert = solve_aux_gauss_newton(current, lam0=warm, restarts=restarts)
        warm = None
        if cert is None:
            break
        cert.validate(current.b)
        reduced, Q, removed = fr_step(current, cert, zero_tol=zero_tol)
        lifted = np.zeros(inst.m)
        lifted[kept_orig] = cert.lam
        steps.append(
            FrStep(
                lam=cert.lam,
                lam_lifted=lifted,
                Q=Q,
                rows_removed=removed,
                r_after=reduced.n,
                residual=cert.residual,
            )
        )
        V = V @ Q
        removed_set = set(removed)
        kept_orig = [g for i, g in enumerate(kept_orig) if i not in removed_set]
        current = reduced
        if current.n == 0:
            raise FaceCollapsedError("face shrank to dimension zero")
    return FaceChain(V=V, steps=steps), current


def check_independence(
    chain: FaceChain,
    inst: BapInstance | None = None,
    y_root: np.ndarray | None = None,
    tol: float = 1e-9,
) -> bool:
    """Verify that the lifted certificates are linearly independent.

    When the original instance and a root of the face-restricted residual are
    supplied, additionally verify that shifting the root by any chain
    certificate keeps the face-restricted residual at zero.
    """
    if not chain.steps:
        return True
    L = np.array([s.lam_lifted for s in chain.steps])
    sv = np.linalg.svd(L, compute_uv=False)
    rank = int(np.sum(sv > 1e-8 * sv[0]))
    if rank != len(chain.steps):
        return False
    if inst is not None and y_root is not None:
        b_scale = 1.0 + np.linalg.norm(inst.b)
        for s in chain.steps:
            F, _ = residual_F_face(inst, np.asarray(y_root) + s.lam_lifted, chain.V)
            if np.linalg.norm(F) > tol * b_scale:
                return False
    return True


def fr_report(chain: FaceChain, final_inst: BapInstance) -> dict[str, Any]:
    """JSON-ready summary of a facial-reduction run."""
    return {
        "steps": [
            {
                "lam": s.lam_lifted,
                "rows_removed": [int(i) for i in s.rows_removed],
                "r_after": int(s.r_after),
                "residual": float(s.residual),
            }
            for s in chain.steps
        ],
        "sd_hat": chain.sd_hat,
        "iips_hat": chain.iips_hat,
        "slater_after": True,
        "final_n": int(final_inst.n),
        "final_m": int(final_inst.m),
    }
