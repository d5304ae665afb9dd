"""Primal nondegeneracy diagnostics at a feasible point.

A feasible X is nondegenerate when the constraint matrices, restricted to the
eigenbasis of X and with the block untouched by the face structure discarded,
still span all of R^m.  That is a rank test on a tall matrix L assembled from
V' A_i V and V' A_i Vbar blocks, with V the positive eigenspace of X.  The
same question has a dual reading: at an optimum satisfying strict
complementarity, degeneracy of X is equivalent to singularity of the Newton
matrix of the projection root function, which is what the crosscheck below
exercises.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .model import BapInstance
from .ssnewton import NewtonTrace
from .symcore import eig_sym, svec

RANK_TOL = 1e-8


@dataclass
class DegeneracyReport:
    rank_L: int
    m: int
    verdict: str  # "Nondegenerate" | "Degenerate"
    singular_values: np.ndarray
    margin: float  # sigma_m / sigma_1, zero when rank deficient
    rank_X: int
    rank_Z: int | None = None
    strict_complementarity: bool | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "rank_L": self.rank_L,
            "m": self.m,
            "verdict": self.verdict,
            "sc": self.strict_complementarity,
            "sigma_L": self.singular_values,
            "margin": self.margin,
            "rank_X": self.rank_X,
            "rank_Z": self.rank_Z,
        }


def _feasibility_guard(inst: BapInstance, X: np.ndarray, feas_tol: float) -> np.ndarray:
    X = 0.5 * (np.asarray(X, dtype=float) + np.asarray(X, dtype=float).T)
    e = np.linalg.eigvalsh(X)
    scale = max(1.0, abs(e[-1]))
    if e[0] < -1e-9 * scale:
        raise ValueError(f"X is not psd enough for a rank split: min eig {e[0]:.3e}")
    pf = np.linalg.norm(inst.map.apply(X) - inst.b) / (1.0 + np.linalg.norm(inst.b))
    if pf > feas_tol:
        raise ValueError(f"X violates the linear constraints: scaled residual {pf:.3e}")
    return X


def build_L(inst: BapInstance, X: np.ndarray, feas_tol: float = 1e-8) -> np.ndarray:
    """Nondegeneracy test matrix at a feasible X.

    Column i stacks svec(V' A_i V) over sqrt(2) * vec(V' A_i Vbar), where V
    spans the positive eigenspace of X (relative threshold ``RANK_TOL``) and
    Vbar the rest; the block that the definition zeroes out is omitted.  The
    scaling keeps the stacked column an isometric image of the two blocks.
    """
    L, _, _ = _build_L_split(inst, X, feas_tol)
    return L


def _build_L_split(
    inst: BapInstance, X: np.ndarray, feas_tol: float = 1e-8
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    X = _feasibility_guard(inst, X, feas_tol)
    dec = eig_sym(X, zero_tol=RANK_TOL)
    r = len(dec.alpha)
    V = dec.U[:, :r]
    Vbar = dec.U[:, r:]
    cols = []
    for i in range(inst.m):
        Ai = inst.map.matrix(i)
        top = svec(V.T @ Ai @ V)
        mid = np.sqrt(2.0) * (V.T @ Ai @ Vbar).ravel()
        cols.append(np.concatenate([top, mid]))
    return np.array(cols).T, V, Vbar


def _rank(sv: np.ndarray) -> int:
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > RANK_TOL * sv[0]))


def is_nondegenerate(
    inst: BapInstance,
    X: np.ndarray,
    Z: np.ndarray | None = None,
    feas_tol: float = 1e-8,
) -> DegeneracyReport:
    """Rank verdict at a feasible X, with strict complementarity when Z is given."""
    L, V, _ = _build_L_split(inst, X, feas_tol)
    sv = np.linalg.svd(L, compute_uv=False)
    rank_L = _rank(sv)
    full = rank_L == inst.m
    margin = float(sv[inst.m - 1] / sv[0]) if full and sv.size >= inst.m else 0.0
    rank_Z = None
    sc = None
    if Z is not None:
        eZ = np.linalg.eigvalsh(0.5 * (Z + Z.T))
        rank_Z = int(np.sum(eZ > RANK_TOL * max(1.0, abs(eZ[-1]))))
        sc = V.shape[1] + rank_Z == inst.n
    return DegeneracyReport(
        rank_L=rank_L,
        m=inst.m,
        verdict="Nondegenerate" if full else "Degenerate",
        singular_values=sv,
        margin=margin,
        rank_X=V.shape[1],
        rank_Z=rank_Z,
        strict_complementarity=sc,
    )


@dataclass
class CrosscheckReport:
    """Agreement between the rank test and terminal Newton-matrix invertibility."""

    report: DegeneracyReport
    jacobian_nonsingular: bool
    sigma_ratio_J: float
    agree: bool
    inconclusive: bool
    reason: str = ""

    def to_dict(self) -> dict[str, Any]:
        d = self.report.to_dict()
        d["cond_J"] = None if self.sigma_ratio_J == 0 else 1.0 / self.sigma_ratio_J
        d["jacobian_nonsingular"] = self.jacobian_nonsingular
        d["agree"] = self.agree
        d["inconclusive"] = self.inconclusive
        d["reason"] = self.reason
        return d


def jacobian_degeneracy_crosscheck(
    inst: BapInstance,
    trace: NewtonTrace,
    feas_tol: float = 1e-6,
    X: np.ndarray | None = None,
) -> CrosscheckReport:
    """Compare the rank verdict at the terminal X with Newton-matrix invertibility.

    The equivalence between the two is a statement about optima with strict
    complementarity; the result is flagged inconclusive when the terminal
    iterate is too infeasible for the rank test to mean anything or when
    strict complementarity fails, and the raw disagreement is preserved rather
    than patched over.  When the run stalled short of feasibility but the
    optimum is known (a planted vertex, say), pass it as ``X`` to rank-test
    there while still judging the Newton matrix from the trace.
    """
    Z = trace.triple.Z
    X = trace.triple.X if X is None else np.asarray(X, dtype=float)
    eig_J = trace.iterates[-1].eig_J
    ratio = float(eig_J[-1] / eig_J[0]) if eig_J.size and eig_J[0] > 0 else 0.0
    nonsing = ratio > RANK_TOL
    pf = np.linalg.norm(inst.map.apply(X) - inst.b) / (1.0 + np.linalg.norm(inst.b))
    if pf > feas_tol:
        stub = DegeneracyReport(
            rank_L=0, m=inst.m, verdict="Degenerate",
            singular_values=np.zeros(0), margin=0.0, rank_X=0,
        )
        return CrosscheckReport(
            report=stub, jacobian_nonsingular=nonsing, sigma_ratio_J=ratio,
            agree=False, inconclusive=True,
            reason=f"terminal iterate infeasible (pf {pf:.3e}); rank test skipped",
        )
    rep = is_nondegenerate(inst, X, Z=Z, feas_tol=feas_tol)
    agree = (rep.verdict == "Nondegenerate") == nonsing
    inconclusive = not bool(rep.strict_complementarity)
    reason = "" if not inconclusive else "strict complementarity fails at the terminal triple"
    return CrosscheckReport(
        report=rep, jacobian_nonsingular=nonsing, sigma_ratio_J=ratio,
        agree=agree, inconclusive=inconclusive, reason=reason,
    )
