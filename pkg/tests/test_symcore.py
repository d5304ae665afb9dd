import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spectraproj.symcore import (
    check_face_range,
    eig_sym,
    moreau_envelope,
    project_face,
    project_psd,
    smat,
    svec,
    tri_len,
    tri_order,
)

RNG = np.random.default_rng(20260815)


def _sym(n, rng=RNG, scale=1.0):
    G = rng.standard_normal((n, n)) * scale
    return 0.5 * (G + G.T)


def sym_matrices(max_n=6):
    def build(draw):
        n = draw(st.integers(min_value=1, max_value=max_n))
        A = draw(
            arrays(
                np.float64,
                (n, n),
                elements=st.floats(-10, 10, allow_nan=False, width=64),
            )
        )
        return 0.5 * (A + A.T)

    return st.composite(build)()


def test_tri_len_roundtrip():
    for n in range(1, 30):
        assert tri_order(tri_len(n)) == n
    with pytest.raises(ValueError):
        tri_order(4)


def test_svec_pinned_values():
    assert np.allclose(svec(np.eye(2)), [1.0, 0.0, 1.0])
    off = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(svec(off), [0.0, np.sqrt(2.0), 0.0])


def test_svec_rejects_nonsquare():
    with pytest.raises(ValueError):
        svec(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        smat(np.zeros(4))


@given(sym_matrices())
@settings(max_examples=60, deadline=None)
def test_svec_smat_roundtrip(A):
    assert np.allclose(smat(svec(A)), A, atol=1e-12)


@given(sym_matrices(), st.integers(0, 2**31 - 1))
@settings(max_examples=60, deadline=None)
def test_svec_isometry(A, seed):
    B = _sym(A.shape[0], np.random.default_rng(seed), scale=3.0)
    assert svec(A) @ svec(B) == pytest.approx(np.trace(A @ B), abs=1e-9, rel=1e-12)


def test_eig_sym_partition_and_recompose():
    for n in (1, 3, 7):
        S = _sym(n)
        dec = eig_sym(S)
        assert np.all(np.diff(dec.lam) <= 1e-14)
        assert sorted(dec.alpha + dec.beta + dec.gamma) == list(range(n))
        assert np.allclose(dec.recompose(), S, atol=1e-10)
        assert np.allclose(dec.U @ dec.U.T, np.eye(n), atol=1e-12)


def test_eig_sym_zero_bucket():
    S = np.diag([2.0, 1e-14, -3.0])
    dec = eig_sym(S)
    assert dec.alpha == [0] and dec.beta == [1] and dec.gamma == [2]


def test_eig_sym_sign_normalization_is_stable():
    S = _sym(6)
    d1 = eig_sym(S)
    d2 = eig_sym(S.copy())
    assert np.array_equal(d1.U, d2.U)
    # the first sizeable component of every eigenvector is positive
    for j in range(6):
        col = d1.U[:, j]
        idx = np.argmax(np.abs(col) > 1e-12 * np.abs(col).max())
        assert col[idx] > 0


def test_projection_split_properties():
    # X psd, complement psd, orthogonal, and the difference recovers S
    for n in (2, 5, 9):
        S = _sym(n, scale=4.0)
        X, Zneg = project_psd(S)
        nS = np.linalg.norm(S)
        assert np.linalg.eigvalsh(X).min() >= -1e-10 * nS
        assert np.linalg.eigvalsh(Zneg).min() >= -1e-10 * nS
        assert abs(np.sum(X * Zneg)) <= 1e-10 * nS**2
        assert np.allclose(X - Zneg, S, atol=1e-12 * max(1.0, nS))


def test_projection_idempotent():
    S = _sym(6, scale=2.0)
    X, _ = project_psd(S)
    X2, _ = project_psd(X)
    assert np.allclose(X2, X, atol=1e-12)


def test_face_projection_full_face_matches_cone():
    S = _sym(5)
    X, _ = project_psd(S)
    assert np.allclose(project_face(S, np.eye(5)), X, atol=1e-12)


def test_face_projection_single_column():
    rng = np.random.default_rng(5)
    v = rng.standard_normal(4)
    v /= np.linalg.norm(v)
    u = _sym(4, rng)
    expect = max(v @ u @ v, 0.0) * np.outer(v, v)
    assert np.allclose(project_face(u, v.reshape(-1, 1)), expect, atol=1e-12)


def test_face_range_validation():
    V = np.array([[1.0, 1.0], [0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(ValueError):
        check_face_range(V)
    with pytest.raises(ValueError):
        check_face_range(np.ones(3))


def test_envelope_gradient_central_difference():
    rng = np.random.default_rng(11)
    S = _sym(6, rng, scale=2.0)
    X, _ = project_psd(S)
    errs = []
    for h in (1e-2, 1e-3):
        worst = 0.0
        for _ in range(5):
            H = _sym(6, rng)
            H /= np.linalg.norm(H)
            fd = (moreau_envelope(S + h * H) - moreau_envelope(S - h * H)) / (2 * h)
            worst = max(worst, abs(fd - np.sum(X * H)))
        errs.append(worst)
    # quadratic decay: a decade in h buys two decades in error (slack 2x)
    assert errs[1] <= errs[0] / 50.0 + 1e-14
