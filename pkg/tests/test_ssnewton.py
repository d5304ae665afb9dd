import io

import numpy as np
import pytest

from spectraproj.instances import (
    gen_dual_unattained,
    gen_elliptope,
    gen_planted_noslater,
    gen_random_slater,
)
from spectraproj.model import residual_F
from spectraproj.ssnewton import (
    NewtonOptions,
    NewtonStatus,
    b_matrix,
    dir_deriv_proj,
    jacobian,
    jacobian_spectrum,
    newton_solve,
    omega_block,
    trace_to_csv,
)
from spectraproj.symcore import eig_sym


def _sym(rng, n, scale=1.0):
    G = rng.standard_normal((n, n)) * scale
    return 0.5 * (G + G.T)


def test_omega_block_range():
    lam = np.array([3.0, 1.0, -0.5, -2.0])
    om = omega_block(lam, [0, 1], [2, 3])
    assert om.shape == (2, 2)
    assert np.all(om > 0) and np.all(om < 1)
    assert om[0, 0] == pytest.approx(3.0 / 3.5)


def test_omega_block_empty_sides():
    lam = np.array([1.0, 2.0])
    assert omega_block(lam, [], [0, 1]).shape == (0, 2)


def test_b_matrix_blocks():
    x = np.array([2.0, 1.0, -1.0])
    B = b_matrix(x)
    assert np.array_equal(B[:2, :2], np.ones((2, 2)))
    assert B[2, 2] == 0.0
    assert B[0, 2] == pytest.approx(2.0 / 3.0)
    assert np.allclose(B, B.T)


def test_b_matrix_rejects_bad_input():
    with pytest.raises(ValueError):
        b_matrix(np.array([1.0, 2.0]))  # misordered
    with pytest.raises(ValueError):
        b_matrix(np.array([1.0, 0.0]))  # zero eigenvalue
    with pytest.raises(ValueError):
        b_matrix(np.eye(2))


def test_dir_deriv_at_definite_points():
    rng = np.random.default_rng(0)
    H = _sym(rng, 5)
    Spd = np.eye(5) * 3.0
    assert np.allclose(dir_deriv_proj(Spd, H), H, atol=1e-12)
    assert np.allclose(dir_deriv_proj(-Spd, H), np.zeros((5, 5)), atol=1e-12)


def test_dir_deriv_matches_finite_differences_when_smooth():
    rng = np.random.default_rng(1)
    for _ in range(10):
        S = _sym(rng, 5, scale=2.0)
        if np.abs(np.linalg.eigvalsh(S)).min() < 1e-3:
            continue
        H = _sym(rng, 5)
        H /= np.linalg.norm(H)
        h = 1e-6

        def proj(M):
            dec = eig_sym(M, zero_tol=0.0)
            return (dec.U * np.maximum(dec.lam, 0.0)) @ dec.U.T

        fd = (proj(S + h * H) - proj(S - h * H)) / (2 * h)
        assert np.linalg.norm(dir_deriv_proj(S, H) - fd) <= 1e-6


def test_dir_deriv_shape_check():
    with pytest.raises(ValueError):
        dir_deriv_proj(np.eye(3), np.eye(4))


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(2)
    checked = 0
    while checked < 50:
        n = int(rng.integers(3, 7))
        m = int(rng.integers(2, 6))
        inst = gen_random_slater(n, m, seed=int(rng.integers(0, 10_000)))
        y = rng.standard_normal(m)
        Y = inst.W + inst.map.adjoint(y)
        if np.abs(np.linalg.eigvalsh(Y)).min() < 1e-4:
            continue
        J = jacobian(inst, y)
        h = 1e-6
        worst = 0.0
        for j in range(m):
            e = np.zeros(m)
            e[j] = h
            Fp, _ = residual_F(inst, y + e)
            Fm, _ = residual_F(inst, y - e)
            col = (Fp - Fm) / (2 * h)
            denom = max(np.linalg.norm(J[:, j]), 1.0)
            worst = max(worst, np.linalg.norm(col - J[:, j]) / denom)
        assert worst <= 1e-5
        checked += 1


def test_jacobian_is_psd_along_the_iteration():
    inst = gen_random_slater(8, 10, seed=3)
    trace = newton_solve(inst)
    for it in trace.iterates:
        assert it.eig_J[-1] >= -1e-9 * max(it.eig_J[0], 1.0)


def test_iterates_satisfy_projection_split():
    inst = gen_random_slater(7, 9, seed=4)
    trace = newton_solve(inst)
    w_scale = 1.0 + np.linalg.norm(inst.W)
    for it in trace.iterates:
        Y = inst.W + inst.map.adjoint(it.y)
        dec = eig_sym(Y, zero_tol=0.0)
        X = (dec.U * np.maximum(dec.lam, 0.0)) @ dec.U.T
        Z = X - Y
        assert np.linalg.norm(X - Z - Y) <= 1e-13 * w_scale
        assert abs(np.sum(X * Z)) <= 1e-12 * max(1.0, np.linalg.norm(X) ** 2)


def test_jacobian_spectrum_floors_singular_ratio():
    eigs, cond = jacobian_spectrum(np.diag([1.0, 0.0]))
    assert eigs[0] == 1.0
    assert cond >= 1e299
    assert np.isfinite(cond)


def test_solver_converges_on_strictly_feasible_instances():
    for seed in range(3):
        inst = gen_random_slater(10, 12, seed=seed)
        trace = newton_solve(inst)
        assert trace.status == NewtonStatus.SOLVED
        assert trace.relres_final <= 1e-13


def test_solver_starts_from_given_point():
    inst = gen_elliptope(6, seed=5)
    ref = newton_solve(inst)
    warm = newton_solve(inst, y0=ref.triple.y)
    assert warm.status == NewtonStatus.SOLVED
    assert warm.k_final == 0


def test_conditioning_stop_reports_degeneracy_suspicion():
    inst = gen_planted_noslater(15, 7, sd_target=1, iips_target=1, support_size=5, seed=0)
    trace = newton_solve(inst)
    assert trace.status == NewtonStatus.SUSPECTED_DEGENERATE
    assert trace.cond_final >= 1e10
    assert 1e-9 <= trace.relres_final <= 1e-6


def test_iteration_cap_status():
    inst = gen_dual_unattained(2, seed=0)
    trace = newton_solve(inst, opts=NewtonOptions(max_iter=120))
    assert trace.status == NewtonStatus.ITER_LIMIT
    assert trace.k_final == 120


def test_divergence_signature_without_strict_feasibility():
    # dual iterates grow without bound once past the transient; compare the
    # late window against the first fifty iterations
    opts = NewtonOptions(max_iter=600, cond_budget=400.0)
    for inst in (
        gen_planted_noslater(15, 7, sd_target=1, iips_target=1, support_size=5, seed=0),
        gen_dual_unattained(2, seed=0),
    ):
        trace = newton_solve(inst, opts=opts)
        assert trace.status == NewtonStatus.ITER_LIMIT
        ys = np.array([np.linalg.norm(it.y) for it in trace.iterates])
        Zs = np.array(
            [
                np.linalg.norm(
                    np.minimum(
                        np.linalg.eigvalsh(inst.W + inst.map.adjoint(it.y)), 0.0
                    )
                )
                for it in trace.iterates
            ]
        )
        q = len(ys) // 4
        assert np.all(np.diff(ys[50:]) >= -1e-9 * ys[50:-1])
        assert ys[-q:].max() >= 10.0 * ys[:50].max()
        assert Zs[-q:].max() >= 10.0 * Zs[:50].max()


def test_trace_csv_layout():
    inst = gen_random_slater(5, 6, seed=6)
    trace = newton_solve(inst)
    text = trace_to_csv(trace)
    lines = text.strip().split("\n")
    header = lines[0].split(",")
    assert header[:3] == ["iter", "relres", "cond"]
    assert header[3:] == [f"eigJ_{i}" for i in range(1, inst.m + 1)]
    assert len(lines) == len(trace.iterates) + 1
    data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
    assert data.shape == (len(trace.iterates), 3 + inst.m)
    # 17 significant digits round-trip the stored values exactly
    assert data[-1, 1] == trace.relres_final


def test_trace_csv_is_identical_across_runs():
    inst = gen_random_slater(5, 6, seed=7)
    a = trace_to_csv(newton_solve(inst))
    b = trace_to_csv(newton_solve(inst))
    assert a == b
