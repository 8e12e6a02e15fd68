import numpy as np
import pytest
import scipy.linalg as sla

from helmhss.krylov import IterationTrace, KrylovConfig, fgmres, gmres_fixed


def _system(rng, n=40, shift=3.0):
    A = shift * np.eye(n) + rng.standard_normal((n, n)) / np.sqrt(n) \
        + 1j * rng.standard_normal((n, n)) / np.sqrt(n)
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return A, b


def test_fgmres_solves_dense_system(rng):
    A, b = _system(rng)
    x, tr = fgmres(A, b, None, KrylovConfig(rtol=1e-12, maxiter=40))
    assert tr.converged
    np.testing.assert_allclose(x, np.linalg.solve(A, b), rtol=1e-9)
    # recorded residuals are true residuals
    assert tr.residuals[-1] == pytest.approx(np.linalg.norm(b - A @ x), rel=1e-6, abs=1e-14)


def test_fgmres_residuals_monotone(rng):
    A, b = _system(rng, shift=0.5)
    x0 = rng.standard_normal(A.shape[0]) + 0j
    _, tr = fgmres(A, b, x0, KrylovConfig(rtol=1e-10, maxiter=40))
    r = np.asarray(tr.residuals)
    assert np.all(np.diff(r) <= 1e-12 * r[0])


def test_exact_preconditioner_converges_in_one_iteration(rng):
    A, b = _system(rng)
    lu = sla.lu_factor(A)
    x0 = rng.standard_normal(A.shape[0]) + 0j
    x, tr = fgmres(A, b, x0, KrylovConfig(rtol=1e-10), lambda v: sla.lu_solve(lu, v))
    assert tr.iterations == 1 and tr.converged


def test_flexible_preconditioner(rng):
    # a preconditioner that changes each call still converges
    A, b = _system(rng)
    d = np.diag(A)
    calls = []

    def P(v):
        calls.append(1)
        return v / d * (1.0 + 0.1 * (len(calls) % 3))

    x, tr = fgmres(A, b, None, KrylovConfig(rtol=1e-10, maxiter=40), P)
    assert tr.converged
    assert np.linalg.norm(b - A @ x) <= 1e-10 * np.linalg.norm(b) * 1.01


def test_relative_to_initial_residual(rng):
    A, b = _system(rng)
    x0 = 100 * rng.standard_normal(A.shape[0]) + 0j
    _, tr = fgmres(A, b, x0, KrylovConfig(rtol=1e-6))
    assert tr.residuals[0] == pytest.approx(np.linalg.norm(b - A @ x0))
    assert tr.residuals[-1] <= 1e-6 * tr.residuals[0]
    assert tr.residuals[-2] > 1e-6 * tr.residuals[0]


def test_maxiter_reports_nonconvergence(rng):
    A, b = _system(rng, shift=0.0)
    _, tr = fgmres(A, b, None, KrylovConfig(rtol=1e-14, maxiter=3))
    assert tr.iterations == 3 and not tr.converged


def test_zero_rhs_and_exact_start(rng):
    A, b = _system(rng)
    x, tr = fgmres(A, np.zeros_like(b), None, KrylovConfig())
    assert tr.iterations == 0 and np.all(x == 0)
    x_star = np.linalg.solve(A, b)
    _, tr = fgmres(A, A @ x_star, x_star, KrylovConfig())
    assert tr.iterations == 0


def test_config_validation():
    with pytest.raises(ValueError):
        KrylovConfig(rtol=0.0)
    with pytest.raises(ValueError):
        KrylovConfig(maxiter=0)


def test_gmres_fixed_matches_minimal_residual_oracle(rng):
    # m steps of left-Jacobi GMRES minimise ||D^-1 (b - A x)|| over x0 + Krylov space
    A, b = _system(rng, n=25, shift=1.0)
    d = np.diag(A)
    x0 = rng.standard_normal(25) + 0j
    m = 6
    x = gmres_fixed(A, b, x0, m, diag=d)
    Ap = A / d[:, None]
    r0 = (b - A @ x0) / d
    K = np.column_stack([np.linalg.matrix_power(Ap, j) @ r0 for j in range(m)])
    Q, _ = np.linalg.qr(K)
    y = np.linalg.lstsq(Ap @ Q, r0, rcond=None)[0]
    np.testing.assert_allclose(x, x0 + Q @ y, rtol=1e-8)


def test_gmres_fixed_zero_residual_short_circuit(rng):
    A, b = _system(rng, n=10)
    x = np.linalg.solve(A, b)
    out = gmres_fixed(A, A @ x, x, 5)
    np.testing.assert_array_equal(out, x)


def test_trace_csv(tmp_path):
    tr = IterationTrace([1.0, 0.5, 0.25], True)
    p = tmp_path / "t.csv"
    tr.to_csv(p)
    assert p.read_text().splitlines() == ["iter,residual", "0,1.0", "1,0.5", "2,0.25"]
