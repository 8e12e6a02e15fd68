import numpy as np
import pytest

from helmhss.assembly import (
    MixedOperator,
    assemble_core,
    assemble_hss_mixed,
    assemble_hss_primal,
    assemble_load,
    assemble_primal_operator,
    edge_mass,
    element_gradient,
    element_mass,
    element_stiffness,
)
from helmhss.mesh import build_mesh


# -- independent dense oracle ------------------------------------------------
# P1 basis from a Vandermonde solve, integrals by the edge-midpoint rule
# (exact for quadratics) and two-point Gauss on boundary edges.

def _oracle(n):
    m = build_mesh(n)
    N = m.num_vertices
    M = np.zeros((N, N))
    K = np.zeros((N, N))
    G = np.zeros((2 * m.num_cells, N))
    for c, tri in enumerate(m.cells):
        X = m.vertices[tri]
        V = np.column_stack([np.ones(3), X])
        coef = np.linalg.inv(V)  # column j = coefficients of basis j in (1, x, y)
        area = 0.5 * abs(np.linalg.det(V))
        mids = 0.5 * (X + X[[1, 2, 0]])
        phi = np.column_stack([np.ones(3), mids]) @ coef  # (quad pt, basis)
        M[np.ix_(tri, tri)] += area / 3 * phi.T @ phi
        grad = coef[1:, :]  # (2, basis)
        K[np.ix_(tri, tri)] += area * grad.T @ grad
        G[2 * c:2 * c + 2, tri] += area * grad
    MG = np.zeros((N, N))
    g = np.array([0.5 - 0.5 / np.sqrt(3), 0.5 + 0.5 / np.sqrt(3)])
    # boundary mass by walking the boundary segments
    for axis in (0, 1):
        for wall in (0.0, 1.0):
            on = np.flatnonzero(m.vertices[:, axis] == wall)
            on = on[np.argsort(m.vertices[on, 1 - axis])]
            for a, b in zip(on[:-1], on[1:]):
                L = np.linalg.norm(m.vertices[b] - m.vertices[a])
                phi = np.column_stack([1 - g, g])
                MG[np.ix_([a, b], [a, b])] += L * 0.5 * phi.T @ phi
    return m, M, K, MG, G


@pytest.mark.parametrize("n", [1, 2, 3])
def test_forms_match_quadrature_oracle(n):
    m, M, K, MG, G = _oracle(n)
    f = assemble_core(m)
    np.testing.assert_allclose(f.M.toarray(), M, atol=1e-13)
    np.testing.assert_allclose(f.K.toarray(), K, atol=1e-13)
    np.testing.assert_allclose(f.MG.toarray(), MG, atol=1e-13)
    np.testing.assert_allclose(f.G.toarray(), G, atol=1e-13)
    np.testing.assert_allclose(f.Msig, np.repeat(m.cell_areas(), 2), atol=1e-15)


@pytest.mark.parametrize("n", [1, 2, 5, 16])
def test_global_invariants(n):
    f = assemble_core(build_mesh(n))
    assert f.M.sum() == pytest.approx(1.0, abs=1e-13)
    assert f.MG.sum() == pytest.approx(4.0, abs=1e-13)
    assert f.Msig.sum() == pytest.approx(2.0, abs=1e-13)
    assert np.abs(f.K @ np.ones(f.n_u)).max() < 1e-12
    assert f.M.has_canonical_format and f.K.has_canonical_format


def test_element_closed_forms():
    tri = np.array([[0.2, 0.1], [0.9, 0.3], [0.4, 0.8]])
    area = 0.5 * abs(np.linalg.det(np.column_stack([np.ones(3), tri])))
    np.testing.assert_allclose(element_mass(area),
                               area / 12 * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]), atol=1e-14)
    np.testing.assert_allclose(edge_mass(0.7), 0.7 / 6 * np.array([[2, 1], [1, 2]]), atol=1e-14)
    Ke = element_stiffness(tri)
    np.testing.assert_allclose(Ke.sum(axis=1), 0.0, atol=1e-14)
    np.testing.assert_allclose(Ke, Ke.T, atol=1e-14)
    # reference right triangle
    ref = element_stiffness(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    np.testing.assert_allclose(ref, 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]]), atol=1e-14)
    # gradient of x integrates to (area, 0)
    Ge = element_gradient(tri)
    np.testing.assert_allclose(Ge @ tri[:, 0], [area, 0.0], atol=1e-14)


@pytest.mark.parametrize("n", [1, 4, 7])
def test_gradient_of_linear_functions(n):
    m = build_mesh(n)
    f = assemble_core(m)
    areas = np.repeat(m.cell_areas(), 2)
    for comp in (0, 1):
        g = f.G @ m.vertices[:, comp]
        expected = np.zeros_like(g)
        expected[comp::2] = 1.0
        np.testing.assert_allclose(g, expected * areas, atol=1e-14)
        np.testing.assert_allclose(f.cell_gradient(m.vertices[:, comp]), expected, atol=1e-12)


def test_primal_operator_coefficients():
    f = assemble_core(build_mesh(3))
    k, d = 5.0, 0.7
    B = assemble_primal_operator(f, k, d).toarray()
    s = -d + 1j * k
    np.testing.assert_allclose(B, s**2 * f.M.toarray() + f.K.toarray() - s * f.MG.toarray(), atol=1e-13)
    B0 = assemble_primal_operator(f, k, 0.0).toarray()
    np.testing.assert_allclose(B0, -k**2 * f.M.toarray() + f.K.toarray() - 1j * k * f.MG.toarray(),
                               atol=1e-13)


def test_primal_hss_split_is_hermitian_skew_pair():
    # LHS and RHS/q differ by twice the Hermitian part of B and sum to 2k times its skew part
    f = assemble_core(build_mesh(4))
    k, d = 6.0, 2.0
    lhs, rhs = assemble_hss_primal(f, k, d)
    q = (k - 1) / (k + 1)
    B = assemble_primal_operator(f, k, d).toarray()
    herm, skew = (B + B.conj().T) / 2, (B - B.conj().T) / 2
    np.testing.assert_allclose((lhs.toarray() - rhs.toarray() / q) / 2, herm, atol=1e-12)
    np.testing.assert_allclose((lhs.toarray() + rhs.toarray() / q) / (2 * k), skew, atol=1e-12)


def test_mixed_operator_dense_oracle():
    m, M, K, MG, G = _oracle(2)
    k, d = 4.0, 1.5
    c = d - 1j * k
    Msig = np.diag(np.repeat(m.cell_areas(), 2))
    A = np.block([[c * Msig, -G], [G.T, c * M + MG]])
    op = MixedOperator(assemble_core(m), k, d)
    np.testing.assert_allclose(op.to_sparse().toarray(), A, atol=1e-13)
    x = np.random.default_rng(0).standard_normal(A.shape[0]) * (1 + 0.5j)
    np.testing.assert_allclose(op.matvec(x), A @ x, atol=1e-13)


def test_mixed_elimination_matches_schur_complement():
    # sigma eliminated cellwise: LHS_u = Schur complement of the HSS mixed block, times coefficient
    m, M, K, MG, G = _oracle(3)
    k, d = 5.0, 2.0
    f = assemble_core(m)
    L = assemble_hss_mixed(f, k, d).toarray()
    a = k * (d - 1j)
    Msig = np.repeat(m.cell_areas(), 2)
    schur = a * M + MG * k + G.T @ (G / Msig[:, None]) / a
    np.testing.assert_allclose(L, a * schur, atol=1e-11)


def test_load_uniform_and_box():
    m = build_mesh(160)
    assert assemble_load(m, source="uniform").sum().real == pytest.approx(1.0, abs=1e-13)
    box = assemble_load(m, source="box")
    # box [0.4,0.6]^2 aligns with mesh lines at n=160; integral of the indicator is 0.04
    assert box.sum().real == pytest.approx(0.04, abs=1e-13)
    assert np.all(box.imag == 0)
    assert np.count_nonzero(assemble_load(build_mesh(4), source="zero")) == 0
    with pytest.raises(ValueError):
        assemble_load(m, source="gaussian")


def test_box_load_symmetric_under_reflection():
    n = 40
    b = assemble_load(build_mesh(n), source="box").reshape(n + 1, n + 1)
    np.testing.assert_allclose(b, b.T, atol=1e-16)
    np.testing.assert_allclose(b, b[::-1, ::-1], atol=1e-16)
