import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helmhss.mesh import (
    build_hierarchy,
    build_mesh,
    cg1_dofmap,
    dg0_vector_dofmap,
    resolution_for,
)


def test_single_cell_mesh():
    m = build_mesh(1)
    assert m.num_vertices == 4 and m.num_cells == 2
    assert len(m.boundary_edges) == 4
    np.testing.assert_array_equal(m.vertices, [[0, 0], [1, 0], [0, 1], [1, 1]])


@given(st.integers(1, 40))
@settings(max_examples=25, deadline=None)
def test_counts_and_areas(n):
    m = build_mesh(n)
    assert m.num_vertices == (n + 1) ** 2
    assert m.num_cells == 2 * n * n
    a = m.cell_areas()
    assert np.all(a > 0)  # counter-clockwise
    assert a.sum() == pytest.approx(1.0, abs=1e-13)
    assert m.edge_lengths.sum() == pytest.approx(4.0, abs=1e-12)
    assert len(m.boundary_vertices()) == 4 * n


def test_lexicographic_numbering():
    n = 5
    m = build_mesh(n)
    for iy in range(n + 1):
        for ix in range(n + 1):
            np.testing.assert_array_equal(m.vertices[iy * (n + 1) + ix], [ix / n, iy / n])


def test_diagonal_runs_lower_left_to_upper_right():
    m = build_mesh(3)
    p = m.vertices[m.cells]
    # every cell contains a pair of vertices offset by (h, h)
    h = m.h
    for tri in p:
        d = tri[:, None, :] - tri[None, :, :]
        assert np.any(np.all(np.isclose(d, [h, h]), axis=-1))


def test_boundary_edges_lie_on_boundary():
    m = build_mesh(4)
    pts = m.vertices[m.boundary_edges]
    on = lambda q: (q[..., 0] == 0) | (q[..., 0] == 1) | (q[..., 1] == 0) | (q[..., 1] == 1)
    assert np.all(on(pts))
    lengths = np.linalg.norm(pts[:, 1] - pts[:, 0], axis=1)
    np.testing.assert_allclose(lengths, m.edge_lengths)


def test_hierarchy_nested_and_bit_identical():
    H = build_hierarchy(24, 4)
    assert [m.n for m in H.levels] == [3, 6, 12, 24]
    for coarse, fine in zip(H.levels[:-1], H.levels[1:]):
        nc = coarse.n
        for iy in range(nc + 1):
            for ix in range(nc + 1):
                assert np.array_equal(coarse.vertices[iy * (nc + 1) + ix],
                                      fine.vertices[2 * iy * (2 * nc + 1) + 2 * ix])


def test_hierarchy_divisibility_error():
    with pytest.raises(ValueError, match="not divisible"):
        build_hierarchy(30, 4)


@pytest.mark.parametrize("bad", [0, -3, 2.5])
def test_bad_resolution(bad):
    with pytest.raises(ValueError):
        build_mesh(bad)


@pytest.mark.parametrize("k,levels,expected", [
    (16, 1, 64), (32, 1, 182), (64, 1, 512), (16, 4, 64), (32, 4, 184), (64, 4, 512),
])
def test_resolution_for(k, levels, expected):
    # ceil(32**1.5) = ceil(181.02) = 182; rounded to a multiple of 8 gives 184
    assert resolution_for(k, 1.0, levels) == expected


def test_dofmaps():
    m = build_mesh(2)
    assert cg1_dofmap(m).size == 9
    dg = dg0_vector_dofmap(m)
    assert dg.size == 16
    np.testing.assert_array_equal(dg.cell_dofs[3], [6, 7])
