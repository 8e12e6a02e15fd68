"""P1 / (DG0)^2 finite element assembly for the Helmholtz forms.

All element integrals are real; the complex wavenumber/shift dependence
enters only as scalar prefactors when the basic forms are combined, so the
basic matrices are assembled once per mesh and reused.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import DofMap, Mesh, cg1_dofmap, dg0_vector_dofmap

_P1_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
_EDGE_MASS_REF = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0

BOX = (0.4, 0.6)


# -- element matrices --------------------------------------------------------

def element_mass(area):
    """P1 mass matrix ``(A/12) [[2,1,1],[1,2,1],[1,1,2]]``; broadcasts over cells."""
    return np.multiply.outer(np.asarray(area, dtype=float), _P1_MASS_REF)


def edge_mass(length):
    return np.multiply.outer(np.asarray(length, dtype=float), _EDGE_MASS_REF)


def barycentric_gradients(coords):
    """Constant gradients of the three P1 basis functions.

    ``coords`` has shape (..., 3, 2); returns (grads (..., 3, 2), area (...)).
    """
    coords = np.asarray(coords, dtype=float)
    x, y = coords[..., 0], coords[..., 1]
    area = 0.5 * ((x[..., 1] - x[..., 0]) * (y[..., 2] - y[..., 0])
                  - (x[..., 2] - x[..., 0]) * (y[..., 1] - y[..., 0]))
    gx = np.stack([y[..., 1] - y[..., 2], y[..., 2] - y[..., 0], y[..., 0] - y[..., 1]], axis=-1)
    gy = np.stack([x[..., 2] - x[..., 1], x[..., 0] - x[..., 2], x[..., 1] - x[..., 0]], axis=-1)
    grads = np.stack([gx, gy], axis=-1) / (2.0 * area[..., None, None])
    return grads, area


def element_stiffness(coords):
    grads, area = barycentric_gradients(coords)
    return area[..., None, None] * np.einsum("...id,...jd->...ij", grads, grads)


def element_gradient(coords):
    """Cell-constant coupling ``<tau, grad u>``: shape (..., 2, 3), row = component."""
    grads, area = barycentric_gradients(coords)
    return area[..., None, None] * np.swapaxes(grads, -1, -2)


# -- global assembly ---------------------------------------------------------

def _scatter(rows, cols, vals, shape):
    A = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


@dataclass(frozen=True)
class AssembledForms:
    """Real basic matrices on one mesh.

    M: P1 mass, K: P1 stiffness, MG: boundary mass on the impedance
    boundary, Msig: diagonal (DG0)^2 mass stored as a vector, G: the
    coupling ``<tau, grad u>`` mapping CG1 coefficients to (DG0)^2 duals.
    """

    mesh: Mesh
    M: sp.csr_matrix
    K: sp.csr_matrix
    MG: sp.csr_matrix
    Msig: np.ndarray
    G: sp.csr_matrix

    @property
    def n_u(self) -> int:
        return self.M.shape[0]

    @property
    def n_sigma(self) -> int:
        return self.Msig.shape[0]

    def cell_gradient(self, u):
        """Cellwise gradient coefficients of a CG1 function (interleaved x, y)."""
        return (self.G @ u) / self.Msig


def assemble_core(mesh: Mesh, cg1: DofMap | None = None, dg0: DofMap | None = None) -> AssembledForms:
    cg1 = cg1 or cg1_dofmap(mesh)
    dg0 = dg0 or dg0_vector_dofmap(mesh)
    nv, nc = cg1.size, mesh.num_cells
    cd = cg1.cell_dofs
    coords = mesh.vertices[mesh.cells]
    grads, area = barycentric_gradients(coords)

    r3 = np.repeat(cd[:, :, None], 3, axis=2)
    c3 = np.repeat(cd[:, None, :], 3, axis=1)
    M = _scatter(r3, c3, element_mass(area), (nv, nv))
    Kloc = area[:, None, None] * np.einsum("cid,cjd->cij", grads, grads)
    K = _scatter(r3, c3, Kloc, (nv, nv))

    e = mesh.boundary_edges
    r2 = np.repeat(e[:, :, None], 2, axis=2)
    c2 = np.repeat(e[:, None, :], 2, axis=1)
    MG = _scatter(r2, c2, edge_mass(mesh.edge_lengths), (nv, nv))

    sd = dg0.cell_dofs
    Msig = np.repeat(area, 2)
    Gloc = area[:, None, None] * np.swapaxes(grads, 1, 2)
    G = _scatter(np.repeat(sd[:, :, None], 3, axis=2),
                 np.repeat(cd[:, None, :], 2, axis=1), Gloc, (dg0.size, nv))
    return AssembledForms(mesh, M, K, MG, Msig, G)


def combine(forms: AssembledForms, c_mass, c_stiff, c_bdry) -> sp.csr_matrix:
    """``c_mass*M + c_stiff*K + c_bdry*MG`` as a complex CSR matrix."""
    A = (complex(c_mass) * forms.M + complex(c_stiff) * forms.K
         + complex(c_bdry) * forms.MG).tocsr().astype(np.complex128)
    A.sum_duplicates()
    A.sort_indices()
    return A


# -- operators ---------------------------------------------------------------

def primal_coefficients(k, delta):
    s = -delta + 1j * k
    return s * s, 1.0, -s


def assemble_primal_operator(forms: AssembledForms, k, delta) -> sp.csr_matrix:
    """Matrix of ``(-d+ik)^2 <u,v> + <grad u, grad v> - (-d+ik) <<u,v>>``."""
    return combine(forms, *primal_coefficients(k, delta))


def hss_primal_coefficients(k, delta):
    """Coefficients (mass, stiffness, boundary) of the primal HSS step.

    Returns ``(lhs, rhs)``; the rhs coefficients already include the
    ``(k-1)/(k+1)`` prefactor.
    """
    q = (k - 1.0) / (k + 1.0)
    lhs = (-2j * delta * k**2 + delta**2 - k**2, 1.0, -1j * k**2 + delta)
    rhs = (q * (-2j * delta * k**2 - delta**2 + k**2), -q, q * (-1j * k**2 - delta))
    return lhs, rhs


def assemble_hss_primal(forms: AssembledForms, k, delta):
    lhs, rhs = hss_primal_coefficients(k, delta)
    return combine(forms, *lhs), combine(forms, *rhs)


def hss_mixed_coefficients(k, delta):
    """Coefficients of the CG1 system left after eliminating sigma."""
    s = k * (delta - 1j)
    return s * s, 1.0, k * s


def assemble_hss_mixed(forms: AssembledForms, k, delta) -> sp.csr_matrix:
    return combine(forms, *hss_mixed_coefficients(k, delta))


class MixedOperator:
    """Block action of the mixed form on stacked ``(sigma, u)`` vectors.

    Row V: ``(d-ik) Msig sigma - G u``; row Q: ``G^T sigma + (d-ik) M u + MG u``.
    """

    def __init__(self, forms: AssembledForms, k, delta):
        self.forms = forms
        self.k = k
        self.delta = delta
        self.coef = delta - 1j * k
        self.n_sigma = forms.n_sigma
        self.n_u = forms.n_u
        self.Qblock = combine(forms, self.coef, 0.0, 1.0)
        self.GT = forms.G.T.tocsr()

    @property
    def shape(self):
        n = self.n_sigma + self.n_u
        return (n, n)

    def split(self, x):
        return x[: self.n_sigma], x[self.n_sigma:]

    def matvec(self, x):
        sig, u = self.split(x)
        out = np.empty(self.shape[0], dtype=np.complex128)
        out[: self.n_sigma] = self.coef * self.forms.Msig * sig - self.forms.G @ u
        out[self.n_sigma:] = self.GT @ sig + self.Qblock @ u
        return out

    __call__ = matvec

    def to_sparse(self) -> sp.csr_matrix:
        top = sp.hstack([sp.diags(self.coef * self.forms.Msig), -self.forms.G])
        bottom = sp.hstack([self.GT, self.Qblock])
        return sp.vstack([top, bottom]).tocsr().astype(np.complex128)


def assemble_mixed_operator(forms: AssembledForms, k, delta) -> MixedOperator:
    return MixedOperator(forms, k, delta)


# -- load vectors ------------------------------------------------------------

def _box_indicator(pts, box=BOX, tol=1e-12):
    """Indicator of the square ``box x box``, 1/2 on its edges."""
    def axis(t):
        lo, hi = box
        on = (np.abs(t - lo) <= tol) | (np.abs(t - hi) <= tol)
        return np.where(on, 0.5, ((t > lo) & (t < hi)).astype(float))
    return axis(pts[..., 0]) * axis(pts[..., 1])


def assemble_load(mesh: Mesh, dofmap: DofMap | None = None, source: str = "uniform") -> np.ndarray:
    """CG1 load vector ``<f, v>`` for the uniform or box source."""
    dofmap = dofmap or cg1_dofmap(mesh)
    area = mesh.cell_areas()
    cd = dofmap.cell_dofs
    if source == "uniform":
        local = np.repeat(area[:, None] / 3.0, 3, axis=1)
    elif source == "box":
        p = mesh.vertices[mesh.cells]
        # midpoint m_i lies opposite vertex i; basis j is 1/2 at m_i for j != i
        mids = 0.5 * (p[:, [1, 2, 0]] + p[:, [2, 0, 1]])
        f = _box_indicator(mids)
        local = (area[:, None] / 3.0) * 0.5 * (f.sum(axis=1)[:, None] - f)
    elif source == "zero":
        local = np.zeros((mesh.num_cells, 3))
    else:
        raise ValueError(f"unknown source {source!r}")
    b = np.zeros(dofmap.size)
    np.add.at(b, cd, local)
    return b.astype(np.complex128)
