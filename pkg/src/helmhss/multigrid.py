"""Geometric multigrid W-cycles for the shifted HSS system.

Every level carries its own rediscretized operator. Smoothing on every
level, including the coarsest, is a fixed number of Jacobi-preconditioned
GMRES steps; there is no coarse direct solve.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import assemble_core
from .krylov import gmres_fixed
from .linalgc import jacobi_diagonal
from .mesh import Mesh, MeshHierarchy

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MgConfig:
    levels: int = 4
    smooth: int = 5
    cycles: int = 1
    cycle: str = "W"

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError(f"multigrid needs at least 2 levels, got {self.levels}")
        if self.smooth < 1 or self.cycles < 1:
            raise ValueError("smoothing steps and cycles must be >= 1")
        if self.cycle != "W":
            raise ValueError(f"only W-cycles are supported, got {self.cycle!r}")


def build_prolongation(coarse: Mesh, fine: Mesh) -> sp.csr_matrix:
    """CG1 nodal interpolation from ``coarse`` onto its uniform refinement ``fine``."""
    nc, nf = coarse.n, fine.n
    if nf != 2 * nc:
        raise ValueError(f"fine mesh (n={nf}) is not the uniform refinement of n={nc}")
    I, J = np.meshgrid(np.arange(nf + 1), np.arange(nf + 1), indexing="xy")
    I, J = I.ravel(), J.ravel()
    rows = np.arange(I.size)

    def cv(i, j):
        return j * (nc + 1) + i

    odd_i, odd_j = I % 2 == 1, J % 2 == 1
    lo_i, hi_i = I // 2, (I + 1) // 2
    lo_j, hi_j = J // 2, (J + 1) // 2

    both_even = ~odd_i & ~odd_j
    r_list = [rows[both_even]]
    c_list = [cv(lo_i, lo_j)[both_even]]
    v_list = [np.ones(both_even.sum())]
    # odd fine vertices sit on the midpoint of a coarse edge: horizontal,
    # vertical, or the lower-left/upper-right diagonal
    mid = ~both_even
    half = np.full(mid.sum(), 0.5)
    r_list += [rows[mid], rows[mid]]
    c_list += [cv(lo_i, lo_j)[mid], cv(hi_i, hi_j)[mid]]
    v_list += [half, half]
    P = sp.coo_matrix((np.concatenate(v_list), (np.concatenate(r_list), np.concatenate(c_list))),
                      shape=(fine.num_vertices, coarse.num_vertices)).tocsr()
    P.sort_indices()
    return P


@dataclass
class _Level:
    mesh: Mesh
    A: sp.csr_matrix
    diag: np.ndarray
    P: sp.csr_matrix | None  # prolongation from the next coarser level
    R: sp.csr_matrix | None


class MgHierarchy:
    """Level operators and transfers for one shifted CG1 system.

    ``assemble`` maps an :class:`AssembledForms` to the level operator, so
    each level is a rediscretization, never a Galerkin product.
    """

    def __init__(self, meshes: MeshHierarchy, assemble, config: MgConfig | None = None,
                 finest_forms=None):
        self.config = config or MgConfig(levels=len(meshes))
        if len(meshes) != self.config.levels:
            raise ValueError("mesh hierarchy depth does not match MgConfig.levels")
        self.levels = []
        for i, mesh in enumerate(meshes.levels):
            forms = finest_forms if (i == len(meshes) - 1 and finest_forms is not None) \
                else assemble_core(mesh)
            A = assemble(forms)
            P = build_prolongation(meshes[i - 1], mesh) if i > 0 else None
            self.levels.append(_Level(mesh, A, jacobi_diagonal(A), P,
                                      P.T.tocsr() if P is not None else None))
        self.contractions = []

    @property
    def A(self):
        return self.levels[-1].A

    def w_cycle(self, level: int, b, x):
        lv = self.levels[level]
        nu = self.config.smooth
        if level == 0:
            return gmres_fixed(lv.A, b, x, 2 * nu, diag=lv.diag)
        x = gmres_fixed(lv.A, b, x, nu, diag=lv.diag)
        rc = lv.R @ (b - lv.A @ x)
        ec = np.zeros(rc.size, dtype=np.complex128)
        for _ in range(2):
            ec = self.w_cycle(level - 1, rc, ec)
        x = x + lv.P @ ec
        return gmres_fixed(lv.A, b, x, nu, diag=lv.diag)

    def solve(self, b, cycles: int | None = None, record: bool = True):
        """Apply ``cycles`` W-cycles from a zero initial guess."""
        cycles = self.config.cycles if cycles is None else cycles
        top = len(self.levels) - 1
        A = self.A
        x = np.zeros(b.size, dtype=np.complex128)
        r_prev = np.linalg.norm(b)
        if r_prev == 0.0:
            return x
        for _ in range(cycles):
            x = self.w_cycle(top, b, x)
            if record:
                r = np.linalg.norm(b - A @ x)
                self.contractions.append(r / r_prev)
                r_prev = r
        return x

    def rate(self) -> float:
        """Geometric-mean residual contraction per cycle over all recorded cycles."""
        if not self.contractions:
            return float("nan")
        c = np.asarray(self.contractions)
        return float(np.exp(np.mean(np.log(c))))

    def write_log(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cycle", "contraction"])
            for i, c in enumerate(self.contractions):
                w.writerow([i, repr(float(c))])


def w_cycle(hier: MgHierarchy, level: int, b, x):
    return hier.w_cycle(level, b, x)


def mg_solve_hss(hier: MgHierarchy, b, cycles: int = 1):
    return hier.solve(b, cycles)
