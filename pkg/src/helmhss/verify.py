"""Self-checks runnable from the command line (``helmhss verify``).

Each check returns ``(ok, detail)``; :func:`verify_suite` runs them all.
"""
from __future__ import annotations

import math
import time

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    assemble_core,
    assemble_hss_primal,
    assemble_primal_operator,
    edge_mass,
    element_mass,
    element_stiffness,
)
from .hss import (
    build_operators,
    contraction_bound,
    h_mxd_norm,
    h_prm_norm,
    hss_step_mixed,
    hss_step_primal,
)
from .krylov import KrylovConfig, fgmres
from .linalgc import banded_lu_factor
from .mesh import build_mesh, resolution_for


def check_assembly_invariants(ns=(1, 2, 3, 4, 8)):
    worst = 0.0
    for n in ns:
        f = assemble_core(build_mesh(n))
        ones = np.ones(f.n_u)
        worst = max(worst, abs(f.M.sum() - 1.0), abs(f.MG.sum() - 4.0),
                    np.abs(f.K @ ones).max(), abs(f.Msig.sum() - 2.0))
    tri = np.array([[0.1, 0.2], [0.7, 0.25], [0.3, 0.9]])
    d1, d2 = tri[1] - tri[0], tri[2] - tri[0]
    A = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
    closed = A / 12 * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]])
    worst = max(worst, np.abs(element_mass(A) - closed).max(),
                np.abs(element_stiffness(tri).sum(axis=1)).max(),
                np.abs(edge_mass(0.3) - 0.05 * np.array([[2, 1], [1, 2]])).max())
    return worst <= 1e-13, f"max invariant defect {worst:.2e}"


def check_banded_lu(ns=(2, 4, 8), k=16.0, delta=2.0):
    worst = 0.0
    for n in ns:
        lhs, _ = assemble_hss_primal(assemble_core(build_mesh(n)), k, delta)
        b = np.random.default_rng(n).standard_normal(lhs.shape[0]) + 0j
        x = banded_lu_factor(lhs).solve(b)
        x_ref = sla.lu_solve(sla.lu_factor(lhs.toarray()), b)
        worst = max(worst, np.linalg.norm(x - x_ref) / np.linalg.norm(x_ref))
    return worst <= 1e-10, f"max relative difference to dense LU {worst:.2e}"


def check_gmres(n=30, seed=0):
    rng = np.random.default_rng(seed)
    A = np.eye(n) * 4 + rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    b = rng.standard_normal(n) + 0j
    _, tr = fgmres(A, b, None, KrylovConfig(rtol=1e-10, maxiter=n))
    r = np.asarray(tr.residuals)
    mono = bool(np.all(r[1:] <= r[:-1] + 1e-12 * r[0]))
    lu = sla.lu_factor(A)
    _, tr1 = fgmres(A, b, None, KrylovConfig(rtol=1e-12), lambda v: sla.lu_solve(lu, v))
    ok = mono and tr.converged and tr1.iterations == 1
    return ok, f"monotone={mono}, exact-preconditioner iterations={tr1.iterations}"


def _shifted_solution(ops, F):
    """Solve the shifted system directly (SuperLU on the primal operator).

    Mixed systems are reduced by hand: row V gives
    ``sigma = (F_sigma + G u) / (c Msig)`` with ``c = d - ik``, and since
    ``G^T Msig^-1 G = K`` the u-row becomes ``B_d u = c F_u - G^T (F_sigma / Msig)``.
    """
    f = ops.forms
    B = spla.splu(sp.csc_matrix(assemble_primal_operator(f, ops.k, ops.delta)))
    if ops.formulation == "primal":
        return B.solve(F)
    c = ops.delta - 1j * ops.k
    F_sigma, F_u = F[: f.n_sigma], F[f.n_sigma:]
    u = B.solve(c * F_u - f.G.T @ (F_sigma / f.Msig))
    sigma = (F_sigma + f.G @ u) / (c * f.Msig)
    return np.concatenate([sigma, u])


def hss_contraction_ratios(k, formulation="primal", samples=20, n=None, delta=2.0, seed=0,
                           rhs_prefactor=None):
    """H-norm error ratios of single HSS steps around the shifted solution.

    ``rhs_prefactor`` overrides ``(k-1)/(k+1)`` in the step (for mutation checks).
    """
    n = n or resolution_for(k)
    forms = assemble_core(build_mesh(n))
    ops = build_operators(forms, k, delta, formulation)
    if rhs_prefactor is not None:
        scale = rhs_prefactor / ops.q
        if formulation == "primal":
            ops.rhs_op = ops.rhs_op * scale
        else:
            raise ValueError("prefactor override is only wired for the primal step")
    rng = np.random.default_rng(seed)
    size = ops.size
    F = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    x_star = _shifted_solution(ops, F)
    ns = forms.n_sigma

    def norm(x):
        if formulation == "primal":
            return h_prm_norm(forms, x, k, delta)
        return h_mxd_norm(forms, x[:ns], x[ns:], delta)

    scale0 = norm(x_star)
    ratios = []
    for i in range(samples):
        e = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        e *= scale0 * 10.0 ** (-3 * (i % 2)) / norm(e)
        x = x_star + e
        if formulation == "primal":
            x_new = hss_step_primal(ops, x, F)
        else:
            s, u = hss_step_mixed(ops, x[:ns], x[ns:], F[:ns], F[ns:])
            x_new = np.concatenate([s, u])
        ratios.append(norm(x_new - x_star) / norm(e))
    return np.asarray(ratios)


def check_contraction(ks=(8, 16, 32), formulations=("primal", "mixed")):
    worst = -math.inf
    for form in formulations:
        for k in ks:
            r = hss_contraction_ratios(float(k), form)
            worst = max(worst, (r - contraction_bound(k)).max())
    return worst <= 1e-8, f"max excess over bound {worst:.2e}"


def batched_reduction(k, formulation="primal", n=None, delta=2.0, seed=1):
    """H-norm error reduction after ceil(k) HSS steps from a random start."""
    n = n or resolution_for(k)
    forms = assemble_core(build_mesh(n))
    ops = build_operators(forms, k, delta, formulation)
    rng = np.random.default_rng(seed)
    F = rng.standard_normal(ops.size) + 1j * rng.standard_normal(ops.size)
    x_star = _shifted_solution(ops, F)
    ns = forms.n_sigma
    norm = (lambda x: h_prm_norm(forms, x, k, delta)) if formulation == "primal" \
        else (lambda x: h_mxd_norm(forms, x[:ns], x[ns:], delta))
    x = np.zeros_like(F)
    e0 = norm(x - x_star)
    for _ in range(math.ceil(k)):
        if formulation == "primal":
            x = hss_step_primal(ops, x, F)
        else:
            s, u = hss_step_mixed(ops, x[:ns], x[ns:], F[:ns], F[ns:])
            x = np.concatenate([s, u])
    return norm(x - x_star) / e0


def check_batched(ks=(8, 16)):
    worst = max(batched_reduction(float(k), f) for k in ks for f in ("primal", "mixed"))
    return worst <= math.exp(-1) + 1e-6, f"max reduction {worst:.4f} (bound {math.exp(-1):.4f})"


def check_k16_rows():
    from .driver import ExperimentConfig, accounting_ok, run_experiment

    r = run_experiment(ExperimentConfig(formulation="primal", source="uniform", k=16.0))
    ok = abs(r.outer_its - 8) <= 1 and accounting_ok(r)
    return ok, f"primal k=16 theta=1: {r.outer_its} outer ({r.inner_total} inner)"


CHECKS = {
    "assembly invariants": check_assembly_invariants,
    "banded LU vs dense LU": check_banded_lu,
    "GMRES monotonicity / exact preconditioner": check_gmres,
    "HSS per-step contraction": check_contraction,
    "HSS batched reduction": check_batched,
    "k=16 primal row": check_k16_rows,
}


def verify_suite(out=print) -> bool:
    all_ok = True
    for name, fn in CHECKS.items():
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # report and keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= bool(ok)
        out(f"{'PASS' if ok else 'FAIL'}  {name}: {detail} [{time.perf_counter() - t0:.1f}s]")
    return all_ok
