"""HSS iteration with parameter gamma = k, and the shifted-HSS preconditioner.

One HSS step for the shifted primal system solves

    (-2 d k^2 i + d^2 - k^2) M u' + (-k^2 i + d) MG u' + K u'
        = (k-1)/(k+1) [(-2 d k^2 i - d^2 + k^2) M u + (-k^2 i - d) MG u - K u]
          + 2k/(k+1) R

whose fixed point solves the shifted system with absorption ``d``. In mixed
form the flux is eliminated cellwise (gradients of CG1 functions are DG0
vectors), which leaves a CG1 system with coefficients ``k^2 (d-i)^2`` on M,
``1`` on K and ``k^2 (d-i)`` on MG.

The preconditioner runs ``ceil(k^theta)`` steps from zero, approximating
the inverse of the shifted operator.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    AssembledForms,
    MixedOperator,
    assemble_hss_mixed,
    assemble_hss_primal,
    assemble_primal_operator,
)
from .linalgc import PivotError, direct_factor
from .mesh import build_hierarchy
from .multigrid import MgConfig, MgHierarchy

log = logging.getLogger(__name__)


def inner_count(k, theta) -> int:
    # slack absorbs k**theta landing a few ulps above an integer
    return max(1, math.ceil(k**theta - 1e-9))


def contraction_bound(k) -> float:
    return (1.0 - 1.0 / k) / (1.0 + 1.0 / k)


@dataclass
class HssConfig:
    k: float
    delta_hat: float = 2.0
    theta: float = 1.0
    formulation: str = "primal"
    inner: str = "direct"
    mg: MgConfig | None = None
    direct_method: str = "auto"

    def __post_init__(self):
        if self.k <= 1:
            raise ValueError(f"k must exceed 1, got {self.k}")
        if self.delta_hat <= 0:
            raise ValueError(f"delta_hat must be positive, got {self.delta_hat}")
        if self.formulation not in ("primal", "mixed"):
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.inner not in ("direct", "mg"):
            raise ValueError(f"unknown inner solver {self.inner!r}")
        if self.inner == "mg" and self.mg is None:
            self.mg = MgConfig() if self.formulation == "primal" else MgConfig(smooth=4, cycles=2)

    @property
    def n_inner(self) -> int:
        return inner_count(self.k, self.theta)


# -- norms -------------------------------------------------------------------

def h_prm_norm(forms: AssembledForms, u, k, delta) -> float:
    """``sqrt(2 d k <u,u> + k <<u,u>>)``."""
    q = 2 * delta * k * np.vdot(u, forms.M @ u) + k * np.vdot(u, forms.MG @ u)
    return math.sqrt(max(q.real, 0.0))


def h_mxd_norm(forms: AssembledForms, sigma, u, delta) -> float:
    """``sqrt(d <sigma,sigma> + d <u,u> + <<u,u>>)``."""
    q = (delta * np.vdot(sigma, forms.Msig * sigma) + delta * np.vdot(u, forms.M @ u)
         + np.vdot(u, forms.MG @ u))
    return math.sqrt(max(q.real, 0.0))


class DualHNorm:
    """Residual norm ``sqrt(r^H H^{-1} r)`` for the shifted system's H inner product.

    With exact inner solves the shifted residual contracts in this norm by
    at most ``(1-1/k)/(1+1/k)`` per HSS step, because the step's error
    propagator commutes with the shifted operator.
    """

    def __init__(self, forms: AssembledForms, k, delta, formulation="primal"):
        self.formulation = formulation
        self.n_sigma = forms.n_sigma
        if formulation == "primal":
            H = 2.0 * delta * k * forms.M + k * forms.MG
        else:
            H = delta * forms.M + forms.MG
            self.sigma_weight = delta * forms.Msig
        self._lu = spla.splu(sp.csc_matrix(H), permc_spec="MMD_AT_PLUS_A")

    def _solve(self, r):
        return self._lu.solve(np.ascontiguousarray(r.real)) \
            + 1j * self._lu.solve(np.ascontiguousarray(r.imag))

    def __call__(self, r) -> float:
        if self.formulation == "primal":
            q = np.vdot(r, self._solve(r))
        else:
            rs, ru = r[: self.n_sigma], r[self.n_sigma:]
            q = np.vdot(rs, rs / self.sigma_weight) + np.vdot(ru, self._solve(ru))
        return math.sqrt(max(q.real, 0.0))


def rate(residuals) -> float:
    """Geometric-mean contraction ``(r_N / r_0)^(1/N)``."""
    r = np.asarray(residuals, dtype=float)
    if r.size < 2:
        raise ValueError("need at least two residuals to measure a rate")
    if r[0] == 0.0:
        raise ZeroDivisionError("initial residual is zero")
    return float((r[-1] / r[0]) ** (1.0 / (r.size - 1)))


# -- operators and steps -----------------------------------------------------

class _DirectInner:
    def __init__(self, A, method):
        self.A = A
        self.fallback = False
        try:
            self.lu = direct_factor(A, method)
        except PivotError as exc:
            # a pivoting sparse LU keeps the inner solve exact
            log.warning("banded LU failed (%s); switching to SuperLU", exc)
            self.fallback = True
            self.lu = direct_factor(A, "splu")

    def solve(self, b):
        return self.lu.solve(b)


class _MgInner:
    def __init__(self, hierarchy: MgHierarchy, cycles):
        self.hierarchy = hierarchy
        self.cycles = cycles

    @property
    def A(self):
        return self.hierarchy.A

    def solve(self, b):
        return self.hierarchy.solve(b, self.cycles)


@dataclass
class HssOperators:
    """Preassembled data for HSS steps on one mesh."""

    forms: AssembledForms
    k: float
    delta: float
    formulation: str
    lhs: object
    rhs_op: object | None
    shifted: object
    inner: object = field(repr=False)

    @property
    def load_scale(self) -> float:
        return 2.0 * self.k / (self.k + 1.0)

    @property
    def q(self) -> float:
        return (self.k - 1.0) / (self.k + 1.0)

    @property
    def size(self) -> int:
        f = self.forms
        return f.n_u if self.formulation == "primal" else f.n_sigma + f.n_u


def build_operators(forms: AssembledForms, k, delta, formulation="primal", inner="direct",
                    mg: MgConfig | None = None, direct_method="auto") -> HssOperators:
    if formulation == "primal":
        lhs, rhs_op = assemble_hss_primal(forms, k, delta)
        shifted = assemble_primal_operator(forms, k, delta)
        assemble_level = lambda f: assemble_hss_primal(f, k, delta)[0]
    elif formulation == "mixed":
        lhs, rhs_op = assemble_hss_mixed(forms, k, delta), None
        shifted = MixedOperator(forms, k, delta)
        assemble_level = lambda f: assemble_hss_mixed(f, k, delta)
    else:
        raise ValueError(f"unknown formulation {formulation!r}")

    if inner == "direct":
        solver = _DirectInner(lhs, direct_method)
    elif inner == "mg":
        mg = mg or MgConfig()
        meshes = build_hierarchy(forms.mesh.n, mg.levels)
        hier = MgHierarchy(meshes, assemble_level, mg, finest_forms=forms)
        solver = _MgInner(hier, mg.cycles)
    else:
        raise ValueError(f"unknown inner solver {inner!r}")
    return HssOperators(forms, k, delta, formulation, lhs, rhs_op, shifted, solver)


def hss_step_primal(ops: HssOperators, u, R):
    rhs = ops.rhs_op @ u + ops.load_scale * R
    return ops.inner.solve(rhs)


def hss_step_mixed(ops: HssOperators, sigma, u, R_sigma, R_u, sigma_riesz=None):
    """One mixed step; returns ``(sigma', u')``.

    ``sigma_riesz`` is ``R_sigma / Msig``, recomputed when not supplied.
    """
    f, k, d, q = ops.forms, ops.k, ops.delta, ops.q
    if sigma_riesz is None:
        sigma_riesz = R_sigma / f.Msig
    s_minus = k * (d - 1j)
    g = q * (k * (d + 1j) * sigma + f.cell_gradient(u)) + ops.load_scale * sigma_riesz
    rhs_u = (q * (k * (d + 1j) * (f.M @ u) - f.G.T @ sigma + k * (f.MG @ u))
             + ops.load_scale * R_u)
    u_new = ops.inner.solve(s_minus * rhs_u - f.G.T @ g)
    sigma_new = (g + f.cell_gradient(u_new)) / s_minus
    return sigma_new, u_new


def shifted_residual(ops: HssOperators, x, R):
    return ops.shifted @ x - R if ops.formulation == "primal" else ops.shifted.matvec(x) - R


class HssPreconditioner:
    """Inverse-action approximation by ``ceil(k^theta)`` HSS steps from zero.

    Shifted-system residual norms (in :class:`DualHNorm`) of every step are
    kept in ``histories``, one list per application starting with ``|R|``.
    """

    def __init__(self, forms: AssembledForms, config: HssConfig, record: bool = True):
        t0 = time.perf_counter()
        self.config = config
        self.record = record
        self.ops = build_operators(forms, config.k, config.delta_hat, config.formulation,
                                   config.inner, config.mg, config.direct_method)
        self.norm = DualHNorm(forms, config.k, config.delta_hat, config.formulation) \
            if record else None
        self.histories = []
        self.histories_l2 = []
        self.setup_seconds = time.perf_counter() - t0

    def reset(self):
        """Forget recorded residual histories (operators are kept)."""
        self.histories = []
        self.histories_l2 = []
        if isinstance(self.ops.inner, _MgInner):
            self.ops.inner.hierarchy.contractions = []

    @property
    def n_inner(self) -> int:
        return self.config.n_inner

    @property
    def steps_taken(self) -> int:
        return sum(len(h) - 1 for h in self.histories)

    def apply(self, R):
        R = np.asarray(R, dtype=np.complex128)
        ops = self.ops
        hist = [self.norm(R)] if self.record else None
        hist_l2 = [np.linalg.norm(R)]
        if ops.formulation == "primal":
            x = np.zeros_like(R)
            for _ in range(self.n_inner):
                x = hss_step_primal(ops, x, R)
                if self.record:
                    res = shifted_residual(ops, x, R)
                    hist.append(self.norm(res))
                    hist_l2.append(np.linalg.norm(res))
        else:
            ns = ops.forms.n_sigma
            R_sigma, R_u = R[:ns], R[ns:]
            riesz = R_sigma / ops.forms.Msig
            sigma = np.zeros(ns, dtype=np.complex128)
            u = np.zeros(R.size - ns, dtype=np.complex128)
            for _ in range(self.n_inner):
                sigma, u = hss_step_mixed(ops, sigma, u, R_sigma, R_u, riesz)
                if self.record:
                    res = shifted_residual(ops, np.concatenate([sigma, u]), R)
                    hist.append(self.norm(res))
                    hist_l2.append(np.linalg.norm(res))
            x = np.concatenate([sigma, u])
        if self.record:
            self.histories.append(hist)
            self.histories_l2.append(hist_l2)
        return x

    __call__ = apply

    def rate(self, norm: str = "dual") -> float:
        """Geometric-mean shifted-residual contraction over all recorded steps.

        ``norm="dual"`` uses :class:`DualHNorm`, ``norm="l2"`` the Euclidean norm.
        """
        logs, steps = 0.0, 0
        for h in (self.histories if norm == "dual" else self.histories_l2):
            if len(h) > 1 and h[0] > 0 and h[-1] > 0:
                logs += math.log(h[-1] / h[0])
                steps += len(h) - 1
        return math.exp(logs / steps) if steps else float("nan")


def hss_preconditioner_apply(precond: HssPreconditioner, R):
    return precond.apply(R)


def hss_stationary_solve(ops: HssOperators, F, tol=1e-6, maxiter=10000):
    """Use the HSS iteration as a solver for the shifted system.

    Returns ``(x, residuals)``; raises RuntimeError past ``maxiter``.
    """
    F = np.asarray(F, dtype=np.complex128)
    r0 = np.linalg.norm(F)
    residuals = [r0]
    if ops.formulation == "primal":
        x = np.zeros_like(F)
    else:
        ns = ops.forms.n_sigma
        sigma = np.zeros(ns, dtype=np.complex128)
        u = np.zeros(F.size - ns, dtype=np.complex128)
        x = np.zeros_like(F)
    if r0 == 0.0:
        return x, residuals
    for _ in range(maxiter):
        if ops.formulation == "primal":
            x = hss_step_primal(ops, x, F)
        else:
            sigma, u = hss_step_mixed(ops, sigma, u, F[:ns], F[ns:])
            x = np.concatenate([sigma, u])
        residuals.append(np.linalg.norm(shifted_residual(ops, x, F)))
        if residuals[-1] <= tol * r0:
            return x, residuals
    raise RuntimeError(f"HSS iteration did not reach tol={tol} in {maxiter} steps")
