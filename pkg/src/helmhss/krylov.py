"""Flexible GMRES for the outer solve and fixed-step GMRES for smoothing."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


@dataclass
class KrylovConfig:
    rtol: float = 1e-6
    maxiter: int = 200
    restart: int | None = None
    atol: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.rtol < 1.0:
            raise ValueError(f"rtol must lie in (0, 1), got {self.rtol}")
        if self.maxiter < 1:
            raise ValueError(f"maxiter must be >= 1, got {self.maxiter}")


@dataclass
class IterationTrace:
    """True residual 2-norms, starting with the initial residual."""

    residuals: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return max(len(self.residuals) - 1, 0)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "residual"])
            for i, r in enumerate(self.residuals):
                w.writerow([i, repr(float(r))])


def _operator(A):
    if callable(A):
        return A
    return lambda x: A @ x


def _givens(a, b):
    """Complex Givens rotation (c real) with ``[c s; -conj(s) c] [a; b] = [r; 0]``."""
    if b == 0:
        return 1.0, 0.0, a
    if a == 0:
        return 0.0, np.conj(b) / abs(b), abs(b)
    t = np.hypot(abs(a), abs(b))
    c = abs(a) / t
    s = (a / abs(a)) * np.conj(b) / t
    return c, s, (a / abs(a)) * t


def _orthogonalize(w, V, j, H):
    """Modified Gram-Schmidt against V[0..j] with one reorthogonalization pass."""
    for _ in range(2):
        for i in range(j + 1):
            h = np.vdot(V[i], w)
            H[i, j] += h
            w -= h * V[i]
    return w


def fgmres(apply_A, b, x0=None, config: KrylovConfig | None = None, apply_P=None, callback=None):
    """Right-preconditioned flexible GMRES.

    The preconditioner may change from one iteration to the next; the
    preconditioned directions are stored and used to build the iterate.
    Convergence is declared when the true residual ``||b - A x||`` drops
    below ``rtol * ||b - A x0|| + atol``. Returns ``(x, trace)``.
    """
    config = config or KrylovConfig()
    A = _operator(apply_A)
    P = _operator(apply_P) if apply_P is not None else (lambda v: v.copy())
    b = np.asarray(b, dtype=np.complex128)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.complex128)

    r = b - A(x)
    beta = np.linalg.norm(r)
    trace = IterationTrace([beta])
    target = config.rtol * beta + config.atol
    if beta <= config.atol or beta == 0.0:
        trace.converged = True
        return x, trace

    m = config.restart or config.maxiter
    total = 0
    while total < config.maxiter:
        steps = min(m, config.maxiter - total)
        V = np.zeros((steps + 1, b.size), dtype=np.complex128)
        Z = np.zeros((steps, b.size), dtype=np.complex128)
        H = np.zeros((steps + 1, steps), dtype=np.complex128)
        R = np.zeros((steps, steps), dtype=np.complex128)
        cs = np.zeros(steps)
        sn = np.zeros(steps, dtype=np.complex128)
        g = np.zeros(steps + 1, dtype=np.complex128)
        g[0] = beta
        V[0] = r / beta
        x_base = x
        for j in range(steps):
            Z[j] = P(V[j])
            w = A(Z[j])
            w = _orthogonalize(w, V, j, H)
            H[j + 1, j] = np.linalg.norm(w)
            breakdown = H[j + 1, j] <= 1e-14 * np.abs(H[: j + 1, j]).max(initial=0.0)
            if not breakdown:
                V[j + 1] = w / H[j + 1, j]
            col = H[: j + 2, j].copy()
            for i in range(j):
                a, bb = col[i], col[i + 1]
                col[i] = cs[i] * a + sn[i] * bb
                col[i + 1] = -np.conj(sn[i]) * a + cs[i] * bb
            cs[j], sn[j], col[j] = _givens(col[j], col[j + 1])
            col[j + 1] = 0.0
            R[: j + 1, j] = col[: j + 1]
            g[j + 1] = -np.conj(sn[j]) * g[j]
            g[j] = cs[j] * g[j]

            y = _back_substitute(R[: j + 1, : j + 1], g[: j + 1])
            x = x_base + y @ Z[: j + 1]
            r = b - A(x)
            res = np.linalg.norm(r)
            trace.residuals.append(res)
            total += 1
            if callback is not None:
                callback(total, res)
            if res <= target or breakdown:
                trace.converged = res <= target or breakdown
                return x, trace
        beta = res
        if beta == 0.0:
            break
    trace.converged = trace.residuals[-1] <= target
    return x, trace


def _back_substitute(R, g):
    n = g.size
    y = np.zeros(n, dtype=np.complex128)
    for i in range(n - 1, -1, -1):
        y[i] = (g[i] - R[i, i + 1:] @ y[i + 1:]) / R[i, i]
    return y


def gmres_fixed(apply_A, b, x0, iters: int, apply_P=None, diag=None):
    """Run exactly ``iters`` steps of left-preconditioned GMRES from ``x0``.

    No tolerance test; stops early only if the residual vanishes. With
    ``diag`` given, the preconditioner is the Jacobi scaling ``r / diag``.
    """
    A = _operator(apply_A)
    if diag is not None:
        P = lambda v: v / diag
    elif apply_P is not None:
        P = _operator(apply_P)
    else:
        P = lambda v: v
    x0 = np.asarray(x0, dtype=np.complex128)
    r = P(b - A(x0))
    beta = np.linalg.norm(r)
    if beta == 0.0:
        return x0.copy()
    V = np.empty((iters + 1, r.size), dtype=np.complex128)
    H = np.zeros((iters + 1, iters), dtype=np.complex128)
    V[0] = r / beta
    m = iters
    for j in range(iters):
        w = P(A(V[j]))
        for i in range(j + 1):
            h = np.vdot(V[i], w)
            H[i, j] = h
            w -= h * V[i]
        H[j + 1, j] = np.linalg.norm(w)
        if H[j + 1, j] <= 1e-14 * beta:
            m = j + 1
            break
        V[j + 1] = w / H[j + 1, j]
    e1 = np.zeros(m + 1, dtype=np.complex128)
    e1[0] = beta
    y = np.linalg.lstsq(H[: m + 1, :m], e1, rcond=None)[0]
    return x0 + y @ V[:m]
