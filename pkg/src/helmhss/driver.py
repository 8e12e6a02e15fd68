"""Experiment runner: outer FGMRES on the unshifted problem with the
shifted-HSS preconditioner, plus table reproduction."""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .assembly import MixedOperator, assemble_core, assemble_load, assemble_primal_operator
from .hss import HssConfig, HssPreconditioner, contraction_bound, inner_count, rate
from .krylov import IterationTrace, KrylovConfig, fgmres
from .linalgc import write_matrix_market
from .mesh import build_mesh, resolution_for
from .multigrid import MgConfig

log = logging.getLogger(__name__)

CSV_FIELDS = ["k", "theta", "c0", "delta_hat", "formulation", "source", "inner", "outer_its",
              "inner_total", "mg_cycles", "eta_h", "eta_s", "eta_mg", "dofs", "seconds"]

THETAS = (0.5, 1.0, 1.5)
SOURCES = ("uniform", "box")
TABLE_NAMES = ("primal-direct", "mixed-direct", "primal-mg", "mixed-mg", "hss-rates", "outer-rates")


@dataclass(frozen=True)
class ExperimentConfig:
    formulation: str = "primal"
    source: str = "uniform"
    k: float = 16.0
    theta: float = 1.0
    c0: float = 1.0
    delta_hat: float = 2.0
    inner: str = "direct"
    mg_levels: int = 4
    mg_smooth: int | None = None
    mg_cycles: int | None = None
    rtol: float = 1e-6
    seed: int | None = 0
    maxiter: int = 200
    direct_method: str = "auto"

    def mg_config(self) -> MgConfig | None:
        if self.inner != "mg":
            return None
        primal = self.formulation == "primal"
        smooth = self.mg_smooth if self.mg_smooth is not None else (5 if primal else 4)
        cycles = self.mg_cycles if self.mg_cycles is not None else (1 if primal else 2)
        return MgConfig(levels=self.mg_levels, smooth=smooth, cycles=cycles)

    def hss_config(self) -> HssConfig:
        return HssConfig(self.k, self.delta_hat, self.theta, self.formulation, self.inner,
                         self.mg_config(), self.direct_method)

    @property
    def n(self) -> int:
        return resolution_for(self.k, self.c0, self.mg_levels if self.inner == "mg" else 1)


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    n: int
    dofs: int
    outer_its: int
    converged: bool
    inner_total: int
    mg_cycles: int
    eta_h: float
    eta_s: float
    eta_s_l2: float
    eta_mg: float
    seconds: float
    setup_seconds: float = 0.0
    residuals: list = field(default_factory=list, repr=False)
    mg_contractions: list = field(default_factory=list, repr=False)
    solution: np.ndarray | None = field(default=None, repr=False)

    @property
    def nu_s(self) -> float:
        return contraction_bound(self.config.k)

    def row(self) -> dict:
        c = self.config
        return {
            "k": _fmt_num(c.k), "theta": _fmt_num(c.theta), "c0": _fmt_num(c.c0),
            "delta_hat": _fmt_num(c.delta_hat), "formulation": c.formulation,
            "source": c.source, "inner": c.inner, "outer_its": self.outer_its,
            "inner_total": self.inner_total, "mg_cycles": self.mg_cycles,
            "eta_h": _fmt_rate(self.eta_h), "eta_s": _fmt_rate(self.eta_s),
            "eta_mg": _fmt_rate(self.eta_mg), "dofs": self.dofs,
            "seconds": f"{self.seconds:.3f}",
        }


def _fmt_num(x):
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def _fmt_rate(x):
    return "" if x is None or math.isnan(x) else f"{x:.6f}"


# -- problem setup (cached so that table sweeps reuse factorizations) ---------

@lru_cache(maxsize=4)
def _forms(n):
    mesh = build_mesh(n)
    return mesh, assemble_core(mesh)


@lru_cache(maxsize=2)
def _preconditioner(n, hss_config_key):
    formulation, k, delta_hat, inner, mg, direct_method = hss_config_key
    _, forms = _forms(n)
    cfg = HssConfig(k, delta_hat, 1.0, formulation, inner, mg, direct_method)
    return HssPreconditioner(forms, cfg)


def clear_caches():
    _forms.cache_clear()
    _preconditioner.cache_clear()


def outer_problem(config: ExperimentConfig, forms, mesh):
    """Unshifted operator action, right-hand side and unknown count."""
    k = config.k
    f = assemble_load(mesh, source=config.source)
    if config.formulation == "primal":
        A = assemble_primal_operator(forms, k, 0.0)
        return (lambda x: A @ x), f, A
    op = MixedOperator(forms, k, 0.0)
    rhs = np.concatenate([np.zeros(forms.n_sigma, dtype=np.complex128), f / (-1j * k)])
    return op.matvec, rhs, op


def random_initial_guess(size, seed):
    """Uniform [-1, 1] real and imaginary parts; ``seed=None`` gives zero."""
    if seed is None:
        return np.zeros(size, dtype=np.complex128)
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size) + 1j * rng.uniform(-1.0, 1.0, size)


def run_experiment(config: ExperimentConfig, keep_solution=False, dump_operators=None,
                   callback=None) -> ExperimentReport:
    t0 = time.perf_counter()
    n = config.n
    mesh, forms = _forms(n)
    hcfg = config.hss_config()
    key = (hcfg.formulation, float(hcfg.k), float(hcfg.delta_hat), hcfg.inner, hcfg.mg,
           hcfg.direct_method)
    precond = _preconditioner(n, key)
    precond.reset()
    precond.config.theta = config.theta
    apply_A, b, A = outer_problem(config, forms, mesh)
    if dump_operators is not None:
        _dump_operators(dump_operators, config, A, precond)

    x0 = random_initial_guess(b.size, config.seed)
    if not np.any(b):
        x, residuals, its, converged = np.zeros_like(b), [0.0], 0, True
    else:
        kcfg = KrylovConfig(rtol=config.rtol, maxiter=config.maxiter)
        x, trace = fgmres(apply_A, b, x0, kcfg, precond.apply, callback=callback)
        residuals, its, converged = trace.residuals, trace.iterations, trace.converged
        if not converged:
            log.warning("FGMRES did not converge in %d iterations", its)

    inner_total = precond.steps_taken
    mg = hcfg.mg
    cycles = inner_total * mg.cycles if mg is not None else 0
    hier = precond.ops.inner.hierarchy if mg is not None else None
    eta_mg = hier.rate() if hier is not None else float("nan")
    return ExperimentReport(
        config=config, n=n, dofs=b.size, outer_its=its, converged=converged,
        inner_total=inner_total, mg_cycles=cycles,
        eta_h=rate(residuals) if its > 0 else float("nan"),
        eta_s=precond.rate("dual"), eta_s_l2=precond.rate("l2"), eta_mg=eta_mg,
        seconds=time.perf_counter() - t0, setup_seconds=precond.setup_seconds,
        residuals=list(residuals),
        mg_contractions=list(hier.contractions) if hier is not None else [],
        solution=x if keep_solution else None,
    )


def _dump_operators(path, config, A, precond):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    outer = A if config.formulation == "primal" else A.to_sparse()
    write_matrix_market(outer, path / "outer.txt")
    write_matrix_market(precond.ops.lhs, path / "hss_lhs.txt")
    if precond.ops.rhs_op is not None:
        write_matrix_market(precond.ops.rhs_op, path / "hss_rhs.txt")


def write_reports_csv(reports, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for r in reports:
            w.writerow(r.row())


def write_trace_csv(report: ExperimentReport, path):
    IterationTrace(report.residuals, report.converged).to_csv(path)


def write_mg_log(report: ExperimentReport, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cycle", "contraction"])
        for i, c in enumerate(report.mg_contractions):
            w.writerow([i, repr(float(c))])


def write_solution(report: ExperimentReport, path):
    """CG1 solution values as ``vertex,x,y,re,im``."""
    mesh, forms = _forms(report.n)
    u = report.solution
    if report.config.formulation == "mixed":
        u = u[forms.n_sigma:]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex", "x", "y", "re", "im"])
        for i, ((x, y), v) in enumerate(zip(mesh.vertices, u)):
            w.writerow([i, repr(x), repr(y), repr(v.real), repr(v.imag)])


# -- tables ------------------------------------------------------------------

@dataclass
class Table:
    name: str
    columns: list
    rows: list
    reports: list

    def format(self) -> str:
        widths = [max(len(str(c)), *(len(str(r[i])) for r in self.rows)) if self.rows
                  else len(str(c)) for i, c in enumerate(self.columns)]
        line = lambda cells: "  ".join(str(c).rjust(w) for c, w in zip(cells, widths))
        out = [self.name, line(self.columns), line(["-" * w for w in widths])]
        out += [line(r) for r in self.rows]
        return "\n".join(out)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            w.writerows(self.rows)


def _sweep(formulation, inner, ks, thetas, sources, **kw):
    reports = {}
    # keep one factorization alive across a k: loop k outermost
    for k in ks:
        for source in sources:
            for theta in thetas:
                cfg = ExperimentConfig(formulation=formulation, source=source, k=float(k),
                                       theta=theta, inner=inner, **kw)
                log.info("running %s", cfg)
                reports[(k, source, theta)] = run_experiment(cfg)
    return reports


def reproduce_table(name: str, k_list=(16, 32, 64), big: bool = False, **kw) -> Table:
    if name not in TABLE_NAMES:
        raise ValueError(f"unknown table {name!r}; choose from {', '.join(TABLE_NAMES)}")
    k_list = [int(k) for k in k_list]
    if not big and any(k >= 128 for k in k_list):
        raise ValueError("k >= 128 needs --big")

    if name in ("primal-direct", "mixed-direct", "primal-mg", "mixed-mg"):
        formulation, inner = name.split("-")
        inner = "mg" if inner == "mg" else "direct"
        reports = _sweep(formulation, inner, k_list, THETAS, SOURCES, **kw)
        columns = ["k"] + [f"{s}:theta={t:g}" for s in SOURCES for t in THETAS]
        rows = []
        for k in k_list:
            row = [k]
            for s in SOURCES:
                for t in THETAS:
                    r = reports[(k, s, t)]
                    total = r.mg_cycles if inner == "mg" else r.inner_total
                    row.append(f"{r.outer_its} ({total})")
            rows.append(row)
        return Table(name, columns, rows, list(reports.values()))

    inner = kw.pop("inner", "direct")
    reports = {}
    for formulation in ("primal", "mixed"):
        for (k, s, _), r in _sweep(formulation, inner, k_list, (1.0,), SOURCES, **kw).items():
            reports[(formulation, k, s)] = r
    combos = [(f, s) for f in ("primal", "mixed") for s in SOURCES]
    if name == "hss-rates":
        columns = ["k", "nu_s"] + [f"eta_s:{f}:{s}" for f, s in combos] \
            + [f"eta_s_l2:{f}:{s}" for f, s in combos]
        rows = [[k, f"{contraction_bound(k):.4f}"]
                + [f"{reports[(f, k, s)].eta_s:.4f}" for f, s in combos]
                + [f"{reports[(f, k, s)].eta_s_l2:.4f}" for f, s in combos] for k in k_list]
    else:
        columns = ["k"] + [f"eta_h:{f}:{s}" for f, s in combos]
        rows = [[k] + [f"{reports[(f, k, s)].eta_h:.4f}" for f, s in combos] for k in k_list]
    return Table(name, columns, rows, list(reports.values()))


def accounting_ok(report: ExperimentReport) -> bool:
    """Bracketed totals equal outer x ceil(k^theta) (x cycles per step)."""
    c = report.config
    expected = report.outer_its * inner_count(c.k, c.theta)
    ok = report.inner_total == expected
    mg = c.mg_config()
    if mg is not None:
        ok = ok and report.mg_cycles == expected * mg.cycles
    return ok


def report_dict(report: ExperimentReport) -> dict:
    d = asdict(report.config)
    d.update({k: getattr(report, k) for k in ("n", "dofs", "outer_its", "converged", "inner_total",
                                               "mg_cycles", "eta_h", "eta_s", "eta_s_l2",
                                               "eta_mg", "seconds", "setup_seconds")})
    d["residual_kind"] = "true"  # FGMRES records b - A x, not preconditioned residuals
    return d


def verify_suite(out=print) -> bool:
    """Run the self-checks of :mod:`helmhss.verify`; True when all pass."""
    from .verify import verify_suite as _run

    return _run(out)
