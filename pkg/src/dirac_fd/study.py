"""Convergence tables, conservation reports and stability sweeps."""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import StudyConfig, spatial_cell, sweep_meshes, temporal_cell
from .core import ArrayC, Discretization, build_grid
from .observables import ErrorTriple, error_metrics
from .presets import exact_solution, initial_preset, potential_preset
from .reference import ReferenceCache, ReferenceConfig, reference_solve, restrict
from .schemes import SchemeKind, evolve
from .stability import empirical_tau_max, tau_max, tau_max_closed_form

OK, UNSTABLE, FAILED = "ok", "Unstable", "Failed"


@dataclass(frozen=True)
class Cell:
    row: int
    level: int
    epsilon: float
    M: int
    tau: float


@dataclass
class CellResult:
    cell: Cell
    h: float
    status: str
    errors: Optional[ErrorTriple] = None
    reason: str = ""
    diverged_step: Optional[int] = None
    trace: Optional[np.ndarray] = None

    def value(self, metric: str) -> Optional[float]:
        if self.status != OK or self.errors is None:
            return None
        return {"phi": self.errors.e_phi, "rho": self.errors.e_rho, "J": self.errors.e_J}[metric]


@dataclass
class ConvergenceTable:
    epsilons: tuple[float, ...]
    labels: tuple[str, ...]
    levels: int
    ratio: float  # refinement factor between adjacent columns
    metric: str = "phi"
    cells: dict = field(default_factory=dict)  # (row, level) -> CellResult

    def result(self, row: int, level: int) -> Optional[CellResult]:
        return self.cells.get((row, level))

    def order(self, row: int, level: int) -> Optional[float]:
        """``log(e_{k-1}/e_k)/log(ratio)``; None in the first column or next to a
        missing, unstable or failed cell."""
        if level == 0:
            return None
        prev, cur = self.result(row, level - 1), self.result(row, level)
        if prev is None or cur is None:
            return None
        e0, e1 = prev.value(self.metric), cur.value(self.metric)
        if e0 is None or e1 is None or not (e0 > 0 and e1 > 0):
            return None
        return math.log(e0 / e1) / math.log(self.ratio)

    def errors(self, row: int) -> list[Optional[float]]:
        return [self.result(row, k).value(self.metric) if self.result(row, k) else None
                for k in range(self.levels)]

    def orders(self, row: int) -> list[Optional[float]]:
        return [self.order(row, k) for k in range(self.levels)]

    @property
    def any_failed(self) -> bool:
        return any(r.status == FAILED for r in self.cells.values())


@dataclass
class StudyOutcome:
    config: StudyConfig
    table: Optional[ConvergenceTable] = None
    conservation: Optional["ConservationReport"] = None
    sweep: Optional[list] = None
    trace: Optional[np.ndarray] = None  # columns t, Re phi1

    @property
    def any_failed(self) -> bool:
        return bool(self.table and self.table.any_failed)


# --------------------------------------------------------------------------
# reference handling
# --------------------------------------------------------------------------


def reference_config(c: StudyConfig, epsilon: float, Ms) -> ReferenceConfig:
    base = ReferenceConfig.default_for(epsilon, Ms)
    return ReferenceConfig(M_ref=c.M_ref or base.M_ref, tau_ref=c.tau_ref or base.tau_ref)


def reference_field(c: StudyConfig, epsilon: float, Ms, cache: ReferenceCache) -> Optional[ArrayC]:
    """Reference solution at ``T`` on a grid every ``M`` in ``Ms`` divides.

    Returns None when the presets have a closed-form solution instead.
    """
    if exact_solution(c.initial, c.a, c.b, epsilon, c.potential) is not None:
        return None
    rc = reference_config(c, epsilon, Ms)
    for M in Ms:
        rc.check_grid(M)
    disc = rc.discretization(c.a, c.b, c.T, epsilon)
    key = {"epsilon": float(epsilon), "potential": c.potential, "initial": c.initial,
           "T": float(c.T), "a": float(c.a), "b": float(c.b),
           "M_ref": rc.M_ref, "tau_ref": float(disc.tau)}
    init = initial_preset(c.initial, c.a, c.b, epsilon)
    pot = potential_preset(c.potential)
    return cache.get_or_compute(key, lambda: reference_solve(init, disc, pot))


def _target(c: StudyConfig, disc: Discretization, ref: Optional[ArrayC]) -> ArrayC:
    if ref is not None:
        return restrict(ref, disc.M)
    exact = exact_solution(c.initial, c.a, c.b, disc.epsilon, c.potential)
    return exact(disc.T, build_grid(disc))


# --------------------------------------------------------------------------
# cells
# --------------------------------------------------------------------------


def _trace_node(c: StudyConfig, disc: Discretization) -> Optional[int]:
    if c.trace_x is None:
        return None
    return int(round((c.trace_x - c.a) / disc.h)) % disc.M


def run_cell(c: StudyConfig, cell: Cell, target: ArrayC, allow_unstable: bool = False) -> CellResult:
    """Evolve one table cell and measure it; never raises for solver trouble."""
    h = c.length / cell.M
    try:
        disc = Discretization(a=c.a, b=c.b, M=cell.M, tau=cell.tau, T=c.T, epsilon=cell.epsilon)
        pot = potential_preset(c.potential)
        if c.scheme in (SchemeKind.SIFD1, SchemeKind.LFFD) and not allow_unstable:
            bound = tau_max(c.scheme, disc, pot)
            if cell.tau > bound * (1 + 1e-12):
                return CellResult(cell, h, UNSTABLE,
                                  reason=f"tau={cell.tau:.6g} exceeds stability bound {bound:.6g}")
        init = initial_preset(c.initial, c.a, c.b, cell.epsilon)
        res = evolve(c.scheme, init, disc, pot, trace_node=_trace_node(c, disc))
        trace = _trace_columns(res.trace, disc) if res.trace is not None else None
        if res.diverged:
            return CellResult(cell, h, UNSTABLE, reason=f"diverged at step {res.diverged_step}",
                              diverged_step=res.diverged_step, trace=trace)
        return CellResult(cell, h, OK, errors=error_metrics(res.field, target, disc), trace=trace)
    except (ArithmeticError, ValueError, MemoryError) as exc:
        return CellResult(cell, h, FAILED, reason=f"{type(exc).__name__}: {exc}")


def _trace_columns(trace: ArrayC, disc: Discretization) -> np.ndarray:
    n = np.arange(trace.shape[0])
    keep = np.isfinite(trace[:, 0].real)
    return np.column_stack([n[keep] * disc.tau, trace[keep, 0].real])


def _cell_job(args):
    return run_cell(*args)


def plan_cells(c: StudyConfig) -> list[Cell]:
    cells = []
    for row, eps in enumerate(c.epsilons):
        for level in range(c.levels):
            pick = spatial_cell if c.study == "spatial_convergence" else temporal_cell
            M, tau = pick(c, eps, level)
            cells.append(Cell(row, level, eps, M, tau))
    return cells


def default_jobs() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return max(1, os.cpu_count() or 1)


def run_convergence(c: StudyConfig, cache: ReferenceCache, jobs: int = 1,
                    allow_unstable: bool = False, cells: Optional[list[Cell]] = None,
                    log=None) -> ConvergenceTable:
    """Fill a convergence table; ``cells`` restricts the run to a subset."""
    ratio = 2.0 if c.study == "spatial_convergence" else 4.0
    table = ConvergenceTable(c.epsilons, c.epsilon_labels or tuple(f"{e:g}" for e in c.epsilons),
                             c.levels, ratio, c.metric)
    cells = plan_cells(c) if cells is None else cells
    jobs_args = []
    for row, eps in enumerate(c.epsilons):
        row_cells = [cell for cell in cells if cell.row == row]
        if not row_cells:
            continue
        Ms = sorted({cell.M for cell in row_cells})
        t0 = time.time()
        ref = reference_field(c, eps, Ms, cache)
        if log and ref is not None:
            log(f"reference for epsilon={eps:g} ready ({time.time() - t0:.1f} s)")
        for cell in row_cells:
            disc = Discretization(a=c.a, b=c.b, M=cell.M, tau=cell.tau, T=c.T, epsilon=eps)
            jobs_args.append((c, cell, _target(c, disc, ref), allow_unstable))
    if jobs > 1 and len(jobs_args) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(jobs_args))) as pool:
            results = list(pool.map(_cell_job, jobs_args))
    else:
        results = []
        for args in jobs_args:
            t0 = time.time()
            results.append(_cell_job(args))
            if log:
                r = results[-1]
                log(f"cell eps={r.cell.epsilon:g} level={r.cell.level} M={r.cell.M} "
                    f"tau={r.cell.tau:.4g}: {r.status} ({time.time() - t0:.1f} s)")
    for r in results:
        table.cells[(r.cell.row, r.cell.level)] = r
    return table


# --------------------------------------------------------------------------
# conservation
# --------------------------------------------------------------------------


@dataclass
class ConservationReport:
    t: np.ndarray
    mass_drift: np.ndarray
    energy_drift: Optional[np.ndarray]  # None for time-dependent potentials
    zero_baseline: bool = False
    status: str = OK

    @property
    def max_mass_drift(self) -> float:
        return float(np.max(self.mass_drift)) if self.mass_drift.size else 0.0

    @property
    def max_energy_drift(self) -> Optional[float]:
        if self.energy_drift is None:
            return None
        return float(np.max(self.energy_drift)) if self.energy_drift.size else 0.0


def _relative_drift(values, baseline):
    values = np.asarray(values, dtype=float)
    if baseline == 0:
        return np.abs(values - baseline)
    return np.abs(values - baseline) / abs(baseline)


def conservation_report(scheme, disc: Discretization, init, pot, n_probes: int = 20) -> ConservationReport:
    """Relative mass and energy drift at ``n_probes`` evenly spaced steps.

    A zero initial field gives absolute drifts and sets ``zero_baseline``.
    """
    N = disc.steps
    probes = sorted({int(round(k * N / n_probes)) for k in range(n_probes + 1)})
    res = evolve(scheme, init, disc, pot, probes=probes)
    recs = res.records
    t = np.array([r.t for r in recs])
    masses = [r.mass for r in recs]
    mass_drift = _relative_drift(masses, masses[0])
    energy_drift = None
    zero = masses[0] == 0
    if pot.time_independent:
        energies = [r.energy for r in recs]
        energy_drift = _relative_drift(energies, energies[0])
        zero = zero or energies[0] == 0
    return ConservationReport(t, mass_drift, energy_drift, zero_baseline=zero,
                              status=UNSTABLE if res.diverged else OK)


# --------------------------------------------------------------------------
# stability sweep
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    h: float
    tau_closed: float
    tau_empirical: float

    @property
    def relative_gap(self) -> float:
        if math.isinf(self.tau_closed) and math.isinf(self.tau_empirical):
            return 0.0
        return abs(self.tau_empirical - self.tau_closed) / self.tau_closed


def stability_sweep(c: StudyConfig) -> list[SweepRow]:
    pot = potential_preset(c.potential)
    v0 = pot.v_max if c.v0 is None else c.v0
    a10 = pot.a1_max if c.a10 is None else c.a10
    rows = []
    for eps in c.epsilons:
        for h in sweep_meshes(c):
            M = round(c.length / h)
            disc = Discretization(a=c.a, b=c.b, M=M, tau=1.0, T=1.0, epsilon=eps)
            rows.append(SweepRow(eps, disc.h,
                                 tau_max_closed_form(c.scheme, eps, disc.h, v0, a10),
                                 empirical_tau_max(c.scheme, disc, v0, a10)))
    return rows


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def run_study(c: StudyConfig, cache: Optional[ReferenceCache] = None, jobs: int = 1,
              allow_unstable: bool = False, log=None) -> StudyOutcome:
    cache = cache if cache is not None else ReferenceCache()
    out = StudyOutcome(c)
    if c.study in ("spatial_convergence", "temporal_convergence"):
        out.table = run_convergence(c, cache, jobs, allow_unstable, log=log)
    elif c.study == "single_run":
        cells = [Cell(row, 0, eps, round(c.length / c.h), c.tau) for row, eps in enumerate(c.epsilons)]
        single = StudyConfig(**{**c.__dict__, "levels": 1})
        out.table = run_convergence(single, cache, jobs, allow_unstable, cells=cells, log=log)
        traces = [r.trace for r in out.table.cells.values() if r.trace is not None]
        out.trace = traces[0] if traces else None
    elif c.study == "conservation_check":
        eps = c.epsilons[0]
        disc = Discretization(a=c.a, b=c.b, M=round(c.length / c.h), tau=c.tau, T=c.T, epsilon=eps)
        out.conservation = conservation_report(c.scheme, disc, initial_preset(c.initial, c.a, c.b, eps),
                                               potential_preset(c.potential), c.probes)
    elif c.study == "stability_sweep":
        out.sweep = stability_sweep(c)
    return out
