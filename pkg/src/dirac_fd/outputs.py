"""CSV, aligned-text and plot-data writers.  Output bytes depend only on the
numbers passed in, so identical studies give identical files."""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Optional

from .study import FAILED, UNSTABLE, ConservationReport, ConvergenceTable, StudyOutcome


def sci(x: Optional[float]) -> str:
    """Six significant digits in scientific notation; blank for None."""
    if x is None:
        return ""
    return f"{x:.5e}"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _cell_text(r, metric) -> str:
    if r is None:
        return ""
    if r.status in (UNSTABLE, FAILED):
        return r.status
    return sci(r.value(metric))


def table_csv(table: ConvergenceTable) -> str:
    metric = "e_" + table.metric
    rows = []
    for row, eps in enumerate(table.epsilons):
        for level in range(table.levels):
            r = table.result(row, level)
            if r is None:
                continue
            rows.append([sci(eps), level, sci(r.h), sci(r.cell.tau), _cell_text(r, table.metric),
                         sci(table.order(row, level))])
    return _csv_text(["epsilon", "level", "h", "tau", metric, "order"], rows)


def cells_csv(table: ConvergenceTable) -> str:
    rows = []
    for (row, level) in sorted(table.cells):
        r = table.cells[(row, level)]
        e = r.errors
        rows.append([sci(r.cell.epsilon), level, r.cell.M, sci(r.h), sci(r.cell.tau), r.status,
                     sci(e.e_phi) if e else "", sci(e.e_rho) if e else "",
                     sci(e.e_J) if e else "", r.reason])
    return _csv_text(["epsilon", "level", "M", "h", "tau", "status", "e_phi", "e_rho", "e_J", "reason"],
                     rows)


def table_text(table: ConvergenceTable) -> str:
    """Errors with an order line under each epsilon row."""
    head = ["e_" + table.metric] + [f"level {k}" for k in range(table.levels)]
    lines = [head]
    for row, label in enumerate(table.labels):
        cells = [_cell_text(table.result(row, k), table.metric) for k in range(table.levels)]
        orders = [f"{o:.2f}" if o is not None else "-" for o in table.orders(row)]
        lines.append([f"eps={label}"] + cells)
        lines.append(["order"] + orders)
    widths = [max(len(line[i]) for line in lines) for i in range(len(head))]
    out = ["  ".join(s.rjust(w) for s, w in zip(line, widths)).rstrip() for line in lines]
    return "\n".join(out) + "\n"


def trace_csv(trace) -> str:
    rows = [[repr(float(t)), repr(float(v))] for t, v in trace] if trace is not None else []
    return _csv_text(["t", "re_phi1"], rows)


def conservation_csv(rep: ConservationReport) -> str:
    rows = []
    for i, t in enumerate(rep.t):
        energy = sci(float(rep.energy_drift[i])) if rep.energy_drift is not None else ""
        rows.append([sci(float(t)), sci(float(rep.mass_drift[i])), energy])
    return _csv_text(["t", "mass_drift", "energy_drift"], rows)


def sweep_csv(rows) -> str:
    body = [[sci(r.epsilon), sci(r.h), sci(r.tau_closed), sci(r.tau_empirical), sci(r.relative_gap)]
            for r in rows]
    return _csv_text(["epsilon", "h", "tau_max", "tau_empirical", "relative_gap"], body)


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def emit_outputs(outcome: StudyOutcome, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    stem = outcome.config.stem
    written = []
    if outcome.table is not None:
        written.append(_write(out_dir / f"{stem}.csv", table_csv(outcome.table)))
        written.append(_write(out_dir / f"{stem}_cells.csv", cells_csv(outcome.table)))
        written.append(_write(out_dir / f"{stem}.txt", table_text(outcome.table)))
    if outcome.trace is not None or outcome.config.trace_x is not None:
        written.append(_write(out_dir / f"{stem}_trace.csv", trace_csv(outcome.trace)))
    if outcome.conservation is not None:
        written.append(_write(out_dir / f"{stem}_conservation.csv", conservation_csv(outcome.conservation)))
    if outcome.sweep is not None:
        written.append(_write(out_dir / f"{stem}_stability.csv", sweep_csv(outcome.sweep)))
    return written
