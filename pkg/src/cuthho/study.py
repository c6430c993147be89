"""Experiment orchestration: single solves, sweeps, and CSV reports.

The CSV schema is the single output contract:

    case,k,level,r,theta,eta,kappa2,ndofs,energy_error,rate,cond,wall_time_s

with empty fields where a column does not apply.  Rows are emitted in a
stable sorted order and all numeric fields except the wall time are
deterministic for identical inputs.
"""

from __future__ import annotations

import io
import sys
import time
from dataclasses import dataclass, replace

import numpy as np

from . import assembly
from .cases import Case, make_case, verify_case
from .errors import ConfigError, CutHHOError
from .geometry import build_cut_mesh
from .levelset import Circle, Square
from .mesh import build_mesh

CSV_COLUMNS = (
    "case", "k", "level", "r", "theta", "eta", "kappa2",
    "ndofs", "energy_error", "rate", "cond", "wall_time_s",
)


@dataclass(frozen=True)
class RunRecord:
    case: str
    k: int
    level: int
    r: int
    theta: float
    eta: float
    kappa2: float
    ndofs: int
    energy_error: float | None = None
    rate: float | None = None
    cond: float | None = None
    wall_time_s: float = 0.0


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(records: list[RunRecord], target) -> None:
    """Write records to a path or file object using the fixed schema."""
    own = isinstance(target, (str, bytes))
    fh = open(target, "w") if own else target
    try:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            fh.write(",".join(_fmt(getattr(rec, c)) for c in CSV_COLUMNS) + "\n")
    finally:
        if own:
            fh.close()


def records_to_csv(records: list[RunRecord]) -> str:
    buf = io.StringIO()
    write_csv(records, buf)
    return buf.getvalue()


def solve_single(case: Case, k: int, level: int, r: int | None = None,
                 theta: float = 0.3, eta: float = 20.0,
                 want_cond: bool = False, condensed: bool = True,
                 check_case: bool = True):
    """Run one solve; returns (record, system, solution)."""
    if not 0 <= k <= 3:
        raise ConfigError("polynomial degree k must be in 0..3")
    if check_case:
        verify_case(case)
    r_eff = case.default_r if r is None else r
    t0 = time.perf_counter()
    mesh = build_mesh(level)
    cm = build_cut_mesh(mesh, case.levelset, theta=theta, r=r_eff)
    system = assembly.assemble(cm, k, kappa=case.kappa, eta=eta, case=case)
    x = assembly.solve(system, condensed=condensed)
    err = assembly.energy_error(system, x, case)
    cond = assembly.condition_number(system) if want_cond else None
    wall = time.perf_counter() - t0
    ndofs = int(system.free.sum())
    rec = RunRecord(case.name, k, level, r_eff, theta, eta, case.kappa[1],
                    ndofs, err, None, cond, wall)
    return rec, system, x


def convergence_study(case_name: str, ks, levels, r: int | None = None,
                      theta: float = 0.3, eta: float = 20.0,
                      kappa2: float | None = None,
                      progress=None) -> list[RunRecord]:
    """Energy errors over mesh levels with observed rates per degree."""
    case = make_case(case_name, kappa2=kappa2)
    verify_case(case)
    records: list[RunRecord] = []
    for k in sorted(ks):
        prev: RunRecord | None = None
        for level in sorted(levels):
            try:
                rec, _, _ = solve_single(case, k, level, r=r, theta=theta,
                                         eta=eta, check_case=False)
            except CutHHOError as exc:
                # partial reports: keep the rows solved so far for this k
                print(f"warning: {case.name} k={k} level={level} failed: {exc}",
                      file=sys.stderr)
                break
            if prev is not None and prev.energy_error and rec.energy_error:
                rate = float(np.log2(prev.energy_error / rec.energy_error))
                rec = replace(rec, rate=rate)
            records.append(rec)
            prev = rec
            if progress:
                progress(rec)
    return records


def conditioning_study(interface: str, sweep, ks, level: int = 0,
                       theta: float = 0.3, r: int = 8, eta: float = 20.0,
                       kappa2: float = 1.0, progress=None) -> list[RunRecord]:
    """Condition number of the reduced stiffness matrix along a sweep.

    ``interface='circle'`` interprets sweep values as integers i with
    radius 1/3 + i/32; ``interface='square'`` as exponents p with position
    delta = 0.5e-p.  Assembly uses zero data, only the matrix matters.
    """
    records = []
    mesh = build_mesh(level)
    for val in sweep:
        if interface == "circle":
            ls = Circle((0.5, 0.5), 1.0 / 3.0 + float(val) / 32.0)
            name = f"circle[i={val}]"
        elif interface == "square":
            ls = Square(delta=0.5 * 10.0 ** (-float(val)))
            name = f"square[p={val}]"
        else:
            raise ConfigError("interface must be 'circle' or 'square'")
        for k in sorted(ks):
            t0 = time.perf_counter()
            cm = build_cut_mesh(mesh, ls, theta=theta, r=r)
            system = assembly.assemble(cm, k, kappa=(1.0, kappa2), eta=eta)
            cond = assembly.condition_number(system)
            rec = RunRecord(name, k, level, r, theta, eta, kappa2,
                            int(system.free.sum()), None, None, cond,
                            time.perf_counter() - t0)
            records.append(rec)
            if progress:
                progress(rec)
    return records


def theta_study(case_name: str, thetas, k: int, levels, r: int | None = None,
                eta: float = 20.0, kappa2: float | None = None,
                progress=None) -> list[RunRecord]:
    """Convergence sweeps over the ill-cut flagging parameter."""
    records = []
    for theta in thetas:
        records.extend(
            convergence_study(case_name, [k], levels, r=r, theta=float(theta),
                              eta=eta, kappa2=kappa2, progress=progress)
        )
    return records
