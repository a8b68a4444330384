"""External aerodynamic solver boundary.

Airfoils are scored on a fixed 66-point work condition grid (6 Mach numbers
by 11 lift coefficients at a single Reynolds number). Solver results are
memoized in an append-only on-disk cache keyed by the contour hash and the
condition triple, so reruns never touch the solver for known rows.
"""

from __future__ import annotations

import hashlib
import logging
import os
import shutil
import subprocess
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Airfoil

log = logging.getLogger("afbench.aero")

REYNOLDS = 1.0e5
MACH_VALUES = tuple(round(0.2 + 0.1 * i, 1) for i in range(6))
CL_VALUES = tuple(round(0.2 * j, 1) for j in range(11))
CONDITION_COUNT = 66
SOLVER_TIMEOUT = 10.0


class AeroError(RuntimeError):
    """Raised for adapter contract violations."""


class AeroUnavailableError(AeroError):
    """No solver executable and no cached rows: distinct from non-convergence."""


@dataclass(frozen=True, order=True)
class WorkCondition:
    """One (Re, Ma, CL) operating point."""

    re: float = REYNOLDS
    ma: float = 0.2
    cl: float = 0.0


def condition_grid() -> list[WorkCondition]:
    """The 66-point grid in row-major order (Ma outer, CL inner)."""
    return [WorkCondition(REYNOLDS, ma, cl) for ma in MACH_VALUES for cl in CL_VALUES]


@dataclass(frozen=True)
class PolarRecord:
    """Solver output for one condition; aoa/cd/cm present iff converged."""

    condition: WorkCondition
    converged: bool
    aoa: float | None = None
    cd: float | None = None
    cm: float | None = None

    def __post_init__(self):
        have = (self.aoa is not None, self.cd is not None, self.cm is not None)
        if self.converged and not all(have):
            raise AeroError("converged record requires aoa, cd and cm")
        if not self.converged and any(have):
            raise AeroError("non-converged record must carry no polar values")


def airfoil_hash(airfoil: Airfoil) -> str:
    """SHA-256 of the canonical coordinate bytes (little-endian float64)."""
    pts = np.ascontiguousarray(airfoil.points, dtype="<f8")
    return hashlib.sha256(pts.tobytes()).hexdigest()


def _fmt_opt(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def _parse_opt(s: str) -> float | None:
    return None if s == "" else float(s)


class PolarCache:
    """Append-only tab-separated polar store.

    Line format: hash, re, ma, cl, converged (0/1), aoa, cd, cm. Floats are
    written in shortest round-trip form; non-converged rows leave the last
    three fields empty. Concurrent readers are safe; writers serialize on a
    lock and flush per append.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._rows: dict[tuple, PolarRecord] = {}
        if self.path.exists():
            self._load()

    @staticmethod
    def _key(h: str, cond: WorkCondition) -> tuple:
        return (h, repr(cond.re), repr(cond.ma), repr(cond.cl))

    def _load(self):
        with open(self.path, "r", encoding="ascii") as fh:
            for ln, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 8:
                    raise AeroError(f"{self.path}:{ln}: expected 8 fields, got {len(parts)}")
                h, re_, ma, cl, conv, aoa, cd, cm = parts
                cond = WorkCondition(float(re_), float(ma), float(cl))
                rec = PolarRecord(cond, conv == "1", _parse_opt(aoa),
                                  _parse_opt(cd), _parse_opt(cm))
                self._rows[self._key(h, cond)] = rec

    def __len__(self) -> int:
        return len(self._rows)

    def lookup(self, h: str, cond: WorkCondition) -> PolarRecord | None:
        return self._rows.get(self._key(h, cond))

    def append(self, h: str, rec: PolarRecord) -> None:
        cond = rec.condition
        line = "\t".join([h, repr(float(cond.re)), repr(float(cond.ma)),
                          repr(float(cond.cl)), "1" if rec.converged else "0",
                          _fmt_opt(rec.aoa), _fmt_opt(rec.cd), _fmt_opt(rec.cm)])
        with self._lock:
            self._rows[self._key(h, cond)] = rec
            with open(self.path, "a", encoding="ascii") as fh:
                fh.write(line + "\n")
                fh.flush()


def _default_mock(airfoil: Airfoil, cond: WorkCondition) -> PolarRecord:
    """Deterministic stand-in polar: converges at moderate lift targets."""
    if cond.cl > 1.2:
        return PolarRecord(cond, converged=False)
    return PolarRecord(cond, converged=True,
                       aoa=2.0 + 4.5 * cond.cl,
                       cd=0.008 + 0.004 * cond.cl ** 2 + 0.002 * cond.ma,
                       cm=-0.05 - 0.02 * cond.cl)


class MockSolver:
    """Callable-backed solver for tests; counts invocations."""

    def __init__(self, fn=_default_mock):
        self.fn = fn
        self.calls = 0
        self._lock = threading.Lock()

    def solve(self, airfoil: Airfoil, cond: WorkCondition) -> PolarRecord:
        with self._lock:
            self.calls += 1
        return self.fn(airfoil, cond)


def _write_solver_dat(airfoil: Airfoil, path: Path) -> None:
    # solver input format: name line then 6-decimal coordinate pairs
    with open(path, "w", encoding="ascii") as fh:
        fh.write(airfoil.name + "\n")
        for x, y in airfoil.points:
            fh.write(f" {x:.6f} {y:.6f}\n")


class XfoilSolver:
    """Drives an XFoil-compatible executable, one subprocess per condition.

    Commands run fixed-CL viscous analyses; a condition that fails to
    converge (or times out after SOLVER_TIMEOUT seconds) yields a
    non-converged record rather than an error.
    """

    def __init__(self, executable: str = "xfoil", timeout: float = SOLVER_TIMEOUT,
                 iter_limit: int = 100):
        self.executable = executable
        self.timeout = timeout
        self.iter_limit = iter_limit
        self.calls = 0
        self._lock = threading.Lock()

    def available(self) -> bool:
        return shutil.which(self.executable) is not None

    def _script(self, dat: Path, polar: Path, cond: WorkCondition) -> str:
        return "\n".join([
            "PLOP", "G F", "",
            f"LOAD {dat}",
            "OPER",
            f"VISC {cond.re:.0f}",
            f"MACH {cond.ma:.3f}",
            f"ITER {self.iter_limit}",
            "PACC",
            str(polar),
            "",
            f"CL {cond.cl:.3f}",
            "PACC",
            "",
            "QUIT",
        ]) + "\n"

    @staticmethod
    def _parse_polar(polar: Path, cl_target: float) -> tuple[float, float, float] | None:
        if not polar.exists():
            return None
        rows = []
        with open(polar, "r", encoding="ascii", errors="replace") as fh:
            lines = fh.readlines()
        started = False
        for line in lines:
            if set(line.strip()) <= {"-", " "} and line.strip():
                started = True
                continue
            if not started:
                continue
            parts = line.split()
            if len(parts) < 5:
                continue
            try:
                vals = [float(p) for p in parts[:5]]
            except ValueError:
                continue
            rows.append(vals)
        for alpha, cl, cd, _cdp, cm in rows:
            if abs(cl - cl_target) < 5e-3:
                return alpha, cd, cm
        return None

    def solve(self, airfoil: Airfoil, cond: WorkCondition) -> PolarRecord:
        with self._lock:
            self.calls += 1
        with tempfile.TemporaryDirectory(prefix="afbench_xfoil_") as tmp:
            tmp = Path(tmp)
            dat = tmp / "section.dat"
            polar = tmp / "polar.txt"
            _write_solver_dat(airfoil, dat)
            try:
                subprocess.run([self.executable],
                               input=self._script(dat, polar, cond),
                               stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
                               cwd=tmp, text=True, timeout=self.timeout, check=False)
            except (subprocess.TimeoutExpired, OSError) as e:
                log.warning("solver run failed for %s at %s: %s", airfoil.name, cond, e)
                return PolarRecord(cond, converged=False)
            hit = self._parse_polar(polar, cond.cl)
            if hit is None:
                return PolarRecord(cond, converged=False)
            aoa, cd, cm = hit
            return PolarRecord(cond, converged=True, aoa=aoa, cd=cd, cm=cm)


def resolve_solver(spec: str | None):
    """Map a CLI/solver spec to a solver object or None (aero unavailable)."""
    if spec is None or spec in ("", "none", "null"):
        return None
    if spec == "mock":
        return MockSolver()
    solver = XfoilSolver(spec)
    if not solver.available():
        log.warning("solver executable %r not found; aero unavailable", spec)
        return None
    return solver


def evaluate_airfoil(airfoil: Airfoil, conditions=None, *, solver=None,
                     cache: PolarCache | None = None,
                     workers: int = 4) -> list[PolarRecord]:
    """Polar records for every condition, cache-first, in grid order.

    Cache misses go to the solver via a small worker pool (subprocess-bound).
    Missing solver + any cache miss raises AeroUnavailableError.
    """
    conds = list(conditions) if conditions is not None else condition_grid()
    h = airfoil_hash(airfoil)
    results: dict[int, PolarRecord] = {}
    missing: list[tuple[int, WorkCondition]] = []
    for i, cond in enumerate(conds):
        hit = cache.lookup(h, cond) if cache is not None else None
        if hit is not None:
            results[i] = hit
        else:
            missing.append((i, cond))
    if missing and solver is None:
        raise AeroUnavailableError(
            f"no solver and {len(missing)} of {len(conds)} conditions uncached "
            f"for {airfoil.name}")
    if missing:
        def run(item):
            i, cond = item
            rec = solver.solve(airfoil, cond)
            if rec.condition != cond:
                rec = PolarRecord(cond, rec.converged, rec.aoa, rec.cd, rec.cm)
            return i, rec
        if workers > 1 and len(missing) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for i, rec in pool.map(run, missing):
                    results[i] = rec
        else:
            for item in missing:
                i, rec = run(item)
                results[i] = rec
        if cache is not None:
            for i, _ in missing:
                cache.append(h, results[i])
    return [results[i] for i in range(len(conds))]


def filter_airfoils(batch: list[Airfoil], polars: list[list[PolarRecord]]
                    ) -> tuple[list[Airfoil], list[Airfoil]]:
    """Partition into (kept, discarded): discarded iff zero conditions converged.

    Every airfoil must carry records covering the full condition grid.
    """
    if len(batch) != len(polars):
        raise AeroError("batch and polar lists must align")
    grid = set(condition_grid())
    kept, discarded = [], []
    for foil, recs in zip(batch, polars):
        got = {r.condition for r in recs}
        if got != grid:
            raise AeroError(f"{foil.name}: polar set does not cover the "
                            f"{CONDITION_COUNT}-condition grid")
        if any(r.converged for r in recs):
            kept.append(foil)
        else:
            discarded.append(foil)
    return kept, discarded
