import numpy as np
import pytest

from afbench.aero_adapter import (
    AeroError,
    AeroUnavailableError,
    MockSolver,
    PolarCache,
    PolarRecord,
    WorkCondition,
    airfoil_hash,
    condition_grid,
    evaluate_airfoil,
    filter_airfoils,
    resolve_solver,
)
from afbench.generators import naca4


def always_converge(airfoil, cond):
    return PolarRecord(cond, True, 1.0, 0.01, -0.05)


def diverge_above_cl1(airfoil, cond):
    if cond.cl > 1.0:
        return PolarRecord(cond, False, None, None, None)
    return PolarRecord(cond, True, 2.0, 0.02, -0.04)


def never_converge(airfoil, cond):
    return PolarRecord(cond, False, None, None, None)


# -- condition grid -----------------------------------------------------------


def test_condition_grid_shape():
    grid = condition_grid()
    assert len(grid) == 66
    assert len(set(grid)) == 66
    assert all(c.re == 100000.0 for c in grid)


def test_condition_grid_endpoints_and_order():
    grid = condition_grid()
    assert grid[0] == WorkCondition(100000.0, 0.2, 0.0)
    assert grid[-1] == WorkCondition(100000.0, 0.7, 2.0)
    mas = sorted({c.ma for c in grid})
    cls = sorted({c.cl for c in grid})
    assert mas == [0.2, 0.3, 0.4, 0.5, 0.6, 0.7]
    assert len(cls) == 11 and cls[0] == 0.0 and cls[-1] == 2.0
    # row-major: all 11 cl values at ma=0.2 come first
    assert all(c.ma == 0.2 for c in grid[:11])


# -- evaluation and cache -----------------------------------------------------


def test_mock_passthrough():
    foil = naca4(0.0, 0.4, 0.12)
    records = evaluate_airfoil(foil, solver=MockSolver(always_converge))
    assert len(records) == 66
    assert all(r.converged for r in records)
    assert all(r.aoa == 1.0 and r.cd == 0.01 and r.cm == -0.05 for r in records)


def test_mock_divergence_counts():
    foil = naca4(0.0, 0.4, 0.12)
    records = evaluate_airfoil(foil, solver=MockSolver(diverge_above_cl1))
    bad = [r for r in records if not r.converged]
    assert len(bad) == 30  # cl in {1.2..2.0} x 6 Mach numbers
    assert all(r.aoa is None and r.cd is None and r.cm is None for r in bad)


def test_cache_hit_skips_solver(tmp_path):
    foil = naca4(0.02, 0.4, 0.12)
    calls = {"n": 0}

    def counting(airfoil, cond):
        calls["n"] += 1
        return PolarRecord(cond, True, 1.5, 0.011, -0.051)

    cache = PolarCache(tmp_path / "polars.tsv")
    first = evaluate_airfoil(foil, solver=MockSolver(counting), cache=cache)
    assert calls["n"] == 66
    second = evaluate_airfoil(foil, solver=MockSolver(counting), cache=cache)
    assert calls["n"] == 66
    assert first == second


def test_cache_round_trip_identical_records(tmp_path):
    foil = naca4(0.02, 0.4, 0.12)
    cache = PolarCache(tmp_path / "polars.tsv")
    first = evaluate_airfoil(foil, solver=MockSolver(diverge_above_cl1), cache=cache)
    reloaded = PolarCache(tmp_path / "polars.tsv")
    second = evaluate_airfoil(foil, solver=None, cache=reloaded)
    assert first == second


def test_aero_unavailable_distinct_from_nonconvergence():
    foil = naca4(0.0, 0.4, 0.12)
    with pytest.raises(AeroUnavailableError):
        evaluate_airfoil(foil, solver=None, cache=None)
    # non-convergence is data, not an error
    records = evaluate_airfoil(foil, solver=MockSolver(never_converge))
    assert all(not r.converged for r in records)


def test_airfoil_hash_content_sensitivity():
    a = naca4(0.0, 0.4, 0.12)
    b = naca4(0.0, 0.4, 0.12)
    assert airfoil_hash(a) == airfoil_hash(b)
    nudged = a.points.copy()
    nudged[40, 1] += 1e-12
    c = type(a)(nudged, a.name, a.provenance)
    assert airfoil_hash(c) != airfoil_hash(a)


# -- filter -------------------------------------------------------------------


def test_filter_keeps_any_convergence():
    foils = [naca4(0.0, 0.4, 0.10 + 0.01 * i) for i in range(3)]
    grid = condition_grid()
    one = [PolarRecord(c, i == 0, 1.0 if i == 0 else None,
                       0.01 if i == 0 else None,
                       -0.05 if i == 0 else None)
           for i, c in enumerate(grid)]
    none = [PolarRecord(c, False, None, None, None) for c in grid]
    full = [PolarRecord(c, True, 1.0, 0.01, -0.05) for c in grid]
    kept, discarded = filter_airfoils(foils, [one, none, full])
    assert kept == [foils[0], foils[2]]
    assert discarded == [foils[1]]


def test_filter_partition_is_exact():
    rng = np.random.default_rng(2)
    foils = [naca4(0.0, 0.4, 0.08 + 0.01 * i) for i in range(10)]
    grid = condition_grid()
    polars = []
    fail_count = 0
    for i in range(10):
        fails = i < 3  # first three all-fail
        fail_count += fails
        polars.append([PolarRecord(c, not fails, 1.0 if not fails else None,
                                   0.01 if not fails else None,
                                   -0.05 if not fails else None) for c in grid])
    kept, discarded = filter_airfoils(foils, polars)
    assert len(kept) == 7 and len(discarded) == 3
    assert sorted(map(id, kept + discarded)) == sorted(map(id, foils))


def test_filter_rejects_incomplete_coverage():
    foil = naca4(0.0, 0.4, 0.12)
    grid = condition_grid()
    partial = [PolarRecord(c, True, 1.0, 0.01, -0.05) for c in grid[:65]]
    with pytest.raises(AeroError):
        filter_airfoils([foil], [partial])


# -- solver resolution --------------------------------------------------------


def test_resolve_solver_specs():
    assert resolve_solver(None) is None
    assert resolve_solver("none") is None
    assert isinstance(resolve_solver("mock"), MockSolver)
