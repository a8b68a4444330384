"""Population and per-airfoil quality metrics.

smoothness: sum of perpendicular distances from each interior point to the
line through its neighbors (lower is smoother).
diversity: mean log-determinant of an RBF kernel over random subsets of the
flattened coordinate population.
success_rate: fraction of airfoils whose converged share over the work
condition grid strictly exceeds a threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .annotation import PARSEC_FIELDS
from .geometry import Airfoil


class MetricError(ValueError):
    """Raised for degenerate metric inputs."""


def _points_of(obj) -> np.ndarray:
    if isinstance(obj, Airfoil):
        return obj.points
    pts = np.asarray(obj, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise MetricError(f"expected (n, 2) points, got shape {pts.shape}")
    return pts


def smoothness(airfoil) -> float:
    """Sum over interior points of the distance to the neighbor chord line."""
    pts = _points_of(airfoil)
    if pts.shape[0] < 3:
        raise MetricError("smoothness needs at least 3 points")
    a = pts[:-2]
    b = pts[1:-1]
    c = pts[2:]
    base = c - a
    norms = np.hypot(base[:, 0], base[:, 1])
    if np.any(norms < 1e-12):
        raise MetricError("coincident neighbor points make the chord line degenerate")
    cross = base[:, 0] * (b - a)[:, 1] - base[:, 1] * (b - a)[:, 0]
    return float(np.sum(np.abs(cross) / norms))


@dataclass(frozen=True)
class DiversityConfig:
    """Subset size N, draw count n, RBF bandwidth policy, jitter, seed."""

    subset_size: int = 16
    n_draws: int = 100
    bandwidth: str | float = "median_pairwise"
    jitter: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.subset_size < 2:
            raise MetricError("subset_size must be at least 2")
        if self.n_draws < 1:
            raise MetricError("n_draws must be positive")
        if not (isinstance(self.bandwidth, str) and self.bandwidth == "median_pairwise") \
                and not (isinstance(self.bandwidth, (int, float)) and self.bandwidth > 0):
            raise MetricError("bandwidth must be 'median_pairwise' or a positive number")
        if not 0.0 < self.jitter <= 1e-6:
            raise MetricError("jitter must lie in (0, 1e-6]")


def _flatten_population(population) -> np.ndarray:
    if len(population) == 0:
        raise MetricError("empty population")
    rows = [np.ravel(_points_of(a)) for a in population]
    lens = {r.size for r in rows}
    if len(lens) != 1:
        raise MetricError("population airfoils must share a point count")
    X = np.stack(rows)
    if not np.all(np.isfinite(X)):
        raise MetricError("population contains non-finite coordinates")
    return X


def _subset_logdet(X: np.ndarray, idx: np.ndarray, h: float, jitter: float) -> float:
    sub = X[idx]
    d = squareform(pdist(sub))
    L = np.exp(-(d ** 2) / (2.0 * h * h))
    L[np.diag_indices_from(L)] += jitter
    chol = np.linalg.cholesky(L)
    return float(2.0 * np.sum(np.log(np.diag(chol))))


def _bandwidth(X: np.ndarray, cfg: DiversityConfig) -> float:
    if isinstance(cfg.bandwidth, (int, float)) and not isinstance(cfg.bandwidth, bool):
        return float(cfg.bandwidth)
    d = pdist(X)
    h = float(np.median(d))
    if h <= 0.0:
        raise MetricError("degenerate population: median pairwise distance is zero")
    return h


def diversity_fixed_subsets(population, subsets, cfg: DiversityConfig = DiversityConfig()) -> float:
    """Mean log det over caller-chosen index subsets (deterministic helper)."""
    X = _flatten_population(population)
    h = _bandwidth(X, cfg)
    vals = [_subset_logdet(X, np.asarray(idx, dtype=int), h, cfg.jitter)
            for idx in subsets]
    if not vals:
        raise MetricError("no subsets given")
    return float(np.mean(vals))


def diversity(population, cfg: DiversityConfig = DiversityConfig()) -> float:
    """Mean log det of the RBF kernel over cfg.n_draws random subsets.

    Subset draws use independent streams seeded by (seed, draw index), so the
    value is reproducible regardless of evaluation order.
    """
    X = _flatten_population(population)
    if len(population) <= cfg.subset_size:
        raise MetricError(
            f"population size {len(population)} must exceed subset_size {cfg.subset_size}")
    h = _bandwidth(X, cfg)
    vals = np.empty(cfg.n_draws)
    for i in range(cfg.n_draws):
        rng = np.random.default_rng([cfg.seed, i])
        idx = rng.choice(X.shape[0], size=cfg.subset_size, replace=False)
        vals[i] = _subset_logdet(X, idx, h, cfg.jitter)
    return float(vals.mean())


def success_rate(convergence, threshold: float = 0.60) -> float:
    """Fraction of rows whose mean convergence strictly exceeds threshold.

    convergence: sequence of equal-length boolean vectors (one per airfoil,
    one entry per work condition).
    """
    rows = [np.asarray(r, dtype=bool) for r in convergence]
    if not rows:
        raise MetricError("success_rate needs at least one airfoil")
    lens = {r.shape for r in rows}
    if len(lens) != 1 or rows[0].ndim != 1 or rows[0].size == 0:
        raise MetricError("convergence rows must be nonempty 1-d vectors of equal length")
    frac = np.array([r.mean() for r in rows])
    return float(np.mean(frac > threshold))


def format_report(rows: list[dict], *, include_success: bool | None = None) -> str:
    """Tabular text report: sigma_1..sigma_11, sigma_bar, D, M (and R).

    Display convention: sigma and M columns are shown in units of 0.01
    (multiplied by 100); stored values everywhere else stay raw. R is shown
    as a percentage when any row carries a success rate.
    """
    if include_success is None:
        include_success = any(r.get("success_rate") is not None for r in rows)
    heads = ["model"] + [f"s{i + 1}" for i in range(len(PARSEC_FIELDS))] + ["s_bar", "D", "M"]
    if include_success:
        heads.append("R")
    table = [heads]
    for r in rows:
        sigma = r.get("sigma")
        cells = [str(r.get("label", "-"))]
        if sigma is None:
            cells += ["-"] * (len(PARSEC_FIELDS) + 1)
        else:
            sigma = np.asarray(sigma, dtype=float)
            cells += [f"{v * 100.0:.3f}" for v in sigma]
            cells += [f"{float(np.mean(sigma)) * 100.0:.3f}"]
        div = r.get("diversity")
        cells += ["-" if div is None else f"{div:.2f}"]
        smo = r.get("smoothness")
        cells += ["-" if smo is None else f"{smo * 100.0:.3f}"]
        if include_success:
            sr = r.get("success_rate")
            cells += ["-" if sr is None else f"{sr * 100.0:.1f}"]
        table.append(cells)
    widths = [max(len(row[i]) for row in table) for i in range(len(heads))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in table]
    note = "sigma and M columns are x0.01; R is %"
    return "\n".join([lines[0], "-" * len(lines[0])] + lines[1:] + [note])
