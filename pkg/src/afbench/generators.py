"""Airfoil generators: NACA families, rational Bezier layer, LHS sampling,
and CST perturbation batches."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .cst import CstParams, cst_airfoil
from .geometry import Airfoil, resample_airfoil

# open-TE thickness polynomial; the closed variant replaces the last
# coefficient so the section thickness vanishes exactly at x = 1
_THICK_COEFFS_OPEN = (0.2969, -0.1260, -0.3516, 0.2843, -0.1015)
_THICK_COEFFS_CLOSED = (0.2969, -0.1260, -0.3516, 0.2843, -0.1036)

# non-reflex five-digit camber lines: family -> (p, m, k1)
NACA5_FAMILIES = {
    "210": (0.05, 0.0580, 361.40),
    "220": (0.10, 0.1260, 51.640),
    "230": (0.15, 0.2025, 15.957),
    "240": (0.20, 0.2900, 6.643),
    "250": (0.25, 0.3910, 3.230),
}


class GeneratorError(ValueError):
    """Raised for out-of-range or unsupported generator parameters."""


def naca_thickness(t: float, x, closed_te: bool = False):
    """Half-thickness distribution y_t(x) of the 4/5-digit families."""
    c = _THICK_COEFFS_CLOSED if closed_te else _THICK_COEFFS_OPEN
    x = np.asarray(x, dtype=float)
    return 5.0 * t * (c[0] * np.sqrt(x) + c[1] * x + c[2] * x ** 2
                      + c[3] * x ** 3 + c[4] * x ** 4)


def naca4_camber(m: float, p: float, x):
    """4-digit camber line and slope at x; returns (y_c, dy_c/dx)."""
    x = np.asarray(x, dtype=float)
    if m == 0.0:
        return np.zeros_like(x), np.zeros_like(x)
    yc = np.where(x < p,
                  m / p ** 2 * (2.0 * p * x - x ** 2),
                  m / (1.0 - p) ** 2 * ((1.0 - 2.0 * p) + 2.0 * p * x - x ** 2))
    dyc = np.where(x < p,
                   2.0 * m / p ** 2 * (p - x),
                   2.0 * m / (1.0 - p) ** 2 * (p - x))
    return yc, dyc


def naca5_camber(designation3: str, x):
    """Five-digit camber line and slope for a 3-digit family code like "230"."""
    if designation3 not in NACA5_FAMILIES:
        raise GeneratorError(f"unsupported five-digit family {designation3!r}; "
                             f"supported: {sorted(NACA5_FAMILIES)}")
    _, m, k1 = NACA5_FAMILIES[designation3]
    x = np.asarray(x, dtype=float)
    yc = np.where(x < m,
                  k1 / 6.0 * (x ** 3 - 3.0 * m * x ** 2 + m ** 2 * (3.0 - m) * x),
                  k1 * m ** 3 / 6.0 * (1.0 - x))
    dyc = np.where(x < m,
                   k1 / 6.0 * (3.0 * x ** 2 - 6.0 * m * x + m ** 2 * (3.0 - m)),
                   -k1 * m ** 3 / 6.0 * np.ones_like(x))
    return yc, dyc


def _assemble_cambered(xc: np.ndarray, yc: np.ndarray, dyc: np.ndarray,
                       yt: np.ndarray) -> np.ndarray:
    theta = np.arctan(dyc)
    xu = xc - yt * np.sin(theta)
    yu = yc + yt * np.cos(theta)
    xl = xc + yt * np.sin(theta)
    yl = yc - yt * np.cos(theta)
    upper = np.column_stack([xu, yu])[::-1]
    lower = np.column_stack([xl, yl])
    return np.vstack([upper, lower[1:]])


def naca4(m: float, p: float, t: float, n_points: int = 257, *,
          closed_te: bool = False, name: str | None = None) -> Airfoil:
    """NACA 4-digit section, canonicalized to n_points.

    m: max camber in [0, 0.095]; p: camber position in [0.05, 0.95] (ignored
    for symmetric sections, m = 0); t: thickness in (0, 0.3].
    """
    if not 0.0 <= m <= 0.095:
        raise GeneratorError(f"camber m={m} outside [0, 0.095]")
    if m > 0.0 and not 0.05 <= p <= 0.95:
        raise GeneratorError(f"camber position p={p} outside [0.05, 0.95]")
    if not 0.0 < t <= 0.3:
        raise GeneratorError(f"thickness t={t} outside (0, 0.3]")
    xc = 0.5 * (1.0 - np.cos(np.linspace(0.0, np.pi, 161)))
    yt = naca_thickness(t, xc, closed_te)
    yc, dyc = naca4_camber(m, p, xc)
    raw = _assemble_cambered(xc, yc, dyc, yt)
    if name is None:
        name = f"naca{round(m * 100):1d}{round(p * 10):1d}{round(t * 100):02d}"
    return resample_airfoil(raw, n_points, name=name, provenance="naca")


def naca4_from_digits(digits: str, n_points: int = 257, *,
                      closed_te: bool = False) -> Airfoil:
    """Build from a designation string like "2412" or "0012"."""
    if not re.fullmatch(r"\d{4}", digits):
        raise GeneratorError(f"invalid 4-digit designation {digits!r}")
    m = int(digits[0]) / 100.0
    p = int(digits[1]) / 10.0
    t = int(digits[2:]) / 100.0
    if m == 0.0:
        p = 0.0
    return naca4(m, p, t, n_points, closed_te=closed_te, name=f"naca{digits}")


def naca5(designation: str, n_points: int = 257, *,
          closed_te: bool = False) -> Airfoil:
    """NACA 5-digit section for the standard non-reflex families 210xx-250xx."""
    if not re.fullmatch(r"\d{5}", designation):
        raise GeneratorError(f"invalid 5-digit designation {designation!r}")
    family, reflex, tt = designation[:2], designation[2], designation[3:]
    if reflex != "0":
        raise GeneratorError(f"reflex camber lines (designation {designation}) "
                             "are not supported")
    code = family + reflex
    t = int(tt) / 100.0
    if t <= 0.0 or t > 0.3:
        raise GeneratorError(f"thickness {t} outside (0, 0.3]")
    xc = 0.5 * (1.0 - np.cos(np.linspace(0.0, np.pi, 161)))
    yt = naca_thickness(t, xc, closed_te)
    yc, dyc = naca5_camber(code, xc)
    raw = _assemble_cambered(xc, yc, dyc, yt)
    return resample_airfoil(raw, n_points, name=f"naca{designation}",
                            provenance="naca")


@dataclass(frozen=True, eq=False)
class BezierControl:
    """Rational Bezier layer inputs: control points, weights, parameter grid."""

    points: np.ndarray   # (n + 1, 2)
    weights: np.ndarray  # (n + 1,), strictly positive
    u: np.ndarray        # (m + 1,), nondecreasing in [0, 1]

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        w = np.array(self.weights, dtype=float)
        u = np.array(self.u, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise GeneratorError("control polygon must be (n + 1, 2) with n >= 1")
        if w.shape != (pts.shape[0],):
            raise GeneratorError("weights must match control point count")
        if np.any(w <= 0.0):
            raise GeneratorError("weights must be strictly positive")
        if u.ndim != 1 or u.size < 1:
            raise GeneratorError("parameter grid must be a 1-d array")
        if np.any(u < 0.0) or np.any(u > 1.0):
            raise GeneratorError("parameters must lie in [0, 1]")
        if np.any(np.diff(u) < 0.0):
            raise GeneratorError("parameters must be nondecreasing")
        for arr, key in ((pts, "points"), (w, "weights"), (u, "u")):
            arr.setflags(write=False)
            object.__setattr__(self, key, arr)

    @property
    def degree(self) -> int:
        return self.points.shape[0] - 1


def bezier_layer(ctrl: BezierControl) -> np.ndarray:
    """Evaluate the rational Bezier curve at every parameter in ctrl.u.

    X(u) = sum_i B_{i,n}(u) w_i P_i / sum_i B_{i,n}(u) w_i.
    """
    n = ctrl.degree
    u = ctrl.u
    basis = np.stack([math.comb(n, i) * u ** i * (1.0 - u) ** (n - i)
                      for i in range(n + 1)], axis=1)
    wb = basis * ctrl.weights[None, :]
    denom = wb.sum(axis=1)
    return (wb @ ctrl.points) / denom[:, None]


@dataclass(frozen=True, eq=False)
class LhsPlan:
    """Latin hypercube plan: per-dimension ranges, sample count, seed."""

    ranges: np.ndarray  # (d, 2) rows of (low, high), low < high
    n_samples: int
    seed: int = 0

    def __post_init__(self):
        r = np.array(self.ranges, dtype=float)
        if r.ndim != 2 or r.shape[1] != 2 or r.shape[0] < 1:
            raise GeneratorError("ranges must be a (d, 2) array")
        if np.any(r[:, 0] >= r[:, 1]):
            raise GeneratorError("each range needs low < high")
        if self.n_samples < 1:
            raise GeneratorError("n_samples must be positive")
        r.setflags(write=False)
        object.__setattr__(self, "ranges", r)

    @property
    def dims(self) -> int:
        return self.ranges.shape[0]


def lhs_sample(plan: LhsPlan) -> np.ndarray:
    """Latin hypercube draw, shape (n_samples, d).

    Per dimension: one uniform draw inside each of n_samples equal strata,
    randomly permuted. Fully determined by plan.seed.
    """
    rng = np.random.default_rng(plan.seed)
    n = plan.n_samples
    out = np.empty((n, plan.dims))
    for d in range(plan.dims):
        perm = rng.permutation(n)
        offsets = rng.random(n)
        unit = (perm + offsets) / n
        lo, hi = plan.ranges[d]
        out[:, d] = lo + unit * (hi - lo)
    return out


def cst_perturb_generate(base: CstParams, n: int, band: float = 0.10,
                         seed: int = 0, *, floor: float = 0.01,
                         n_points: int = 257,
                         name_prefix: str = "cst") -> list[Airfoil]:
    """Generate n airfoils by LHS perturbation of the base CST coefficients.

    Each Bernstein coefficient p gets the range
    [p - band * max(|p|, floor), p + band * max(|p|, floor)]; TE offsets stay
    fixed. Rows evaluate independently, so any evaluation order gives the
    same batch for a given seed.
    """
    if n < 1:
        raise GeneratorError("n must be positive")
    if band <= 0.0:
        raise GeneratorError("band must be positive")
    center = base.flat()
    half = band * np.maximum(np.abs(center), floor)
    ranges = np.column_stack([center - half, center + half])
    plan = LhsPlan(ranges=ranges, n_samples=n, seed=seed)
    rows = lhs_sample(plan)
    out = []
    for i in range(n):
        params = base.with_flat(rows[i])
        out.append(cst_airfoil(params, n_points,
                               name=f"{name_prefix}_{i:04d}", provenance="cst_gen"))
    return out
