"""Class/Shape Transformation (CST) airfoil parameterization.

Each surface is zeta(psi) = C(psi) * S(psi) + psi * zeta_T with the round-nose
class function C(psi) = psi^N1 * (1 - psi)^N2 (N1 = 0.5, N2 = 1.0) and a
Bernstein-basis shape function S. zeta_T is the trailing-edge y offset of the
surface, so the model closes exactly onto the trailing edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Airfoil, resample_airfoil

N1_DEFAULT = 0.5
N2_DEFAULT = 1.0
DEFAULT_DEGREE = 8


class CstError(ValueError):
    """Raised for CST contract violations (bad psi, rank-deficient fits, ...)."""


def cst_class(psi, n1: float = N1_DEFAULT, n2: float = N2_DEFAULT):
    """Class function psi^n1 * (1 - psi)^n2 on [0, 1]."""
    psi = np.asarray(psi, dtype=float)
    if np.any(psi < 0.0) or np.any(psi > 1.0):
        raise CstError("psi must lie in [0, 1]")
    out = psi ** n1 * (1.0 - psi) ** n2
    return out if out.ndim else float(out)


def bernstein(n: int, i: int, u):
    """Bernstein basis polynomial B_{i,n}(u) = C(n,i) u^i (1-u)^(n-i)."""
    if not (0 <= i <= n):
        raise CstError(f"bernstein index i={i} outside 0..{n}")
    u = np.asarray(u, dtype=float)
    out = math.comb(n, i) * u ** i * (1.0 - u) ** (n - i)
    return out if out.ndim else float(out)


def bernstein_matrix(n: int, u: np.ndarray) -> np.ndarray:
    """All Bernstein basis values, shape (len(u), n + 1)."""
    u = np.asarray(u, dtype=float)
    return np.stack([bernstein(n, i, u) for i in range(n + 1)], axis=1)


@dataclass(frozen=True, eq=False)
class CstParams:
    """Per-surface Bernstein coefficients plus trailing-edge offsets."""

    upper: np.ndarray
    lower: np.ndarray
    zeta_te_upper: float = 0.0
    zeta_te_lower: float = 0.0
    n1: float = N1_DEFAULT
    n2: float = N2_DEFAULT

    def __post_init__(self):
        up = np.array(self.upper, dtype=float)
        lo = np.array(self.lower, dtype=float)
        if up.ndim != 1 or lo.ndim != 1:
            raise CstError("coefficient vectors must be 1-d")
        if up.shape != lo.shape:
            raise CstError("upper and lower coefficient vectors must have equal length")
        if up.size < 1:
            raise CstError("need at least one coefficient per surface")
        if not (np.all(np.isfinite(up)) and np.all(np.isfinite(lo))):
            raise CstError("coefficients must be finite")
        up.setflags(write=False)
        lo.setflags(write=False)
        object.__setattr__(self, "upper", up)
        object.__setattr__(self, "lower", lo)

    @property
    def degree(self) -> int:
        return self.upper.size - 1

    def flat(self) -> np.ndarray:
        """Concatenated (upper, lower) coefficients; TE offsets excluded."""
        return np.concatenate((self.upper, self.lower))

    def with_flat(self, c: np.ndarray) -> "CstParams":
        c = np.asarray(c, dtype=float)
        k = self.upper.size
        if c.size != 2 * k:
            raise CstError(f"expected {2 * k} coefficients, got {c.size}")
        return CstParams(c[:k], c[k:], self.zeta_te_upper, self.zeta_te_lower,
                         self.n1, self.n2)


def cst_surface(coeffs: np.ndarray, zeta_te: float, psi,
                n1: float = N1_DEFAULT, n2: float = N2_DEFAULT):
    """Evaluate one CST surface at psi."""
    psi = np.asarray(psi, dtype=float)
    cls = cst_class(psi, n1, n2)
    shape = bernstein_matrix(len(coeffs) - 1, psi) @ np.asarray(coeffs, dtype=float)
    out = cls * shape + psi * zeta_te
    return out if out.ndim else float(out)


def cst_eval(params: CstParams, psi) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate both surfaces at psi; returns (zeta_upper, zeta_lower)."""
    up = cst_surface(params.upper, params.zeta_te_upper, psi, params.n1, params.n2)
    lo = cst_surface(params.lower, params.zeta_te_lower, psi, params.n1, params.n2)
    return up, lo


def cst_airfoil(params: CstParams, n_points: int = 257, *,
                name: str = "cst", provenance: str = "cst_gen",
                canonical: bool = True) -> Airfoil:
    """Build an airfoil from CST parameters on a cosine psi grid.

    canonical=True resamples to cosine arc-length spacing; False keeps the raw
    cosine-psi pairing (points lie exactly on the model).
    """
    m = (n_points + 1) // 2
    psi = 0.5 * (1.0 - np.cos(np.linspace(0.0, np.pi, m)))
    zu, zl = cst_eval(params, psi)
    upper = np.column_stack([psi, zu])[::-1]
    lower = np.column_stack([psi, zl])
    pts = np.vstack([upper, lower[1:]])
    if canonical:
        return resample_airfoil(pts, n_points, name=name, provenance=provenance)
    return Airfoil(pts, name=name, provenance=provenance)


@dataclass(frozen=True)
class CstFit:
    """cst_fit output: recovered parameters plus residual diagnostics."""

    params: CstParams
    max_residual: float
    rms_residual: float
    max_residual_upper: float
    max_residual_lower: float


def _fit_surface(psi: np.ndarray, y: np.ndarray, degree: int,
                 n1: float, n2: float) -> tuple[np.ndarray, float, np.ndarray]:
    zeta_te = float(y[-1])  # model evaluates to zeta_te exactly at psi = 1
    keep = psi >= 1e-6
    ps, ys = psi[keep], y[keep]
    design = cst_class(ps, n1, n2)[:, None] * bernstein_matrix(degree, ps)
    rhs = ys - ps * zeta_te
    coeffs, _, rank, sv = np.linalg.lstsq(design, rhs, rcond=None)
    if rank < degree + 1:
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
        raise CstError(
            f"rank-deficient CST fit: rank {rank} < {degree + 1}, condition {cond:.3e}")
    resid = design @ coeffs - rhs
    return coeffs, zeta_te, resid


def cst_fit(airfoil: Airfoil, degree: int = DEFAULT_DEGREE) -> CstFit:
    """Fit CST coefficients per surface by linear least squares.

    The solve uses an orthogonal factorization (SVD-backed lstsq), never the
    normal equations. TE offsets are read directly from the endpoint y values.
    The fit grid drops psi < 1e-6 to avoid the class-function singularity.
    """
    if degree < 1:
        raise CstError("degree must be at least 1")
    le = airfoil.le_index
    if le <= 0 or le >= airfoil.n_points - 1:
        raise CstError("leading edge must be interior to the contour")
    upper = airfoil.points[: le + 1][::-1]
    lower = airfoil.points[le:]
    resids = []
    surf = []
    for pts in (upper, lower):
        psi = np.clip(pts[:, 0], 0.0, 1.0)
        coeffs, zeta_te, resid = _fit_surface(psi, pts[:, 1], degree,
                                              N1_DEFAULT, N2_DEFAULT)
        surf.append((coeffs, zeta_te))
        resids.append(resid)
    all_resid = np.concatenate(resids)
    params = CstParams(surf[0][0], surf[1][0],
                       zeta_te_upper=surf[0][1], zeta_te_lower=surf[1][1])
    return CstFit(params=params,
                  max_residual=float(np.max(np.abs(all_resid))),
                  rms_residual=float(np.sqrt(np.mean(all_resid ** 2))),
                  max_residual_upper=float(np.max(np.abs(resids[0]))),
                  max_residual_lower=float(np.max(np.abs(resids[1]))))
