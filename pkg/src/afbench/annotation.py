"""PARSEC-style geometric annotation.

Eleven parameters in fixed order: leading-edge radius, upper crest (x, y,
curvature), lower crest (x, y, curvature), trailing-edge y offset, thickness,
and the two trailing-edge surface angles measured from the chord line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .geometry import Airfoil, GeometryError, SurfaceSpline, curvature_at, spline_fit

PARSEC_FIELDS = ("r_le", "x_up", "y_up", "zxx_up", "x_lo", "y_lo", "zxx_lo",
                 "y_te", "dy_te", "alpha_te", "beta_te")

# typical magnitude per parameter; used to normalize residuals downstream
PARSEC_SCALES = {
    "r_le": 0.01, "x_up": 0.1, "y_up": 0.05, "zxx_up": 1.0,
    "x_lo": 0.1, "y_lo": 0.05, "zxx_lo": 1.0,
    "y_te": 0.01, "dy_te": 0.01, "alpha_te": 5.0, "beta_te": 5.0,
}


class AnnotationError(ValueError):
    """Raised when PARSEC extraction is impossible (no crest, flat LE, ...)."""


@dataclass(frozen=True)
class ParsecParams:
    """PARSEC parameter vector. Angles are degrees; everything else chord units."""

    r_le: float
    x_up: float
    y_up: float
    zxx_up: float
    x_lo: float
    y_lo: float
    zxx_lo: float
    y_te: float
    dy_te: float
    alpha_te: float
    beta_te: float

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in PARSEC_FIELDS], dtype=float)

    def as_dict(self) -> dict[str, float]:
        return {f: float(getattr(self, f)) for f in PARSEC_FIELDS}

    @classmethod
    def from_vector(cls, v) -> "ParsecParams":
        v = np.asarray(v, dtype=float)
        if v.shape != (11,):
            raise AnnotationError(f"expected 11 parameters, got shape {v.shape}")
        return cls(**{f: float(v[i]) for i, f in enumerate(PARSEC_FIELDS)})


@dataclass(frozen=True)
class SigmaReport:
    """Per-parameter absolute errors sigma_i = |predicted_i - target_i|."""

    sigma: np.ndarray
    sigma_bar: float

    def as_dict(self) -> dict[str, float]:
        d = {f: float(self.sigma[i]) for i, f in enumerate(PARSEC_FIELDS)}
        d["sigma_bar"] = float(self.sigma_bar)
        return d


def _stationary_points(spl: SurfaceSpline, n_scan: int = 129) -> list[float]:
    """Parameters where y'(t) = 0, found by sign-change bracketing + brentq."""
    ts = np.linspace(spl.t_min, spl.t_max, n_scan)
    dy = spl.bspline.derivative(1)(ts)[:, 1]
    roots = []
    sign = np.sign(dy)
    for i in range(len(ts) - 1):
        if sign[i] == 0.0:
            roots.append(float(ts[i]))
        elif sign[i] * sign[i + 1] < 0.0:
            f = lambda t: float(spl.bspline.derivative(1)(t)[1])
            roots.append(float(brentq(f, ts[i], ts[i + 1], xtol=1e-12)))
    return roots


def _crest(spl: SurfaceSpline, side: str) -> tuple[float, float, float]:
    """Crest (x, y, d2y/dx2) of one surface spline parameterized LE -> TE."""
    candidates = []
    for t in _stationary_points(spl):
        p = spl(t)
        if 1e-6 < p[0] < 1.0 - 1e-6:
            candidates.append((t, float(p[0]), float(p[1])))
    if not candidates:
        raise AnnotationError(f"no interior crest on the {side} surface")
    if side == "upper":
        t, x, y = max(candidates, key=lambda c: c[2])
    else:
        t, x, y = min(candidates, key=lambda c: c[2])
    d1 = spl(t, 1)
    d2 = spl(t, 2)
    if abs(d1[0]) < 1e-12:
        raise AnnotationError(f"vertical tangent at the {side} crest")
    zxx = (d1[0] * d2[1] - d1[1] * d2[0]) / d1[0] ** 3
    return x, y, float(zxx)


def _le_parameter_of(spl: SurfaceSpline) -> float:
    xs = spl.bspline(spl.sites)[:, 0]
    j = int(np.argmin(xs))
    if j == 0 or j == len(xs) - 1:
        raise AnnotationError("leading edge sits at a contour endpoint")
    xprime = lambda t: float(spl.bspline.derivative(1)(t)[0])
    lo, hi = spl.sites[j - 1], spl.sites[j + 1]
    if not xprime(lo) < 0.0 < xprime(hi):
        raise AnnotationError("could not bracket the leading-edge parameter")
    return float(brentq(xprime, lo, hi, xtol=1e-14, rtol=8.9e-16))


def annotate_parsec(airfoil: Airfoil) -> ParsecParams:
    """Extract the 11 PARSEC parameters from a canonical airfoil.

    Crests come from per-surface spline stationary points (bracketing plus
    root refinement); the LE radius is the curvature radius of the
    full-contour spline at its minimum-x parameter. Raises AnnotationError
    for shapes without the required features.
    """
    pts = airfoil.points
    le = airfoil.le_index
    if le <= 0 or le >= airfoil.n_points - 1:
        raise AnnotationError("leading edge must be interior to the contour")

    contour = spline_fit(pts, "chord_length")
    t_le = _le_parameter_of(contour)
    try:
        kappa = curvature_at(contour, t_le)
    except GeometryError as e:
        raise AnnotationError(f"leading edge curvature unavailable: {e}") from e
    if kappa < 1e-9:
        raise AnnotationError("flat leading edge: curvature below 1e-9")
    r_le = 1.0 / kappa
    le_point = contour(t_le)

    upper = spline_fit(pts[: le + 1][::-1], "chord_length")
    lower = spline_fit(pts[le:], "chord_length")
    x_up, y_up, zxx_up = _crest(upper, "upper")
    x_lo, y_lo, zxx_lo = _crest(lower, "lower")

    y_te = 0.5 * (pts[0, 1] + pts[-1, 1])
    dy_te = abs(pts[0, 1] - pts[-1, 1])

    te_mid = 0.5 * (pts[0] + pts[-1])
    chord_angle = math.atan2(te_mid[1] - le_point[1], te_mid[0] - le_point[0])
    du = upper(upper.t_max, 1)
    dl = lower(lower.t_max, 1)
    theta_u = math.atan2(du[1], du[0])
    theta_l = math.atan2(dl[1], dl[0])
    # trailing-wedge convention: both angles positive when the surfaces
    # close toward the chord line
    alpha_te = math.degrees(chord_angle - theta_u)
    beta_te = math.degrees(theta_l - chord_angle)

    return ParsecParams(r_le=r_le, x_up=x_up, y_up=y_up, zxx_up=zxx_up,
                        x_lo=x_lo, y_lo=y_lo, zxx_lo=zxx_lo,
                        y_te=float(y_te), dy_te=float(dy_te),
                        alpha_te=alpha_te, beta_te=beta_te)


def label_error(predicted: ParsecParams, target: ParsecParams) -> SigmaReport:
    """Per-parameter absolute error report, sigma_bar = mean over the 11."""
    sigma = np.abs(predicted.as_vector() - target.as_vector())
    return SigmaReport(sigma=sigma, sigma_bar=float(sigma.mean()))


def batch_label_error(predicted: list[ParsecParams],
                      target: list[ParsecParams]) -> SigmaReport:
    """Mean sigma over paired annotation lists."""
    if len(predicted) != len(target) or not predicted:
        raise AnnotationError("need equal-length, nonempty annotation lists")
    mats = np.stack([label_error(p, t).sigma for p, t in zip(predicted, target)])
    sigma = mats.mean(axis=0)
    return SigmaReport(sigma=sigma, sigma_bar=float(sigma.mean()))
