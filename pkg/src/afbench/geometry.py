"""Canonical airfoil representation and parametric spline utilities.

Airfoils are stored as closed Selig-order contours: trailing edge, over the
upper surface to the leading edge, back along the lower surface to the
trailing edge. The canonical resolution is 257 points at cosine arc-length
spacing with the leading edge landing exactly on the middle sample.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import BSpline, make_interp_spline
from scipy.optimize import brentq, minimize_scalar

log = logging.getLogger("afbench.geometry")

CANONICAL_POINTS = 257
DEFAULT_KEYPOINT_COUNT = 13

PROVENANCES = ("uiuc", "naca", "cst_gen", "bezier_gen", "diffusion_gen", "manual", "edited")

# Gauss-Legendre rule reused by all arc-length quadrature (exact for the
# near-polynomial speed of a cubic segment to ~1e-15 relative).
_GL_NODES, _GL_WEIGHTS = leggauss(8)


class GeometryError(ValueError):
    """Raised for contract violations in geometric operations."""


def _as_points(obj) -> np.ndarray:
    if isinstance(obj, Airfoil):
        return obj.points
    pts = np.asarray(obj, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GeometryError(f"expected an (n, 2) point array, got shape {pts.shape}")
    return pts


@dataclass(frozen=True, eq=False)
class Airfoil:
    """Immutable airfoil contour.

    points: (n, 2) float64 array in Selig order.
    name: free-form identifier.
    provenance: one of PROVENANCES.
    """

    points: np.ndarray
    name: str = "unnamed"
    provenance: str = "manual"

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise GeometryError(f"airfoil points must be (n, 2), got shape {pts.shape}")
        if pts.shape[0] < 3:
            raise GeometryError("airfoil needs at least 3 points")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("airfoil points must be finite")
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(seg < 1e-14):
            i = int(np.argmax(seg < 1e-14))
            raise GeometryError(f"duplicate consecutive points at index {i}")
        if self.provenance not in PROVENANCES:
            raise GeometryError(f"unknown provenance {self.provenance!r}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def le_index(self) -> int:
        # argmin breaks ties toward the smaller index
        return int(np.argmin(self.points[:, 0]))

    def canonical_violations(self, n_points: int = CANONICAL_POINTS) -> list[str]:
        """Check Selig-order canonical invariants; empty list means valid."""
        pts = self.points
        out = []
        if pts.shape[0] != n_points:
            out.append(f"expected {n_points} points, got {pts.shape[0]}")
        x = pts[:, 0]
        if x.min() < -1e-9 or x.max() > 1 + 1e-9:
            out.append("x outside [0, 1]")
        if abs(x[0] - x[-1]) > 1e-9:
            out.append("trailing edge x mismatch between endpoints")
        if x[0] < x.max() - 1e-9:
            out.append("contour does not start at the trailing edge")
        le = self.le_index
        if le == 0 or le == pts.shape[0] - 1:
            out.append("leading edge at contour endpoint")
        else:
            upper = pts[1:le, 1]
            lower = pts[le + 1 : -1, 1]
            if upper.size and lower.size and upper.mean() < lower.mean():
                out.append("upper surface does not precede lower surface")
        return out

    def validate_canonical(self, n_points: int = CANONICAL_POINTS) -> None:
        bad = self.canonical_violations(n_points)
        if bad:
            raise GeometryError("; ".join(bad))

    @property
    def is_canonical(self) -> bool:
        return not self.canonical_violations()

    def upper_surface(self) -> np.ndarray:
        """Upper surface, leading edge to trailing edge (ascending x)."""
        return self.points[: self.le_index + 1][::-1]

    def lower_surface(self) -> np.ndarray:
        """Lower surface, leading edge to trailing edge."""
        return self.points[self.le_index :]

    def with_meta(self, name: str | None = None, provenance: str | None = None) -> "Airfoil":
        return Airfoil(self.points,
                       self.name if name is None else name,
                       self.provenance if provenance is None else provenance)


@dataclass(frozen=True, eq=False)
class SurfaceSpline:
    """Interpolating parametric spline through a point sequence.

    Wraps a vector-valued BSpline; sites are the parameter values assigned to
    the input points. Evaluation outside [sites[0], sites[-1]] is an error
    (no extrapolation).
    """

    bspline: BSpline
    sites: np.ndarray
    degree: int
    parameterization: str
    _d1: BSpline = field(repr=False, default=None)
    _d2: BSpline = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_d1", self.bspline.derivative(1))
        object.__setattr__(self, "_d2", self.bspline.derivative(2))

    @property
    def knots(self) -> np.ndarray:
        return self.bspline.t

    @property
    def coefficients(self) -> np.ndarray:
        return self.bspline.c

    @property
    def t_min(self) -> float:
        return float(self.sites[0])

    @property
    def t_max(self) -> float:
        return float(self.sites[-1])

    def _check_domain(self, t):
        t = np.asarray(t, dtype=float)
        eps = 1e-12 * max(1.0, abs(self.t_max))
        if np.any(t < self.t_min - eps) or np.any(t > self.t_max + eps):
            raise GeometryError(
                f"parameter outside spline domain [{self.t_min}, {self.t_max}]")
        return np.clip(t, self.t_min, self.t_max)

    def __call__(self, t, order: int = 0):
        t = self._check_domain(t)
        if order == 0:
            return self.bspline(t)
        if order == 1:
            return self._d1(t)
        if order == 2:
            return self._d2(t)
        raise GeometryError(f"derivative order must be 0, 1 or 2, got {order}")


def spline_fit(points, parameterization: str = "centripetal", degree: int = 3) -> SurfaceSpline:
    """Fit an interpolating spline through points.

    parameterization: "centripetal" (default) or "chord_length".
    degree clamps to n-1 for short point runs; curvature needs degree >= 2.
    """
    pts = _as_points(points)
    n = pts.shape[0]
    if n < 3:
        raise GeometryError("spline fit needs at least 3 points")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if np.any(seg < 1e-14):
        raise GeometryError("repeated consecutive points give a singular parameterization")
    if parameterization == "centripetal":
        steps = np.sqrt(seg)
    elif parameterization == "chord_length":
        steps = seg
    else:
        raise GeometryError(f"unknown parameterization {parameterization!r}")
    t = np.concatenate(([0.0], np.cumsum(steps)))
    t /= t[-1]
    k = min(int(degree), n - 1)
    if k < 2:
        raise GeometryError("spline degree must be at least 2")
    bsp = make_interp_spline(t, pts, k=k)
    return SurfaceSpline(bsp, sites=t, degree=k, parameterization=parameterization)


def spline_eval(spline: SurfaceSpline, t, order: int = 0):
    """Evaluate a SurfaceSpline (or its 1st/2nd derivative) at parameter t."""
    return spline(t, order)


def curvature_at(spline: SurfaceSpline, t) -> float:
    """Unsigned planar curvature |x'y'' - y'x''| / (x'^2 + y'^2)^(3/2)."""
    d1 = spline(t, 1)
    d2 = spline(t, 2)
    speed_sq = d1[0] ** 2 + d1[1] ** 2
    if speed_sq < 1e-24:
        raise GeometryError("curvature undefined at a stationary point (|r'| < 1e-12)")
    return float(abs(d1[0] * d2[1] - d1[1] * d2[0]) / speed_sq ** 1.5)


def _segment_arcs(spline: SurfaceSpline, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Arc length of spline over each [a_i, b_i] by Gauss-Legendre quadrature."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    t = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    d = spline._d1(t.ravel()).reshape(t.shape + (2,))
    speed = np.hypot(d[..., 0], d[..., 1])
    return half * (speed @ _GL_WEIGHTS)


def _cumulative_arc(spline: SurfaceSpline) -> np.ndarray:
    """Arc length from the first site to every site."""
    s = spline.sites
    arcs = _segment_arcs(spline, s[:-1], s[1:])
    return np.concatenate(([0.0], np.cumsum(arcs)))


def _invert_arc(spline: SurfaceSpline, cum: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Solve arc(t) = s for each target s via bracketed Newton on the sites table."""
    sites = spline.sites
    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(sites) - 2)
    lo = sites[idx]
    hi = sites[idx + 1]
    frac = (targets - cum[idx]) / np.maximum(cum[idx + 1] - cum[idx], 1e-300)
    t = lo + frac * (hi - lo)
    for _ in range(6):
        resid = cum[idx] + _segment_arcs(spline, lo, t) - targets
        d = spline._d1(t)
        speed = np.hypot(d[:, 0], d[:, 1])
        step = resid / np.maximum(speed, 1e-300)
        t = np.clip(t - step, lo, hi)
        if np.max(np.abs(step)) < 1e-14:
            break
    return t


def _le_parameter(spline: SurfaceSpline) -> float:
    """Parameter of minimum x on the contour spline (x'(t) root near the min site)."""
    xs = spline.bspline(spline.sites)[:, 0]
    j = int(np.argmin(xs))
    if j == 0 or j == len(xs) - 1:
        raise GeometryError("minimum-x point sits at a contour endpoint")
    lo, hi = spline.sites[j - 1], spline.sites[j + 1]
    xprime = lambda t: spline._d1(t)[0]
    flo, fhi = xprime(lo), xprime(hi)
    if flo < 0 < fhi:
        return float(brentq(xprime, lo, hi, xtol=1e-14, rtol=8.9e-16))
    # flat or noisy neighborhood: fall back to bounded minimization
    res = minimize_scalar(lambda t: spline.bspline(t)[0], bracket=None,
                          bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-14})
    return float(res.x)


def _cosine_fractions(m: int) -> np.ndarray:
    return 0.5 * (1.0 - np.cos(np.linspace(0.0, np.pi, m)))


def _place_samples(spline: SurfaceSpline, n: int) -> np.ndarray:
    """One arc-length cosine placement pass over the contour spline."""
    cum = _cumulative_arc(spline)
    total = cum[-1]
    xs = spline.bspline(spline.sites)[:, 0]
    j = int(np.argmin(xs))
    if j == 0 or j == len(xs) - 1:
        # open curve: single cosine arc end to end
        targets = _cosine_fractions(n) * total
        t = _invert_arc(spline, cum, targets[1:-1])
        t = np.concatenate(([spline.t_min], t, [spline.t_max]))
        return spline.bspline(t)

    t_le = _le_parameter(spline)
    jle = int(np.clip(np.searchsorted(spline.sites, t_le) - 1, 0, len(spline.sites) - 2))
    s_le = float(cum[jle] + _segment_arcs(spline, spline.sites[jle], t_le)[0])
    m = (n + 1) // 2
    upper_targets = _cosine_fractions(m) * s_le
    lower_targets = s_le + _cosine_fractions(m) * (total - s_le)
    targets = np.concatenate((upper_targets[1:-1], lower_targets[1:-1]))
    t = _invert_arc(spline, cum, targets)
    t_all = np.concatenate(([spline.t_min], t[: m - 2], [t_le], t[m - 2 :], [spline.t_max]))
    pts = spline.bspline(t_all)
    return pts


def resample_airfoil(raw_points, n: int = CANONICAL_POINTS, *,
                     name: str | None = None, provenance: str | None = None,
                     max_passes: int = 8, tol: float = 5e-12) -> Airfoil:
    """Resample a contour to n points at cosine arc-length spacing.

    Input must be in Selig order with at least 10 points; n must be odd and
    >= 65 so the leading edge lands on a sample. The contour is normalized to
    unit chord (x in [0, 1], y scaled by the same factor) with the leading
    edge translated to the origin. Endpoints are sampling sites, never
    interpolated. Placement iterates to a fixed point so resampling a
    canonical airfoil reproduces it.
    """
    if isinstance(raw_points, Airfoil):
        if name is None:
            name = raw_points.name
        if provenance is None:
            provenance = raw_points.provenance
    pts = np.array(_as_points(raw_points), dtype=float)
    if pts.shape[0] < 10:
        raise GeometryError(f"resampling needs at least 10 points, got {pts.shape[0]}")
    if n < 65 or n % 2 == 0:
        raise GeometryError(f"point count must be odd and >= 65, got {n}")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("input points must be finite")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if np.any(seg < 1e-14):
        i = int(np.argmax(seg < 1e-14))
        raise GeometryError(f"duplicate consecutive points at index {i} (degenerate contour)")

    chord = pts[:, 0].max() - pts[:, 0].min()
    if chord < 1e-9:
        raise GeometryError("zero chord: x extent below 1e-9")
    pts[:, 0] = (pts[:, 0] - pts[:, 0].min()) / chord
    pts[:, 1] = pts[:, 1] / chord

    # closed Selig contours get their trailing-edge x snapped to a common
    # value; the shorter endpoint slides along its end tangent so no kink
    # is introduced
    if abs(pts[0, 0] - pts[-1, 0]) <= 2e-3:
        te_x = max(pts[0, 0], pts[-1, 0])
        for end, prev in ((0, 1), (-1, -2)):
            dx = te_x - pts[end, 0]
            if dx != 0.0:
                seg = pts[end] - pts[prev]
                if abs(seg[0]) > 1e-12:
                    pts[end, 1] += dx * seg[1] / seg[0]
                pts[end, 0] = te_x

    current = pts
    for _ in range(max_passes):
        # chord-length parameterization keeps t locally proportional to arc
        # length, so the fitted curve stays C2 under cosine-clustered samples
        spl = spline_fit(current, "chord_length", 3)
        new = _place_samples(spl, n)
        moved = np.inf
        if new.shape == current.shape:
            moved = float(np.max(np.abs(new - current)))
        if moved < tol:
            # already a fixed point; keep the pre-pass samples so a
            # canonical input round-trips bitwise (stable content hashes)
            break
        current = new

    span = current[:, 0].max() - current[:, 0].min()
    current[:, 0] = (current[:, 0] - current[:, 0].min()) / span
    current[:, 1] = current[:, 1] / span
    # UIUC convention: leading edge at the origin. Keeps y zero where the
    # class function vanishes, so CST fits are not biased at psi = 0.
    current[:, 1] -= current[int(np.argmin(current[:, 0])), 1]
    return Airfoil(current,
                   name=name if name is not None else "unnamed",
                   provenance=provenance if provenance is not None else "manual")


def canonicalize(points_or_airfoil, n: int = CANONICAL_POINTS, **kw) -> Airfoil:
    """Resample to the canonical representation (alias used by pipelines)."""
    return resample_airfoil(points_or_airfoil, n, **kw)


def keypoint_indices(n_points: int, le_index: int, count: int = DEFAULT_KEYPOINT_COUNT) -> np.ndarray:
    """Uniform-stride index subset containing both TE endpoints and the LE index."""
    if count < 3:
        raise GeometryError("keypoint count must be at least 3")
    if count > n_points:
        raise GeometryError(f"keypoint count {count} exceeds point count {n_points}")
    if le_index <= 0 or le_index >= n_points - 1:
        idx = np.round(np.linspace(0, n_points - 1, count)).astype(int)
        return idx
    n_upper = int(round((count - 1) * le_index / (n_points - 1)))
    n_upper = min(max(n_upper, 1), count - 2)
    upper = np.round(np.linspace(0, le_index, n_upper + 1)).astype(int)
    lower = np.round(np.linspace(le_index, n_points - 1, count - n_upper)).astype(int)
    idx = np.concatenate((upper, lower[1:]))
    if len(np.unique(idx)) != count:
        raise GeometryError("keypoint stride collapsed; too many keypoints for point count")
    return idx


def extract_keypoints(airfoil: Airfoil, count: int = DEFAULT_KEYPOINT_COUNT) -> np.ndarray:
    """Keypoint coordinates: an exact index subsequence of the contour."""
    idx = keypoint_indices(airfoil.n_points, airfoil.le_index, count)
    return airfoil.points[idx]
