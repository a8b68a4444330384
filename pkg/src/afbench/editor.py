"""Keypoint (EK) and physical-parameter (EP) editing via penalized CST refit.

An edit is a damped Gauss-Newton minimization over CST coefficients of

    J(c) = lam_kp * sum ||(K_j(c) - K_j*) / 0.01||^2
         + lam_param * sum ((pi_i(c) - pi_i*) / s_i)^2
         + lam_reg * ||c - c_src||^2

where K_j are contour keypoints of the evaluated candidate, pi_i its PARSEC
values with typical scales s_i, and c_src the CST fit of the source. Only
steps that decrease J are accepted, so the objective trace is nonincreasing.
Targets are soft: an unreachable request degrades to the closest feasible
shape and reports status "infeasible" instead of failing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .annotation import (PARSEC_FIELDS, PARSEC_SCALES, AnnotationError,
                         ParsecParams, SigmaReport, annotate_parsec)
from .cst import CstError, CstParams, cst_airfoil, cst_fit
from .geometry import (CANONICAL_POINTS, Airfoil, GeometryError,
                       extract_keypoints, keypoint_indices, resample_airfoil)

KP_SCALE = 0.01
FD_STEP = 1e-6
INFEASIBLE_RESIDUAL = 0.5   # binding-target residual, in scale units
BINDING_FRACTION = 0.1      # weight >= this fraction of the max counts as binding
_SCALE_VEC = np.array([PARSEC_SCALES[f] for f in PARSEC_FIELDS])


class EditError(ValueError):
    """Raised for invalid requests or undefined objectives."""


@dataclass(frozen=True)
class EditWeights:
    lambda_kp: float = 1.0
    lambda_param: float = 1.0
    lambda_reg: float = 1e-4

    def __post_init__(self):
        for name in ("lambda_kp", "lambda_param", "lambda_reg"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise EditError(f"{name} must be finite and nonnegative, got {v}")


@dataclass(frozen=True)
class EditLimits:
    max_iter: int = 40
    tol: float = 1e-4

    def __post_init__(self):
        if self.max_iter < 1:
            raise EditError("max_iter must be at least 1")
        if not (np.isfinite(self.tol) and self.tol > 0):
            raise EditError("tol must be positive")


@dataclass(frozen=True)
class EditRequest:
    source: Airfoil
    target_keypoints: np.ndarray | None = None
    target_parsec: dict[str, float] = field(default_factory=dict)
    weights: EditWeights = EditWeights()
    limits: EditLimits = EditLimits()

    def __post_init__(self):
        if self.target_keypoints is None and not self.target_parsec:
            raise EditError("request needs target_keypoints or target_parsec")
        if self.target_keypoints is not None:
            kp = np.asarray(self.target_keypoints, dtype=float)
            if kp.ndim != 2 or kp.shape[1] != 2 or kp.shape[0] < 3:
                raise EditError("target_keypoints must be an (n>=3, 2) array")
            if not np.all(np.isfinite(kp)):
                raise EditError("target_keypoints must be finite")
            object.__setattr__(self, "target_keypoints", kp)
        for k, v in self.target_parsec.items():
            if k not in PARSEC_FIELDS:
                raise EditError(f"unknown PARSEC field {k!r}")
            if not np.isfinite(v):
                raise EditError(f"target for {k!r} must be finite")


@dataclass(frozen=True)
class EditResult:
    airfoil: Airfoil
    achieved: ParsecParams
    sigma: SigmaReport
    trace: np.ndarray
    status: str          # converged | iteration_limit | infeasible
    iterations: int


@dataclass(frozen=True)
class EditProgress:
    """One accepted optimizer step, as delivered to on_iteration callbacks."""
    iteration: int
    objective: float
    sigma_bar: float
    airfoil: Airfoil


class _Objective:
    """Residual vector r(c) with J = r.r, plus failure-tolerant evaluation."""

    def __init__(self, request: EditRequest, c_src: np.ndarray, base: CstParams):
        self.base = base
        self.c_src = c_src
        w = request.weights
        self.kp_targets = request.target_keypoints
        self.w_kp = np.sqrt(w.lambda_kp)
        self.w_reg = np.sqrt(w.lambda_reg)
        if self.kp_targets is not None:
            self.kp_idx = keypoint_indices(CANONICAL_POINTS,
                                           (CANONICAL_POINTS - 1) // 2,
                                           self.kp_targets.shape[0])
        mask = np.zeros(len(PARSEC_FIELDS), dtype=bool)
        tvec = np.zeros(len(PARSEC_FIELDS))
        for k, v in request.target_parsec.items():
            mask[PARSEC_FIELDS.index(k)] = True
            tvec[PARSEC_FIELDS.index(k)] = v
        self.p_mask = mask
        self.p_targets = tvec
        self.w_param = np.sqrt(w.lambda_param)
        self.need_parsec = bool(mask.any()) and w.lambda_param > 0
        self.last_pi = None
        self.last_foil = None

    def foil_of(self, c: np.ndarray) -> Airfoil:
        """Candidate geometry: one resample pass keeps the keypoint indices
        aligned with canonical sampling at a fraction of the full cost."""
        raw = cst_airfoil(self.base.with_flat(c), canonical=False)
        return resample_airfoil(raw.points, CANONICAL_POINTS,
                                provenance="edited", max_passes=1, tol=0.0)

    def target_parts(self, foil: Airfoil) -> list[np.ndarray]:
        """Weighted target residual blocks for a given geometry."""
        parts = []
        if self.kp_targets is not None:
            kp = foil.points[self.kp_idx]
            parts.append(self.w_kp * ((kp - self.kp_targets) / KP_SCALE).ravel())
        if self.need_parsec:
            pi = annotate_parsec(foil).as_vector()
            self.last_pi = pi
            d = (pi[self.p_mask] - self.p_targets[self.p_mask]) / _SCALE_VEC[self.p_mask]
            parts.append(self.w_param * d)
        return parts

    def residual(self, c: np.ndarray) -> np.ndarray:
        foil = self.foil_of(c)
        parts = self.target_parts(foil)
        parts.append(self.w_reg * (c - self.c_src))
        self.last_foil = foil
        return np.concatenate(parts)

    def try_residual(self, c: np.ndarray) -> np.ndarray | None:
        try:
            r = self.residual(c)
        except (AnnotationError, GeometryError, CstError):
            return None
        return r if np.all(np.isfinite(r)) else None

    def jacobian(self, c: np.ndarray, r0: np.ndarray) -> np.ndarray:
        J = np.zeros((r0.size, c.size))
        for j in range(c.size):
            e = np.zeros_like(c)
            e[j] = FD_STEP
            rp = self.try_residual(c + e)
            rm = self.try_residual(c - e)
            if rp is not None and rm is not None:
                J[:, j] = (rp - rm) / (2 * FD_STEP)
            elif rp is not None:
                J[:, j] = (rp - r0) / FD_STEP
            elif rm is not None:
                J[:, j] = (r0 - rm) / FD_STEP
        return J

    def binding_residual(self, c: np.ndarray, w: EditWeights) -> float:
        """Largest scale-normalized deviation among binding target blocks.

        A block is binding when its weight is a nontrivial fraction of the
        largest target weight, so a wrapper's soft pin never flags
        infeasibility on its own.
        """
        lams = []
        if self.kp_targets is not None:
            lams.append(w.lambda_kp)
        if self.need_parsec:
            lams.append(w.lambda_param)
        if not lams:
            return 0.0
        if self.last_foil is not None:
            return self.binding_of(self.last_foil, w, pi=self.last_pi)
        return self.binding_of(self.foil_of(c), w)

    def binding_of(self, foil: Airfoil, w: EditWeights,
                   pi: np.ndarray | None = None) -> float:
        lams = []
        if self.kp_targets is not None:
            lams.append(w.lambda_kp)
        if self.need_parsec:
            lams.append(w.lambda_param)
        if not lams:
            return 0.0
        cut = BINDING_FRACTION * max(lams)
        worst = 0.0
        if self.kp_targets is not None and w.lambda_kp >= cut:
            kp = foil.points[self.kp_idx]
            worst = max(worst, float(np.abs((kp - self.kp_targets) / KP_SCALE).max()))
        if self.need_parsec and w.lambda_param >= cut:
            if pi is None:
                pi = annotate_parsec(foil).as_vector()
            d = np.abs(pi[self.p_mask] - self.p_targets[self.p_mask]) / _SCALE_VEC[self.p_mask]
            worst = max(worst, float(d.max()))
        return worst


def _sigma_report(achieved: ParsecParams, targets: dict[str, float],
                  fields: Sequence[str]) -> SigmaReport:
    av = achieved.as_vector()
    sigma = np.zeros(len(PARSEC_FIELDS))
    for k in fields:
        i = PARSEC_FIELDS.index(k)
        sigma[i] = abs(av[i] - targets[k])
    return SigmaReport(sigma=sigma, sigma_bar=float(sigma.mean()))


def edit(request: EditRequest,
         on_iteration: Callable[["EditProgress"], None] | None = None,
         sigma_fields: Sequence[str] | None = None) -> EditResult:
    """Run one edit to completion and return the canonical result.

    The source geometry itself is the zeroth candidate: when no optimizer
    iterate beats the source's own target objective, the source comes back
    unchanged, which makes identity edits exact. on_iteration, when given,
    receives an EditProgress after every accepted step. sigma_fields
    restricts the reported SigmaReport to those PARSEC fields; by default
    every field in target_parsec counts.
    """
    if sigma_fields is None:
        sigma_fields = tuple(request.target_parsec)
    try:
        fit = cst_fit(request.source)
    except CstError as e:
        raise EditError(f"source not fittable: {e}") from e
    c_src = fit.params.flat()
    obj = _Objective(request, c_src, fit.params)

    source_f = None
    if request.source.is_canonical:
        try:
            parts = obj.target_parts(request.source)
            source_f = float(sum(p @ p for p in parts)) if parts else 0.0
        except (AnnotationError, GeometryError, CstError):
            source_f = None
        if source_f is not None and not np.isfinite(source_f):
            source_f = None
        obj.last_pi = None
        obj.last_foil = None

    def source_result() -> EditResult:
        achieved = annotate_parsec(request.source)
        sigma = _sigma_report(achieved, request.target_parsec, sigma_fields)
        binding = obj.binding_of(request.source, request.weights)
        status = "infeasible" if binding > INFEASIBLE_RESIDUAL else "converged"
        return EditResult(airfoil=request.source, achieved=achieved, sigma=sigma,
                          trace=np.array([source_f]), status=status, iterations=0)

    if source_f == 0.0:
        # targets already met exactly; no iterate can beat a zero objective
        return source_result()

    c = c_src.copy()
    r = obj.try_residual(c)
    if r is None:
        raise EditError("objective undefined at the source fit")
    f = float(r @ r)
    if not np.isfinite(f):
        raise EditError(f"non-finite objective at start, iterate {c.tolist()}")

    trace = [f]
    mu = 1e-3
    small_streak = 0
    hit_limit = True
    iterations = 0
    eye = np.eye(c.size)
    for it in range(1, request.limits.max_iter + 1):
        J = obj.jacobian(c, r)
        g = J.T @ r
        H = J.T @ J
        accepted = False
        f_try = f
        for _ in range(30):
            try:
                step = np.linalg.solve(H + mu * eye, -g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(H + mu * eye, -g, rcond=None)[0]
            r_try = obj.try_residual(c + step)
            if r_try is not None:
                f_try = float(r_try @ r_try)
                if f_try < f:
                    accepted = True
                    break
            mu *= 4.0
            if mu > 1e14:
                break
        if not accepted:
            # no descent direction left: treat as converged at this iterate
            hit_limit = False
            break
        rel = (f - f_try) / max(f, np.finfo(float).tiny)
        c = c + step
        r, f = r_try, f_try
        mu = max(mu / 3.0, 1e-12)
        trace.append(f)
        iterations = it
        if on_iteration is not None:
            if obj.last_pi is not None:
                ach = ParsecParams.from_vector(obj.last_pi)
            else:
                ach = annotate_parsec(obj.last_foil)
            sbar = _sigma_report(ach, request.target_parsec, sigma_fields).sigma_bar
            on_iteration(EditProgress(iteration=it, objective=f,
                                      sigma_bar=sbar, airfoil=obj.last_foil))
        if rel < request.limits.tol:
            small_streak += 1
            if small_streak >= 3:
                hit_limit = False
                break
        else:
            small_streak = 0

    if source_f is not None and source_f <= f:
        return source_result()

    # force a residual eval at the final iterate so cached state matches c
    r = obj.try_residual(c)
    binding = obj.binding_residual(c, request.weights)
    if binding > INFEASIBLE_RESIDUAL:
        status = "infeasible"
    elif hit_limit:
        status = "iteration_limit"
    else:
        status = "converged"

    out = cst_airfoil(obj.base.with_flat(c), name=f"{request.source.name}_edit",
                      provenance="edited", canonical=True)
    achieved = annotate_parsec(out)
    sigma = _sigma_report(achieved, request.target_parsec, sigma_fields)
    return EditResult(airfoil=out, achieved=achieved, sigma=sigma,
                      trace=np.array(trace), status=status, iterations=iterations)


def edit_ek(source: Airfoil, target_keypoints,
            limits: EditLimits = EditLimits(),
            on_iteration=None) -> EditResult:
    """Keypoint edit: targets drive the shape, physics follow.

    The source's own PARSEC values are pinned softly so properties the
    keypoints do not determine stay near the original; they never count
    toward the reported sigma.
    """
    pins = annotate_parsec(source).as_dict()
    req = EditRequest(source=source,
                      target_keypoints=np.asarray(target_keypoints, dtype=float),
                      target_parsec=pins,
                      weights=EditWeights(lambda_kp=1.0, lambda_param=0.01,
                                          lambda_reg=1e-4),
                      limits=limits)
    return edit(req, on_iteration=on_iteration, sigma_fields=())


def edit_ep(source: Airfoil, target_parsec: dict[str, float],
            limits: EditLimits = EditLimits(),
            on_iteration=None) -> EditResult:
    """Parameter edit: requested PARSEC fields drive, source keypoints pinned.

    lambda_reg here is an order of magnitude above edit_ek's: with only 13
    pinned keypoints the coefficient space has slack between them, and the
    regularizer is what keeps a local parameter change from rippling the
    whole thickness distribution.
    """
    if not target_parsec:
        raise EditError("edit_ep needs at least one PARSEC target")
    req = EditRequest(source=source,
                      target_keypoints=extract_keypoints(source),
                      target_parsec=dict(target_parsec),
                      weights=EditWeights(lambda_kp=0.01, lambda_param=1.0,
                                          lambda_reg=1e-3),
                      limits=limits)
    return edit(req, on_iteration=on_iteration,
                sigma_fields=tuple(target_parsec))
