"""HTTP boundary: generation, editing, annotation, and metrics over JSON.

Every response is an envelope {request_id, operation, payload | error}; the
request id is echoed when the client sends one and otherwise derived from a
hash of the request itself, so identical requests produce identical envelopes.
Responses are pure functions of (request, mounted dataset): nothing here
mutates the dataset, and generation/editing are fully seeded.
"""

from __future__ import annotations

import hashlib
import json
import logging
import queue
import threading
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from .annotation import AnnotationError, annotate_parsec
from .cst import CstError, cst_fit
from .data_engine import DataError, DatasetManifest, read_dat
from .editor import (EditError, EditLimits, EditRequest, EditWeights, edit,
                     edit_ek, edit_ep)
from .generators import GeneratorError, cst_perturb_generate, naca4_from_digits, naca5
from .geometry import Airfoil, GeometryError, resample_airfoil
from .metrics import DiversityConfig, MetricError, diversity, smoothness, success_rate

log = logging.getLogger("afbench.service")

MAX_GENERATE = 256

_REJECTIONS = (DataError, GeneratorError, EditError, CstError, AnnotationError,
               MetricError, GeometryError, ValueError)


class NotFound(Exception):
    pass


def _request_id(body, fallback: str) -> str:
    if isinstance(body, dict) and body.get("request_id"):
        return str(body["request_id"])
    blob = json.dumps(body if body is not None else fallback,
                      sort_keys=True, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _envelope(request_id: str, operation: str, *, payload=None, error=None,
              status: int = 200) -> JSONResponse:
    body = {"request_id": request_id, "operation": operation}
    if error is not None:
        body["error"] = error
    else:
        body["payload"] = payload
    return JSONResponse(content=body, status_code=status)


def _points_list(foil: Airfoil) -> list[list[float]]:
    return [[float(x), float(y)] for x, y in foil.points]


def _foil_payload(foil: Airfoil, annotate: bool = True) -> dict:
    out = {"name": foil.name, "provenance": foil.provenance,
           "points": _points_list(foil)}
    if annotate:
        out["parsec"] = annotate_parsec(foil).as_dict()
        out["smoothness"] = smoothness(foil)
    return out


def _result_payload(res) -> dict:
    return {
        "airfoil": _foil_payload(res.airfoil, annotate=False),
        "achieved": res.achieved.as_dict(),
        "sigma": res.sigma.as_dict(),
        "trace": [float(v) for v in res.trace],
        "status": res.status,
        "iterations": res.iterations,
    }


class _Dataset:
    """Read-only view over a built dataset directory."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.manifest = DatasetManifest.load(self.root / "manifest.jsonl")
        self.index = {rec["id"]: rec for rec in self.manifest.samples}
        self._foils: dict[str, Airfoil] = {}
        self._lock = threading.Lock()

    def airfoil(self, sample_id: str) -> Airfoil:
        rec = self.index.get(sample_id)
        if rec is None:
            raise NotFound(f"unknown airfoil id {sample_id!r}")
        with self._lock:
            foil = self._foils.get(sample_id)
            if foil is None:
                foil = read_dat(self.root / rec["file"])
                foil = foil.with_meta(name=rec["name"], provenance=rec["provenance"])
                self._foils[sample_id] = foil
        return foil


def _parse_source(spec, dataset: _Dataset | None) -> Airfoil:
    """Accept inline points, a NACA designation, or a dataset sample id."""
    if isinstance(spec, dict) and "points" in spec:
        pts = np.asarray(spec["points"], dtype=float)
        name = str(spec.get("name", "client"))
        foil = resample_airfoil(pts, name=name, provenance="manual")
        return foil
    if isinstance(spec, str):
        low = spec.lower()
        if low.startswith("naca"):
            digits = low[4:]
            if len(digits) == 4:
                return naca4_from_digits(digits)
            if len(digits) == 5:
                return naca5(digits)
            raise DataError(f"bad NACA designation {spec!r}")
        if dataset is not None:
            return dataset.airfoil(spec)
        raise NotFound(f"unknown source {spec!r} (no dataset mounted)")
    raise DataError("source must be a designation, a sample id, or {points: [[x,y]..]}")


def _limits_of(body: dict) -> EditLimits:
    lim = body.get("limits") or {}
    return EditLimits(max_iter=int(lim.get("max_iter", 40)),
                      tol=float(lim.get("tol", 1e-4)))


def create_app(dataset_dir=None, solver=None) -> FastAPI:
    """Build the service app. dataset_dir mounts a built dataset read-only."""
    app = FastAPI(title="afbench", docs_url=None, redoc_url=None)
    dataset = _Dataset(Path(dataset_dir)) if dataset_dir else None
    app.state.dataset = dataset
    app.state.solver = solver

    @app.middleware("http")
    async def access_log(request: Request, call_next):
        t0 = time.perf_counter()
        response = await call_next(request)
        log.info("%s %s -> %d (%.1f ms)", request.method, request.url.path,
                 response.status_code, 1e3 * (time.perf_counter() - t0))
        return response

    async def _body_of(request: Request):
        try:
            return await request.json()
        except Exception:
            raise DataError("request body must be valid JSON") from None

    def _fail(rid: str, op: str, exc: Exception) -> JSONResponse:
        if isinstance(exc, NotFound):
            return _envelope(rid, op, error={"code": "not_found",
                                             "message": str(exc)}, status=404)
        if isinstance(exc, _REJECTIONS):
            return _envelope(rid, op, error={"code": "invalid_request",
                                             "message": str(exc)}, status=422)
        log.exception("unhandled error in %s", op)
        return _envelope(rid, op, error={"code": "internal",
                                         "message": str(exc)}, status=500)

    @app.post("/v1/generate")
    async def generate(request: Request):
        op = "generate"
        rid = ""
        try:
            body = await _body_of(request)
            rid = _request_id(body, "/v1/generate")
            n = int(body.get("n", 0))
            if n < 0 or n > MAX_GENERATE:
                raise DataError(f"n must be in [0, {MAX_GENERATE}], got {n}")
            if n == 0:
                return _envelope(rid, op, payload={"candidates": []})
            source = _parse_source(body.get("source", "naca2412"), dataset)
            band = float(body.get("band", 0.1))
            seed = int(body.get("seed", 0))
            try:
                fit = cst_fit(source)
            except CstError as e:
                raise DataError(f"seed airfoil not fittable: {e}") from e
            foils = cst_perturb_generate(fit.params, n, band, seed=seed,
                                         name_prefix=source.name)
            payload = {"candidates": [_foil_payload(f) for f in foils]}
            return _envelope(rid, op, payload=payload)
        except Exception as e:
            return _fail(rid or _request_id(None, "/v1/generate"), op, e)

    @app.post("/v1/edit")
    async def edit_endpoint(request: Request):
        op = "edit"
        rid = ""
        try:
            body = await _body_of(request)
            rid = _request_id(body, "/v1/edit")
            source = _parse_source(body.get("source"), dataset)
            limits = _limits_of(body)
            mode = body.get("mode")
            if mode == "ek":
                kp = body.get("target_keypoints")
                if kp is None:
                    raise EditError("mode ek needs target_keypoints")
                run = lambda cb: edit_ek(source, np.asarray(kp, dtype=float),
                                         limits=limits, on_iteration=cb)
            elif mode == "ep":
                tp = body.get("target_parsec")
                if not tp:
                    raise EditError("mode ep needs target_parsec")
                run = lambda cb: edit_ep(source, {str(k): float(v) for k, v in tp.items()},
                                         limits=limits, on_iteration=cb)
            elif mode is None:
                kp = body.get("target_keypoints")
                tp = body.get("target_parsec") or {}
                w = body.get("weights") or {}
                req = EditRequest(
                    source=source,
                    target_keypoints=None if kp is None else np.asarray(kp, dtype=float),
                    target_parsec={str(k): float(v) for k, v in tp.items()},
                    weights=EditWeights(
                        lambda_kp=float(w.get("lambda_kp", 1.0)),
                        lambda_param=float(w.get("lambda_param", 1.0)),
                        lambda_reg=float(w.get("lambda_reg", 1e-4))),
                    limits=limits)
                run = lambda cb: edit(req, on_iteration=cb)
            else:
                raise EditError(f"unknown mode {mode!r}")

            if not body.get("progressive"):
                return _envelope(rid, op, payload=_result_payload(run(None)))

            def stream():
                q: queue.Queue = queue.Queue()

                def worker():
                    try:
                        q.put(("done", run(lambda p: q.put(("progress", p)))))
                    except Exception as exc:
                        q.put(("error", exc))

                threading.Thread(target=worker, daemon=True).start()
                while True:
                    kind, item = q.get()
                    if kind == "progress":
                        event = {"request_id": rid, "operation": op,
                                 "event": "progress",
                                 "iteration": item.iteration,
                                 "objective": item.objective,
                                 "sigma_bar": item.sigma_bar,
                                 "airfoil": {"points": _points_list(item.airfoil)}}
                    elif kind == "done":
                        event = {"request_id": rid, "operation": op,
                                 "event": "result",
                                 "payload": _result_payload(item)}
                    else:
                        code = "invalid_request" if isinstance(item, _REJECTIONS) else "internal"
                        event = {"request_id": rid, "operation": op,
                                 "event": "error",
                                 "error": {"code": code, "message": str(item)}}
                    yield json.dumps(event, sort_keys=True) + "\n"
                    if kind != "progress":
                        return

            return StreamingResponse(stream(), media_type="application/x-ndjson")
        except Exception as e:
            return _fail(rid or _request_id(None, "/v1/edit"), op, e)

    @app.post("/v1/metrics")
    async def metrics_endpoint(request: Request):
        op = "metrics"
        rid = ""
        try:
            body = await _body_of(request)
            rid = _request_id(body, "/v1/metrics")
            specs = body.get("airfoils")
            if not specs:
                raise MetricError("metrics needs a nonempty airfoil population")
            foils = [_parse_source(s, dataset) for s in specs]
            payload = {"smoothness": [smoothness(f) for f in foils]}

            targets = body.get("targets")
            if targets is not None:
                if len(targets) != len(foils):
                    raise MetricError("targets must pair one-to-one with airfoils")
                sigmas = []
                for f, t in zip(foils, targets):
                    ach = annotate_parsec(f).as_dict()
                    per = {k: abs(ach[k] - float(v)) for k, v in t.items()}
                    per["sigma_bar"] = (sum(per.values()) / len(per)) if per else 0.0
                    sigmas.append(per)
                payload["sigma"] = sigmas

            want_div = body.get("diversity", True)
            if want_div:
                cfg = DiversityConfig()
                if isinstance(want_div, dict):
                    cfg = DiversityConfig(
                        subset_size=int(want_div.get("subset_size", cfg.subset_size)),
                        n_draws=int(want_div.get("n_draws", cfg.n_draws)),
                        jitter=float(want_div.get("jitter", cfg.jitter)),
                        seed=int(want_div.get("seed", cfg.seed)))
                if len(foils) < 2:
                    raise MetricError("population too small for diversity")
                if len(foils) <= cfg.subset_size:
                    cfg = DiversityConfig(subset_size=max(2, len(foils) - 1),
                                          n_draws=cfg.n_draws, jitter=cfg.jitter,
                                          seed=cfg.seed)
                payload["diversity"] = diversity(foils, cfg)

            polars = body.get("polars")
            if polars is not None:
                payload["success_rate"] = success_rate(polars)
            return _envelope(rid, op, payload=payload)
        except Exception as e:
            return _fail(rid or _request_id(None, "/v1/metrics"), op, e)

    @app.get("/v1/airfoil/{sample_id}")
    async def airfoil_by_id(sample_id: str):
        op = "airfoil"
        rid = _request_id(None, f"/v1/airfoil/{sample_id}")
        try:
            if dataset is None:
                raise NotFound("no dataset mounted")
            foil = dataset.airfoil(sample_id)
            rec = dict(dataset.index[sample_id])
            rec["points"] = _points_list(foil)
            return _envelope(rid, op, payload=rec)
        except Exception as e:
            return _fail(rid, op, e)

    @app.get("/v1/manifest")
    async def manifest_page(offset: int = 0, limit: int = 50):
        op = "manifest"
        rid = _request_id(None, f"/v1/manifest?offset={offset}&limit={limit}")
        try:
            if dataset is None:
                raise NotFound("no dataset mounted")
            if offset < 0 or limit < 0:
                raise DataError("offset and limit must be nonnegative")
            samples = dataset.manifest.samples[offset:offset + limit]
            payload = {"total": len(dataset.manifest.samples),
                       "offset": offset, "limit": limit,
                       "config": dataset.manifest.config,
                       "samples": samples}
            return _envelope(rid, op, payload=payload)
        except Exception as e:
            return _fail(rid, op, e)

    return app
