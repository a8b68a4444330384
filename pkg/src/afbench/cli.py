"""Command line pipeline: gen, annotate, filter, split, eval, edit, serve."""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

import numpy as np

from .aero_adapter import (PolarCache, condition_grid, evaluate_airfoil,
                           filter_airfoils, resolve_solver)
from .annotation import annotate_parsec
from .data_engine import (DatasetManifest, build_dataset, read_dat,
                          split_counts, split_dataset, write_dat)
from .editor import EditLimits, EditRequest, edit, edit_ek, edit_ep
from .geometry import extract_keypoints
from .metrics import DiversityConfig, diversity, format_report, smoothness, success_rate

log = logging.getLogger("afbench.cli")


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _load_dataset(path: str) -> tuple[Path, DatasetManifest]:
    root = Path(path)
    return root, DatasetManifest.load(root / "manifest.jsonl")


def _cmd_gen(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.solver is not None:
        config["solver"] = None if args.solver == "none" else args.solver
    manifest = build_dataset(config, args.out)
    _emit({"out": str(args.out), "samples": len(manifest.samples),
           "skipped": len(manifest.skipped), "splits": split_counts(manifest)})
    return 0


def _cmd_annotate(args) -> int:
    foil = read_dat(args.dat)
    out = {"name": foil.name, "parsec": annotate_parsec(foil).as_dict()}
    if args.keypoints:
        out["keypoints"] = [[float(x), float(y)] for x, y in extract_keypoints(foil)]
    _emit(out)
    return 0


def _cmd_filter(args) -> int:
    root, manifest = _load_dataset(args.dataset)
    solver = resolve_solver(None if args.solver == "none" else args.solver)
    if solver is None:
        log.error("filter needs a working solver (got %r)", args.solver)
        return 2
    cache = PolarCache(root / "polars.tsv")
    grid = condition_grid()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "airfoils").mkdir(exist_ok=True)

    kept = DatasetManifest(config=dict(manifest.config), skipped=list(manifest.skipped))
    for rec in manifest.samples:
        foil = read_dat(root / rec["file"]).with_meta(name=rec["name"],
                                                      provenance=rec["provenance"])
        polars = evaluate_airfoil(foil, grid, solver=solver, cache=cache)
        survivors, _ = filter_airfoils([foil], [polars])
        if survivors:
            rec = dict(rec)
            rec["converged"] = int(sum(r.converged for r in polars))
            kept.samples.append(rec)
            write_dat(foil, out_dir / rec["file"])
        else:
            kept.skipped.append({"id": rec["id"], "name": rec["name"],
                                 "reason": "no converged work condition"})
    kept.save(out_dir / "manifest.jsonl")
    if (root / "polars.tsv").exists() and out_dir.resolve() != root.resolve():
        shutil.copyfile(root / "polars.tsv", out_dir / "polars.tsv")
    _emit({"kept": len(kept.samples),
           "discarded": len(manifest.samples) - len(kept.samples)})
    return 0


def _cmd_split(args) -> int:
    root, manifest = _load_dataset(args.dataset)
    ratios = tuple(float(v) for v in args.ratios.split(","))
    split_dataset(manifest, ratios=ratios, seed=args.seed,
                  stratify=not args.no_stratify)
    out = Path(args.out) if args.out else root / "manifest.jsonl"
    manifest.save(out)
    _emit(split_counts(manifest))
    return 0


def _cmd_eval(args) -> int:
    root, manifest = _load_dataset(args.dataset)
    foils = [read_dat(root / rec["file"]) for rec in manifest.samples]
    if not foils:
        log.error("dataset %s has no samples", root)
        return 2
    smo = [smoothness(f) for f in foils]
    row = {"label": root.name, "smoothness": float(np.mean(smo))}
    cfg = DiversityConfig()
    if len(foils) > cfg.subset_size:
        row["diversity"] = diversity(foils, cfg)
    cache_path = root / "polars.tsv"
    if cache_path.exists():
        cache = PolarCache(cache_path)
        grid = condition_grid()
        conv = []
        for foil in foils:
            try:
                polars = evaluate_airfoil(foil, grid, solver=None, cache=cache)
            except Exception:
                continue
            conv.append([r.converged for r in polars])
        if conv:
            row["success_rate"] = success_rate(conv)
    print(format_report([row]))
    return 0


def _cmd_edit(args) -> int:
    source = read_dat(args.source)
    limits = EditLimits(max_iter=args.max_iter, tol=args.tol)
    target_kp = None
    if args.target_keypoints:
        with open(args.target_keypoints, "r", encoding="utf-8") as fh:
            target_kp = np.asarray(json.load(fh), dtype=float)
    target_parsec = {}
    if args.target_parsec:
        with open(args.target_parsec, "r", encoding="utf-8") as fh:
            target_parsec = {str(k): float(v) for k, v in json.load(fh).items()}

    if target_kp is not None and not target_parsec:
        result = edit_ek(source, target_kp, limits=limits)
    elif target_parsec and target_kp is None:
        result = edit_ep(source, target_parsec, limits=limits)
    else:
        result = edit(EditRequest(source=source, target_keypoints=target_kp,
                                  target_parsec=target_parsec, limits=limits))
    if args.out:
        write_dat(result.airfoil, args.out)
    _emit({"status": result.status, "iterations": result.iterations,
           "sigma_bar": result.sigma.sigma_bar,
           "objective": float(result.trace[-1]),
           "achieved": result.achieved.as_dict(),
           "out": args.out})
    return 0 if result.status != "infeasible" else 1


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    solver = resolve_solver(None if args.solver == "none" else args.solver)
    app = create_app(dataset_dir=args.dataset, solver=solver)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = argparse.ArgumentParser(prog="afbench",
                                     description="airfoil dataset and editing workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="build a dataset from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--solver", default=None)
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("annotate", help="print PARSEC parameters of a .dat file")
    p.add_argument("--dat", required=True)
    p.add_argument("--keypoints", action="store_true")
    p.set_defaults(fn=_cmd_annotate)

    p = sub.add_parser("filter", help="drop airfoils with zero converged conditions")
    p.add_argument("--dataset", required=True)
    p.add_argument("--solver", default="xfoil")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_filter)

    p = sub.add_parser("split", help="assign train/val/test labels")
    p.add_argument("--dataset", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--no-stratify", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_split)

    p = sub.add_parser("eval", help="metric report over a built dataset")
    p.add_argument("--dataset", required=True)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("edit", help="keypoint / parameter edit of a .dat file")
    p.add_argument("--source", required=True)
    p.add_argument("--target-parsec", default=None)
    p.add_argument("--target-keypoints", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--max-iter", type=int, default=40)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(fn=_cmd_edit)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--dataset", default=None)
    p.add_argument("--solver", default="none")
    p.set_defaults(fn=_cmd_serve)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
