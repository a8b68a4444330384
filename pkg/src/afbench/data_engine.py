"""Dataset construction: coordinate file IO, manifests, builds and splits.

Coordinate files are accepted in Selig order (TE over the top to the LE and
back) or Lednicer layout (point-count header, both surfaces LE to TE) and
always normalized to the canonical 257-point representation on read.
Manifests are line-delimited JSON with stable key order and no timestamps,
so identical inputs reproduce byte-identical files.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .aero_adapter import (AeroUnavailableError, PolarCache, condition_grid,
                           evaluate_airfoil, filter_airfoils)
from .annotation import AnnotationError, annotate_parsec
from .cst import cst_fit
from .generators import GeneratorError, LhsPlan, cst_perturb_generate, lhs_sample, naca4, naca5
from .geometry import (CANONICAL_POINTS, Airfoil, GeometryError,
                       extract_keypoints, resample_airfoil)

log = logging.getLogger("afbench.data")

SPLITS = ("train", "val", "test")
DEFAULT_RATIOS = (0.8, 0.1, 0.1)


class DataError(ValueError):
    """Raised for malformed files, configs, or manifests."""


def _parse_pairs(lines: list[tuple[int, str]], path) -> list[tuple[int, float, float]]:
    out = []
    for ln, text in lines:
        parts = text.split()
        if len(parts) != 2:
            raise DataError(f"{path}:{ln}: expected two columns, got {len(parts)}")
        try:
            out.append((ln, float(parts[0]), float(parts[1])))
        except ValueError:
            raise DataError(f"{path}:{ln}: non-numeric coordinate {text!r}") from None
    return out


def read_dat(path: str | Path, n_points: int = CANONICAL_POINTS) -> Airfoil:
    """Read a coordinate file and return the canonical airfoil.

    Selig and Lednicer layouts are auto-detected; Lednicer files are
    converted to Selig order. Files with a different point count are
    resampled (logged at warning level). Malformed lines raise DataError
    with the offending line number.
    """
    path = Path(path)
    raw_lines = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for ln, line in enumerate(fh, start=1):
            if line.strip():
                raw_lines.append((ln, line.strip()))
    if not raw_lines:
        raise DataError(f"{path}: empty file")

    name = path.stem
    first_ln, first = raw_lines[0]
    try:
        a, b = (float(p) for p in first.split())
        has_name = False
    except ValueError:
        name = first
        has_name = True
    body = raw_lines[1:] if has_name else raw_lines
    if not body:
        raise DataError(f"{path}: no coordinate data")

    pairs = _parse_pairs(body, path)
    vals = np.array([(x, y) for _, x, y in pairs])

    # Lednicer layout starts with a point-count header like "61. 61."
    if vals[0, 0] > 1.5 and vals[0, 1] > 1.5:
        n_up = int(round(vals[0, 0]))
        n_lo = int(round(vals[0, 1]))
        coords = vals[1:]
        if coords.shape[0] != n_up + n_lo:
            raise DataError(
                f"{path}:{pairs[0][0]}: header promises {n_up}+{n_lo} points, "
                f"file has {coords.shape[0]}")
        upper = coords[:n_up]
        lower = coords[n_up:]
        pts = np.vstack([upper[::-1], lower[1:]])
    else:
        pts = vals

    if pts.shape[0] < 10:
        raise DataError(f"{path}: too few points ({pts.shape[0]})")
    if pts.shape[0] != n_points:
        log.warning("%s: %d points, resampling to %d", path, pts.shape[0], n_points)
    try:
        return resample_airfoil(pts, n_points, name=name, provenance="uiuc")
    except GeometryError as e:
        raise DataError(f"{path}: {e}") from e


def write_dat(airfoil: Airfoil, path: str | Path) -> None:
    """Write a Selig .dat with full (shortest round-trip) precision."""
    path = Path(path)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(airfoil.name + "\n")
        for x, y in airfoil.points:
            fh.write(f"{float(x)!r} {float(y)!r}\n")


@dataclass
class DatasetManifest:
    """Config snapshot plus per-sample records (dicts) plus a skip list."""

    config: dict
    samples: list[dict] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)

    def save(self, path: str | Path) -> None:
        path = Path(path)
        with open(path, "w", encoding="ascii") as fh:
            fh.write(json.dumps({"record": "config", "version": __version__,
                                 "config": self.config}, sort_keys=True) + "\n")
            for s in self.skipped:
                fh.write(json.dumps({"record": "skipped", **s}, sort_keys=True) + "\n")
            for s in self.samples:
                fh.write(json.dumps({"record": "sample", **s}, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        path = Path(path)
        config = {}
        samples, skipped = [], []
        with open(path, "r", encoding="ascii") as fh:
            for ln, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as e:
                    raise DataError(f"{path}:{ln}: bad JSON ({e.msg})") from None
                kind = rec.pop("record", None)
                if kind == "config":
                    config = rec.get("config", {})
                elif kind == "sample":
                    samples.append(rec)
                elif kind == "skipped":
                    skipped.append(rec)
                else:
                    raise DataError(f"{path}:{ln}: unknown record kind {kind!r}")
        return cls(config=config, samples=samples, skipped=skipped)

    def ids(self) -> list[str]:
        return [s["id"] for s in self.samples]


def _sample_record(sample_id: str, foil: Airfoil, rel_file: str) -> dict:
    parsec = annotate_parsec(foil)
    kps = extract_keypoints(foil)
    return {
        "id": sample_id,
        "file": rel_file,
        "name": foil.name,
        "provenance": foil.provenance,
        "parsec": parsec.as_dict(),
        "keypoints": [[float(x), float(y)] for x, y in kps],
    }


def _gen_naca4(cfg: dict, seed: int) -> list[Airfoil]:
    count = int(cfg.get("count", 0))
    if count <= 0:
        return []
    ranges = np.array([
        cfg.get("camber", [0.0, 0.095]),
        cfg.get("camber_pos", [0.05, 0.95]),
        cfg.get("thickness", [0.06, 0.24]),
    ])
    rows = lhs_sample(LhsPlan(ranges=ranges, n_samples=count, seed=seed))
    out = []
    for i, (m, p, t) in enumerate(rows):
        out.append(naca4(float(m), float(p), float(t),
                         name=f"naca4_{i:05d}").with_meta())
    return out


def _gen_naca5(cfg: dict, seed: int) -> list[Airfoil]:
    count = int(cfg.get("count", 0))
    if count <= 0:
        return []
    families = cfg.get("families", ["210", "220", "230", "240", "250"])
    t_lo, t_hi = cfg.get("thickness", [0.08, 0.21])
    rows = lhs_sample(LhsPlan(ranges=np.array([[0.0, float(len(families))],
                                               [t_lo, t_hi]]),
                              n_samples=count, seed=seed))
    out = []
    for i, (fidx, t) in enumerate(rows):
        fam = families[min(int(fidx), len(families) - 1)]
        tt = max(1, round(float(t) * 100))
        out.append(naca5(f"{fam}{tt:02d}"))
    return out


def _gen_cst(cfg: dict, seed: int, out_of: Path | None) -> list[Airfoil]:
    count = int(cfg.get("count", 0))
    if count <= 0:
        return []
    base_spec = cfg.get("base", "naca2412")
    if isinstance(base_spec, str) and base_spec.startswith("naca") and len(base_spec) == 8:
        from .generators import naca4_from_digits
        base_foil = naca4_from_digits(base_spec[4:])
    else:
        base_foil = read_dat(Path(base_spec) if out_of is None else out_of / base_spec)
    fit = cst_fit(base_foil, int(cfg.get("degree", 8)))
    return cst_perturb_generate(fit.params, count, float(cfg.get("band", 0.1)),
                                seed=seed, name_prefix=f"{base_foil.name}_cst")


def build_dataset(config: dict, out_dir: str | Path) -> DatasetManifest:
    """Generate/ingest sources, canonicalize, annotate, optionally score and
    filter, split, and write airfoils plus manifest under out_dir.

    Deterministic: identical config and seed reproduce byte-identical
    manifests. Samples that fail annotation land on the skip list instead of
    aborting the build.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    foil_dir = out_dir / "airfoils"
    foil_dir.mkdir(exist_ok=True)
    seed = int(config.get("seed", 0))

    manifest = DatasetManifest(config=config)

    foils: list[Airfoil] = []
    foils += _gen_naca4(config.get("naca4", {}), seed)
    foils += _gen_naca5(config.get("naca5", {}), seed + 1)
    foils += _gen_cst(config.get("cst_perturb", {}), seed + 2, None)
    for src in config.get("import_dirs", []):
        d = Path(src["dir"] if isinstance(src, dict) else src)
        for f in sorted(d.glob("*.dat")):
            try:
                foils.append(read_dat(f))
            except DataError as e:
                log.warning("skipping %s: %s", f, e)
                manifest.skipped.append({"file": str(f), "reason": str(e)})
    solver_spec = config.get("solver")
    cache = None
    solver = None
    aero_status = "unavailable"
    if solver_spec:
        from .aero_adapter import resolve_solver
        solver = resolve_solver(solver_spec)
        cache = PolarCache(out_dir / "polars.tsv")
        aero_status = "annotated" if solver is not None else "unavailable"

    records: list[tuple[Airfoil, dict]] = []
    for i, foil in enumerate(foils):
        sample_id = f"{foil.provenance}_{i:06d}"
        try:
            rec = _sample_record(sample_id, foil, f"airfoils/{sample_id}.dat")
        except (AnnotationError, GeometryError) as e:
            manifest.skipped.append({"id": sample_id, "name": foil.name,
                                     "reason": str(e)})
            continue
        records.append((foil, rec))

    if solver is not None:
        grid = condition_grid()
        batch = [f for f, _ in records]
        polar_sets = []
        for foil in batch:
            try:
                polar_sets.append(evaluate_airfoil(foil, grid, solver=solver, cache=cache))
            except AeroUnavailableError:
                polar_sets.append([])
        keep_pairs = []
        for (foil, rec), polars in zip(records, polar_sets):
            if not polars:
                rec["aero"] = "unavailable"
                keep_pairs.append((foil, rec))
                continue
            kept, _ = filter_airfoils([foil], [polars])
            if kept:
                rec["aero"] = "annotated"
                rec["converged"] = sum(r.converged for r in polars)
                keep_pairs.append((foil, rec))
            else:
                manifest.skipped.append({"id": rec["id"], "name": foil.name,
                                         "reason": "no converged work condition"})
        records = keep_pairs
    else:
        for _, rec in records:
            rec["aero"] = aero_status

    for foil, rec in records:
        write_dat(foil, out_dir / rec["file"])
        manifest.samples.append(rec)

    split_cfg = config.get("split", {})
    ratios = tuple(split_cfg.get("ratios", DEFAULT_RATIOS))
    stratify = bool(split_cfg.get("stratify", True))
    if manifest.samples:
        split_dataset(manifest, ratios=ratios, seed=seed, stratify=stratify)

    manifest.save(out_dir / "manifest.jsonl")
    return manifest


def _largest_remainder(n: int, ratios: np.ndarray) -> np.ndarray:
    exact = n * ratios
    base = np.floor(exact).astype(int)
    rem = exact - base
    short = n - base.sum()
    order = np.argsort(-rem, kind="stable")
    for k in range(short):
        base[order[k]] += 1
    return base


def split_dataset(manifest: DatasetManifest, ratios=DEFAULT_RATIOS,
                  seed: int = 0, stratify: bool = True) -> DatasetManifest:
    """Assign train/val/test labels in place and return the manifest.

    Stratified mode splits each provenance group separately (counts per group
    via largest-remainder rounding, order via a seeded permutation), keeping
    every source proportionally represented within one sample.
    """
    ratios = np.asarray(ratios, dtype=float)
    if ratios.shape != (3,) or np.any(ratios <= 0):
        raise DataError("ratios must be three positive numbers")
    if abs(ratios.sum() - 1.0) > 1e-9:
        raise DataError(f"ratios must sum to 1, got {ratios.sum()!r}")
    n = len(manifest.samples)
    if n < ratios.size:
        raise DataError(f"cannot split {n} samples into {ratios.size} parts")

    if stratify:
        groups: dict[str, list[int]] = {}
        for i, s in enumerate(manifest.samples):
            groups.setdefault(s.get("provenance", "manual"), []).append(i)
        group_items = sorted(groups.items())
    else:
        group_items = [("all", list(range(n)))]

    rng = np.random.default_rng(seed)
    for _, idx in group_items:
        idx = np.array(idx)
        perm = rng.permutation(len(idx))
        counts = _largest_remainder(len(idx), ratios)
        start = 0
        for label, c in zip(SPLITS, counts):
            for j in perm[start:start + c]:
                manifest.samples[idx[j]]["split"] = label
            start += c
    return manifest


def split_counts(manifest: DatasetManifest) -> dict[str, int]:
    out = {s: 0 for s in SPLITS}
    for rec in manifest.samples:
        lab = rec.get("split")
        if lab in out:
            out[lab] += 1
    return out
