"""afbench: deterministic airfoil generation, annotation, editing, and serving."""

__version__ = "0.1.0"

from .aero_adapter import (AeroError, AeroUnavailableError, MockSolver,
                           PolarCache, PolarRecord, WorkCondition, XfoilSolver,
                           airfoil_hash, condition_grid, evaluate_airfoil,
                           filter_airfoils, resolve_solver)
from .annotation import (PARSEC_FIELDS, PARSEC_SCALES, AnnotationError,
                         ParsecParams, SigmaReport, annotate_parsec,
                         batch_label_error, label_error)
from .cst import (CstError, CstFit, CstParams, bernstein, cst_airfoil,
                  cst_class, cst_eval, cst_fit, cst_surface)
from .data_engine import (DataError, DatasetManifest, build_dataset, read_dat,
                          split_counts, split_dataset, write_dat)
from .editor import (EditError, EditLimits, EditProgress, EditRequest,
                     EditResult, EditWeights, edit, edit_ek, edit_ep)
from .generators import (BezierControl, GeneratorError, LhsPlan, bezier_layer,
                         cst_perturb_generate, lhs_sample, naca4,
                         naca4_from_digits, naca5)
from .geometry import (CANONICAL_POINTS, Airfoil, GeometryError, SurfaceSpline,
                       curvature_at, extract_keypoints, keypoint_indices,
                       resample_airfoil, spline_eval, spline_fit)
from .metrics import (DiversityConfig, MetricError, diversity,
                      diversity_fixed_subsets, format_report, smoothness,
                      success_rate)

__all__ = [name for name in dir() if not name.startswith("_")]
