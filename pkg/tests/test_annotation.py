import numpy as np
import pytest

from afbench.annotation import (
    PARSEC_FIELDS,
    AnnotationError,
    ParsecParams,
    SigmaReport,
    annotate_parsec,
    batch_label_error,
    label_error,
)
from afbench.geometry import Airfoil, resample_airfoil
from afbench.generators import naca4, naca_thickness


def thickness_oracle_contour(t, n):
    beta = np.linspace(0.0, np.pi, (n + 1) // 2)
    x = 0.5 * (1.0 - np.cos(beta))
    y = naca_thickness(t, x)
    upper = np.stack([x[::-1], y[::-1]], axis=1)
    lower = np.stack([x[1:], -y[1:]], axis=1)
    return np.vstack([upper, lower])


# -- annotate_parsec ----------------------------------------------------------


def test_naca0012_symmetry():
    p = annotate_parsec(naca4(0.0, 0.4, 0.12))
    assert abs(p.x_up - p.x_lo) < 1e-6
    assert abs(p.y_up + p.y_lo) < 1e-9
    assert abs(p.alpha_te - p.beta_te) < 1e-6
    assert abs(p.y_te) < 1e-9


def test_naca0012_leading_edge_radius():
    # thickness-polynomial curvature oracle: r_le = 1.1019 t^2
    p = annotate_parsec(naca4(0.0, 0.4, 0.12))
    ref = 1.1019 * 0.12 ** 2
    assert abs(p.r_le - ref) < 0.10 * ref


def test_naca0012_upper_crest():
    p = annotate_parsec(naca4(0.0, 0.4, 0.12))
    assert abs(p.y_up - 0.060) < 0.002
    assert abs(p.x_up - 0.30) < 0.02
    assert p.zxx_up <= 0.0
    assert p.zxx_lo >= 0.0


def test_annotation_sign_conventions():
    p = annotate_parsec(naca4(0.02, 0.4, 0.12))
    assert p.r_le > 0.0
    assert p.dy_te >= 0.0
    assert 0.0 < p.x_up < 1.0
    assert 0.0 < p.x_lo < 1.0
    # open TE: trailing wedge angles are positive in this convention
    assert p.alpha_te > 0.0
    assert p.beta_te > 0.0


def test_annotation_density_invariance():
    a257 = resample_airfoil(thickness_oracle_contour(0.12, 2001), 257)
    a513 = resample_airfoil(thickness_oracle_contour(0.12, 2001), 513)
    pa = annotate_parsec(a257)
    pb = annotate_parsec(a513)
    for f in PARSEC_FIELDS:
        tol = 0.1 if f in ("alpha_te", "beta_te") else 1e-3
        assert abs(getattr(pa, f) - getattr(pb, f)) < tol, f


def test_annotation_yflip_mapping():
    foil = naca4(0.02, 0.4, 0.12)
    flipped = Airfoil(foil.points[::-1] * np.array([1.0, -1.0]),
                      foil.name, foil.provenance)
    a = annotate_parsec(foil)
    b = annotate_parsec(flipped)
    assert abs(b.x_up - a.x_lo) < 1e-6
    assert abs(b.y_up + a.y_lo) < 1e-9
    assert abs(b.zxx_up + a.zxx_lo) < 1e-3
    assert abs(b.x_lo - a.x_up) < 1e-6
    assert abs(b.y_lo + a.y_up) < 1e-9
    assert abs(b.zxx_lo + a.zxx_up) < 1e-3
    assert abs(b.y_te + a.y_te) < 1e-9
    assert abs(b.alpha_te - a.beta_te) < 1e-6
    assert abs(b.beta_te - a.alpha_te) < 1e-6
    assert abs(b.r_le - a.r_le) < 1e-6
    assert abs(b.dy_te - a.dy_te) < 1e-12


def test_annotation_rejects_crestless_surface():
    # wedge: y grows monotonically toward the TE on both surfaces
    th = np.linspace(0.0, 1.0, 400)
    up = np.stack([th, 0.05 * th], axis=1)[::-1]
    lo = np.stack([th, -0.05 * th], axis=1)
    wedge = resample_airfoil(np.vstack([up, lo[1:]]))
    with pytest.raises(AnnotationError):
        annotate_parsec(wedge)


# -- label error --------------------------------------------------------------


def make_params(**overrides):
    base = dict(r_le=0.015, x_up=0.3, y_up=0.06, zxx_up=-0.45,
                x_lo=0.3, y_lo=-0.06, zxx_lo=0.45, y_te=0.0,
                dy_te=0.002, alpha_te=8.0, beta_te=8.0)
    base.update(overrides)
    return ParsecParams(**base)


def test_label_error_identity():
    p = make_params()
    rep = label_error(p, p)
    assert np.max(rep.sigma) == 0.0
    assert rep.sigma_bar == 0.0


def test_label_error_single_component():
    a = make_params(r_le=0.017)
    b = make_params(r_le=0.015)
    rep = label_error(a, b)
    assert abs(rep.sigma[0] - 0.002) < 1e-15
    assert np.max(rep.sigma[1:]) == 0.0
    assert abs(rep.sigma_bar - 0.002 / 11.0) < 1e-15


def test_label_error_symmetry():
    a = make_params(r_le=0.017, y_up=0.055, alpha_te=9.5)
    b = make_params()
    ra = label_error(a, b)
    rb = label_error(b, a)
    assert np.array_equal(ra.sigma, rb.sigma)


def test_label_error_sigma_bar_is_mean():
    a = make_params(r_le=0.02, zxx_up=-0.5, dy_te=0.004)
    b = make_params()
    rep = label_error(a, b)
    assert abs(rep.sigma_bar - float(np.mean(rep.sigma))) < 1e-15
    assert len(rep.sigma) == 11


def test_batch_label_error_matches_brute_force():
    rng = np.random.default_rng(5)
    preds, targets = [], []
    for _ in range(7):
        jitter = {f: float(rng.normal(0, 0.01)) for f in ("r_le", "y_up", "alpha_te")}
        preds.append(make_params(r_le=0.015 + jitter["r_le"],
                                 y_up=0.06 + jitter["y_up"],
                                 alpha_te=8.0 + jitter["alpha_te"]))
        targets.append(make_params())
    rep = batch_label_error(preds, targets)
    brute = np.mean([label_error(p, t).sigma_bar for p, t in zip(preds, targets)])
    assert abs(rep.sigma_bar - brute) < 1e-12


def test_sigma_report_as_dict():
    rep = label_error(make_params(r_le=0.016), make_params())
    d = rep.as_dict()
    assert set(d) == set(PARSEC_FIELDS) | {"sigma_bar"}
    assert d["r_le"] == rep.sigma[0]


def test_parsec_vector_round_trip():
    p = make_params()
    v = p.as_vector()
    assert len(v) == 11
    q = ParsecParams.from_vector(v)
    assert q == p
