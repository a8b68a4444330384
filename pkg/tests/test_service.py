"""Service boundary: envelopes, endpoint contracts, and equivalence with
direct library calls."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from afbench.annotation import annotate_parsec
from afbench.data_engine import build_dataset
from afbench.editor import EditLimits, edit_ep
from afbench.generators import naca4_from_digits
from afbench.geometry import extract_keypoints
from afbench.metrics import DiversityConfig, diversity, smoothness, success_rate
from afbench.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def ds_client(tmp_path_factory):
    root = tmp_path_factory.mktemp("service_ds") / "ds"
    manifest = build_dataset({"seed": 0, "naca4": {"count": 12}}, root)
    app = create_app(dataset_dir=root)
    return TestClient(app), manifest


# ---------------------------------------------------------------- envelope

def test_request_id_echo_and_shape(client):
    r = client.post("/v1/generate", json={"request_id": "abc-123", "n": 0})
    body = r.json()
    assert r.status_code == 200
    assert body["request_id"] == "abc-123"
    assert body["operation"] == "generate"
    assert "payload" in body and "error" not in body


def test_derived_request_id_is_stable(client):
    payload = {"n": 2, "seed": 9, "source": "naca0012"}
    a = client.post("/v1/generate", json=payload).json()
    b = client.post("/v1/generate", json=payload).json()
    assert a["request_id"] == b["request_id"]


def test_error_envelope_shape(client):
    r = client.post("/v1/generate", json={"n": -1})
    body = r.json()
    assert r.status_code == 422
    assert body["error"]["code"] == "invalid_request"
    assert "payload" not in body


# ---------------------------------------------------------------- generate

def test_generate_zero_candidates(client):
    r = client.post("/v1/generate", json={"n": 0})
    assert r.status_code == 200
    assert r.json()["payload"]["candidates"] == []


def test_generate_deterministic(client):
    body = {"n": 5, "seed": 3, "source": "naca2412", "band": 0.1}
    a = client.post("/v1/generate", json=body)
    b = client.post("/v1/generate", json=body)
    assert a.content == b.content


def test_generate_distinct_and_smooth(client):
    r = client.post("/v1/generate", json={"n": 5, "seed": 1, "source": "naca2412"})
    cands = r.json()["payload"]["candidates"]
    assert len(cands) == 5
    blobs = {json.dumps(c["points"]) for c in cands}
    assert len(blobs) == 5
    for c in cands:
        assert c["smoothness"] < 0.05
        assert c["provenance"] == "cst_gen"
        assert set(c["parsec"]) >= {"r_le", "x_up", "y_up"}


def test_generate_rejects_oversize(client):
    r = client.post("/v1/generate", json={"n": 257})
    assert r.status_code == 422
    assert r.json()["error"]["code"] == "invalid_request"


def test_generate_unfittable_seed(client):
    # an open arc resamples fine but has no interior leading edge to fit
    xs = np.linspace(1.0, 0.0, 30)
    pts = [[float(x), float(0.2 * np.sin(np.pi * x))] for x in xs]
    r = client.post("/v1/generate", json={"n": 3, "source": {"points": pts}})
    assert r.status_code == 422
    assert "not fittable" in r.json()["error"]["message"]


# ---------------------------------------------------------------- edit

def test_edit_identity_echo(client):
    source = naca4_from_digits("2412")
    kp = extract_keypoints(source).tolist()
    r = client.post("/v1/edit", json={"source": "naca2412", "mode": "ek",
                                      "target_keypoints": kp})
    body = r.json()
    assert r.status_code == 200
    out = np.array(body["payload"]["airfoil"]["points"])
    assert np.abs(out - source.points).max() < 1e-6
    assert body["payload"]["status"] == "converged"


def test_edit_malformed_body(client):
    r = client.post("/v1/edit", content=b"{not json",
                    headers={"content-type": "application/json"})
    body = r.json()
    assert r.status_code == 422
    assert body["error"]["code"] == "invalid_request"
    assert "payload" not in body


def test_edit_ep_matches_offline_run(client):
    targets = {"x_up": 0.35, "y_up": 0.07}
    r = client.post("/v1/edit", json={"source": "naca0012", "mode": "ep",
                                      "target_parsec": targets,
                                      "limits": {"max_iter": 12}})
    payload = r.json()["payload"]
    offline = edit_ep(naca4_from_digits("0012"), targets,
                      limits=EditLimits(max_iter=12))
    assert payload["sigma"] == offline.sigma.as_dict()
    assert payload["trace"] == [float(v) for v in offline.trace]
    assert payload["status"] == offline.status
    assert payload["iterations"] == offline.iterations


def test_edit_progressive_stream(client):
    source = naca4_from_digits("2412")
    kp = extract_keypoints(source)
    kp[3, 1] += 0.005
    body = {"source": "naca2412", "mode": "ek",
            "target_keypoints": kp.tolist(), "limits": {"max_iter": 10}}
    r = client.post("/v1/edit", json={**body, "progressive": True})
    assert r.status_code == 200
    events = [json.loads(line) for line in r.text.splitlines() if line]
    assert events, "stream produced no events"
    assert [e["event"] for e in events[:-1]] == ["progress"] * (len(events) - 1)
    assert events[-1]["event"] == "result"
    iters = [e["iteration"] for e in events[:-1]]
    assert iters == sorted(iters)
    for e in events[:-1]:
        assert np.isfinite(e["objective"])
        assert len(e["airfoil"]["points"]) == 257

    plain = client.post("/v1/edit", json=body).json()["payload"]
    assert events[-1]["payload"] == plain


# ---------------------------------------------------------------- metrics

def test_metrics_passthrough(client):
    names = ["naca0012", "naca2412", "naca4415"]
    foils = [naca4_from_digits(n[4:]) for n in names]
    targets = [{"y_up": 0.06}, {"y_up": 0.07}, {"y_up": 0.09}]
    div = {"subset_size": 2, "n_draws": 64, "seed": 5}
    polars = [[True] * 50 + [False] * 16, [True] * 66, [False] * 66]
    r = client.post("/v1/metrics", json={"airfoils": names, "targets": targets,
                                         "diversity": div, "polars": polars})
    payload = r.json()["payload"]

    assert payload["smoothness"] == [smoothness(f) for f in foils]
    for f, t, got in zip(foils, targets, payload["sigma"]):
        want = abs(annotate_parsec(f).y_up - t["y_up"])
        assert got["y_up"] == want
        assert got["sigma_bar"] == want
    cfg = DiversityConfig(subset_size=2, n_draws=64, seed=5)
    assert payload["diversity"] == diversity(foils, cfg)
    assert payload["success_rate"] == success_rate(polars)


def test_metrics_population_too_small(client):
    r = client.post("/v1/metrics", json={"airfoils": ["naca0012"],
                                         "diversity": True})
    assert r.status_code == 422
    assert "population too small" in r.json()["error"]["message"]


# ---------------------------------------------------------------- dataset

def test_airfoil_lookup(ds_client):
    tc, manifest = ds_client
    sample = manifest.samples[0]
    r = tc.get(f"/v1/airfoil/{sample['id']}")
    payload = r.json()["payload"]
    assert r.status_code == 200
    assert payload["id"] == sample["id"]
    assert len(payload["points"]) == 257
    assert payload["parsec"] == sample["parsec"]


def test_airfoil_unknown_id(ds_client):
    tc, _ = ds_client
    r = tc.get("/v1/airfoil/nope_000000")
    assert r.status_code == 404
    assert r.json()["error"]["code"] == "not_found"


def test_airfoil_without_dataset(client):
    r = client.get("/v1/airfoil/anything")
    assert r.status_code == 404


def test_manifest_paging(ds_client):
    tc, manifest = ds_client
    r = tc.get("/v1/manifest", params={"offset": 0, "limit": 5})
    payload = r.json()["payload"]
    assert payload["total"] == len(manifest.samples) == 12
    assert len(payload["samples"]) == 5
    r2 = tc.get("/v1/manifest", params={"offset": 10, "limit": 5})
    assert len(r2.json()["payload"]["samples"]) == 2
    ids = [s["id"] for s in payload["samples"]]
    assert ids == [s["id"] for s in manifest.samples[:5]]
