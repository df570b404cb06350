import json
import math

import numpy as np
import pytest
from fastapi.testclient import TestClient

from polywalk.service.app import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def gt(client):
    r = client.post("/ground-truth", json={"problems": ["funnel-cone45-d2-s-1"],
                                           "base_len": 5000, "min_steps": 0, "n_walkers": 32})
    assert r.status_code == 200
    return r.json()["histograms"]


def test_health(client):
    assert client.get("/health").json() == {"status": "ok"}


def test_grid(client):
    r = client.post("/grid", json={"filters": {"density": ["funnel"], "theta": ["45"], "d": ["2"]}})
    body = r.json()
    assert body["count"] == 14 and len(body["problems"]) == 14
    assert client.post("/grid", json={}).json()["count"] == 2240


def test_grid_bad_filter(client):
    r = client.post("/grid", json={"filters": {"d": ["3"]}})
    assert r.status_code == 422


def test_ground_truth_shape(gt):
    h = gt["funnel-cone45-d2-s-1"]
    assert np.array(h["counts"]).shape == (10, 10)
    assert h["x_range"] == [0.0, 1.0]


def test_sample(client):
    r = client.post("/sample", json={"problem": "funnel-cone45-d2-s-1", "sampler": "smlhr_delta",
                                     "step": 1.0, "run": {"n_kept": 50, "n_chains": 2, "seed": 3}})
    body = r.json()
    assert len(body["chains"]) == 2 and len(body["chains"][0]) == 50
    assert [s["seed"] for s in body["stats"]] == [3, 4]


def test_sample_errors(client):
    assert client.post("/sample", json={"problem": "nope", "sampler": "hr", "step": 1.0}).status_code == 422
    assert client.post("/sample", json={"problem": "funnel-cone45-d2-s-1", "sampler": "hr",
                                        "step": -1.0}).status_code == 422


def test_bench_and_report(client, gt):
    r = client.post("/bench", json={"problems": ["funnel-cone45-d2-s-1"], "samplers": ["hr", "rwmh"],
                                    "steps": [0.05, 1e4], "ground_truth": gt,
                                    "run": {"n_kept": 100, "n_chains": 2}})
    assert r.status_code == 200
    body = r.json()
    assert len(body["best"]) == 2 and len(body["all"]) == 4
    stuck = [x for x in body["all"] if x["sampler"] == "rwmh" and x["step"] == 1e4][0]
    assert stuck["rhat_max"] == math.inf and stuck["flag"] == "stuck"
    # records carry +inf, which httpx's json= rejects
    rep = client.post("/report", content=json.dumps({"records": body["all"]}),
                      headers={"content-type": "application/json"}).json()
    assert {"l1_table", "rel_perf", "rel_perf_by_problem"} <= set(rep["tables"])


def test_bench_missing_reference(client):
    r = client.post("/bench", json={"problems": ["funnel-cone45-d2-s-1"], "samplers": ["hr"],
                                    "steps": [0.1], "ground_truth": {}})
    assert r.status_code == 422


def test_diagnose(client, gt, rng):
    chains = [rng.random((100, 2)).tolist() for _ in range(2)]
    r = client.post("/diagnose", json={"chains": chains, "ground_truth": gt["funnel-cone45-d2-s-1"],
                                       "wall_time": 2.0})
    body = r.json()
    assert body["min_ess"] > 0 and body["l1"] is not None
    assert body["min_ess_per_sec"] == pytest.approx(body["min_ess"] / 2.0)
