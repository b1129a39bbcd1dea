import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from tilekit.documents import write_superset, write_tileset
from tilekit.model import ModelConfig, TileNetwork, save_weights
from tilekit.service import create_app
from tilekit.tileset import build_superset

SQUARE = [[0.0, 0.0], [3.0, 0.0], [3.0, 3.0], [0.0, 3.0]]


@pytest.fixture(scope="module")
def service(tmp_path_factory, square_domino_ts, square_domino_superset):
    root = tmp_path_factory.mktemp("svc")
    ts_dir = root / "tilesets"
    ts_dir.mkdir()
    write_tileset(square_domino_ts, ts_dir / "square_domino.json")
    (ts_dir / "broken.json").write_text("{not json")
    write_superset(square_domino_superset, root / "sd.tsup")
    model = TileNetwork(ModelConfig(
        num_tile_types=square_domino_ts.num_tile_types,
        num_poses=square_domino_superset.pose_count, layers=2, channels=8))
    save_weights(model, root / "sd.tgnn")
    config = {
        "tilesets_dir": "tilesets",
        "models": {"square_domino": {"superset": "sd.tsup",
                                     "weights": "sd.tgnn"}},
    }
    app = create_app(config, base=root)
    return TestClient(app)


def wait_done(client, job_id, timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        state = client.get(f"/api/jobs/{job_id}").json()
        if state["state"] in ("done", "failed"):
            return state
        time.sleep(0.02)
    raise TimeoutError("job did not finish")


class TestTilesets:
    def test_listing_includes_ready_set_and_broken_entry(self, service):
        data = service.get("/api/tilesets").json()
        byname = {d["name"]: d for d in data}
        assert byname["square_domino"]["ready"]
        assert byname["square_domino"]["has_weights"]
        assert len(byname["square_domino"]["prototiles"]) == 2
        assert "error" in byname["broken"]


class TestCrop:
    def test_crop_counts(self, service):
        resp = service.post("/api/crop", json={
            "tileset": "square_domino", "polygon": SQUARE})
        assert resp.status_code == 200
        body = resp.json()
        assert body["candidate_count"] > 0
        assert len(body["candidate_outlines"]) == body["candidate_count"]

    def test_tiny_polygon_zero_candidates(self, service):
        resp = service.post("/api/crop", json={
            "tileset": "square_domino",
            "polygon": [[0, 0], [0.4, 0], [0.4, 0.4], [0, 0.4]]})
        assert resp.json()["candidate_count"] == 0

    def test_self_intersecting_polygon_422(self, service):
        resp = service.post("/api/crop", json={
            "tileset": "square_domino",
            "polygon": [[0, 0], [2, 2], [2, 0], [0, 2]]})
        assert resp.status_code == 422

    def test_unknown_tileset_422(self, service):
        resp = service.post("/api/crop", json={
            "tileset": "nope", "polygon": SQUARE})
        assert resp.status_code == 422


class TestSolveJobs:
    def test_solve_roundtrip(self, service):
        resp = service.post("/api/solve", json={
            "tileset": "square_domino", "polygon": SQUARE,
            "policy": "greedy", "runs": 1, "seed": 3})
        assert resp.status_code == 200
        job_id = resp.json()["job_id"]
        assert len(job_id) == 32  # 128-bit hex
        state = wait_done(service, job_id)
        assert state["state"] == "done"
        solution = service.get(f"/api/jobs/{job_id}/solution").json()
        assert solution["metrics"]["coverage"] > 0
        assert solution["tiles"]

    def test_same_seed_same_solution_digest(self, service):
        docs = []
        for _ in range(2):
            job_id = service.post("/api/solve", json={
                "tileset": "square_domino", "polygon": SQUARE,
                "policy": "random", "runs": 2, "seed": 11}).json()["job_id"]
            wait_done(service, job_id)
            docs.append(json.dumps(
                service.get(f"/api/jobs/{job_id}/solution").json(),
                sort_keys=True))
        assert docs[0] == docs[1]

    def test_gnn_policy_served(self, service):
        job_id = service.post("/api/solve", json={
            "tileset": "square_domino", "polygon": SQUARE,
            "policy": "gnn", "runs": 1, "seed": 0}).json()["job_id"]
        state = wait_done(service, job_id)
        assert state["state"] == "done"
        assert state["progress"]["best_coverage"] > 0

    def test_unknown_job_404(self, service):
        assert service.get("/api/jobs/deadbeef").status_code == 404
        assert service.get("/api/jobs/deadbeef/solution").status_code == 404

    def test_solution_before_done_409_or_result(self, service):
        job_id = service.post("/api/solve", json={
            "tileset": "square_domino", "polygon": SQUARE,
            "policy": "random", "runs": 1, "seed": 5}).json()["job_id"]
        resp = service.get(f"/api/jobs/{job_id}/solution")
        assert resp.status_code in (200, 409)
        wait_done(service, job_id)

    def test_preview_latency_under_three_seconds(self, service):
        big = [[-8.0, -8.0], [8.0, -8.0], [8.0, 8.0], [-8.0, 8.0]]
        crop_resp = service.post("/api/crop", json={
            "tileset": "square_domino", "polygon": big})
        assert crop_resp.json()["candidate_count"] <= 1500
        t0 = time.perf_counter()
        job_id = service.post("/api/solve", json={
            "tileset": "square_domino", "polygon": big,
            "policy": "gnn", "runs": 1, "seed": 1}).json()["job_id"]
        wait_done(service, job_id)
        assert time.perf_counter() - t0 < 3.0
