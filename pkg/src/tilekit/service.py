"""HTTP API for the interactive design loop.

Tile sets, supersets, and weights load once at startup from a config file;
solves run as background jobs polled by id.  The interactive flow fixes
the drawn contour directly on the superset, so solve requests carry an
explicit pose and skip the crop-configuration search (a null pose falls
back to the full search).
"""

from __future__ import annotations

import json
import logging
import secrets
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .documents import read_superset, read_tileset, solution_to_dict
from .geom import GeometryError, RigidTransform, transform_region
from .graph import crop_superset
from .loss import LossWeights
from .model import load_weights
from .solve import Crop, NoCandidates, Policy, run_algorithm1, run_seed, \
    tile_region
from .tileset import tileset_descriptor

log = logging.getLogger("tilekit.service")


class PoseModel(BaseModel):
    rotation: float = 0.0
    translation: tuple[float, float] = (0.0, 0.0)

    def to_transform(self) -> RigidTransform:
        return RigidTransform(self.rotation, self.translation)


class CropRequest(BaseModel):
    tileset: str
    polygon: list[list[float]]
    pose: PoseModel = Field(default_factory=PoseModel)


class SolveRequest(BaseModel):
    tileset: str
    polygon: list[list[float]]
    pose: PoseModel | None = Field(default_factory=PoseModel)
    policy: str = "gnn"
    runs: int = 8
    K: int = 4
    seed: int | None = None
    round_cap: int = 50


@dataclass
class SolveJob:
    id: str
    state: str = "queued"  # queued -> running -> done | failed
    progress: dict = field(default_factory=dict)
    result: dict | None = None
    error: str | None = None

    def snapshot(self) -> dict:
        return {"id": self.id, "state": self.state,
                "progress": dict(self.progress), "error": self.error}


class JobTable:
    def __init__(self):
        self._jobs: dict[str, SolveJob] = {}
        self._lock = threading.Lock()

    def create(self) -> SolveJob:
        job = SolveJob(id=secrets.token_hex(16))
        with self._lock:
            self._jobs[job.id] = job
        return job

    def get(self, job_id: str) -> SolveJob | None:
        with self._lock:
            return self._jobs.get(job_id)

    def update(self, job_id: str, **fields):
        with self._lock:
            job = self._jobs[job_id]
            for k, v in fields.items():
                setattr(job, k, v)

    def merge_progress(self, job_id: str, **fields):
        with self._lock:
            self._jobs[job_id].progress.update(fields)


@dataclass
class TileSetEntry:
    tileset: object = None
    superset: object = None
    model: object = None
    error: str | None = None


def load_entries(config: dict, base: Path) -> dict[str, TileSetEntry]:
    entries: dict[str, TileSetEntry] = {}
    ts_dir = base / config["tilesets_dir"]
    for path in sorted(ts_dir.glob("*.json")):
        try:
            ts = read_tileset(path)
            entries[ts.name] = TileSetEntry(tileset=ts)
        except Exception as exc:  # malformed descriptors are reported, not fatal
            entries[path.stem] = TileSetEntry(error=str(exc))
    for name, paths in config.get("models", {}).items():
        entry = entries.get(name)
        if entry is None or entry.tileset is None:
            log.warning("config references unknown tile set %r", name)
            continue
        if "superset" in paths:
            entry.superset = read_superset(base / paths["superset"],
                                           entry.tileset)
        if "weights" in paths:
            entry.model = load_weights(base / paths["weights"])
    return entries


def create_app(config: dict, base: Path | None = None,
               workers: int = 2) -> FastAPI:
    base = Path(base) if base is not None else Path(".")
    app = FastAPI(title="tilekit service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    entries = load_entries(config, base)
    jobs = JobTable()
    pool = ThreadPoolExecutor(max_workers=workers)
    app.state.entries = entries
    app.state.jobs = jobs

    def entry_or_422(name: str) -> TileSetEntry:
        entry = entries.get(name)
        if entry is None or entry.tileset is None:
            raise HTTPException(422, f"unknown tile set {name!r}")
        return entry

    def region_or_422(polygon: list[list[float]]):
        from .estimator import as_region
        try:
            return as_region(np.asarray(polygon, dtype=float))
        except (GeometryError, ValueError) as exc:
            raise HTTPException(422, f"invalid polygon: {exc}")

    @app.get("/api/tilesets")
    def list_tilesets():
        out = []
        for name, entry in entries.items():
            if entry.tileset is None:
                out.append({"name": name, "error": entry.error})
                continue
            desc = tileset_descriptor(entry.tileset)
            desc["ready"] = entry.superset is not None
            desc["has_weights"] = entry.model is not None
            out.append(desc)
        return out

    @app.post("/api/crop")
    def crop(req: CropRequest):
        entry = entry_or_422(req.tileset)
        if entry.superset is None:
            raise HTTPException(409, f"superset for {req.tileset!r} is not "
                                     "built; add it to the service config")
        region = region_or_422(req.polygon)
        placements = crop_superset(entry.superset, region,
                                   req.pose.to_transform())
        return {
            "candidate_count": len(placements),
            "candidate_outlines": [p.polygon.vertices.tolist()
                                   for p in placements],
        }

    def run_job(job_id: str, req: SolveRequest):
        jobs.update(job_id, state="running")
        try:
            entry = entries[req.tileset]
            ts = entry.tileset
            ss = entry.superset
            region = region_or_422(req.polygon)
            if req.policy == "gnn":
                if entry.model is None:
                    raise RuntimeError(f"no weights configured for "
                                       f"{req.tileset!r}")
                policy = Policy("gnn", model=entry.model)
            else:
                policy = Policy(req.policy)
            seed = req.seed if req.seed is not None else 0

            def progress(**kw):
                fields = {}
                if "round" in kw:
                    fields["round"] = kw["round"]
                if "crop_index" in kw:
                    fields["crop_index"] = kw["crop_index"]
                if kw.get("completed"):
                    best = jobs.get(job_id).progress.get("best_coverage", 0.0)
                    fields["best_coverage"] = max(best, kw["coverage"])
                if fields:
                    jobs.merge_progress(job_id, **fields)

            if req.pose is not None:
                pose = req.pose.to_transform()
                placements = crop_superset(ss, region, pose)
                if not placements:
                    raise NoCandidates("no candidate fits the shape at the "
                                       "fixed pose")
                crop_obj = Crop(pose, placements,
                                sum(p.area_norm for p in placements),
                                transform_region(region, pose))
                best = None
                for run_index in range(max(1, req.runs)):
                    sol = run_algorithm1(
                        policy, crop_obj, ss, run_seed(seed, 0, run_index),
                        round_cap=req.round_cap,
                        progress=lambda **kw: progress(crop_index=0, **kw))
                    progress(completed=True, coverage=sol.metrics["coverage"])
                    key = (sol.metrics["coverage"],
                           sol.metrics["contact_length"], -run_index)
                    if best is None or key > best[0]:
                        best = (key, sol)
                solution = best[1]
            else:
                solution = tile_region(policy, ts, ss, region, k=req.K,
                                       runs=req.runs, master_seed=seed,
                                       round_cap=req.round_cap,
                                       progress=progress)
            config_block = {"policy": req.policy, "runs": req.runs,
                            "k": req.K, "tileset": req.tileset,
                            "round_cap": req.round_cap}
            doc = solution_to_dict(solution, ts, region, seed, config_block)
            jobs.update(job_id, state="done", result=doc)
            jobs.merge_progress(job_id,
                                best_coverage=solution.metrics["coverage"])
        except Exception as exc:
            log.exception("job %s failed", job_id)
            jobs.update(job_id, state="failed", error=str(exc))

    @app.post("/api/solve")
    def solve(req: SolveRequest):
        entry = entry_or_422(req.tileset)
        if entry.superset is None:
            raise HTTPException(409, f"superset for {req.tileset!r} is not "
                                     "built")
        region_or_422(req.polygon)
        if req.policy not in ("gnn", "greedy", "random"):
            raise HTTPException(422, f"unknown policy {req.policy!r}")
        if req.policy == "gnn" and entry.model is None:
            raise HTTPException(409, f"no weights configured for "
                                     f"{req.tileset!r}")
        job = jobs.create()
        pool.submit(run_job, job.id, req)
        return {"job_id": job.id}

    @app.get("/api/jobs/{job_id}")
    def job_state(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(404, "unknown job")
        return job.snapshot()

    @app.get("/api/jobs/{job_id}/solution")
    def job_solution(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(404, "unknown job")
        if job.state == "failed":
            raise HTTPException(409, f"job failed: {job.error}")
        if job.state != "done":
            raise HTTPException(409, f"job is {job.state}")
        return job.result

    frontend = config.get("frontend_dir")
    if frontend and (base / frontend).is_dir():
        app.mount("/", StaticFiles(directory=base / frontend, html=True),
                  name="frontend")
    return app


def serve(config_path, host: str = "127.0.0.1", port: int = 8080):
    import uvicorn
    config_path = Path(config_path)
    config = json.loads(config_path.read_text())
    app = create_app(config, base=config_path.parent)
    uvicorn.run(app, host=host, port=port)
