"""FastAPI application wrapping the core package.

Datasets are uploaded (or synthesized) once and addressed by a content hash,
so re-posting the same payload is idempotent and experiment requests stay
small. All computation is synchronous; FastAPI's threadpool handles
concurrent requests, and the dataset registry is guarded by a lock.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

import numpy as np

from .. import __version__
from ..diffusion import kernel_label
from ..errors import SocdiffError
from ..datasets import networks_from_text
from ..harness import (ColdstartComparison, EvaluationResult, ExperimentConfig,
                       SweepResult, coldstart_experiment, run_evaluation,
                       sweep_parameter, synth_generate)
from ..metrics import MetricsReport
from ..networks import CombinedNetwork
from ..verify import all_passed, run_all
from . import schemas as S


@dataclass
class DatasetEntry:
    dataset_id: str
    origin: str
    cnet: CombinedNetwork
    diagnostics: dict
    items_text: str
    social_text: str


class DatasetStore:
    """Content-addressed in-memory dataset registry."""

    def __init__(self):
        self._entries: dict[str, DatasetEntry] = {}
        self._lock = threading.Lock()

    @staticmethod
    def _digest(*parts: str) -> str:
        h = hashlib.sha256()
        for part in parts:
            h.update(part.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()[:16]

    def _insert(self, entry: DatasetEntry) -> DatasetEntry:
        with self._lock:
            return self._entries.setdefault(entry.dataset_id, entry)

    def get(self, dataset_id: str) -> DatasetEntry:
        with self._lock:
            entry = self._entries.get(dataset_id)
        if entry is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown dataset {dataset_id!r}")
        return entry

    def add_upload(self, req: S.DatasetUpload) -> DatasetEntry:
        social = req.social_text if req.social_text is not None else ""
        did = self._digest("upload", req.items_text, social, req.unknown_user_rule)
        with self._lock:
            if did in self._entries:
                return self._entries[did]
        cnet, _, diagnostics = networks_from_text(
            req.items_text, req.social_text, req.unknown_user_rule,
            items_name=req.items_name, social_name=req.social_name)
        return self._insert(DatasetEntry(did, "upload", cnet, diagnostics,
                                         req.items_text, social))

    def add_synth(self, spec: S.SynthSpec) -> DatasetEntry:
        canon = json.dumps(spec.model_dump(), sort_keys=True)
        did = self._digest("synth", canon)
        with self._lock:
            if did in self._entries:
                return self._entries[did]
        cnet = synth_generate(spec.communities, spec.users_per_community,
                              spec.items_per_community, spec.intra_collect,
                              spec.inter_collect, spec.intra_friend,
                              spec.inter_friend, spec.seed)
        items_text = "".join(f"u{u}\to{i}\n" for u, i in cnet.bipartite.edges)
        social_text = "".join(f"u{a}\tu{b}\n" for a, b in cnet.social.edges)
        return self._insert(DatasetEntry(did, "synth", cnet,
                                         {"synth_spec": spec.model_dump()},
                                         items_text, social_text))


def _info(entry: DatasetEntry) -> S.DatasetInfo:
    cnet = entry.cnet
    n, m = cnet.n_users, cnet.n_items
    links = int(cnet.bipartite.edges.shape[0])
    social = int(cnet.social.edges.shape[0])
    return S.DatasetInfo(
        dataset_id=entry.dataset_id, origin=entry.origin,
        n_users=n, n_items=m, n_links=links, n_social_links=social,
        mean_user_degree=links / n if n else 0.0,
        mean_social_degree=2.0 * social / n if n else 0.0,
        diagnostics=entry.diagnostics)


def _metrics_body(rep: MetricsReport) -> S.MetricsBody:
    vals = {f: float(getattr(rep, f)) for f in MetricsReport.FIELDS}
    return S.MetricsBody(l=rep.l, users_evaluated=float(rep.users_evaluated), **vals)


def _echo(req, entry: DatasetEntry, kernel=None) -> dict:
    out = req.model_dump(exclude={"workers"})
    out["dataset_id"] = entry.dataset_id
    if kernel is not None:
        out["kernel"] = kernel_label(kernel)
    return out


def _evaluation_response(result: EvaluationResult, config: dict) -> S.EvaluationResponse:
    return S.EvaluationResponse(config=config,
                                mean=_metrics_body(result.mean),
                                runs=[_metrics_body(r) for r in result.per_run],
                                run_seeds=list(result.run_seeds))


def _sweep_response(result: SweepResult, config: dict) -> S.SweepResponse:
    points = [S.SweepPointBody(parameter=pt.parameter,
                               mean=_metrics_body(pt.mean),
                               runs=[_metrics_body(r) for r in pt.per_run])
              for pt in result.points]
    return S.SweepResponse(config=config, optimal_parameter=result.optimal_parameter,
                           points=points, run_seeds=list(result.run_seeds))


def _coldstart_response(comp: ColdstartComparison, config: dict) -> S.ColdstartResponse:
    return S.ColdstartResponse(
        config=config, smd=_metrics_body(comp.smd), grm=_metrics_body(comp.grm),
        improvements={k: (None if v is None else float(v))
                      for k, v in comp.improvements.items()},
        selected_users=[int(u) for u in comp.selected_users],
        excluded_no_friends=comp.excluded_no_friends,
        excluded_no_links=comp.excluded_no_links,
        lost_mass=float(comp.lost_mass))


def create_app() -> FastAPI:
    app = FastAPI(title="socdiff service", version=__version__)
    store = DatasetStore()

    @app.exception_handler(SocdiffError)
    async def _domain_error(request: Request, exc: SocdiffError):
        return JSONResponse(status_code=400,
                            content={"error": type(exc).__name__,
                                     "message": str(exc)})

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=400,
                            content={"error": type(exc).__name__,
                                     "message": str(exc)})

    @app.get("/health", response_model=S.HealthResponse)
    def health():
        return S.HealthResponse(version=__version__)

    @app.post("/datasets", response_model=S.DatasetInfo)
    def upload_dataset(req: S.DatasetUpload):
        return _info(store.add_upload(req))

    @app.post("/datasets/synth", response_model=S.DatasetInfo)
    def synth_dataset(spec: S.SynthSpec):
        return _info(store.add_synth(spec))

    @app.get("/datasets/{dataset_id}", response_model=S.DatasetInfo)
    def dataset_info(dataset_id: str):
        return _info(store.get(dataset_id))

    @app.get("/datasets/{dataset_id}/degrees", response_model=S.DegreeHistogram)
    def degree_histogram(dataset_id: str, kind: str = "collection"):
        entry = store.get(dataset_id)
        if kind == "collection":
            degrees = entry.cnet.bipartite.user_degree
        elif kind == "popularity":
            degrees = entry.cnet.bipartite.item_degree
        elif kind == "social":
            degrees = entry.cnet.social.social_degree
        else:
            raise HTTPException(status_code=422,
                                detail="kind must be collection, popularity or social")
        counts = np.bincount(degrees) if degrees.size else np.zeros(0, dtype=int)
        hist = {str(d): int(c) for d, c in enumerate(counts) if c > 0}
        return S.DegreeHistogram(kind=kind, histogram=hist)

    @app.get("/datasets/{dataset_id}/export", response_model=S.ExportBody)
    def export_dataset(dataset_id: str):
        entry = store.get(dataset_id)
        return S.ExportBody(items_text=entry.items_text,
                            social_text=entry.social_text)

    @app.post("/datasets/{dataset_id}/evaluate", response_model=S.EvaluationResponse)
    def evaluate(dataset_id: str, req: S.EvaluateRequest):
        entry = store.get(dataset_id)
        kernel = req.kernel()
        config = ExperimentConfig(kernel=kernel, master_seed=req.master_seed,
                                  probe_fraction=req.probe_fraction,
                                  runs=req.runs, l=req.top_l, workers=req.workers)
        result = run_evaluation(entry.cnet, config)
        return _evaluation_response(result, _echo(req, entry, kernel))

    @app.post("/datasets/{dataset_id}/sweep", response_model=S.SweepResponse)
    def sweep(dataset_id: str, req: S.SweepRequest):
        entry = store.get(dataset_id)
        kernel = req.kernel()
        config = ExperimentConfig(kernel=kernel, master_seed=req.master_seed,
                                  probe_fraction=req.probe_fraction,
                                  runs=req.runs, l=req.top_l,
                                  parameter_grid=list(req.grid), workers=req.workers)
        result = sweep_parameter(entry.cnet, config)
        return _sweep_response(result, _echo(req, entry, kernel))

    @app.post("/datasets/{dataset_id}/coldstart", response_model=S.ColdstartResponse)
    def coldstart(dataset_id: str, req: S.ColdstartRequest):
        entry = store.get(dataset_id)
        kernel = req.kernel()
        config = ExperimentConfig(kernel=kernel, l=req.top_l, runs=1,
                                  workers=req.workers)
        comp = coldstart_experiment(entry.cnet, req.max_degree, config)
        return _coldstart_response(comp, _echo(req, entry, kernel))

    @app.post("/verify", response_model=S.VerifyResponse)
    def verify(req: S.VerifyRequest):
        results = run_all(seed=req.seed, instances=req.instances,
                          friendless_rule=req.friendless_rule)
        return S.VerifyResponse(
            passed=all_passed(results),
            results=[S.PropertyBody(name=r.name, passed=r.passed, detail=r.detail)
                     for r in results])

    return app
