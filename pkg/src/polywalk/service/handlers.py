"""Service operations as plain functions from request to response models.

The HTTP app and the in-process CLI both dispatch here; none of these touch
the filesystem.
"""

from __future__ import annotations

from dataclasses import asdict

import numpy as np

from polywalk import bench
from polywalk.diagnostics import Histogram2D, diagnose as _diagnose
from polywalk.service import schemas as S


def _hist_model(h: Histogram2D) -> S.HistogramModel:
    return S.HistogramModel(**h.to_json())


def _hist(m: S.HistogramModel) -> Histogram2D:
    return Histogram2D.from_json(m.model_dump())


def _run_config(r: S.RunSettings) -> bench.RunConfig:
    base = bench.RunConfig.paper_scale() if r.paper_scale else bench.RunConfig()
    return bench.RunConfig(
        n_kept=r.n_kept or base.n_kept,
        thin=r.thin,
        burn_in=r.burn_in,
        n_chains=r.n_chains,
        seed=r.seed,
        executor=r.executor,
        squared_metric=r.squared_metric,
        bins=tuple(r.bins),
    )


def grid(req: S.GridRequest) -> S.ManifestResponse:
    kwargs = bench.parse_filters([f"{k}={','.join(map(str, v))}" for k, v in req.filters.items()])
    problems = bench.problem_grid(**kwargs)
    return S.ManifestResponse(count=len(problems), problems=[p.id for p in problems])


def ground_truth(req: S.GroundTruthRequest) -> S.GroundTruthResponse:
    base = bench.GroundTruthConfig.paper_scale() if req.paper_scale else bench.GroundTruthConfig()
    cfg = bench.GroundTruthConfig(
        base_len=req.base_len or base.base_len,
        min_total_steps=base.min_total_steps if req.min_steps is None else req.min_steps,
        n_walkers=req.n_walkers or base.n_walkers,
        seed=base.seed if req.seed is None else req.seed,
        bins=tuple(req.bins),
    )
    out = {}
    for pid in req.problems:
        out[pid] = _hist_model(bench.ground_truth(bench.ProblemSpec.from_id(pid), cfg))
    return S.GroundTruthResponse(histograms=out)


def sample(req: S.SampleRequest) -> S.SampleResponse:
    spec = bench.ProblemSpec.from_id(req.problem)
    chains, stats = bench.sample_problem(spec, req.sampler, req.step, _run_config(req.run))
    return S.SampleResponse(
        problem=spec.id, sampler=req.sampler, step=req.step, seed=req.run.seed,
        chains=[c.tolist() for c in chains],
        stats=[S.ChainStatsModel(**asdict(s)) for s in stats],
    )


def run_bench(req: S.BenchRequest) -> S.BenchResponse:
    problems = [bench.ProblemSpec.from_id(p) for p in req.problems]
    refs = {pid: _hist(h) for pid, h in req.ground_truth.items()}
    steps = req.steps or bench.DEFAULT_STEP_GRID
    best, allr = bench.run_bench(problems, req.samplers, refs, _run_config(req.run), steps)
    return S.BenchResponse(
        best=[S.RunRecordModel(**asdict(r)) for r in best],
        all=[S.RunRecordModel(**asdict(r)) for r in allr],
    )


def report(req: S.ReportRequest) -> S.ReportResponse:
    records = [bench.RunRecord(**r.model_dump()) for r in req.records]
    return S.ReportResponse(tables=bench.aggregate(records))


def diagnose(req: S.DiagnoseRequest) -> S.DiagnoseResponse:
    chains = [np.asarray(c, dtype=float) for c in req.chains]
    ref = _hist(req.ground_truth) if req.ground_truth is not None else None
    out = _diagnose(chains, ref, req.wall_time, req.acceptance_rate, req.degenerate_events)
    return S.DiagnoseResponse(**out)
