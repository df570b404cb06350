"""Request and response models of the HTTP service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from polywalk.diagnostics import DEFAULT_BINS


class _Model(BaseModel):
    # +inf is a legitimate value (R-hat of a stuck chain)
    model_config = ConfigDict(ser_json_inf_nan="constants")


class HistogramModel(_Model):
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    dims: tuple[int, int] = (0, 1)
    counts: list[list[float]]
    n_clamped: int = 0


class GridRequest(_Model):
    filters: dict[str, list[str]] = Field(default_factory=dict)


class ManifestResponse(_Model):
    version: int = 1
    count: int
    problems: list[str]


class GroundTruthRequest(_Model):
    problems: list[str]
    paper_scale: bool = False
    base_len: Optional[int] = Field(default=None, gt=0)
    min_steps: Optional[int] = Field(default=None, ge=0)
    n_walkers: Optional[int] = Field(default=None, gt=0)
    seed: Optional[int] = None
    bins: tuple[int, int] = DEFAULT_BINS


class GroundTruthResponse(_Model):
    histograms: dict[str, HistogramModel]


class RunSettings(_Model):
    n_kept: Optional[int] = Field(default=None, gt=0)
    thin: Optional[int] = Field(default=None, gt=0)
    burn_in: int = Field(default=0, ge=0)
    n_chains: int = Field(default=4, ge=1)
    seed: int = 0
    executor: str = "serial"
    squared_metric: str = "scaled_squared"
    paper_scale: bool = False
    bins: tuple[int, int] = DEFAULT_BINS


class ChainStatsModel(_Model):
    n_steps: int
    acceptance_rate: float
    wall_time: float
    n_infeasible: int
    n_degenerate: int
    n_nonfinite: int
    n_metric_fallback: int
    seed: int


class SampleRequest(_Model):
    problem: str
    sampler: str
    step: float = Field(gt=0)
    run: RunSettings = Field(default_factory=RunSettings)


class SampleResponse(_Model):
    problem: str
    sampler: str
    step: float
    seed: int
    chains: list[list[list[float]]]
    stats: list[ChainStatsModel]


class RunRecordModel(_Model):
    problem_id: str
    sampler: str
    param_kind: str
    step: float
    seed: int
    min_ess: float
    min_ess_per_sec: float
    l1: float
    rhat_max: float
    accept_rate: float
    wall_time_s: float
    flag: str = ""


class BenchRequest(_Model):
    problems: list[str]
    samplers: list[str]
    steps: Optional[list[float]] = None
    ground_truth: dict[str, HistogramModel]
    run: RunSettings = Field(default_factory=RunSettings)


class BenchResponse(_Model):
    best: list[RunRecordModel]
    all: list[RunRecordModel]


class ReportRequest(_Model):
    records: list[RunRecordModel]


class ReportResponse(_Model):
    tables: dict[str, list[dict]]


class DiagnoseRequest(_Model):
    chains: list[list[list[float]]]
    ground_truth: Optional[HistogramModel] = None
    wall_time: Optional[float] = None
    acceptance_rate: Optional[float] = None
    degenerate_events: int = 0


class DiagnoseResponse(_Model):
    min_ess: float
    min_ess_per_sec: Optional[float] = None
    rhat_max: Optional[float] = None
    l1: Optional[float] = None
    acceptance_rate: Optional[float] = None
    degenerate_events: int = 0
