"""Benchmark harness: the problem grid, ground-truth histograms, step-size
grid search and aggregation of results into report tables."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import re
from collections import defaultdict
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from polywalk.chain import ChainConfig, default_x0, run_ensemble
from polywalk.diagnostics import (
    DEFAULT_BINS,
    DEFAULT_RANGE,
    Histogram2D,
    hist2d,
    l1_error,
    min_marginal_ess,
    relative_performance,
    split_rhat,
)
from polywalk.geometry import DEFAULT_TOL, PARALLEL_TOL, Polytope, make_cone, make_diamond
from polywalk.metrics import MetricError
from polywalk.proposals import MANIFOLD_KINDS, make_kernel, parse_sampler
from polywalk.targets import TargetDensity, place_target

log = logging.getLogger(__name__)

DENSITIES = (
    "funnel", "bowtie",
    "gauss_iso_mu0", "gauss_iso_mu0.5",
    "gauss_disc_mu0", "gauss_disc_mu0.5",
    "gauss_cigar_mu0", "gauss_cigar_mu0.5",
)
LOG_SIGMAS = (-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0)
POLYTOPES = ("cone", "diamond")
THETAS = (9.0, 19.0, 45.0, 90.0)
DIMS = (2, 4, 8, 16, 32)
DEFAULT_STEP_GRID = tuple(float(v) for v in np.logspace(-2, 1, 13))
SQUARED_METRICS = {"scaled_squared": "sc_sq_hessian", "squared": "sq_hessian"}

_ID_RE = re.compile(
    r"^(?P<density>[a-z_0-9.]+)-(?P<polytope>cone|diamond)(?P<theta>[0-9.]+)"
    r"-d(?P<d>\d+)-s(?P<log_sigma>[-+][0-9.]+)$"
)


@dataclass(frozen=True, order=True)
class ProblemSpec:
    """One benchmark problem. ``log_sigma`` is ``log10`` of the scale."""

    density: str
    d: int
    log_sigma: float
    polytope: str
    theta: float

    def __post_init__(self):
        if self.density not in DENSITIES:
            raise ValueError(f"unknown density {self.density!r}")
        if self.polytope not in POLYTOPES:
            raise ValueError(f"unknown polytope {self.polytope!r}")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not (0.0 < self.theta <= 90.0):
            raise ValueError("theta must lie in (0, 90]")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "log_sigma", float(self.log_sigma))
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def sigma(self) -> float:
        return 10.0 ** self.log_sigma

    @property
    def base_kind(self) -> str:
        return self.density.split("_mu")[0]

    @property
    def mu(self) -> float:
        if "_mu" in self.density:
            return float(self.density.split("_mu")[1])
        return 0.5

    @property
    def is_gaussian(self) -> bool:
        return self.density.startswith("gauss_")

    @property
    def group(self) -> str:
        """Density group used in report tables."""
        if self.is_gaussian:
            return f"gauss_mu{self.density.split('_mu')[1]}"
        return self.density

    @property
    def id(self) -> str:
        return f"{self.density}-{self.polytope}{self.theta:g}-d{self.d}-s{self.log_sigma:+g}"

    @classmethod
    def from_id(cls, pid: str) -> "ProblemSpec":
        m = _ID_RE.match(pid)
        if m is None:
            raise ValueError(f"malformed problem id {pid!r}")
        return cls(m["density"], int(m["d"]), float(m["log_sigma"]), m["polytope"], float(m["theta"]))

    def in_grid(self) -> bool:
        return (self.d in DIMS and self.log_sigma in LOG_SIGMAS and self.theta in THETAS)

    def polytope_obj(self) -> Polytope:
        maker = make_cone if self.polytope == "cone" else make_diamond
        return maker(self.d, self.theta)

    def build(self) -> tuple[Polytope, TargetDensity]:
        P = self.polytope_obj()
        return P, place_target(self.base_kind, self.d, self.sigma, P, self.mu)

    def to_json(self) -> dict:
        return {"id": self.id, **asdict(self)}


def _as_set(values, cast):
    if values is None:
        return None
    if isinstance(values, (str, int, float)):
        values = [values]
    return {cast(v) for v in values}


def problem_grid(density=None, d=None, log_sigma=None, polytope=None, theta=None) -> list[ProblemSpec]:
    """Cartesian product of all axes, each optionally restricted to a subset.

    The unfiltered grid has 8 * 7 * 2 * 4 * 5 = 2240 problems.
    """
    axes = {
        "density": (DENSITIES, _as_set(density, str)),
        "d": (DIMS, _as_set(d, int)),
        "log_sigma": (LOG_SIGMAS, _as_set(log_sigma, float)),
        "polytope": (POLYTOPES, _as_set(polytope, str)),
        "theta": (THETAS, _as_set(theta, float)),
    }
    chosen = {}
    for name, (full, keep) in axes.items():
        if keep is not None:
            unknown = keep - set(full)
            if unknown:
                raise ValueError(f"values {sorted(unknown)} are not on the {name} axis")
        chosen[name] = [v for v in full if keep is None or v in keep]
    out = [
        ProblemSpec(dn, dd, ls, pt, th)
        for dn, pt, th, dd, ls in itertools.product(
            chosen["density"], chosen["polytope"], chosen["theta"], chosen["d"], chosen["log_sigma"])
    ]
    if not out:
        log.warning("problem filter selects no problems")
    return out


def parse_filters(items: Sequence[str]) -> dict:
    """Turn ``["d=2,4", "density=funnel"]`` into ``problem_grid`` keyword
    arguments. ``sigma`` values are given as powers of ten."""
    out: dict[str, list] = {}
    for item in items:
        if "=" not in item:
            raise ValueError(f"filter {item!r} is not of the form key=value")
        key, val = item.split("=", 1)
        key = key.strip()
        if key == "sigma":
            key = "log_sigma"
            vals = [math.log10(float(v)) for v in val.split(",")]
            vals = [round(v * 2) / 2 for v in vals]
        else:
            vals = [v.strip() for v in val.split(",")]
        if key not in ("density", "d", "log_sigma", "polytope", "theta"):
            raise ValueError(f"unknown filter key {key!r}")
        out.setdefault(key, []).extend(vals)
    return out


def make_manifest(problems: Iterable[ProblemSpec]) -> dict:
    return {"version": 1, "problems": [p.id for p in problems]}


def load_manifest(obj: dict | str | Path) -> list[ProblemSpec]:
    if not isinstance(obj, dict):
        obj = json.loads(Path(obj).read_text())
    return [ProblemSpec.from_id(pid) for pid in obj["problems"]]


# ---------------------------------------------------------------------------
# ground truth


@dataclass(frozen=True)
class GroundTruthConfig:
    """Ground-truth run settings.

    The total number of HR steps is ``base_len * d * log2(d)`` (times
    ``gauss_factor`` for Gaussian targets) but at least ``min_total_steps``,
    spread over ``n_walkers`` independent walkers advanced together. Each
    walker first discards ``max(min_burn, burn_frac * steps_per_walker)``
    steps.
    """

    base_len: int = 200_000
    # low-dimensional cells are cheap but the d log d rule leaves them noisy
    min_total_steps: int = 4_000_000
    n_walkers: int = 256
    burn_frac: float = 0.2
    min_burn: int = 500
    gauss_factor: float = 10.0
    seed: int = 12345
    bins: tuple[int, int] = DEFAULT_BINS
    ranges: tuple[tuple[float, float], tuple[float, float]] = DEFAULT_RANGE

    @classmethod
    def paper_scale(cls, **kw) -> "GroundTruthConfig":
        return cls(base_len=1_000_000, **kw)

    def total_steps(self, spec: ProblemSpec) -> int:
        n = self.base_len * spec.d * max(math.log2(spec.d), 1.0)
        if spec.is_gaussian:
            n *= self.gauss_factor
        return int(max(n, self.min_total_steps))


def _batch_forward_step(slack: np.ndarray, av: np.ndarray) -> np.ndarray:
    ahead = av > PARALLEL_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(ahead, np.maximum(slack, 0.0) / np.where(ahead, av, 1.0), np.inf)
    return r.min(axis=1)


def _log_erf(z: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(z > 1.0, np.log1p(-special.erfc(z)), np.log(special.erf(z)))


def hr_walkers(target: TargetDensity, P: Polytope, x0: np.ndarray, n_steps: int, eps: float,
               rng: np.random.Generator, hist: Histogram2D | None = None, burn_in: int = 0,
               chunk: int = 256):
    """Advance a batch of independent Hit-&-Run walkers.

    Directions are uniform on the sphere scaled by ``eps`` and magnitudes are
    half-normal with unit scale, truncated to the chord; the MH correction
    is the ratio of forward and backward chord normalisers. Post burn-in
    states are added to ``hist``. Returns the final states and the
    acceptance rate.
    """
    x = np.array(x0, dtype=float, copy=True)
    W, d = x.shape
    A, b = P.A, P.b
    log_phi = target.log_density(x)
    k = 1.0 / math.sqrt(2.0)
    accepted = 0
    buf: list[np.ndarray] = []
    for t in range(n_steps):
        z = rng.standard_normal((W, d))
        v = eps * z / np.linalg.norm(z, axis=1, keepdims=True)
        av = v @ A.T
        smax = _batch_forward_step(b - x @ A.T, av)
        u = rng.random(W)
        u = np.where(u == 0.0, 0.5, u)
        log_f_fwd = _log_erf(smax * k)
        cdf_max = np.exp(log_f_fwd)
        q = u * cdf_max
        s = np.where(q < 0.5, special.erfinv(q), special.erfcinv(1.0 - q)) / k
        s = np.minimum(s, smax)
        y = x + s[:, None] * v
        slack_y = b - y @ A.T
        smax_back = _batch_forward_step(slack_y, -av)
        log_phi_y = target.log_density(y)
        log_alpha = log_phi_y - log_phi + log_f_fwd - _log_erf(smax_back * k)
        ok = (smax > 1e-30) & (s > 0) & (slack_y.min(axis=1) >= -DEFAULT_TOL) & np.isfinite(log_phi_y)
        acc = ok & (np.log(rng.random(W)) < log_alpha)
        x[acc] = y[acc]
        log_phi = np.where(acc, log_phi_y, log_phi)
        accepted += int(acc.sum())
        if hist is not None and t >= burn_in:
            buf.append(x.copy())
            if len(buf) >= chunk:
                hist.add(np.concatenate(buf))
                buf = []
    if hist is not None and buf:
        hist.add(np.concatenate(buf))
    return x, accepted / max(1, W * n_steps)


def ground_truth(spec: ProblemSpec, cfg: GroundTruthConfig | None = None) -> Histogram2D:
    """Reference 2D histogram of dims (0, 1) from a long Hit-&-Run run."""
    cfg = cfg or GroundTruthConfig()
    P, target = spec.build()
    rng = np.random.default_rng([cfg.seed, _stable_hash(spec.id)])
    per_walker = max(1, math.ceil(cfg.total_steps(spec) / cfg.n_walkers))
    burn = max(cfg.min_burn, int(cfg.burn_frac * per_walker))
    x0 = np.tile(default_x0(P), (cfg.n_walkers, 1))
    hist = Histogram2D.empty(cfg.bins, cfg.ranges)
    _, acc = hr_walkers(target, P, x0, per_walker + burn, spec.sigma, rng, hist, burn)
    log.info("ground truth %s: %d walkers x %d steps, acceptance %.3f",
             spec.id, cfg.n_walkers, per_walker + burn, acc)
    return hist


def _stable_hash(s: str) -> int:
    # Python's hash() is salted per process
    h = 1469598103934665603
    for ch in s.encode():
        h = ((h ^ ch) * 1099511628211) % (1 << 64)
    return h


# ---------------------------------------------------------------------------
# sampler runs and grid search


@dataclass(frozen=True)
class RunConfig:
    """Settings for one sampler ensemble. ``thin=None`` means thin by ``d``."""

    n_kept: int = 5000
    thin: int | None = None
    burn_in: int = 0
    n_chains: int = 4
    seed: int = 0
    executor: str = "serial"
    squared_metric: str = "scaled_squared"
    bins: tuple[int, int] = DEFAULT_BINS
    ranges: tuple[tuple[float, float], tuple[float, float]] = DEFAULT_RANGE

    @classmethod
    def paper_scale(cls, **kw) -> "RunConfig":
        return cls(n_kept=20_000, **kw)

    def chain_config(self, d: int) -> ChainConfig:
        return ChainConfig(n_kept=self.n_kept, thin=self.thin or d, burn_in=self.burn_in,
                           seed=self.seed)


@dataclass
class RunRecord:
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

    @property
    def failed(self) -> bool:
        return bool(self.flag)


RECORD_COLUMNS = [f.name for f in fields(RunRecord)]


def metric_for(spec: ProblemSpec, sampler: str, squared_metric: str = "scaled_squared") -> str | None:
    """Metric used by manifold samplers: the Hessian metric for Gaussian
    targets and a squared-Hessian variant for funnel and bowtie."""
    kind, _ = parse_sampler(sampler)
    if kind not in MANIFOLD_KINDS:
        return None
    if spec.is_gaussian:
        return "hessian"
    if squared_metric not in SQUARED_METRICS:
        raise ValueError(f"squared_metric must be one of {sorted(SQUARED_METRICS)}")
    return SQUARED_METRICS[squared_metric]


def sample_problem(spec: ProblemSpec, sampler: str, step: float, cfg: RunConfig):
    """Run the ``cfg.n_chains`` ensemble. Returns ``(chains, stats)``."""
    P, target = spec.build()
    kernel = make_kernel(sampler, target, P, step, metric=metric_for(spec, sampler, cfg.squared_metric))
    return run_ensemble(kernel, target, P, default_x0(P), cfg.chain_config(spec.d),
                        n_chains=cfg.n_chains, executor=cfg.executor)


def _failed_record(spec, sampler, param, step, seed, flag) -> RunRecord:
    return RunRecord(spec.id, sampler, param, float(step), seed, 0.0, 0.0, math.inf,
                     math.inf, 0.0, 0.0, flag)


def evaluate_run(spec: ProblemSpec, sampler: str, step: float, cfg: RunConfig,
                 ref: Histogram2D) -> RunRecord:
    """Run one ensemble and score it against the reference histogram."""
    _, param = parse_sampler(sampler)
    try:
        chains, stats = sample_problem(spec, sampler, step, cfg)
    except MetricError as exc:
        log.warning("%s on %s failed: %s", sampler, spec.id, exc)
        return _failed_record(spec, sampler, param, step, cfg.seed, "metric_error")
    P = spec.polytope_obj()
    for c in chains:
        if not P.contains(c, DEFAULT_TOL).all():
            return _failed_record(spec, sampler, param, step, cfg.seed, "infeasible_sample")
    wall = sum(s.wall_time for s in stats)
    m_ess = min_marginal_ess(chains)
    rhat = float(np.max(split_rhat(chains))) if len(chains) > 1 else math.nan
    h = hist2d(chains, (0, 1), cfg.bins, cfg.ranges)
    n_steps = sum(s.n_steps for s in stats)
    acc = sum(s.acceptance_rate * s.n_steps for s in stats) / max(n_steps, 1)
    flag = "stuck" if acc == 0.0 else ""
    return RunRecord(spec.id, sampler, param, float(step), cfg.seed, m_ess,
                     m_ess / wall if wall > 0 else math.inf, l1_error(h, ref), rhat,
                     acc, wall, flag)


def _selection_key(r: RunRecord):
    return (r.l1, -r.min_ess, r.step)


def select_best(records: Sequence[RunRecord]) -> RunRecord:
    """Smallest L1; ties go to larger min-ESS, then to the smaller step."""
    if not records:
        raise ValueError("no records to select from")
    return min(records, key=_selection_key)


def grid_search(spec: ProblemSpec, sampler: str, steps: Sequence[float] = DEFAULT_STEP_GRID,
                cfg: RunConfig | None = None, ref: Histogram2D | None = None):
    """Evaluate ``sampler`` at every step value. Returns ``(best, all)``."""
    cfg = cfg or RunConfig()
    if not steps:
        raise ValueError("empty step grid")
    if ref is None:
        ref = ground_truth(spec, GroundTruthConfig(bins=cfg.bins, ranges=cfg.ranges))
    records = [evaluate_run(spec, sampler, s, cfg, ref) for s in sorted(set(float(v) for v in steps))]
    return select_best(records), records


# ---------------------------------------------------------------------------
# aggregation


def best_records(records: Iterable[RunRecord]) -> list[RunRecord]:
    """Best step per (problem, sampler, seed)."""
    groups: dict[tuple, list[RunRecord]] = defaultdict(list)
    for r in records:
        groups[(r.problem_id, r.sampler, r.seed)].append(r)
    return [select_best(groups[k]) for k in sorted(groups)]


_AXES = ("density", "group", "polytope", "theta", "d", "log_sigma")


def _axis_value(spec: ProblemSpec, axis: str):
    return spec.group if axis == "group" else getattr(spec, axis)


def aggregate(records: Iterable[RunRecord]) -> dict[str, list[dict]]:
    """Report tables from run records.

    ``l1_table`` holds the mean L1 per (sampler, density group, angle) and
    ``rel_perf`` the relative performance per (sampler, axis, value),
    averaged over problems. Only the best step per (problem, sampler, seed)
    enters. Timing-dependent columns are left out so reports are
    reproducible.
    """
    best = best_records(records)
    if not best:
        raise ValueError("no records")
    specs = {r.problem_id: ProblemSpec.from_id(r.problem_id) for r in best}

    cells: dict[tuple, list[float]] = defaultdict(list)
    for r in best:
        sp = specs[r.problem_id]
        cells[(r.sampler, sp.group, sp.theta)].append(r.l1)
    l1_table = [
        {"sampler": s, "group": g, "theta": th, "mean_l1": float(np.mean(v)), "n": len(v)}
        for (s, g, th), v in sorted(cells.items())
    ]

    perf = relative_performance(best)
    by_axis: dict[tuple, list[float]] = defaultdict(list)
    for p in perf:
        sp = specs[p.problem_id]
        for axis in _AXES:
            by_axis[(p.sampler, axis, str(_axis_value(sp, axis)))].append(p.rel_perf)
    rel_table = [
        {"sampler": s, "axis": a, "value": v, "mean_rel_perf": float(np.mean(x)), "n": len(x)}
        for (s, a, v), x in sorted(by_axis.items())
    ]
    per_problem = [asdict(p) for p in perf]
    return {"l1_table": l1_table, "rel_perf": rel_table, "rel_perf_by_problem": per_problem}


def write_tables(tables: dict[str, list[dict]], out_dir: str | Path) -> list[Path]:
    """Write each table as CSV plus one combined JSON file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, rows in tables.items():
        path = out / f"{name}.csv"
        with path.open("w", newline="") as fh:
            if rows:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]))
                w.writeheader()
                w.writerows(rows)
        written.append(path)
    path = out / "report.json"
    path.write_text(json.dumps(tables, indent=2, sort_keys=True))
    written.append(path)
    return written


def write_records(records: Iterable[RunRecord], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RECORD_COLUMNS)
        w.writeheader()
        for r in records:
            w.writerow(asdict(r))


def read_records(path: str | Path) -> list[RunRecord]:
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for f in fields(RunRecord):
                raw = row.get(f.name, "")
                if f.name in ("problem_id", "sampler", "param_kind", "flag"):
                    kw[f.name] = raw or ""
                elif f.name == "seed":
                    kw[f.name] = int(raw)
                else:
                    kw[f.name] = float(raw)
            out.append(RunRecord(**kw))
    return out


def run_bench(problems: Sequence[ProblemSpec], samplers: Sequence[str],
              refs: dict[str, Histogram2D], cfg: RunConfig | None = None,
              steps: Sequence[float] | dict[str, Sequence[float]] = DEFAULT_STEP_GRID):
    """Grid-search every sampler on every problem. Returns ``(best, all)``."""
    cfg = cfg or RunConfig()
    best, everything = [], []
    for spec in problems:
        if spec.id not in refs:
            raise KeyError(f"no ground truth for {spec.id}")
        for sampler in samplers:
            grid = steps[sampler] if isinstance(steps, dict) else steps
            b, allr = grid_search(spec, sampler, grid, cfg, refs[spec.id])
            best.append(b)
            everything.extend(allr)
    return best, everything


__all__ = [
    "DENSITIES", "LOG_SIGMAS", "POLYTOPES", "THETAS", "DIMS", "DEFAULT_STEP_GRID",
    "ProblemSpec", "problem_grid", "parse_filters", "make_manifest", "load_manifest",
    "GroundTruthConfig", "hr_walkers", "ground_truth", "RunConfig", "RunRecord",
    "RECORD_COLUMNS", "metric_for", "sample_problem", "evaluate_run", "select_best",
    "grid_search", "best_records", "aggregate", "write_tables", "write_records",
    "read_records", "run_bench",
]
