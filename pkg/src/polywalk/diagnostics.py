"""Chain diagnostics: effective sample size, split R-hat, 2D marginal
histograms with their L1 distance, and relative performance scores."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

MIN_ESS_LENGTH = 8
# Default 2D histogram resolution. Coarse on purpose: the L1 distance between
# two histograms of n samples has a noise floor of roughly sqrt(2 B / (pi n))
# for B bins, so finer grids need far longer chains to be informative.
DEFAULT_BINS = (10, 10)
DEFAULT_RANGE = ((0.0, 1.0), (0.0, 1.0))


def autocorrelation(x) -> np.ndarray:
    """Empirical autocorrelation at all lags (biased estimator, via FFT)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    xc = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n]
    if acov[0] <= 0:
        return np.concatenate([[1.0], np.zeros(n - 1)])
    return acov / acov[0]


def integrated_autocorrelation_time(x) -> float:
    """IACT by Geyer's initial monotone positive sequence estimator."""
    rho = autocorrelation(x)
    n = rho.shape[0]
    n_pairs = n // 2
    # Gamma_k = rho_2k + rho_2k+1
    gamma = rho[: 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    negative = np.flatnonzero(gamma <= 0)
    k = negative[0] if negative.size else n_pairs
    if k == 0:
        return 1.0 / n
    gamma = np.minimum.accumulate(gamma[:k])
    return -1.0 + 2.0 * float(gamma.sum())


def ess(series, *, return_flag: bool = False):
    """Effective sample size ``n / IACT`` clipped to ``[1, n]``.

    A constant series has no defined autocorrelation; its ESS is 1 and it is
    flagged as degenerate (returned as the second element when
    ``return_flag`` is set, and logged).
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("ess expects a 1D series")
    n = x.shape[0]
    if n < MIN_ESS_LENGTH:
        raise ValueError(f"need at least {MIN_ESS_LENGTH} values, got {n}")
    if not np.isfinite(x).all():
        raise ValueError("series contains non-finite values")
    degenerate = bool(np.ptp(x) == 0.0)
    if degenerate:
        log.debug("constant series; ESS set to 1")
        value = 1.0
    else:
        tau = integrated_autocorrelation_time(x)
        value = float(np.clip(n / tau, 1.0, n)) if tau > 0 else float(n)
    return (value, degenerate) if return_flag else value


def _as_chains(samples) -> list[np.ndarray]:
    if isinstance(samples, np.ndarray):
        samples = [samples]
    chains = [np.asarray(c, dtype=float) for c in samples]
    if not chains:
        raise ValueError("no samples")
    for c in chains:
        if c.ndim != 2:
            raise ValueError("each chain must be an n x d matrix")
    if len({c.shape[1] for c in chains}) != 1:
        raise ValueError("chains disagree in dimension")
    return chains


def marginal_ess(samples) -> np.ndarray:
    """Per-column ESS, summed across chains when a list is given."""
    chains = _as_chains(samples)
    return np.sum([[ess(c[:, j]) for j in range(c.shape[1])] for c in chains], axis=0)


def min_marginal_ess(samples) -> float:
    """Minimum over coordinates of the (chain-summed) marginal ESS."""
    return float(np.min(marginal_ess(samples)))


def split_rhat(chains: Sequence[np.ndarray]) -> np.ndarray:
    """Split-chain potential scale reduction per dimension.

    Each chain is cut into two halves (the middle draw is dropped for odd
    lengths). Dimensions with zero within-half variance get ``inf``.
    """
    chains = _as_chains(chains)
    if len(chains) < 2:
        raise ValueError("split R-hat needs at least 2 chains")
    n = min(c.shape[0] for c in chains)
    if n < 4:
        raise ValueError("each chain needs at least 4 draws")
    half = n // 2
    parts = []
    for c in chains:
        c = c[:n]
        parts.append(c[:half])
        parts.append(c[n - half:])
    x = np.stack(parts)  # (2m, half, d)
    means = x.mean(axis=1)
    W = x.var(axis=1, ddof=1).mean(axis=0)
    B = half * means.var(axis=0, ddof=1)
    var_plus = (half - 1) / half * W + B / half
    # test constancy directly; var() of a constant can round to a few ulps
    frozen = np.all(np.ptp(x, axis=1) == 0.0, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(var_plus / W)
    return np.where(frozen | ~(W > 0), np.inf, r)


def rhat_max(chains: Sequence[np.ndarray]) -> float:
    return float(np.max(split_rhat(chains)))


@dataclass
class Histogram2D:
    """Counts of a 2D marginal on a regular grid.

    Samples outside the ranges are clamped into the edge bins and counted in
    ``n_clamped``.
    """

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    counts: np.ndarray
    dims: tuple[int, int] = (0, 1)
    n_clamped: int = 0

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.ndim != 2:
            raise ValueError("counts must be a 2D array")
        if (self.counts < 0).any():
            raise ValueError("counts must be nonnegative")
        self.x_range = tuple(float(v) for v in self.x_range)
        self.y_range = tuple(float(v) for v in self.y_range)
        self.dims = tuple(int(v) for v in self.dims)

    @property
    def bins(self) -> tuple[int, int]:
        return self.counts.shape

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    @property
    def mass(self) -> np.ndarray:
        t = self.total
        if t <= 0:
            raise ValueError("empty histogram")
        return self.counts / t

    def same_grid(self, other: "Histogram2D") -> bool:
        return (self.bins == other.bins and self.x_range == other.x_range
                and self.y_range == other.y_range and self.dims == other.dims)

    def add(self, samples) -> "Histogram2D":
        """Accumulate more samples in place."""
        counts, clamped = _bin_counts(samples, self.dims, self.bins, self.x_range, self.y_range)
        self.counts += counts
        self.n_clamped += clamped
        return self

    def merge(self, other: "Histogram2D") -> "Histogram2D":
        if not self.same_grid(other):
            raise ValueError("histogram grids differ")
        return Histogram2D(self.x_range, self.y_range, self.counts + other.counts,
                           self.dims, self.n_clamped + other.n_clamped)

    def to_json(self) -> dict:
        return {
            "x_range": list(self.x_range),
            "y_range": list(self.y_range),
            "dims": list(self.dims),
            "counts": self.counts.tolist(),
            "n_clamped": self.n_clamped,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Histogram2D":
        return cls(tuple(obj["x_range"]), tuple(obj["y_range"]), np.array(obj["counts"]),
                   tuple(obj.get("dims", (0, 1))), int(obj.get("n_clamped", 0)))

    @classmethod
    def empty(cls, bins=DEFAULT_BINS, ranges=DEFAULT_RANGE, dims=(0, 1)) -> "Histogram2D":
        return cls(ranges[0], ranges[1], np.zeros(tuple(bins)), dims)


def _bin_index(v: np.ndarray, lo: float, hi: float, nb: int) -> tuple[np.ndarray, int]:
    idx = np.floor((v - lo) / (hi - lo) * nb).astype(np.int64)
    # the upper edge belongs to the last bin
    idx[v == hi] = nb - 1
    outside = (idx < 0) | (idx >= nb)
    return np.clip(idx, 0, nb - 1), int(outside.sum())


def _bin_counts(samples, dims, bins, x_range, y_range):
    s = np.asarray(samples, dtype=float)
    if s.ndim == 1:
        s = s[None, :]
    if s.shape[0] == 0:
        raise ValueError("no samples to bin")
    nx, ny = bins
    ix, cx = _bin_index(s[:, dims[0]], *x_range, nx)
    iy, cy = _bin_index(s[:, dims[1]], *y_range, ny)
    outside = (cx > 0) or (cy > 0)
    flat = np.bincount(ix * ny + iy, minlength=nx * ny).reshape(nx, ny)
    n_clamped = 0
    if outside:
        x0 = s[:, dims[0]]
        y0 = s[:, dims[1]]
        n_clamped = int(((x0 < x_range[0]) | (x0 > x_range[1])
                         | (y0 < y_range[0]) | (y0 > y_range[1])).sum())
    return flat.astype(float), n_clamped


def hist2d(samples, dims=(0, 1), bins=DEFAULT_BINS, ranges=DEFAULT_RANGE) -> Histogram2D:
    """2D histogram of columns ``dims`` of ``samples`` (or a list of chains)."""
    if isinstance(samples, (list, tuple)):
        samples = np.concatenate([np.asarray(c, dtype=float) for c in samples])
    (x0, x1), (y0, y1) = ranges
    if not (x1 > x0 and y1 > y0):
        raise ValueError("ranges must be increasing")
    if dims[0] == dims[1]:
        raise ValueError("dims must differ")
    h = Histogram2D.empty(bins, ranges, dims)
    h.add(samples)
    if h.n_clamped:
        log.warning("%d samples outside the histogram range were clamped", h.n_clamped)
    return h


def l1_error(h: Histogram2D, ref: Histogram2D) -> float:
    """Sum of absolute differences of the normalised bin masses."""
    if not h.same_grid(ref):
        raise ValueError("histogram grids differ")
    return float(np.abs(h.mass - ref.mass).sum())


@dataclass
class RelativePerformance:
    problem_id: str
    sampler: str
    mean_min_ess: float
    n_runs: int
    rel_perf: float = field(default=math.nan)


def relative_performance(records: Iterable) -> list[RelativePerformance]:
    """Mean min-ESS per (problem, sampler) divided by the best mean on the
    same problem.

    ``records`` are objects with ``problem_id``, ``sampler`` and ``min_ess``
    attributes (typically ``RunRecord``). Output is sorted by problem and
    sampler.
    """
    groups: dict[str, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    for r in records:
        groups[r.problem_id][r.sampler].append(float(r.min_ess))
    if not groups:
        raise ValueError("no records")
    out = []
    for pid in sorted(groups):
        means = {s: float(np.mean(v)) for s, v in groups[pid].items()}
        best = max(means.values())
        for s in sorted(means):
            rel = means[s] / best if best > 0 else 1.0
            out.append(RelativePerformance(pid, s, means[s], len(groups[pid][s]), rel))
    return out


def diagnose(chains: Sequence[np.ndarray], ref: Histogram2D | None = None,
             wall_time: float | None = None, acceptance_rate: float | None = None,
             degenerate_events: int = 0) -> dict:
    """Summary report for one multi-chain run."""
    chains = _as_chains(chains)
    m_ess = min_marginal_ess(chains)
    report = {
        "min_ess": m_ess,
        "min_ess_per_sec": m_ess / wall_time if wall_time else None,
        "rhat_max": rhat_max(chains) if len(chains) > 1 else None,
        "l1": None,
        "acceptance_rate": acceptance_rate,
        "degenerate_events": int(degenerate_events),
    }
    if ref is not None:
        h = hist2d(chains, ref.dims, ref.bins, (ref.x_range, ref.y_range))
        report["l1"] = l1_error(h, ref)
    return report
