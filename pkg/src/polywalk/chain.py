"""Metropolis-Hastings transitions, single-chain runs and multi-chain
ensembles."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from polywalk.geometry import DEFAULT_TOL, DomainError, Polytope, diagonal_exit, interior_point
from polywalk.proposals import PointInfo, ProposalKernel
from polywalk.targets import TargetDensity


@dataclass
class ChainState:
    x: np.ndarray
    log_phi: float
    info: PointInfo = field(repr=False)
    step_index: int = 0
    n_accepted: int = 0
    n_infeasible: int = 0
    n_degenerate: int = 0
    n_nonfinite: int = 0
    n_metric_fallback: int = 0


@dataclass(frozen=True)
class ChainConfig:
    n_kept: int = 1000
    thin: int = 1
    burn_in: int = 0
    seed: int = 0
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.n_kept < 1 or self.thin < 1 or self.burn_in < 0:
            raise ValueError("need n_kept >= 1, thin >= 1, burn_in >= 0")


@dataclass
class ChainStats:
    n_steps: int
    acceptance_rate: float
    wall_time: float
    n_infeasible: int
    n_degenerate: int
    n_nonfinite: int
    n_metric_fallback: int
    seed: int

    @property
    def degenerate_events(self) -> int:
        return self.n_degenerate


def init_state(kernel: ProposalKernel, target: TargetDensity, P: Polytope, x0,
               tol: float = DEFAULT_TOL) -> ChainState:
    x0 = np.array(x0, dtype=float)
    if not P.contains(x0, tol):
        raise DomainError("initial point is infeasible")
    log_phi = float(target.log_density(x0))
    if not math.isfinite(log_phi):
        raise ValueError("log density is not finite at the initial point")
    return ChainState(x0, log_phi, kernel.prepare(x0))


def mh_step(kernel: ProposalKernel, target: TargetDensity, P: Polytope, state: ChainState,
            rng: np.random.Generator, tol: float = DEFAULT_TOL) -> tuple[ChainState, bool]:
    """One Metropolis-Hastings transition; ``state`` is updated in place and
    returned along with the acceptance flag.

    Random numbers are drawn in a fixed order: the proposal's own draws, then
    one uniform for the accept test (always drawn, even for rejections that
    are decided early).
    """
    state.step_index += 1
    prop = kernel.propose(state.info, rng)
    u = rng.random()
    if prop.degenerate:
        state.n_degenerate += 1
        return state, False
    y = prop.y
    if np.min(P.b - P.A @ y) < -tol:
        state.n_infeasible += 1
        return state, False
    log_phi_y = float(target.log_density(y))
    if not math.isfinite(log_phi_y):
        state.n_nonfinite += 1
        return state, False
    info_y = kernel.prepare(y)
    if info_y.fallback:
        state.n_metric_fallback += 1
    log_alpha = (log_phi_y - state.log_phi) + (kernel.log_q(state.x, info_y) - prop.log_q_forward)
    if math.isnan(log_alpha):
        state.n_nonfinite += 1
        return state, False
    if u > 0.0 and math.log(u) < log_alpha:
        state.x = y
        state.log_phi = log_phi_y
        state.info = info_y
        state.n_accepted += 1
        return state, True
    return state, False


def log_acceptance(kernel: ProposalKernel, target: TargetDensity, x, y) -> float:
    """Log acceptance ratio of the move ``x -> y`` recomputed from scratch."""
    info_x = kernel.prepare(x)
    info_y = kernel.prepare(y)
    return (float(target.log_density(y)) - float(target.log_density(x))
            + kernel.log_q(x, info_y) - kernel.log_q(y, info_x))


def run_chain(kernel: ProposalKernel, target: TargetDensity, P: Polytope, x0,
              cfg: ChainConfig, rng: np.random.Generator | None = None):
    """Run ``burn_in + n_kept * thin`` MH steps, keeping every ``thin``-th
    state after burn-in. Returns ``(samples, stats)``."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    state = init_state(kernel, target, P, x0, cfg.tol)
    out = np.empty((cfg.n_kept, P.d))
    t0 = time.perf_counter()
    for _ in range(cfg.burn_in):
        mh_step(kernel, target, P, state, rng, cfg.tol)
    for i in range(cfg.n_kept):
        for _ in range(cfg.thin):
            mh_step(kernel, target, P, state, rng, cfg.tol)
        out[i] = state.x
    wall = time.perf_counter() - t0
    n_steps = state.step_index
    stats = ChainStats(
        n_steps=n_steps,
        acceptance_rate=state.n_accepted / max(n_steps, 1),
        wall_time=wall,
        n_infeasible=state.n_infeasible,
        n_degenerate=state.n_degenerate,
        n_nonfinite=state.n_nonfinite,
        n_metric_fallback=state.n_metric_fallback,
        seed=cfg.seed,
    )
    return out, stats


def _run_one(args):
    kernel, target, P, x0, cfg = args
    return run_chain(kernel, target, P, x0, cfg)


def max_workers() -> int:
    env = os.environ.get("POLYWALK_THREADS")
    n = os.cpu_count() or 1
    if env:
        n = min(n, max(1, int(env)))
    return n


def run_ensemble(kernel: ProposalKernel, target: TargetDensity, P: Polytope, x0,
                 cfg: ChainConfig, n_chains: int = 4, executor: str = "serial"):
    """Run ``n_chains`` chains with seeds ``cfg.seed + i``. Output order is
    the chain index regardless of scheduling.

    ``executor`` is ``serial``, ``thread`` or ``process``.
    """
    if n_chains < 1:
        raise ValueError("n_chains must be >= 1")
    jobs = [(kernel, target, P, x0, replace(cfg, seed=cfg.seed + i)) for i in range(n_chains)]
    if executor == "serial" or n_chains == 1:
        results = [_run_one(j) for j in jobs]
    else:
        pool_cls = {"thread": ThreadPoolExecutor, "process": ProcessPoolExecutor}[executor]
        with pool_cls(max_workers=min(max_workers(), n_chains)) as pool:
            results = list(pool.map(_run_one, jobs))
    samples = [r[0] for r in results]
    stats = [r[1] for r in results]
    return samples, stats


def default_x0(P: Polytope) -> np.ndarray:
    """Midpoint of the diagonal chord from the origin when that is strictly
    interior, otherwise a slack-maximising interior point."""
    ones = np.ones(P.d)
    try:
        if P.contains(np.zeros(P.d)):
            t = diagonal_exit(P)
            if math.isfinite(t) and t > 0:
                x = 0.5 * t * ones
                if np.min(P.slack(x)) > 0:
                    return x
    except DomainError:
        pass
    x = interior_point(P)
    if np.min(P.slack(x)) <= 0:
        raise DomainError("no interior point found")
    return x
