"""Proposal kernels: the Hit-&-Run family (HR, LHR, smHR, smLHR) and the
Gaussian baselines (RWMH, MALA, smMALA, Dikin, MAPLA).

Each kernel splits its work into ``prepare(x)``, which evaluates everything
the proposal from ``x`` depends on (gradient, metric factor, drifted
centre), and ``propose``/``log_q``, which use that cached information. The
chain reuses the information computed at an accepted candidate, so the
metric is evaluated once per step.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np

from polywalk.geometry import DEFAULT_TOL, Polytope, _forward_step
from polywalk.metrics import (
    FactorizedCovariance,
    MetricError,
    MetricTensor,
    delta_from_lambda,
    factorize,
    isotropic,
)
from polywalk.steps import (
    DEGENERATE_SMAX,
    StepDistribution,
    make_half_normal_matched,
    sample_truncated,
)
from polywalk.targets import TargetDensity

log = logging.getLogger(__name__)

HR_KINDS = ("hr", "lhr", "smhr", "smlhr")
GAUSS_KINDS = ("rwmh", "mala", "smmala", "dikin", "mapla")
MANIFOLD_KINDS = ("smmala", "smhr", "smlhr")
KERNEL_KINDS = GAUSS_KINDS + HR_KINDS
# fixed metric shift used by the squared-Hessian metrics under the
# epsilon parametrisation
FIXED_DELTA = 1e-3
_LOG_2PI = math.log(2.0 * math.pi)


@functools.lru_cache(maxsize=None)
def log_sphere_density(d: int) -> float:
    """Log of the uniform density on the unit sphere in R^d."""
    return math.lgamma(0.5 * d) - math.log(2.0) - 0.5 * d * math.log(math.pi)


@dataclass
class Proposal:
    y: np.ndarray
    log_q_forward: float
    smax: float = math.inf
    clipped: bool = False
    fallback: bool = False
    degenerate: bool = False


@dataclass
class PointInfo:
    """Everything a kernel needs to propose from, or evaluate a density
    conditioned on, the point ``x``."""

    x: np.ndarray
    center: np.ndarray
    cov: FactorizedCovariance
    grad: np.ndarray | None = None
    eps_hat: float | None = None
    clipped: bool = False

    @property
    def fallback(self) -> bool:
        return self.cov.used_diagonal_fallback or self.cov.used_isotropic_fallback


def clipped_drift(x, g, eps2_half: float, P: Polytope):
    """Drift ``x + eps_hat g`` with ``eps_hat = min(eps2_half, kappa / 2)``,
    ``kappa`` being the distance along ``g`` to the nearest constraint ahead.

    Returns ``(mean, eps_hat)``; the mean stays strictly inside ``P`` when
    ``x`` does.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    if not np.any(g):
        return x.copy(), eps2_half
    kappa = _forward_step(P.b - P.A @ x, P.A @ g)
    eps_hat = min(eps2_half, 0.5 * kappa)
    return x + eps_hat * g, eps_hat


def gaussian_log_q(y, mean, F: FactorizedCovariance) -> float:
    """``log N(y; mean, F F^T)``."""
    w = F.whiten(np.asarray(y, dtype=float) - mean)
    return -0.5 * F.d * _LOG_2PI - F.log_abs_det_F - 0.5 * float(w @ w)


def _uniform_open(rng: np.random.Generator) -> float:
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return u


def ehr_propose(x, F: FactorizedCovariance, p: StepDistribution, P: Polytope,
                rng: np.random.Generator) -> Proposal:
    """Elliptical Hit-&-Run draw from centre ``x`` with direction factor ``F``.

    Consumes ``d`` standard normals (the direction) and then one uniform
    (the step magnitude).
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    z = rng.standard_normal(d)
    u = z / math.sqrt(z @ z)
    v = F.apply(u)
    smax = _forward_step(P.b - P.A @ x, P.A @ v)
    uu = _uniform_open(rng)
    if smax <= DEGENERATE_SMAX:
        return Proposal(x.copy(), -math.inf, smax, degenerate=True)
    s = sample_truncated(p, smax, uu)
    if not s > 0:
        return Proposal(x.copy(), -math.inf, smax, degenerate=True)
    y = x + s * v
    # evaluate from the realised y, exactly as the reverse density will be;
    # using s directly differs by rounding in y - x for very short moves
    log_q = ehr_log_q(y, x, F, p, P)
    if log_q == -math.inf:
        return Proposal(x.copy(), -math.inf, smax, degenerate=True)
    return Proposal(y, log_q, smax, fallback=F.used_diagonal_fallback or F.used_isotropic_fallback)


def ehr_log_q(y, x, F: FactorizedCovariance, p: StepDistribution, P: Polytope,
              tol: float = DEFAULT_TOL) -> float:
    """Log density of an elliptical Hit-&-Run move from centre ``x`` to ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    delta = y - x
    d = x.shape[0]
    w = F.whiten(delta)
    gamma = math.sqrt(float(w @ w))
    if gamma == 0.0 or not math.isfinite(gamma):
        return -math.inf
    slack_y = P.b - P.A @ y
    if slack_y.min() < -tol:
        return -math.inf
    v = delta / gamma
    smax = _forward_step(P.b - P.A @ x, P.A @ v)
    if smax <= DEGENERATE_SMAX:
        return -math.inf
    # y is feasible, so gamma <= smax up to rounding
    gamma_in = min(gamma, smax)
    return (
        float(p.log_pdf(gamma_in)) - p.log_cdf(smax)
        - (d - 1) * math.log(gamma) - F.log_abs_det_F + log_sphere_density(d)
    )


class ProposalKernel:
    """One configured proposal mechanism.

    ``step`` is epsilon under the ``eps`` parametrisation and lambda (with
    epsilon fixed to 1 and delta = lambda^-2) under ``delta``. For Dikin it is
    the radius ``r`` (covariance ``r^2/d H_b^-1``) and for MAPLA it is
    epsilon with ``h = eps^2``.
    """

    def __init__(self, kind: str, *, P: Polytope, step: float,
                 target: TargetDensity | None = None,
                 metric: MetricTensor | None = None,
                 step_dist: StepDistribution | None = None,
                 parametrization: str = "eps"):
        if kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {kind!r}")
        if not step > 0:
            raise ValueError("step must be positive")
        if parametrization not in ("eps", "delta"):
            raise ValueError("parametrization must be 'eps' or 'delta'")
        if parametrization == "delta" and kind not in MANIFOLD_KINDS:
            raise ValueError(f"delta parametrization only applies to {MANIFOLD_KINDS}")
        self.kind = kind
        self.P = P
        self.d = P.d
        self.step = float(step)
        self.parametrization = parametrization
        self.target = target
        self.is_hr = kind in HR_KINDS
        self.uses_gradient = kind in ("mala", "smmala", "lhr", "smlhr", "mapla")
        if self.uses_gradient and target is None:
            raise ValueError(f"{kind} needs a target with a gradient")
        if kind in MANIFOLD_KINDS + ("dikin", "mapla") and metric is None:
            raise ValueError(f"{kind} needs a metric")
        if kind in ("rwmh", "mala", "hr", "lhr"):
            metric = MetricTensor("identity")
        self.metric = metric

        if kind == "dikin":
            self.eps2 = self.step**2 / self.d
        elif parametrization == "delta":
            self.eps2 = 1.0
        else:
            self.eps2 = self.step**2
        self.eps = math.sqrt(self.eps2)
        if self.is_hr:
            self.step_dist = step_dist if step_dist is not None else make_half_normal_matched(self.d)
        else:
            self.step_dist = None
        self._const_cov = (
            factorize(metric.metric_at(np.zeros(self.d)), self.eps2) if metric.is_constant else None
        )

    def __repr__(self) -> str:
        return (f"ProposalKernel({self.kind!r}, step={self.step:g}, "
                f"parametrization={self.parametrization!r}, metric={self.metric!r})")

    @property
    def name(self) -> str:
        if self.kind in MANIFOLD_KINDS:
            return f"{self.kind}_{self.parametrization}"
        return self.kind

    def _cov_at(self, x) -> FactorizedCovariance:
        if self._const_cov is not None:
            return self._const_cov
        try:
            return factorize(self.metric.metric_at(x), self.eps2)
        except MetricError:
            return isotropic(self.d, self.eps2, fallback=True)

    def prepare(self, x) -> PointInfo:
        x = np.asarray(x, dtype=float)
        cov = self._cov_at(x)
        if not self.uses_gradient:
            return PointInfo(x, x, cov)
        g = self.target.grad_log_density(x)
        direction = g if self.metric.kind == "identity" else cov.precondition(g)
        if self.is_hr:
            center, eps_hat = clipped_drift(x, direction, 0.5 * self.eps2, self.P)
            return PointInfo(x, center, cov, g, eps_hat, eps_hat < 0.5 * self.eps2)
        center = x + 0.5 * self.eps2 * direction
        return PointInfo(x, center, cov, g, 0.5 * self.eps2)

    def propose(self, info: PointInfo, rng: np.random.Generator) -> Proposal:
        if self.is_hr:
            prop = ehr_propose(info.center, info.cov, self.step_dist, self.P, rng)
            if prop.degenerate:
                prop.y = info.x.copy()
            prop.clipped = info.clipped
            prop.fallback = info.fallback
            return prop
        z = rng.standard_normal(self.d)
        y = info.center + info.cov.apply(z)
        log_q = -0.5 * self.d * _LOG_2PI - info.cov.log_abs_det_F - 0.5 * float(z @ z)
        return Proposal(y, log_q, fallback=info.fallback)

    def log_q(self, y, info: PointInfo) -> float:
        """Log density of proposing ``y`` from the point described by ``info``."""
        if self.is_hr:
            return ehr_log_q(y, info.center, info.cov, self.step_dist, self.P)
        return gaussian_log_q(y, info.center, info.cov)


def parse_sampler(sampler: str) -> tuple[str, str]:
    """Split a sampler id such as ``smlhr_delta`` into ``(kind, parametrization)``."""
    name = sampler.lower()
    for suffix in ("_delta", "_eps"):
        if name.endswith(suffix):
            kind, param = name[: -len(suffix)], suffix[1:]
            break
    else:
        kind, param = name, "eps"
    if kind not in KERNEL_KINDS:
        raise ValueError(f"unknown sampler {sampler!r}")
    if param == "delta" and kind not in MANIFOLD_KINDS:
        raise ValueError(f"{kind} has no delta parametrization")
    return kind, param


def make_kernel(kind: str, target: TargetDensity | None, P: Polytope, step: float,
                parametrization: str | None = None, metric: str | MetricTensor | None = None,
                step_dist: StepDistribution | None = None,
                delta: float | None = None) -> ProposalKernel:
    """Build a kernel from a sampler id (``kind`` may carry a ``_eps`` or
    ``_delta`` suffix) and a metric name."""
    base, param = parse_sampler(kind)
    if parametrization is not None:
        param = parametrization
    mt = metric
    if base in ("dikin", "mapla"):
        mt = MetricTensor("barrier", polytope=P)
    elif base in MANIFOLD_KINDS:
        if mt is None:
            raise ValueError(f"{base} needs a metric")
        if isinstance(mt, str):
            if param == "delta":
                shift = delta_from_lambda(step)
            elif delta is not None:
                shift = delta
            else:
                shift = FIXED_DELTA if mt in ("sq_hessian", "sc_sq_hessian") else 0.0
            mt = MetricTensor(mt, target=target, polytope=P, delta=shift)
    else:
        mt = None
    return ProposalKernel(base, P=P, step=step, target=target, metric=mt,
                          step_dist=step_dist, parametrization=param)
