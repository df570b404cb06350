"""Step-magnitude distributions on the positive half-line, their truncation
to a chord ``[0, smax]`` and inverse-transform sampling."""

from __future__ import annotations

import math

import numpy as np
from scipy import special

# chords shorter than this are treated as degenerate (self-transition)
DEGENERATE_SMAX = 1e-30

_LOG_SQRT_2_OVER_PI = 0.5 * math.log(2.0 / math.pi)


class StepDistribution:
    """Continuous density on ``[0, inf)`` with cdf and inverse cdf."""

    def pdf(self, s):
        return np.exp(self.log_pdf(s))

    def log_pdf(self, s):
        raise NotImplementedError

    def cdf(self, s):
        raise NotImplementedError

    def log_cdf(self, s) -> float:
        if s == math.inf:
            return 0.0
        return math.log(self.cdf(s))

    def inverse_cdf(self, u):
        raise NotImplementedError


class HalfNormal(StepDistribution):
    """|N(0, scale^2)|."""

    def __init__(self, scale: float = 1.0):
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.scale = float(scale)
        self._log_norm = _LOG_SQRT_2_OVER_PI - math.log(self.scale)
        self._k = 1.0 / (self.scale * math.sqrt(2.0))

    def __repr__(self) -> str:
        return f"HalfNormal(scale={self.scale:g})"

    def log_pdf(self, s):
        if isinstance(s, float):
            return self._log_norm - 0.5 * (s / self.scale) ** 2 if s >= 0 else -math.inf
        s = np.asarray(s, dtype=float)
        out = self._log_norm - 0.5 * (s / self.scale) ** 2
        out = np.where(s < 0, -np.inf, out)
        return out if out.ndim else float(out)

    def cdf(self, s):
        if isinstance(s, float):
            return math.erf(max(s, 0.0) * self._k)
        s = np.asarray(s, dtype=float)
        out = special.erf(np.maximum(s, 0.0) * self._k)
        return out if out.ndim else float(out)

    def log_cdf(self, s) -> float:
        if s == math.inf:
            return 0.0
        z = s * self._k
        if z > 1.0:
            return math.log1p(-math.erfc(z))
        return math.log(math.erf(z))

    def inverse_cdf(self, u):
        if isinstance(u, float):
            z = special.erfinv(u) if u < 0.5 else special.erfcinv(1.0 - u)
            return float(z) / self._k
        u = np.asarray(u, dtype=float)
        # erfcinv keeps precision in the upper tail
        out = np.where(
            u < 0.5, special.erfinv(u), special.erfcinv(1.0 - u)
        ) / self._k
        return out if out.ndim else float(out)


class Chi(StepDistribution):
    """Chi distribution with ``dof`` degrees of freedom (norm of a standard
    normal vector in R^dof)."""

    def __init__(self, dof: int):
        if dof < 1:
            raise ValueError("degrees of freedom must be >= 1")
        self.dof = int(dof)
        self._a = 0.5 * self.dof
        self._log_norm = -(self._a - 1.0) * math.log(2.0) - math.lgamma(self._a)

    def __repr__(self) -> str:
        return f"Chi(dof={self.dof})"

    def log_pdf(self, s):
        s = np.asarray(s, dtype=float)
        out = self._log_norm - 0.5 * s * s
        if self.dof > 1:
            with np.errstate(divide="ignore"):
                out = out + (self.dof - 1) * np.log(np.maximum(s, 0.0))
        out = np.where(s < 0, -np.inf, out)
        return out if out.ndim else float(out)

    def cdf(self, s):
        s = np.asarray(s, dtype=float)
        out = special.gammainc(self._a, 0.5 * np.maximum(s, 0.0) ** 2)
        return out if out.ndim else float(out)

    def _sf(self, s):
        return special.gammaincc(self._a, 0.5 * s * s)

    def inverse_cdf(self, u):
        u_arr = np.asarray(u, dtype=float)
        out = np.vectorize(self._inverse_scalar, otypes=[float])(u_arr)
        return out if out.ndim else float(out)

    def _inverse_scalar(self, u: float) -> float:
        if not (0.0 <= u <= 1.0):
            return math.nan
        if u == 0.0:
            return 0.0
        if u == 1.0:
            return math.inf
        # scipy's gammaincinv gives the starting point; Newton steps on the cdf
        # (or survival function in the upper tail) polish it, with a bisection
        # bracket as a safeguard.
        s = math.sqrt(2.0 * special.gammaincinv(self._a, u))
        upper = u > 0.5
        target = 1.0 - u if upper else u
        lo, hi = 0.0, math.inf
        for _ in range(50):
            # f is increasing in s in both branches
            f = target - self._sf(s) if upper else self.cdf(s) - target
            if f > 0:
                hi = s
            else:
                lo = s
            dens = math.exp(self.log_pdf(s)) if s > 0 else 0.0
            if f == 0.0:
                break
            step = f / dens if dens > 0 else math.inf
            nxt = s - step
            if not (lo < nxt < hi):
                nxt = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * s + 1.0
            if abs(nxt - s) <= 1e-12 * max(1.0, s):
                s = nxt
                break
            s = nxt
        return s


def make_chi(d: int) -> Chi:
    return Chi(d)


def matched_half_normal_scale(d: int, moment: str = "second") -> float:
    """Scale of a half-normal matching a chi_d distribution.

    ``second`` matches E[S^2] = d exactly; ``first`` matches the mean.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if moment == "second":
        return math.sqrt(d)
    if moment == "first":
        return math.sqrt(math.pi) * math.exp(math.lgamma(0.5 * (d + 1)) - math.lgamma(0.5 * d))
    raise ValueError(f"unknown moment {moment!r}")


def make_half_normal_matched(d: int, moment: str = "second") -> HalfNormal:
    return HalfNormal(matched_half_normal_scale(d, moment))


def truncated_log_pdf(p: StepDistribution, s: float, smax: float) -> float:
    """Log density of ``p`` truncated to ``[0, smax]``."""
    if not smax > 0:
        raise ValueError("smax must be positive")
    if s < 0 or s > smax:
        return -math.inf
    return float(p.log_pdf(s)) - p.log_cdf(smax)


def sample_truncated(p: StepDistribution, smax: float, u: float) -> float:
    """Inverse-transform draw from ``p`` truncated to ``[0, smax]``."""
    if not (0.0 < u < 1.0):
        raise ValueError("u must lie in (0, 1)")
    if not smax > 0:
        raise ValueError("smax must be positive")
    if smax == math.inf:
        return float(p.inverse_cdf(u))
    s = float(p.inverse_cdf(u * p.cdf(smax)))
    return min(s, smax)
