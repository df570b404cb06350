"""Unnormalised benchmark target densities with hand-derived gradients and
Hessians, plus the location-scale-rotation wrapper used to place them inside
the cone and diamond polytopes.

``log_density`` accepts a single point or a batch (leading axes); the
derivative methods take a single point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from polywalk.geometry import Polytope, diagonal_exit

GAUSSIAN_KINDS = ("iso", "disc", "cigar")
TARGET_KINDS = ("funnel", "bowtie", "gauss_iso", "gauss_disc", "gauss_cigar")


class TargetDensity:
    """Base class for an unnormalised log-density on R^d."""

    d: int
    name: str = "target"

    def log_density(self, x):
        raise NotImplementedError

    def grad_log_density(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian_log_density(self, x) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}(d={self.d})"


class Gaussian(TargetDensity):
    """Zero-centred Gaussian with diagonal covariance."""

    def __init__(self, variances):
        var = np.asarray(variances, dtype=float)
        if var.ndim != 1 or np.any(var <= 0):
            raise ValueError("variances must be a positive vector")
        self.d = var.shape[0]
        self.variances = var
        self._prec = 1.0 / var
        self.name = "gauss"

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        return -0.5 * np.sum(x * x * self._prec, axis=-1)

    def grad_log_density(self, x):
        return -np.asarray(x, dtype=float) * self._prec

    def hessian_log_density(self, x):
        return -np.diag(self._prec)


def make_gaussian(kind: str, d: int) -> Gaussian:
    """``iso``: unit variances; ``disc``: first variance 1/100, others 1;
    ``cigar``: first variance 1, others 1/100."""
    if kind not in GAUSSIAN_KINDS:
        raise ValueError(f"unknown Gaussian kind {kind!r}")
    if d < 1 or (kind != "iso" and d < 2):
        raise ValueError(f"{kind} Gaussian needs d >= 2")
    var = np.ones(d)
    if kind == "disc":
        var[0] = 1e-2
    elif kind == "cigar":
        var[1:] = 1e-2
    g = Gaussian(var)
    g.name = f"gauss_{kind}"
    return g


class Funnel(TargetDensity):
    """x_1 ~ N(0, 9) and x_i | x_1 ~ N(0, exp(x_1)) for i >= 2."""

    name = "funnel"

    def __init__(self, d: int):
        if d < 2:
            raise ValueError("funnel needs d >= 2")
        self.d = d

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        x1 = x[..., 0]
        ss = np.sum(x[..., 1:] ** 2, axis=-1)
        return -x1**2 / 18.0 - 0.5 * (self.d - 1) * x1 - 0.5 * np.exp(-x1) * ss

    def grad_log_density(self, x):
        x = np.asarray(x, dtype=float)
        e = np.exp(-x[0])
        rest = x[1:]
        g = np.empty(self.d)
        g[0] = -x[0] / 9.0 - 0.5 * (self.d - 1) + 0.5 * e * rest @ rest
        g[1:] = -e * rest
        return g

    def hessian_log_density(self, x):
        x = np.asarray(x, dtype=float)
        e = np.exp(-x[0])
        rest = x[1:]
        H = np.zeros((self.d, self.d))
        H[0, 0] = -1.0 / 9.0 - 0.5 * e * rest @ rest
        H[0, 1:] = H[1:, 0] = e * rest
        H[np.arange(1, self.d), np.arange(1, self.d)] = -e
        return H


class Bowtie(TargetDensity):
    """x_1 ~ N(0, 1) and x_i | x_1 ~ N(0, x_1^2 / 4 + 0.1) for i >= 2."""

    name = "bowtie"

    def __init__(self, d: int):
        if d < 2:
            raise ValueError("bowtie needs d >= 2")
        self.d = d

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        x1 = x[..., 0]
        v = 0.25 * x1**2 + 0.1
        ss = np.sum(x[..., 1:] ** 2, axis=-1)
        return -0.5 * x1**2 - 0.5 * (self.d - 1) * np.log(v) - ss / (2.0 * v)

    def grad_log_density(self, x):
        x = np.asarray(x, dtype=float)
        x1, rest = x[0], x[1:]
        v = 0.25 * x1**2 + 0.1
        ss = rest @ rest
        g = np.empty(self.d)
        g[0] = -x1 - (self.d - 1) * x1 / (4.0 * v) + ss * x1 / (4.0 * v * v)
        g[1:] = -rest / v
        return g

    def hessian_log_density(self, x):
        x = np.asarray(x, dtype=float)
        x1, rest = x[0], x[1:]
        v = 0.25 * x1**2 + 0.1
        ss = rest @ rest
        H = np.zeros((self.d, self.d))
        H[0, 0] = (
            -1.0
            - (self.d - 1) * (v - 0.5 * x1**2) / (4.0 * v * v)
            + ss * (v - x1**2) / (4.0 * v**3)
        )
        H[0, 1:] = H[1:, 0] = rest * x1 / (2.0 * v * v)
        H[np.arange(1, self.d), np.arange(1, self.d)] = -1.0 / v
        return H


def make_funnel(d: int) -> Funnel:
    return Funnel(d)


def make_bowtie(d: int) -> Bowtie:
    return Bowtie(d)


def rotation_to_diagonal(d: int) -> np.ndarray:
    """Orthogonal ``Q`` with ``Q e_1 = (1, ..., 1) / sqrt(d)``.

    Built as the Householder reflection swapping ``e_1`` and the normalised
    diagonal, so ``Q`` is symmetric and its own inverse.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    u = np.full(d, 1.0 / np.sqrt(d))
    w = -u
    w[0] += 1.0
    nw = w @ w
    if nw < 1e-300:
        return np.eye(d)
    return np.eye(d) - 2.0 * np.outer(w, w) / nw


@dataclass(frozen=True)
class AffineTransform:
    """Location ``m``, scale ``sigma`` and orthogonal ``Q`` of the map
    ``z = Q^T (x - m) / sigma``."""

    m: np.ndarray
    sigma: float
    Q: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float).reshape(-1)
        Q = np.asarray(self.Q, dtype=float)
        if Q.shape != (m.shape[0], m.shape[0]):
            raise ValueError("Q must be d x d matching m")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if np.max(np.abs(Q.T @ Q - np.eye(m.shape[0]))) > 1e-12:
            raise ValueError("Q must be orthogonal")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "sigma", float(self.sigma))

    @classmethod
    def identity(cls, d: int) -> "AffineTransform":
        return cls(np.zeros(d), 1.0, np.eye(d))


class TransformedTarget(TargetDensity):
    """``log phi(x) = log phi_0(Q^T (x - m) / sigma)``."""

    def __init__(self, base: TargetDensity, transform: AffineTransform):
        if base.d != transform.m.shape[0]:
            raise ValueError("dimension mismatch between target and transform")
        self.base = base
        self.transform = transform
        self.d = base.d
        self.name = base.name

    def _z(self, x):
        t = self.transform
        return ((np.asarray(x, dtype=float) - t.m) @ t.Q) / t.sigma

    def log_density(self, x):
        return self.base.log_density(self._z(x))

    def grad_log_density(self, x):
        t = self.transform
        return t.Q @ self.base.grad_log_density(self._z(x)) / t.sigma

    def hessian_log_density(self, x):
        t = self.transform
        H0 = self.base.hessian_log_density(self._z(x))
        return (t.Q @ H0 @ t.Q.T) / (t.sigma * t.sigma)


def transform_target(base: TargetDensity, t: AffineTransform) -> TransformedTarget:
    return TransformedTarget(base, t)


def make_base(kind: str, d: int) -> TargetDensity:
    if kind == "funnel":
        return make_funnel(d)
    if kind == "bowtie":
        return make_bowtie(d)
    if kind.startswith("gauss_"):
        return make_gaussian(kind[len("gauss_"):], d)
    raise ValueError(f"unknown target kind {kind!r}")


def place_target(base_kind: str, d: int, sigma: float, P: Polytope, mu: float | str = 0.5):
    """Place a base density in ``P`` with its first axis along the diagonal.

    The location is ``mu * t * (1, ..., 1)`` where ``t`` is the diagonal exit
    distance. ``mu="halfway"`` means 0.5. Funnel and bowtie always sit at the
    halfway point.
    """
    if mu == "halfway" or base_kind in ("funnel", "bowtie"):
        mu = 0.5
    mu = float(mu)
    base = make_base(base_kind, d)
    m = mu * diagonal_exit(P) * np.ones(d)
    return transform_target(base, AffineTransform(m, sigma, rotation_to_diagonal(d)))


def target_from_json(obj: dict[str, Any], P: Polytope) -> TransformedTarget:
    """Build a target from ``{"kind", "d", "sigma", "mu"}``."""
    kind = obj["kind"]
    if kind not in TARGET_KINDS:
        raise ValueError(f"unknown target kind {kind!r}")
    return place_target(kind, int(obj["d"]), float(obj["sigma"]), P, obj.get("mu", 0.5))
