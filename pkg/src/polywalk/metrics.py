"""Position-dependent metric tensors and factorisation of the proposal
covariances ``eps^2 G(x)^{-1}`` they induce."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from polywalk.geometry import Polytope
from polywalk.targets import TargetDensity

METRIC_KINDS = ("hessian", "sq_hessian", "sc_sq_hessian", "barrier", "identity")
MIN_DELTA = 1e-12
NEAR_BOUNDARY = 1e-12


class MetricError(ArithmeticError):
    """The metric (and its diagonal surrogate) cannot be factorised."""


def squared_hessian_metric(H, delta: float) -> np.ndarray:
    """``H^T H + delta I``; positive definite for ``delta > 0``."""
    H = np.asarray(H, dtype=float)
    G = H.T @ H
    G.flat[:: G.shape[0] + 1] += delta
    return G


def scaled_squared_hessian_metric(H, delta: float) -> np.ndarray:
    """Signed entrywise square root of ``H^T H`` plus ``delta I``.

    Not necessarily positive definite.
    """
    H = np.asarray(H, dtype=float)
    M = H.T @ H
    G = np.sign(M) * np.sqrt(np.abs(M))
    G.flat[:: G.shape[0] + 1] += delta
    return G


def barrier_hessian(P: Polytope, x, check_rank: bool = True) -> np.ndarray:
    """Hessian of the log-barrier ``-sum log(b_i - a_i . x)``."""
    if check_rank:
        _check_rank(P)
    slack = P.b - P.A @ np.asarray(x, dtype=float)
    if slack.min() <= NEAR_BOUNDARY:
        raise MetricError(f"point too close to the boundary (slack {slack.min():.3g})")
    Aw = P.A / slack[:, None]
    return Aw.T @ Aw


def _check_rank(P: Polytope) -> None:
    if np.linalg.matrix_rank(P.A) < P.d:
        raise MetricError("constraint matrix is rank deficient")


def delta_from_lambda(lam: float) -> float:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return lam**-2.0


@dataclass(frozen=True)
class FactorizedCovariance:
    """Square-root factor ``F`` of ``Sigma = eps^2 G^{-1}``.

    ``F = eps * chol^{-T}`` where ``G = chol chol^T``, so ``F`` is upper
    triangular and ``F^{-1} w = chol^T w / eps`` is a matrix product.
    ``F`` and ``chol`` may hold the diagonal or isotropic surrogate of ``G``
    when the flags say so.
    """

    F: np.ndarray
    log_abs_det_F: float
    used_diagonal_fallback: bool
    chol: np.ndarray
    eps: float
    used_isotropic_fallback: bool = False

    @property
    def d(self) -> int:
        return self.F.shape[0]

    @property
    def cov(self) -> np.ndarray:
        return self.F @ self.F.T

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.F @ u

    def whiten(self, w: np.ndarray) -> np.ndarray:
        """``F^{-1} w``."""
        return (self.chol.T @ w) / self.eps

    def precondition(self, g: np.ndarray) -> np.ndarray:
        """``G^{-1} g``, i.e. ``F F^T g / eps^2``."""
        return (self.F @ (self.F.T @ g)) / (self.eps * self.eps)


def _from_cholesky(M: np.ndarray, eps: float, diag_fallback: bool, iso: bool = False):
    d = M.shape[0]
    Minv, info = lapack.dtrtri(M, lower=1)
    if info != 0:
        raise MetricError("singular Cholesky factor")
    F = eps * Minv.T
    logdet = d * math.log(eps) - float(np.log(M.diagonal()).sum())
    return FactorizedCovariance(F, logdet, diag_fallback, M, eps, iso)


def factorize(G, eps2: float = 1.0) -> FactorizedCovariance:
    """Factor ``eps2 * G^{-1}``; falls back to ``diag(G)`` when ``G`` is not
    positive definite. Raises ``MetricError`` if that also fails."""
    G = np.asarray(G, dtype=float)
    if not eps2 > 0:
        raise ValueError("eps2 must be positive")
    eps = math.sqrt(eps2)
    if np.isfinite(G).all():
        M, info = lapack.dpotrf(G, lower=1, clean=1)
        if info == 0 and (M.diagonal() > 0).all():
            try:
                return _from_cholesky(M, eps, False)
            except MetricError:
                pass
    diag = G.diagonal()
    if not (np.isfinite(diag).all() and (diag > 0).all()):
        raise MetricError("metric and its diagonal surrogate are not positive definite")
    return _from_cholesky(np.diag(np.sqrt(diag)), eps, True)


def isotropic(d: int, eps2: float = 1.0, fallback: bool = False) -> FactorizedCovariance:
    return _from_cholesky(np.eye(d), math.sqrt(eps2), False, fallback)


class MetricTensor:
    """``G(x) + delta I`` for one of the supported metric kinds.

    ``hessian`` uses the negative Hessian of the log-density. For the squared
    kinds ``delta`` enters inside the metric formula itself.
    """

    def __init__(self, kind: str, *, target: TargetDensity | None = None,
                 polytope: Polytope | None = None, delta: float = 0.0,
                 matrix=None):
        if kind not in METRIC_KINDS + ("constant",):
            raise ValueError(f"unknown metric kind {kind!r}")
        if delta < 0:
            raise ValueError("delta must be nonnegative")
        if kind in ("hessian", "sq_hessian", "sc_sq_hessian") and target is None:
            raise ValueError(f"{kind} metric needs a target")
        if kind == "barrier":
            if polytope is None:
                raise ValueError("barrier metric needs a polytope")
            _check_rank(polytope)
        if kind in ("sq_hessian", "sc_sq_hessian"):
            delta = max(delta, MIN_DELTA)
        if kind == "constant":
            if matrix is None:
                raise ValueError("constant metric needs a matrix")
            matrix = np.asarray(matrix, dtype=float)
        self.kind = kind
        self.target = target
        self.polytope = polytope
        self.delta = float(delta)
        self.matrix = matrix

    @property
    def is_constant(self) -> bool:
        return self.kind in ("identity", "constant")

    def __repr__(self) -> str:
        return f"MetricTensor({self.kind!r}, delta={self.delta:g})"

    def metric_at(self, x) -> np.ndarray:
        kind, delta = self.kind, self.delta
        if kind == "sq_hessian":
            return squared_hessian_metric(self.target.hessian_log_density(x), delta)
        if kind == "sc_sq_hessian":
            return scaled_squared_hessian_metric(self.target.hessian_log_density(x), delta)
        if kind == "hessian":
            G = -self.target.hessian_log_density(x)
        elif kind == "barrier":
            G = barrier_hessian(self.polytope, x, check_rank=False)
        elif kind == "identity":
            G = np.eye(len(np.asarray(x)))
        else:
            G = self.matrix.copy()
        if delta:
            G.flat[:: G.shape[0] + 1] += delta
        return G
