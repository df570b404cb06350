"""Linearly constrained domains ``{x : A x <= b}`` and the ray geometry used by
the Hit-&-Run family of proposals."""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np
from scipy.optimize import linprog

DEFAULT_TOL = 1e-9
# |a_i . v| below this is treated as a constraint parallel to the ray.
PARALLEL_TOL = 1e-30


class DomainError(ValueError):
    """Raised when a point lies outside the polytope beyond tolerance."""


class Polytope:
    """Immutable polytope ``{x : A x <= b}``.

    Rows of ``A`` are constraint normals. All-zero rows are rejected since they
    are either vacuous or make the domain empty.
    """

    __slots__ = ("A", "b", "_row_norms")

    def __init__(self, A, b):
        A = np.array(A, dtype=float, ndmin=2)
        b = np.array(b, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise ValueError(f"A must be a non-empty m x d matrix, got shape {A.shape}")
        if b.shape[0] != A.shape[0]:
            raise ValueError(f"b has length {b.shape[0]}, expected {A.shape[0]}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("A and b must be finite")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("A contains an all-zero row")
        A.setflags(write=False)
        b.setflags(write=False)
        norms.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "_row_norms", norms)

    def __setattr__(self, name, value):
        raise AttributeError("Polytope is immutable")

    def __reduce__(self):
        return (Polytope, (np.array(self.A), np.array(self.b)))

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def __repr__(self) -> str:
        return f"Polytope(m={self.m}, d={self.d})"

    def _check_dim(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise ValueError(f"expected a vector of length {self.d}, got shape {x.shape}")
        return x

    def slack(self, x) -> np.ndarray:
        """Return ``b - A x`` (vectorised over leading axes of ``x``)."""
        x = self._check_dim(x)
        return self.b - x @ self.A.T

    def contains(self, x, tol: float = 0.0):
        """True iff ``A x <= b + tol``. Works on a single point or a batch."""
        if tol < 0:
            raise ValueError("tol must be nonnegative")
        return np.all(self.slack(x) >= -tol, axis=-1)

    def max_forward_step(self, x, v, tol: float = DEFAULT_TOL) -> float:
        """Largest ``s`` such that ``x + s v`` stays in the polytope.

        Only constraints lying ahead of the ray (``a_i . v > 0``) bind; returns
        ``inf`` if there are none. Slacks that are marginally negative (within
        ``tol``) are clamped to zero so the result is never negative.
        """
        x = self._check_dim(x)
        v = self._check_dim(v)
        if not np.any(v):
            raise ValueError("direction v must be nonzero")
        slack = self.b - self.A @ x
        if slack.min() < -tol:
            raise DomainError(f"point violates constraints by {-slack.min():.3g}")
        return _forward_step(slack, self.A @ v)

    def to_json(self) -> dict[str, Any]:
        return {"A": self.A.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_json(cls, obj: dict[str, Any] | str) -> "Polytope":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(obj["A"], obj["b"])

    def same_constraints(self, other: "Polytope") -> bool:
        """Exact equality of the constraint sets up to row order."""
        if self.A.shape != other.A.shape:
            return False
        mine = np.column_stack([self.A, self.b])
        theirs = np.column_stack([other.A, other.b])
        key = lambda M: M[np.lexsort(M.T[::-1])]  # noqa: E731
        return bool(np.array_equal(key(mine), key(theirs)))


def _forward_step(slack: np.ndarray, av: np.ndarray) -> float:
    ahead = av > PARALLEL_TOL
    ratios = np.maximum(slack[ahead], 0.0) / av[ahead]
    if ratios.size == 0:
        return math.inf
    return float(ratios.min())


def _trig_deg(angle: float) -> tuple[float, float]:
    """(cos, sin) of an angle in degrees with exact values at multiples of 90."""
    if angle % 90.0 == 0.0:
        k = int(angle // 90.0) % 4
        return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][k]
    rad = math.radians(angle)
    return math.cos(rad), math.sin(rad)


def formula_angle(theta_open: float) -> float:
    """Map an opening angle in (0, 90] degrees to the angle used in the
    constraint formulas, ``(90 + theta_open) / 2``."""
    if not (0.0 < theta_open <= 90.0):
        raise ValueError(f"opening angle must lie in (0, 90] degrees, got {theta_open}")
    return (90.0 + theta_open) / 2.0


def _pairwise_rows(d: int, c: float, s: float) -> np.ndarray:
    rows = []
    for i in range(d):
        for j in range(d):
            if i != j:
                row = np.zeros(d)
                row[i] += c
                row[j] -= s
                rows.append(row)
    return np.array(rows).reshape(-1, d)


def _dedupe(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    M = np.column_stack([A, b])
    _, idx = np.unique(M, axis=0, return_index=True)
    idx = np.sort(idx)
    return A[idx], b[idx]


def make_cone(d: int, theta_open: float) -> Polytope:
    """Simplex with tilted sides, contained in the unit box.

    ``theta_open = 90`` gives the unit simplex ``{x >= 0, sum(x) <= 1}``.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    c, s = _trig_deg(formula_angle(theta_open))
    if d == 1:
        A = np.array([[-1.0]])
        b = np.array([0.0])
    else:
        A = _pairwise_rows(d, c, s)
        b = np.zeros(A.shape[0])
    cap = c / s + 1.0
    A = np.vstack([A, np.ones((1, d))])
    b = np.append(b, cap)
    return Polytope(*_dedupe(A, b))


def make_diamond(d: int, theta_open: float) -> Polytope:
    """Unit box with tilted sides; ``0`` and ``(1, ..., 1)`` are vertices.

    ``theta_open = 90`` gives the unit box.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    c, s = _trig_deg(formula_angle(theta_open))
    if d == 1:
        A = np.array([[-1.0], [1.0]])
        b = np.array([0.0, 1.0])
    else:
        lower = _pairwise_rows(d, c, s)
        A = np.vstack([lower, -lower])
        b = np.concatenate([np.zeros(len(lower)), np.full(len(lower), s - c)])
    return Polytope(*_dedupe(A, b))


def make_box(d: int, lo: float = 0.0, hi: float = 1.0) -> Polytope:
    A = np.vstack([-np.eye(d), np.eye(d)])
    b = np.concatenate([np.full(d, -lo), np.full(d, hi)])
    return Polytope(A, b)


def make_simplex(d: int) -> Polytope:
    A = np.vstack([-np.eye(d), np.ones((1, d))])
    b = np.append(np.zeros(d), 1.0)
    return Polytope(A, b)


def diagonal_exit(P: Polytope) -> float:
    """Distance along ``(1, ..., 1)`` from the origin to the boundary."""
    return P.max_forward_step(np.zeros(P.d), np.ones(P.d))


def interior_point(P: Polytope, max_radius: float = 1e6) -> np.ndarray:
    """Chebyshev centre: the centre of the largest inscribed ball, found by
    linear programming. The radius is capped at ``max_radius`` so unbounded
    domains still give a finite point. Raises ``DomainError`` when the
    interior is empty."""
    d = P.d
    norms = P._row_norms
    # variables (x, r): maximise r subject to A x + r |a_i| <= b
    c = np.zeros(d + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=np.hstack([P.A, norms[:, None]]), b_ub=P.b,
                  bounds=[(None, None)] * d + [(0.0, max_radius)], method="highs")
    if res.status != 0 or res.x[-1] <= 0:
        raise DomainError("no interior point found")
    x = res.x[:d]
    if np.min(P.b - P.A @ x) <= 0:
        raise DomainError("no interior point found")
    return x
