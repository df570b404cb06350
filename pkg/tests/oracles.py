"""Independent reference computations shared by the test modules."""

import numpy as np

from polywalk.bench import DENSITIES, ProblemSpec


def fd_gradient(f, x, h):
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_hessian(grad, x, h):
    d = x.shape[0]
    H = np.empty((d, d))
    for i in range(d):
        e = np.zeros_like(x)
        e[i] = h
        H[:, i] = (grad(x + e) - grad(x - e)) / (2 * h)
    return 0.5 * (H + H.T)


def rel_err(a, b):
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def uniform_in(P, n, rng):
    """Rejection sample ``n`` points of ``P`` from the unit box."""
    out = []
    while sum(len(o) for o in out) < n:
        pts = rng.uniform(0, 1, (4 * n, P.d))
        out.append(pts[P.contains(pts) & (P.slack(pts).min(axis=1) > 1e-6)])
    return np.concatenate(out)[:n]


def all_placed_targets(d=4, theta=19.0, log_sigma=-0.5, polytope="cone"):
    """The eight benchmark densities placed in one polytope."""
    out = []
    for name in DENSITIES:
        spec = ProblemSpec(name, d, log_sigma, polytope, theta)
        P, t = spec.build()
        out.append((name, P, t, spec.sigma))
    return out


def derivative_check(target, P, sigma, n, rng):
    """Worst relative gradient / Hessian errors over ``n`` feasible points."""
    worst_g = worst_h = 0.0
    h = 1e-4 * sigma
    for x in uniform_in(P, n, rng):
        g = target.grad_log_density(x)
        worst_g = max(worst_g, rel_err(fd_gradient(lambda z: float(target.log_density(z)), x, h), g))
        H = target.hessian_log_density(x)
        worst_h = max(worst_h, rel_err(fd_hessian(target.grad_log_density, x, h), H))
    return worst_g, worst_h


def chord_by_bisection(P, x, direction, hi=10.0, iters=80):
    """Distance from ``x`` to the boundary along ``direction`` using only
    membership tests."""
    lo = 0.0
    while P.contains(x + hi * direction):
        hi *= 2.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if P.contains(x + mid * direction):
            lo = mid
        else:
            hi = mid
    return lo


def polar_mass(log_q, x, P, n_theta=720, n_r=40):
    """Integral of ``exp(log_q(y))`` over a 2D polytope in polar coordinates
    centred at ``x`` (the 1/r singularity of Hit-&-Run densities cancels
    against the Jacobian). Midpoint rule in angle, Gauss-Legendre in
    radius."""
    nodes, weights = np.polynomial.legendre.leggauss(n_r)
    total = 0.0
    dtheta = 2 * np.pi / n_theta
    for k in range(n_theta):
        th = (k + 0.5) * dtheta
        e = np.array([np.cos(th), np.sin(th)])
        R = chord_by_bisection(P, x, e, hi=1.0)
        r = 0.5 * R * (nodes + 1.0)
        vals = np.array([np.exp(log_q(x + ri * e)) * ri for ri in r])
        total += 0.5 * R * float(weights @ vals) * dtheta
    return total


class Flat:
    """Constant log-density (uniform on whatever domain the chain is on)."""

    name = "flat"

    def __init__(self, d):
        self.d = d

    def log_density(self, x):
        return 0.0

    def grad_log_density(self, x):
        return np.zeros(self.d)

    def hessian_log_density(self, x):
        return np.zeros((self.d, self.d))


# verdict lines of the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []
