"""Exact CPU cycle-rate allocation for users and UAV edge servers.

The per-slot computation subproblem is separable: each cycle-rate variable
``c`` trades quadratic energy against reciprocal delay,

    J(c) = eta * q * c^2 * beta * d  +  (1 - eta) * beta * d / c,

with box bounds per user and, at each UAV, one coupling budget on the sum of
allocated server cycles.  The unconstrained minimizer has the closed form
``c* = ((1 - eta) / (2 * eta * q)) ** (1/3)``; the coupled problem is solved
exactly by bisecting a shared KKT multiplier and solving each user's cubic
stationarity condition by safeguarded Newton.  A brute-force grid oracle is
included for verification and stays out of production paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import NetworkConfig

BUDGET_RTOL = 1e-9        # relative tolerance on the per-UAV budget equation
MAX_BISECT_ITERS = 200
MU_BRACKET_HIGH = 1e12


class AllocInfeasibleError(ValueError):
    """The per-user minimum cycle rates alone exceed a UAV's budget."""


@dataclass
class AllocProblem:
    """One slot's computation-allocation instance.

    ``d_in``/``d_mec`` are per-user bit counts after the offloading split;
    ``members`` maps each UAV to the indices of the users it serves.
    """

    d_in: np.ndarray
    d_mec: np.ndarray
    members: tuple[np.ndarray, ...]
    eta: float
    beta_mu: float
    beta_uav: float
    q_mu: float
    q_uav: float
    c_min: np.ndarray          # per-user lower bound, cycles/s
    c_in_max: float            # user-side upper bound
    c_uav_max: float           # UAV budget and server-side upper bound

    @classmethod
    def from_config(cls, cfg: NetworkConfig, d_in, d_mec, members,
                    c_min=None) -> "AllocProblem":
        d_in = np.asarray(d_in, dtype=float)
        if c_min is None:
            c_min = np.full(d_in.shape, cfg.c_mu_min)
        return cls(
            d_in=d_in, d_mec=np.asarray(d_mec, dtype=float),
            members=tuple(np.asarray(m, dtype=int) for m in members),
            eta=cfg.eta, beta_mu=cfg.beta_mu, beta_uav=cfg.beta_uav,
            q_mu=cfg.q_mu, q_uav=cfg.q_uav,
            c_min=np.asarray(c_min, dtype=float),
            c_in_max=cfg.c_mu_max, c_uav_max=cfg.c_uav_max,
        )

    def check_feasible(self) -> None:
        for v, idx in enumerate(self.members):
            need = float(np.sum(self.c_min[idx]))
            if need > self.c_uav_max * (1.0 + 1e-12):
                raise AllocInfeasibleError(
                    f"UAV {v}: sum of minimum cycle rates {need:.6g} exceeds "
                    f"budget {self.c_uav_max:.6g}"
                )


@dataclass
class AllocSolution:
    c_in: np.ndarray
    c_mec: np.ndarray
    objective: float
    multipliers: list[float] = field(default_factory=list)


def _closed_form_cstar(eta: float, q: float) -> float:
    """Unconstrained minimizer of J(c); +inf for the delay-only case."""
    if eta == 0.0:
        return np.inf
    if eta == 1.0:
        return 0.0
    return ((1.0 - eta) / (2.0 * eta * q)) ** (1.0 / 3.0)


def optimal_local_cpu(d_in: float, cfg: NetworkConfig,
                      bounds: tuple[float, float] | None = None) -> float:
    """Best user-side cycle rate for ``d_in`` local bits, clamped to bounds.

    Zero workload ties are broken at the lower bound, which frees nothing
    here but mirrors the server-side convention.
    """
    lo, hi = bounds if bounds is not None else (cfg.c_mu_min, cfg.c_mu_max)
    if not 0 < lo <= hi:
        raise ValueError(f"invalid cycle-rate bounds ({lo}, {hi})")
    if d_in == 0.0:
        return lo
    return float(min(max(_closed_form_cstar(cfg.eta, cfg.q_mu), lo), hi))


def _mec_roots(mu: float, eta: float, q: float, beta_d: list[float],
               c_star: float) -> list[float]:
    """Per-user roots of 2*eta*q*bd*c^3 + mu*c^2 - (1-eta)*bd = 0, bd > 0.

    The polynomial is increasing and convex on c > 0, and c_star is always
    an upper bound for the root, so Newton from above converges
    monotonically.  Plain-float loops: the arrays here are tiny and hot.
    """
    if eta == 0.0:
        return [math.sqrt(bd / mu) for bd in beta_d]
    roots = []
    for bd in beta_d:
        a3 = 2.0 * eta * q * bd
        target = (1.0 - eta) * bd
        # both the cubic-only and quadratic-only roots bound the true root
        # from above, so the smaller one is the better Newton start
        c = c_star if mu <= 0.0 else min(c_star, math.sqrt(target / mu))
        for _ in range(60):
            f = a3 * c * c * c + mu * c * c - target
            step = f / (3.0 * a3 * c * c + 2.0 * mu * c)
            c -= step
            if c <= 0.0:
                c = 1e-300
            if abs(step) <= 1e-15 * c:
                break
        roots.append(c)
    return roots


def optimal_mec_cpu(problem: AllocProblem, uav_index: int
                    ) -> tuple[np.ndarray, float]:
    """Server cycle rates for one UAV's members and the budget multiplier.

    Users with nothing offloaded sit at their lower bound; the rest share
    the budget through a bisected multiplier when their unconstrained
    optima overflow it.
    """
    idx = problem.members[uav_index]
    eta, q, beta = problem.eta, problem.q_uav, problem.beta_uav
    lo = problem.c_min[idx]
    hi = problem.c_uav_max
    budget = problem.c_uav_max
    if float(np.sum(lo)) > budget * (1.0 + 1e-12):
        raise AllocInfeasibleError(
            f"UAV {uav_index}: sum of minimum cycle rates exceeds the budget"
        )
    d = problem.d_mec[idx]
    active = d > 0.0

    c = lo.copy()
    c_star = _closed_form_cstar(eta, q)
    c[active] = np.clip(c_star, lo[active], hi)
    if float(np.sum(c)) <= budget * (1.0 + BUDGET_RTOL) or not np.any(active):
        return c, 0.0

    beta_d = [float(beta) * float(x) for x in d[active]]
    lo_active = [float(x) for x in lo[active]]
    inactive_sum = float(np.sum(lo[~active]))

    def clipped_sum(mu: float) -> tuple[list[float], float]:
        roots = [min(max(r, lo_i), hi) for r, lo_i in
                 zip(_mec_roots(mu, eta, q, beta_d, c_star), lo_active)]
        return roots, math.fsum(roots) + inactive_sum

    # smallest multiplier that pins every active user at its lower bound
    # caps the bracket; the spec-level [0, 1e12] bracket is the fallback
    mu_cap = max(
        ((1.0 - eta) * bd - 2.0 * eta * q * bd * lo_i ** 3) / lo_i ** 2
        for bd, lo_i in zip(beta_d, lo_active)
    )
    mu_lo, mu_hi = 0.0, min(max(mu_cap * 2.0, 1e-30), MU_BRACKET_HIGH)
    roots, total = clipped_sum(mu_hi)
    if total > budget * (1.0 + BUDGET_RTOL):  # pragma: no cover - bracket guard
        raise AllocInfeasibleError(
            f"UAV {uav_index}: multiplier bracket exhausted at sum {total:.6g}"
        )
    mu = mu_hi
    for _ in range(MAX_BISECT_ITERS):
        mu = 0.5 * (mu_lo + mu_hi)
        roots, total = clipped_sum(mu)
        if abs(total - budget) <= 1e-12 * budget:
            break
        if total > budget:
            mu_lo = mu
        else:
            mu_hi = mu
    c[active] = roots
    return c, mu


def solve_p11(problem: AllocProblem) -> AllocSolution:
    """Allocate every cycle-rate variable of the slot and price the result."""
    problem.check_feasible()
    c_star = _closed_form_cstar(problem.eta, problem.q_mu)
    c_in = np.where(
        problem.d_in > 0.0,
        np.clip(c_star, problem.c_min, problem.c_in_max),
        problem.c_min,
    )
    c_mec = np.full(problem.d_in.shape[0], np.nan)
    mus = []
    for v in range(len(problem.members)):
        c_v, mu = optimal_mec_cpu(problem, v)
        c_mec[problem.members[v]] = c_v
        mus.append(mu)
    return AllocSolution(
        c_in=c_in, c_mec=c_mec,
        objective=allocation_objective(problem, c_in, c_mec),
        multipliers=mus,
    )


def allocation_objective(problem: AllocProblem, c_in: np.ndarray,
                         c_mec: np.ndarray) -> float:
    """Computation-side slice of the slot utility under the given rates.

    Communication terms do not depend on the cycle rates, so this is the
    exact quantity the allocation minimizes.
    """
    eta = problem.eta
    with np.errstate(divide="ignore", invalid="ignore"):
        e_loc = problem.q_mu * c_in ** 2 * problem.beta_mu * problem.d_in
        t_loc = np.where(problem.d_in > 0,
                         problem.beta_mu * problem.d_in / c_in, 0.0)
        e_mec = problem.q_uav * c_mec ** 2 * problem.beta_uav * problem.d_mec
        t_mec = np.where(problem.d_mec > 0,
                         problem.beta_uav * problem.d_mec / c_mec, 0.0)
    return float(np.sum(eta * (e_loc + e_mec) + (1.0 - eta) * (t_loc + t_mec)))


def kkt_residuals(problem: AllocProblem, uav_index: int, c: np.ndarray,
                  mu: float) -> dict[str, float]:
    """Normalized KKT residuals of a server allocation for one UAV.

    Returns the worst stationarity residual over members, the primal budget
    violation, the box violation, and the complementary-slackness residual,
    all relative to their natural scales.
    """
    idx = problem.members[uav_index]
    lo = problem.c_min[idx]
    hi = problem.c_uav_max
    budget = problem.c_uav_max
    d = problem.d_mec[idx]
    eta, q, beta = problem.eta, problem.q_uav, problem.beta_uav

    stationarity = 0.0
    edge_tol = 1e-9
    for i in range(len(idx)):
        if d[i] == 0.0:
            continue
        bd = beta * d[i]
        grad = 2.0 * eta * q * bd * c[i] - (1.0 - eta) * bd / c[i] ** 2
        scale = abs(2.0 * eta * q * bd * c[i]) + abs((1.0 - eta) * bd / c[i] ** 2) + mu
        resid = grad + mu
        at_lo = c[i] <= lo[i] * (1.0 + edge_tol)
        at_hi = c[i] >= hi * (1.0 - edge_tol)
        if at_lo:
            resid = min(resid, 0.0)   # lower-bound multiplier absorbs positives
        if at_hi:
            resid = max(resid, 0.0)   # upper-bound multiplier absorbs negatives
        stationarity = max(stationarity, abs(resid) / max(scale, 1e-300))

    total = float(np.sum(c))
    primal = max(total - budget, 0.0) / budget
    box = max(float(np.max(np.maximum(lo - c, 0.0))),
              float(np.max(np.maximum(c - hi, 0.0)))) / hi
    slack = mu * max(budget - total, 0.0) / max(budget * max(mu, 1.0), 1e-300)
    return {
        "stationarity": stationarity,
        "primal": primal,
        "box": box,
        "complementarity": slack,
    }


def brute_force_alloc(problem: AllocProblem, grid_points_per_dim: int
                      ) -> AllocSolution:
    """Exhaustive grid search over the feasible box/simplex; test oracle only.

    Grids are linspace-based, so nested refinement (g -> 2g - 1 points)
    never loses previously examined points.  Guarded to at most 4 users per
    UAV.
    """
    problem.check_feasible()
    g = int(grid_points_per_dim)
    if g < 1:
        raise ValueError("grid_points_per_dim must be at least 1")
    for v, idx in enumerate(problem.members):
        if len(idx) > 4:
            raise ValueError(
                f"oracle scale guard: UAV {v} serves {len(idx)} users (> 4)"
            )
    eta = problem.eta
    n = problem.d_in.shape[0]

    c_in = np.empty(n)
    for u in range(n):
        grid = np.linspace(problem.c_min[u], problem.c_in_max, g)
        j = (eta * problem.q_mu * grid ** 2 * problem.beta_mu * problem.d_in[u]
             + (1.0 - eta) * problem.beta_mu * problem.d_in[u] / grid)
        c_in[u] = grid[int(np.argmin(j))]

    c_mec = np.full(n, np.nan)
    for idx in problem.members:
        m = len(idx)
        axes = [np.linspace(problem.c_min[u], problem.c_uav_max, g)
                for u in idx]
        mesh = np.meshgrid(*axes, indexing="ij")
        flat = np.stack([ax.ravel() for ax in mesh], axis=1)   # (g^m, m)
        feasible = flat.sum(axis=1) <= problem.c_uav_max * (1.0 + 1e-12)
        if not np.any(feasible):   # pragma: no cover - guarded by check_feasible
            raise AllocInfeasibleError("no feasible grid point under the budget")
        pts = flat[feasible]
        d = problem.d_mec[idx]
        j = np.zeros(pts.shape[0])
        for k in range(m):
            j += (eta * problem.q_uav * pts[:, k] ** 2
                  * problem.beta_uav * d[k])
            if d[k] > 0:
                j += (1.0 - eta) * problem.beta_uav * d[k] / pts[:, k]
        c_mec[idx] = pts[int(np.argmin(j))]

    return AllocSolution(
        c_in=c_in, c_mec=c_mec,
        objective=allocation_objective(problem, c_in, c_mec),
    )
