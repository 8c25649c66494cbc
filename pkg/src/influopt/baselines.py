"""Comparison solvers: projected gradient, entropic mirror descent and
budgeted influence maximisation (CELF) under an independent cascade."""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path

from .fw import PotentialProblem, SolveReport, Termination
from .model import CampaignInstance, ImpressionMatrix
from .utility import UtilitySpec

BISECTION_TOL = 1e-10
MD_STEP_SCALE = 10.0
DEFAULT_MC_RUNS = 100
EXACT_PATHS_MAX_N = 2000
SAMPLED_PATH_SOURCES = 256


def _default_schedule(eta0: float) -> Callable[[int], float]:
    return lambda t: eta0 / np.sqrt(t + 1.0)


# --- projection -----------------------------------------------------------

def project_box_budget(x, rho, caps, budget: float) -> np.ndarray:
    """Euclidean projection onto ``{0 <= a <= caps, rho @ a <= budget}``.

    When the clipped point overspends, ``a(theta) = clip(x - theta rho, 0, caps)``
    is bisected on ``theta`` until the budget binds.
    """
    x = np.asarray(x, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    caps = np.asarray(caps, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot project non-finite values")
    a = np.clip(x, 0.0, caps)
    if rho @ a <= budget:
        return a
    lo, hi = 0.0, 1.0
    while rho @ np.clip(x - hi * rho, 0.0, caps) > budget:
        hi *= 2.0
    while True:
        mid = 0.5 * (lo + hi)
        a = np.clip(x - mid * rho, 0.0, caps)
        excess = rho @ a - budget
        if abs(excess) <= BISECTION_TOL or hi - lo <= 1e-15 * max(1.0, hi):
            break
        if excess > 0:
            lo = mid
        else:
            hi = mid
    if rho @ a > budget:
        a = np.clip(x - hi * rho, 0.0, caps)
    return a


def project_onto_feasible(inst: CampaignInstance, x) -> np.ndarray:
    return project_box_budget(x, inst.rho, inst.decision_caps, inst.budget)


def kl_restore(x, rho, caps, budget: float) -> np.ndarray:
    """Entropic (KL) projection onto the budget-capped box.

    Clips to the caps, then if the budget is exceeded shrinks each entry
    by ``exp(-theta rho_n)`` with ``theta`` found by bisection.
    """
    x = np.asarray(x, dtype=np.float64)
    a = np.minimum(np.maximum(x, 0.0), caps)
    if rho @ a <= budget:
        return a
    logx = np.log(np.maximum(x, np.finfo(float).tiny))

    def shrink(theta):
        return np.minimum(caps, np.exp(logx - theta * rho))

    lo, hi = 0.0, 1.0
    while rho @ shrink(hi) > budget:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        excess = rho @ shrink(mid) - budget
        if abs(excess) <= BISECTION_TOL:
            hi = mid
            break
        if excess > 0:
            lo = mid
        else:
            hi = mid
    a = shrink(hi)
    if rho @ a > budget:
        a *= budget / (rho @ a)
    return a


# --- first-order baselines ------------------------------------------------

def _first_order(problem: PotentialProblem, a0: np.ndarray, iters: int,
                 schedule: Callable[[int], float],
                 update: Callable[[np.ndarray, np.ndarray, float], np.ndarray],
                 solver: str) -> SolveReport:
    report = SolveReport(solver, a0.copy())
    report._track(problem, a0)
    a = a0
    best_a, best_u = a0, -np.inf
    for t in range(iters + 1):
        t0 = time.perf_counter()
        w = problem.potentials(a)
        u = problem.value_at(w)
        report.objective_trace.append(u)
        if u > best_u:
            best_a, best_u = a, u
        if t == iters:
            report.iteration_times.append(time.perf_counter() - t0)
            break
        grad = problem.gradient_at(w)
        eta = float(schedule(t))
        a = update(a, grad, eta)
        report.step_sizes.append(eta)
        report._track(problem, a)
        report.iteration_times.append(time.perf_counter() - t0)
    report.a = best_a
    report.final_objective = best_u
    report.termination = Termination.MAX_ITERS.value
    return report


def feasible_diameter(problem: PotentialProblem) -> float:
    """Norm of the per-coordinate reach ``min(r_n, B / rho_n)``.

    Bounds the distance from the origin to any feasible point, which sets
    the natural length of a subgradient step.
    """
    reach = problem.caps.copy()
    paid = problem.rho > 0
    reach[paid] = np.minimum(reach[paid], problem.budget / problem.rho[paid])
    return float(np.linalg.norm(reach))


def projected_gradient(problem: PotentialProblem, iters: int = 200,
                       schedule: Optional[Callable[[int], float]] = None,
                       init=None) -> SolveReport:
    a0 = np.zeros(problem.dim) if init is None else np.asarray(init, float)
    problem.check_feasible(a0)
    if schedule is None:
        g0 = np.linalg.norm(problem.gradient(a0))
        schedule = _default_schedule(feasible_diameter(problem) / g0 if g0 > 0 else 0.0)

    def update(a, grad, eta):
        return project_box_budget(a + eta * grad, problem.rho, problem.caps,
                                  problem.budget)

    return _first_order(problem, a0, iters, schedule, update, "ps")


def mirror_descent(problem: PotentialProblem, iters: int = 200,
                   schedule: Optional[Callable[[int], float]] = None) -> SolveReport:
    total = problem.rho.sum()
    level = problem.budget / total if total > 0 else 1.0
    a0 = 0.5 * np.minimum(problem.caps, level)
    if schedule is None:
        g0 = np.max(np.abs(problem.gradient(a0)), initial=0.0)
        schedule = _default_schedule(MD_STEP_SCALE / g0 if g0 > 0 else 0.0)

    def update(a, grad, eta):
        return kl_restore(a * np.exp(eta * grad), problem.rho, problem.caps,
                          problem.budget)

    return _first_order(problem, a0, iters, schedule, update, "md")


def solve_projected_subgradient(inst: CampaignInstance, spec: UtilitySpec,
                                iters: int = 200,
                                schedule: Optional[Callable[[int], float]] = None
                                ) -> SolveReport:
    """Projected (sub)gradient ascent; returns the best iterate.

    Default steps are ``eta0 / sqrt(t + 1)`` with ``eta0 = D / ||grad U(a0)||``
    and ``D`` from :func:`feasible_diameter`.
    """
    if not spec.differentiable:
        raise ValueError("non-differentiable utility")
    return projected_gradient(PotentialProblem.from_instance(inst, spec), iters, schedule)


def solve_mirror_descent(inst: CampaignInstance, spec: UtilitySpec,
                         iters: int = 200,
                         schedule: Optional[Callable[[int], float]] = None
                         ) -> SolveReport:
    """Entropic mirror ascent ``a <- a * exp(eta grad)`` with KL restoration.

    Starts from ``0.5 * min(r_n, B / sum(rho))`` and returns the best iterate.
    Default steps are ``eta0 / sqrt(t + 1)`` with ``eta0 = 10 / max|grad U(a0)|``,
    so the first step may rescale a coordinate by up to ``e**10``.
    """
    if not spec.differentiable:
        raise ValueError("non-differentiable utility")
    return mirror_descent(PotentialProblem.from_instance(inst, spec), iters, schedule)


# --- independent cascade ----------------------------------------------------

def _support_graph(imp: ImpressionMatrix) -> sp.csr_matrix:
    return sp.csr_matrix((np.ones(imp.nnz), (imp.src, imp.dst)),
                         shape=(imp.n_users, imp.n_users))


def average_shortest_path(imp: ImpressionMatrix, seed: int = 0) -> float:
    """Mean finite hop distance between distinct users of the support graph.

    Exact up to ``EXACT_PATHS_MAX_N`` users, otherwise averaged over BFS
    trees from ``SAMPLED_PATH_SOURCES`` random sources.
    """
    g = _support_graph(imp)
    n = imp.n_users
    if n <= EXACT_PATHS_MAX_N:
        sources = None
    else:
        rng = np.random.default_rng(seed)
        sources = np.sort(rng.choice(n, SAMPLED_PATH_SOURCES, replace=False))
    dist = shortest_path(g, method="D", directed=True, unweighted=True,
                         indices=sources)
    finite = np.isfinite(dist) & (dist > 0)
    if not finite.any():
        return float("nan")
    return float(dist[finite].mean())


def edge_probability(imp: ImpressionMatrix, seed: int = 0) -> float:
    """Uniform cascade probability ``sum p[n, j]**(1/k) / N**2``.

    ``k`` is the average shortest path of the impression support graph.
    """
    if imp.n_users == 0:
        raise ValueError("empty impression matrix")
    if imp.nnz == 0:
        return 0.0
    k = average_shortest_path(imp, seed)
    total = float(np.sum(imp.val ** (1.0 / k)))
    return float(min(1.0, max(0.0, total / imp.n_users ** 2)))


@dataclass
class ICModel:
    """Independent cascade with one propagation probability on every edge.

    Live-edge graphs are drawn once per run from independent substreams of
    ``seed``, so every spread estimate shares the same randomness and the
    estimated spread is an exact coverage (hence submodular) function.
    """

    n_users: int
    src: np.ndarray
    dst: np.ndarray
    p: float
    mc_runs: int = DEFAULT_MC_RUNS
    seed: int = 0
    _live: list = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.mc_runs < 1:
            raise ValueError("mc_runs must be >= 1")
        self.src = np.asarray(self.src, dtype=np.int64)
        self.dst = np.asarray(self.dst, dtype=np.int64)

    @classmethod
    def from_impressions(cls, imp: ImpressionMatrix, p: Optional[float] = None,
                         mc_runs: int = DEFAULT_MC_RUNS, seed: int = 0) -> "ICModel":
        if p is None:
            p = edge_probability(imp, seed)
        return cls(imp.n_users, imp.src.copy(), imp.dst.copy(), p, mc_runs, seed)

    def live_graphs(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-run live adjacency as ``(indptr, indices)``."""
        if self._live is None:
            order = np.argsort(self.src, kind="stable")
            src, dst = self.src[order], self.dst[order]
            streams = np.random.SeedSequence(self.seed).spawn(self.mc_runs)
            live = []
            for ss in streams:
                keep = np.random.default_rng(ss).random(len(src)) < self.p
                counts = np.bincount(src[keep], minlength=self.n_users)
                indptr = np.concatenate(([0], np.cumsum(counts)))
                live.append((indptr.tolist(), dst[keep].tolist()))
            self._live = live
        return self._live


def _reach(indptr, indices, starts: Sequence[int], blocked: bytearray) -> list[int]:
    """Mark and return the nodes reachable from ``starts`` that are not ``blocked``."""
    found = []
    for s in starts:
        if not blocked[s]:
            blocked[s] = 1
            found.append(s)
    k = 0
    while k < len(found):
        u = found[k]
        k += 1
        for e in range(indptr[u], indptr[u + 1]):
            v = indices[e]
            if not blocked[v]:
                blocked[v] = 1
                found.append(v)
    return found


class _Coverage:
    """Reached sets of the current seed set, one per Monte Carlo run."""

    def __init__(self, model: ICModel):
        self.model = model
        self.live = model.live_graphs()
        self.reached = [bytearray(model.n_users) for _ in range(model.mc_runs)]
        self.total = 0

    def gain(self, v: int) -> int:
        """Total (summed over runs) number of new nodes reached by adding ``v``."""
        out = 0
        for (indptr, indices), reached in zip(self.live, self.reached):
            if reached[v]:
                continue
            found = _reach(indptr, indices, [v], reached)
            out += len(found)
            for u in found:
                reached[u] = 0
        return out

    def add(self, seeds: Sequence[int]) -> None:
        for (indptr, indices), reached in zip(self.live, self.reached):
            self.total += len(_reach(indptr, indices, seeds, reached))


def ic_spread(model: ICModel, seeds: Sequence[int]) -> float:
    """Mean number of activated users over the model's Monte Carlo runs."""
    seeds = [int(s) for s in seeds]
    if any(not 0 <= s < model.n_users for s in seeds):
        raise ValueError("seed id out of range")
    cov = _Coverage(model)
    cov.add(seeds)
    return cov.total / model.mc_runs


@dataclass
class SeedSet:
    seeds: list[int]
    total_cost: float
    spread: float
    participation: np.ndarray
    evaluations: int = 0


def seeding_costs(inst: CampaignInstance) -> np.ndarray:
    """Per-user price of buying the full capped activity, ``c lambda r``."""
    return inst.costs * inst.rates * inst.caps


def _ratio(gain: int, cost: float) -> float:
    if gain <= 0:
        return 0.0
    return np.inf if cost <= 0 else gain / cost


def _seed_set(inst, model, cov, seeds, costs, evaluations) -> SeedSet:
    a = np.zeros(inst.dim)
    pos = np.searchsorted(inst.others, seeds)
    a[pos] = inst.decision_caps[pos]
    return SeedSet(seeds, float(sum(costs[s] for s in seeds)),
                   cov.total / model.mc_runs, a, evaluations)


def solve_bim_celf(inst: CampaignInstance, model: ICModel,
                   budget: Optional[float] = None) -> SeedSet:
    """Cost-sensitive CELF lazy greedy for budgeted influence maximisation.

    The advertiser is always active and seeds the cascade for free.  Other
    users cost :func:`seeding_costs`; candidates are picked by marginal
    spread per cost, ties going to the lower id, skipping unaffordable
    users, until no affordable user adds spread.  The returned
    participation puts chosen seeds at their caps.
    """
    budget = inst.budget if budget is None else float(budget)
    costs = seeding_costs(inst)
    cov = _Coverage(model)
    cov.add([inst.advertiser])
    heap = []
    evaluations = 0
    for v in inst.others.tolist():
        if costs[v] > budget:
            continue
        g = cov.gain(v)
        evaluations += 1
        heapq.heappush(heap, (-_ratio(g, costs[v]), v, 0))
    seeds: list[int] = []
    remaining = budget
    rnd = 0
    while heap:
        neg, v, stamp = heapq.heappop(heap)
        if costs[v] > remaining:
            continue
        if stamp != rnd:
            g = cov.gain(v)
            evaluations += 1
            heapq.heappush(heap, (-_ratio(g, costs[v]), v, rnd))
            continue
        if -neg <= 0:
            break
        seeds.append(v)
        remaining -= costs[v]
        cov.add([v])
        rnd += 1
    return _seed_set(inst, model, cov, seeds, costs, evaluations)


def solve_bim_greedy(inst: CampaignInstance, model: ICModel,
                     budget: Optional[float] = None) -> SeedSet:
    """Plain (non-lazy) version of :func:`solve_bim_celf`; same selection rule."""
    budget = inst.budget if budget is None else float(budget)
    costs = seeding_costs(inst)
    cov = _Coverage(model)
    cov.add([inst.advertiser])
    seeds: list[int] = []
    remaining = budget
    candidates = [v for v in inst.others.tolist()]
    evaluations = 0
    while True:
        best, best_ratio = None, 0.0
        for v in candidates:
            if v in seeds or costs[v] > remaining:
                continue
            r = _ratio(cov.gain(v), costs[v])
            evaluations += 1
            if r > best_ratio:
                best, best_ratio = v, r
        if best is None:
            break
        seeds.append(best)
        remaining -= costs[best]
        cov.add([best])
    return _seed_set(inst, model, cov, seeds, costs, evaluations)
