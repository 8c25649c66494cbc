"""Frank-Wolfe solver for budgeted campaign portfolios.

The solver works on a :class:`PotentialProblem`: viewer potentials are an
affine function of the decision vector (``w = M.T @ a + offset``) and the
objective is a weighted sum of one utility over the viewers.  Single- and
multi-platform campaigns both reduce to this form, so one loop serves both.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .model import CampaignInstance
from .oracle import LinearOracle
from .utility import Kind, UtilitySpec, derivative, evaluate

GAP_BOUND_BETA = 27.0 / 8.0
CURVATURE_FLOOR = 1e-12
CURVATURE_SAFETY = 2.0
CURVATURE_PROBES = 64
LINE_SEARCH_TOL = 1e-8


class PotentialProblem:
    """Concave maximisation with affine potentials over a budget-capped box.

    Parameters
    ----------
    matrix : sparse (n_vars, n_viewers)
        Contribution of one unit of each decision variable to each viewer.
    offset : (n_viewers,)
        Constant potential (the advertiser's own posts).
    weights : (n_viewers,)
        Objective weight of each viewer; zero removes the viewer.
    spec : UtilitySpec
    rho, caps, budget
        Budget row, upper bounds and budget of the feasible set.
    """

    def __init__(self, matrix, offset, weights, spec: UtilitySpec,
                 rho, caps, budget: float):
        self.matrix = sp.csr_matrix(matrix)
        self.matrix_t = self.matrix.T.tocsr()
        self.offset = np.asarray(offset, dtype=np.float64)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.spec = spec
        self.rho = np.asarray(rho, dtype=np.float64)
        self.caps = np.asarray(caps, dtype=np.float64)
        self.budget = float(budget)
        n_vars, n_viewers = self.matrix.shape
        if self.offset.shape != (n_viewers,) or self.weights.shape != (n_viewers,):
            raise ValueError("offset/weights do not match the viewer count")
        if self.rho.shape != (n_vars,) or self.caps.shape != (n_vars,):
            raise ValueError("rho/caps do not match the variable count")
        self.oracle = LinearOracle(self.rho, self.caps, self.budget)

    @classmethod
    def from_instance(cls, inst: CampaignInstance,
                      spec: UtilitySpec) -> "PotentialProblem":
        by_source = inst.impressions.by_source
        offset = inst.advertiser_participation * by_source[inst.advertiser].toarray().ravel()
        return cls(by_source[inst.others], offset, inst.viewer_mask(), spec,
                   inst.rho, inst.decision_caps, inst.budget)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def potentials(self, a) -> np.ndarray:
        return self.matrix_t @ a + self.offset

    def value_at(self, w) -> float:
        return float(self.weights @ evaluate(self.spec, w))

    def gradient_at(self, w) -> np.ndarray:
        if self.spec.kind is Kind.LINEAR:
            return self.spec.delta * (self.matrix @ self.weights)
        return self.matrix @ (self.weights * derivative(self.spec, w))

    def value(self, a) -> float:
        return self.value_at(self.potentials(a))

    def gradient(self, a) -> np.ndarray:
        return self.gradient_at(self.potentials(a))

    def spend(self, a) -> float:
        return float(self.rho @ a)

    def residuals(self, a) -> tuple[float, float]:
        """(budget excess, box excess), each clipped at zero."""
        budget = max(0.0, self.spend(a) - self.budget)
        box = 0.0
        if a.size:
            box = max(0.0, float(np.max(a - self.caps)), float(np.max(-a)))
        return budget, box

    def check_feasible(self, a, tol: float = 1e-9) -> None:
        budget, box = self.residuals(a)
        if budget > tol or box > tol:
            raise InfeasibleError(
                f"initial point infeasible (budget excess {budget:.3g}, "
                f"box excess {box:.3g})")


class InfeasibleError(ValueError):
    pass


class StepRule(str, enum.Enum):
    HARMONIC = "harmonic"
    GAP_OVER_CURVATURE = "gapc"
    LINE_SEARCH = "linesearch"


class Termination(str, enum.Enum):
    GAP_BELOW_TOL = "GapBelowTol"
    MAX_ITERS = "MaxIters"


@dataclass
class SolverConfig:
    max_iters: int = 30
    tol: float = 0.1
    step: StepRule = StepRule.LINE_SEARCH
    curvature: Optional[float] = None
    seed: int = 0
    init: Optional[np.ndarray] = None

    def __post_init__(self):
        self.step = StepRule(self.step)
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.curvature is not None and not self.curvature > 0:
            raise ValueError("curvature must be > 0")


@dataclass
class SolveReport:
    """Outcome of one solver run.

    ``objective_trace[t]`` and ``gap_trace[t]`` belong to iterate ``t``;
    ``step_sizes[t]`` moves iterate ``t`` to ``t + 1``.  The residuals are
    maxima over every iterate visited.
    """

    solver: str
    a: np.ndarray
    objective_trace: list[float] = field(default_factory=list)
    gap_trace: list[float] = field(default_factory=list)
    step_sizes: list[float] = field(default_factory=list)
    iteration_times: list[float] = field(default_factory=list)
    termination: str = Termination.MAX_ITERS.value
    budget_excess: float = 0.0
    box_excess: float = 0.0
    curvature: Optional[float] = None
    extra: dict = field(default_factory=dict)
    final_objective: Optional[float] = None

    @property
    def iterations(self) -> int:
        return len(self.step_sizes)

    @property
    def objective(self) -> float:
        """Objective at ``a``: the last iterate, or the best one if recorded."""
        if self.final_objective is not None:
            return self.final_objective
        return self.objective_trace[-1] if self.objective_trace else float("nan")

    @property
    def runtime(self) -> float:
        return float(sum(self.iteration_times))

    def _track(self, problem: PotentialProblem, a) -> None:
        budget, box = problem.residuals(a)
        self.budget_excess = max(self.budget_excess, budget)
        self.box_excess = max(self.box_excess, box)


def harmonic_step(t: int) -> float:
    return 2.0 / (t + 2.0)


def golden_section_max(f: Callable[[float], float], lo: float = 0.0,
                       hi: float = 1.0, tol: float = LINE_SEARCH_TOL) -> float:
    """Maximiser of a unimodal ``f`` on ``[lo, hi]``; endpoints are compared too."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    best, fbest = (c, fc) if fc >= fd else (d, fd)
    for x in (lo, hi):
        fx = f(x)
        if fx >= fbest:
            best, fbest = x, fx
    return best


def step_size(cfg: SolverConfig, t: int, gap: float = 0.0,
              curvature: Optional[float] = None,
              line: Optional[Callable[[float], float]] = None) -> float:
    """Step for iteration ``t`` under the configured rule.

    ``line`` is the objective restricted to the segment, ``g -> U(a + g d)``,
    and is needed only for line search.
    """
    rule = StepRule(cfg.step)
    if t < 0:
        raise ValueError("t must be >= 0")
    if rule is StepRule.HARMONIC:
        return harmonic_step(t)
    if rule is StepRule.GAP_OVER_CURVATURE:
        C = cfg.curvature if curvature is None else curvature
        if C is None or not C > 0:
            raise ValueError("curvature must be > 0")
        if gap < 0:
            raise ValueError("gap must be >= 0 for the curvature rule")
        return min(gap / C, 1.0)
    if line is None:
        raise ValueError("line search needs the restricted objective")
    return golden_section_max(line)


def _random_feasible(problem: PotentialProblem, rng: np.random.Generator) -> np.ndarray:
    a = rng.uniform(0.0, 1.0, problem.dim) * problem.caps
    cost = problem.spend(a)
    if cost > problem.budget:
        a *= problem.budget / cost
    return a


def problem_curvature(problem: PotentialProblem, probes: int = CURVATURE_PROBES,
                      seed: int = 0) -> float:
    """Empirical curvature: the largest linearisation error seen on random segments.

    Each probe pairs a random feasible point with the oracle vertex of a
    random direction and measures ``2/g**2 * (U(a) + g<grad, s - a> - U(a + g(s - a)))``
    for ``g`` in ``{0.25, 0.5, 1}``.  This is a lower estimate of the true
    constant; callers scale it up.
    """
    rng = np.random.default_rng(seed)
    best = CURVATURE_FLOOR
    for _ in range(max(0, int(probes))):
        a = _random_feasible(problem, rng)
        s = problem.oracle(rng.standard_normal(problem.dim))
        wa, ws = problem.potentials(a), problem.potentials(s)
        ua = problem.value_at(wa)
        slope = float(problem.gradient_at(wa) @ (s - a))
        for g in (0.25, 0.5, 1.0):
            ug = problem.value_at((1.0 - g) * wa + g * ws)
            best = max(best, 2.0 / g ** 2 * (ua + g * slope - ug))
    return best


def estimate_curvature(inst: CampaignInstance, spec: UtilitySpec,
                       probes: int = CURVATURE_PROBES, seed: int = 0) -> float:
    if not spec.differentiable:
        raise ValueError("non-differentiable utility")
    return problem_curvature(PotentialProblem.from_instance(inst, spec), probes, seed)


def frank_wolfe(problem: PotentialProblem, cfg: SolverConfig,
                solver: str = "fw") -> SolveReport:
    """Run Frank-Wolfe with the problem's exact linear oracle.

    Stops as soon as the gap drops below ``cfg.tol`` or after
    ``cfg.max_iters`` steps; the gap of the returned iterate is always the
    last entry of ``gap_trace``.  The first step is taken whenever the
    starting gap is positive, so a small budget (hence a small absolute
    gap) never leaves the starting point unimproved.
    """
    if not problem.spec.differentiable:
        raise ValueError("non-differentiable utility")
    a = np.zeros(problem.dim) if cfg.init is None else np.array(cfg.init, dtype=np.float64)
    if a.shape != (problem.dim,):
        raise ValueError("init has the wrong dimension")
    problem.check_feasible(a)
    C = cfg.curvature
    if cfg.step is StepRule.GAP_OVER_CURVATURE and C is None:
        C = CURVATURE_SAFETY * problem_curvature(problem, CURVATURE_PROBES, cfg.seed)
    report = SolveReport(solver, a, curvature=C)
    report._track(problem, a)
    w = problem.potentials(a)
    t = 0
    while True:
        t0 = time.perf_counter()
        grad = problem.gradient_at(w)
        s = problem.oracle(grad)
        d = s - a
        gap = float(grad @ d)
        report.objective_trace.append(problem.value_at(w))
        report.gap_trace.append(gap)
        if gap < cfg.tol and (t > 0 or gap <= 0.0):
            report.termination = Termination.GAP_BELOW_TOL.value
            report.iteration_times.append(time.perf_counter() - t0)
            break
        if t >= cfg.max_iters:
            report.termination = Termination.MAX_ITERS.value
            report.iteration_times.append(time.perf_counter() - t0)
            break
        ws = problem.potentials(s)
        line = None
        if cfg.step is StepRule.LINE_SEARCH:
            # only viewers whose potential moves change the objective
            moved = np.flatnonzero(ws != w)
            w0, dw = w[moved], ws[moved] - w[moved]
            wt = problem.weights[moved]
            line = lambda g: float(wt @ evaluate(problem.spec, w0 + g * dw))  # noqa: E731
        gamma = step_size(cfg, t, max(gap, 0.0), C, line)
        if gamma == 1.0:
            a, w = s, ws
        else:
            a = a + gamma * d
            w = (1.0 - gamma) * w + gamma * ws
        report.step_sizes.append(gamma)
        report._track(problem, a)
        report.iteration_times.append(time.perf_counter() - t0)
        t += 1
    report.a = a
    return report


def solve_fw(inst: CampaignInstance, spec: UtilitySpec,
             cfg: Optional[SolverConfig] = None) -> SolveReport:
    """Maximise the campaign utility of ``inst`` with Frank-Wolfe."""
    if not spec.differentiable:
        raise ValueError("non-differentiable utility")
    return frank_wolfe(PotentialProblem.from_instance(inst, spec),
                       cfg or SolverConfig())


def heuristic_rule_of_thumb(inst: CampaignInstance) -> np.ndarray:
    """Greedy fill by aggregate influence per unit cost.

    Users are ranked by ``phi_k / (c_k lambda_k)``, where ``phi_k`` is the
    total impression ratio user ``k`` places in other (non-advertiser)
    feeds, and bought at full cap until the budget is spent.  Exact for
    linear utilities.
    """
    phi = inst.impressions.by_source[inst.others] @ inst.viewer_mask()
    return LinearOracle(inst.rho, inst.decision_caps, inst.budget)(phi)
