"""Synthetic-network experiment pipeline and benchmark harness.

One cell of the benchmark generates a follower graph, estimates the
impression matrix, prices the users, and runs every requested solver on
the resulting instance.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .baselines import (ICModel, solve_bim_celf, solve_mirror_descent,
                        solve_projected_subgradient)
from .fw import SolverConfig, heuristic_rule_of_thumb, solve_fw
from .ingest import CostScale, classify_influencers, default_costs
from .model import CampaignInstance, metrics, spend
from .netgen import (FeedSimConfig, SocialGraph, estimate_impressions, gen_ab,
                     gen_er, neighbor_impressions)
from .utility import UtilitySpec, total_utility

SOLVERS = ("fw", "heuristic", "ps", "md", "bim")
BENCH_COLUMNS = ("model", "n", "seed", "solver", "objective", "runtime_ms",
                 "iterations", "spend", "nano", "micro", "macro")


def generate_graph(model: str, n: int, a: int, seed: int, lam: float = 1.0,
                   mu: Optional[float] = None) -> SocialGraph:
    if model == "ab":
        return gen_ab(n, a, seed, lam, mu)
    if model == "er":
        return gen_er(n, a, seed, lam, mu)
    raise ValueError(f"unknown graph model {model!r}")


def impressions_for(g: SocialGraph, method: str = "sim",
                    feed: Optional[FeedSimConfig] = None):
    """``sim`` runs the feed simulator, ``neighbor`` uses direct-follower shares."""
    if method == "sim":
        return estimate_impressions(g, feed or FeedSimConfig())
    if method == "neighbor":
        return neighbor_impressions(g)
    raise ValueError(f"unknown impression method {method!r}")


def synthetic_instance(g: SocialGraph, budget: float, advertiser: int = 0,
                       cost_scale: CostScale | str = CostScale.UNIT,
                       method: str = "sim", feed: Optional[FeedSimConfig] = None
                       ) -> CampaignInstance:
    """Instance on ``g`` priced at two units per follower, uncapped."""
    imp = impressions_for(g, method, feed)
    return CampaignInstance(imp, advertiser, g.lam, default_costs(g, cost_scale),
                            np.ones(g.n), budget)


@dataclass(frozen=True)
class BenchSpec:
    model: str = "ab"
    sizes: tuple = (250, 500, 1000, 2000)
    a: int = 4
    budget_per_user: float = 0.01
    utility: UtilitySpec = field(default_factory=lambda: UtilitySpec.log(1000.0))
    solvers: tuple = ("fw", "heuristic")
    repetitions: int = 1
    seeds: tuple = (0,)
    lam: float = 1.0
    mu: Optional[float] = None
    method: str = "sim"
    feed: FeedSimConfig = field(default_factory=FeedSimConfig)
    max_iters: int = 20
    tol: float = 0.1
    baseline_iters: int = 200
    mc_runs: int = 100
    threads: int = 1
    timing: bool = True

    def __post_init__(self):
        if list(self.sizes) != sorted(self.sizes) or len(set(self.sizes)) != len(self.sizes):
            raise ValueError("sizes must be strictly ascending")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        for s in self.solvers:
            if s not in SOLVERS:
                raise ValueError(f"unknown solver {s!r}")


def run_solver(name: str, inst: CampaignInstance, spec: UtilitySpec,
               cfg: SolverConfig, baseline_iters: int = 200, mc_runs: int = 100,
               seed: int = 0) -> tuple[np.ndarray, int]:
    """Participation vector and iteration count of one solver."""
    if name == "fw":
        rep = solve_fw(inst, spec, cfg)
        return rep.a, rep.iterations
    if name == "heuristic":
        return heuristic_rule_of_thumb(inst), 1
    if name == "ps":
        rep = solve_projected_subgradient(inst, spec, baseline_iters)
        return rep.a, rep.iterations
    if name == "md":
        rep = solve_mirror_descent(inst, spec, baseline_iters)
        return rep.a, rep.iterations
    if name == "bim":
        model = ICModel.from_impressions(inst.impressions, mc_runs=mc_runs, seed=seed)
        res = solve_bim_celf(inst, model)
        return res.participation, len(res.seeds)
    raise ValueError(f"unknown solver {name!r}")


def _cell(spec: BenchSpec, n: int, seed: int) -> list[dict]:
    try:
        g = generate_graph(spec.model, n, spec.a, seed, spec.lam, spec.mu)
        feed = FeedSimConfig(spec.feed.feed_size, spec.feed.warmup_events,
                             spec.feed.snapshots, spec.feed.snapshot_every, seed)
        inst = synthetic_instance(g, spec.budget_per_user * n, 0, CostScale.UNIT,
                                  spec.method, feed)
    except Exception as exc:
        raise RuntimeError(f"generation failed for n={n}, seed={seed}: {exc}") from exc
    tiers = classify_influencers(g).tiers
    cfg = SolverConfig(max_iters=spec.max_iters, tol=spec.tol, seed=seed)
    rows = []
    for name in spec.solvers:
        t0 = time.perf_counter()
        a, iters = run_solver(name, inst, spec.utility, cfg, spec.baseline_iters,
                              spec.mc_runs, seed)
        elapsed = time.perf_counter() - t0
        m = metrics(inst, a, 1.0, 0.0, tiers)
        rows.append({
            "model": spec.model, "n": n, "seed": seed, "solver": name,
            "objective": total_utility(inst, spec.utility, a),
            "runtime_ms": 1e3 * elapsed if spec.timing else "",
            "iterations": iters, "spend": spend(inst, a),
            "nano": m.nano, "micro": m.micro, "macro": m.macro,
        })
    return rows


def run_bench(spec: BenchSpec) -> list[dict]:
    """Rows ordered by size, seed (repetition-major) and solver list order."""
    cells = [(n, seed + rep * 1000) for n in spec.sizes
             for rep in range(spec.repetitions) for seed in spec.seeds]
    if spec.threads > 1:
        with ThreadPoolExecutor(spec.threads) as pool:
            parts = list(pool.map(lambda c: _cell(spec, *c), cells))
    else:
        parts = [_cell(spec, *c) for c in cells]
    return [row for part in parts for row in part]


def solver_objectives(inst: CampaignInstance, spec: UtilitySpec,
                      solvers: Sequence[str], cfg: Optional[SolverConfig] = None,
                      **kw) -> dict[str, float]:
    """Objective reached by each solver on one instance."""
    cfg = cfg or SolverConfig()
    return {name: total_utility(inst, spec, run_solver(name, inst, spec, cfg, **kw)[0])
            for name in solvers}

