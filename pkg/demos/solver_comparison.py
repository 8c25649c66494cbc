"""
Frank-Wolfe against first-order and seeding baselines
=====================================================

Run every solver on one instance and report objective, spend and time.
"""

import time

from influopt import UtilitySpec, gen_er
from influopt.bench import run_solver, synthetic_instance
from influopt.fw import SolverConfig
from influopt.model import spend
from influopt.utility import total_utility

g = gen_er(250, 4, seed=1)
inst = synthetic_instance(g, budget=2.5)
spec = UtilitySpec.log(1000.0)
cfg = SolverConfig(max_iters=100, tol=1e-9)

print(f"{'solver':<10}{'objective':>12}{'spend':>9}{'ms':>9}")
for name in ("fw", "ps", "md", "heuristic", "bim"):
    t0 = time.perf_counter()
    a, _ = run_solver(name, inst, spec, cfg, baseline_iters=300, mc_runs=30)
    ms = 1e3 * (time.perf_counter() - t0)
    print(f"{name:<10}{total_utility(inst, spec, a):>12.4f}{spend(inst, a):>9.3f}{ms:>9.1f}")
