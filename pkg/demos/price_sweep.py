"""
Splitting a budget across two platforms
=======================================

Join two networks behind one advertiser and sweep the price ratio between
them.  Platform weights follow the prices, so the pricier platform counts
for more.
"""

import numpy as np

from influopt import CampaignInstance, SolverConfig, UtilitySpec, gen_ab, gen_er
from influopt.multiplatform import combine_platforms, cost_proportional_sigma, solve_mp
from influopt.netgen import neighbor_impressions

spec = UtilitySpec.log(1.0)
graphs = [gen_ab(300, 4, seed=0), gen_er(300, 4, seed=0)]
imps = [neighbor_impressions(g) for g in graphs]

print(f"{'x':>8}{'spend A':>10}{'spend B':>10}{'ROI B/A':>10}")
for x in np.logspace(-1, 1, 5):
    prices = np.array([1.0, x])
    insts = [CampaignInstance(imp, 0, g.lam, np.full(g.n, p), np.ones(g.n), 0.0)
             for imp, g, p in zip(imps, graphs, prices)]
    mp, _ = combine_platforms(insts, cost_proportional_sigma(prices), budget=20.0)
    res = solve_mp(mp, spec, SolverConfig(max_iters=60, tol=1e-9))
    print(f"{x:>8.3f}{res.spend[0]:>10.3f}{res.spend[1]:>10.3f}{res.roi_ratio:>10.3f}")
