"""
From an activity trace to a campaign instance
=============================================

Parse a ``tweet_id timestamp user_id retweet_id`` trace, derive per-day
rates, rebuild the retweet star graph and classify influencer tiers.
"""

from pathlib import Path

import numpy as np

from influopt import UtilitySpec, solve_fw
from influopt.bench import synthetic_instance
from influopt.fw import SolverConfig
from influopt.ingest import (build_star_graph, classify_influencers, derive_rates,
                             parse_trace, synthetic_trace)

fixture = Path(__file__).resolve().parents[1] / "tests" / "data" / "trace50.txt"
parsed = parse_trace(fixture)
print(len(parsed.records), "records,", len(parsed.rejects), "rejected")

# a larger random trace with heavy-tailed activity spanning 57 days
records = synthetic_trace(2000, 15000, seed=0)
rates = derive_rates(records, window_length=86400.0)
star = build_star_graph(records, rates)
g = star.graph
print(f"{g.n} users, {g.n_edges} edges, {rates.windows} windows")
print("mean posts per user per day:", round(float(rates.lam.mean()), 3))

tiers = classify_influencers(g)
print("cuts:", tiers.nano_cut, tiers.micro_cut, "counts:", tiers.counts())

# advertise from the user with exactly 15 followers, if there is one
fc = g.follower_counts()
adv = int(np.flatnonzero(fc == 15)[0]) if np.any(fc == 15) else int(np.argmax(fc))
inst = synthetic_instance(g, budget=200.0, advertiser=adv, method="neighbor")
rep = solve_fw(inst, UtilitySpec.log(1.0), SolverConfig(max_iters=30, tol=1e-6))
print(f"advertiser cost per post {inst.costs[adv]:.0f}, objective {rep.objective:.3f}")
