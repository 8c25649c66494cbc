"""Budgeted influencer portfolio optimisation with Frank-Wolfe."""

__version__ = "0.1.0"

from .model import (CampaignInstance, FormatError, ImpressionMatrix, MetricsReport,
                    Tier, Violation, dumps_instance, is_feasible, load_instance,
                    loads_instance, metrics, potentials, save_instance, spend,
                    validate_instance)
from .utility import (Kind, UtilitySpec, derivative, evaluate, gradient,
                      total_utility)
from .oracle import (DualCertificate, LinearOracle, LinearSubproblem,
                     dual_certificate, fw_gap, solve_linear_subproblem)
from .fw import (InfeasibleError, PotentialProblem, SolveReport, SolverConfig,
                 StepRule, Termination, estimate_curvature, frank_wolfe,
                 heuristic_rule_of_thumb, solve_fw, step_size)
from .baselines import (ICModel, SeedSet, edge_probability, ic_spread,
                        project_onto_feasible, solve_bim_celf, solve_bim_greedy,
                        solve_mirror_descent, solve_projected_subgradient)
from .netgen import (FeedSimConfig, SocialGraph, estimate_impressions, gen_ab,
                     gen_er, neighbor_impressions)
from .ingest import (CostScale, TierAssignment, TraceRecord, build_star_graph,
                     classify_influencers, default_costs, derive_rates, parse_trace)
from .multiplatform import (MultiPlatformInstance, Variant, flatten,
                            mp_objective_and_gradient, mp_potentials, solve_mp)
from .report import emit_report, report_from_dict, report_to_dict
from .bench import BenchSpec, run_bench
