from pathlib import Path

import numpy as np
import pytest

from influopt.ingest import (CostScale, TraceRecord, build_star_graph, classify_influencers,
                             decile, default_costs, derive_rates, parse_budget_rule,
                             parse_trace, parse_trace_lines, synthetic_trace)
from influopt.model import Tier
from influopt.netgen import SocialGraph

DATA = Path(__file__).parent / "data"


def post(tid, uid, rid=-1, ts=None):
    return TraceRecord(tid, float(tid if ts is None else ts), uid, rid)


def star_with_counts(counts, lam=1.0):
    """Graph where user ``k`` leads ``counts[k]`` distinct followers."""
    n_lead = len(counts)
    lead, fol = [], []
    nxt = n_lead
    for k, c in enumerate(counts):
        lead += [k] * c
        fol += list(range(nxt, nxt + c))
        nxt += c
    rates = np.zeros(nxt)
    rates[:n_lead] = lam
    return SocialGraph(nxt, lead, fol, rates, 0.0)


class TestParse:
    def test_example_lines(self):
        out = parse_trace_lines(["7 1000 42 -1\n", "8,1001,43,7\n"])
        assert out.records == [TraceRecord(7, 1000.0, 42, -1), TraceRecord(8, 1001.0, 43, 7)]
        assert not out.records[0].is_repost and out.records[1].is_repost

    def test_one_malformed_line_in_hundred(self, tmp_path):
        lines = [f"{k} {1000 + k} {k % 7} -1" for k in range(1, 101)]
        lines[41] = "42 1042 x -1"
        path = tmp_path / "trace.txt"
        path.write_text("\n".join(lines) + "\n")
        out = parse_trace(path)
        assert len(out.records) == 99 and len(out.rejects) == 1
        assert out.rejects[0].line_no == 42

    @pytest.mark.parametrize("line", ["1 2 3", "1 2 3 4 5", "1 2 3 -2", "1 nan 3 -1"])
    def test_rejects(self, line):
        out = parse_trace_lines([line])
        assert out.records == [] and len(out.rejects) == 1

    def test_comments_and_blanks_skipped(self):
        out = parse_trace_lines(["# header", "", "1 0 5 -1  # trailing"])
        assert len(out.records) == 1 and out.rejects == []

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(OSError):
            parse_trace(tmp_path / "missing.txt")


class TestRates:
    def test_single_window(self):
        recs = [post(k, 5, ts=k * 10.0) for k in range(10)]
        rt = derive_rates(recs, 1000.0)
        assert rt.windows == 1
        np.testing.assert_array_equal(rt.lam, [10.0])
        np.testing.assert_array_equal(rt.mu, [0.0])

    def test_average_posts_per_user(self):
        # 371 originals over 100 users, then every user re-posts 7 times
        rng = np.random.default_rng(0)
        authors = np.concatenate([np.arange(100), rng.integers(0, 100, 271)])
        recs = [post(k + 1, int(u)) for k, u in enumerate(authors)]
        recs += [post(1000 + 7 * u + k, u, rid=1 + (u + 1) % 100) for u in range(100)
                 for k in range(7)]
        rt = derive_rates(recs, 1e9)
        assert rt.lam.mean() == pytest.approx(3.71, abs=1e-12)
        assert rt.mu.mean() == pytest.approx(7.0, abs=1e-12)

    def test_no_retweets(self):
        rt = derive_rates([post(1, 3), post(2, 4), post(3, 3)], 1.0)
        np.testing.assert_array_equal(rt.mu, [0.0, 0.0])
        np.testing.assert_array_equal(rt.lam, [1.0, 0.5])  # span 2 gives two windows

    def test_errors(self):
        with pytest.raises(ValueError):
            derive_rates([], 1.0)
        with pytest.raises(ValueError):
            derive_rates([post(1, 1)], 0.0)
        with pytest.raises(KeyError):
            derive_rates([post(1, 1)], 1.0).index_of(99)


class TestStarGraph:
    def test_single_retweet(self):
        star = build_star_graph([post(1, 10), post(2, 20, rid=1)])
        ids = star.user_ids
        assert ids[star.graph.leaders].tolist() == [10] and ids[star.graph.followers].tolist() == [20]

    def test_duplicate_retweets_one_edge(self):
        star = build_star_graph([post(1, 10), post(2, 10), post(3, 20, rid=1), post(4, 20, rid=2)])
        assert star.graph.n_edges == 1

    def test_hand_fixture(self):
        # authors 1, 2, 3; retweeters 4, 5, 6, 7
        recs = [post(11, 1), post(12, 2), post(13, 3),
                post(21, 4, 11), post(22, 4, 12), post(23, 5, 11), post(24, 6, 13),
                post(25, 7, 12), post(26, 7, 13), post(27, 5, 11), post(28, 6, 99),
                post(29, 3, 13)]
        star = build_star_graph(recs)
        ids = star.user_ids
        edges = set(zip(ids[star.graph.leaders].tolist(), ids[star.graph.followers].tolist()))
        assert edges == {(1, 4), (2, 4), (1, 5), (3, 6), (2, 7), (3, 7)}
        assert star.n_dangling == 1 and star.n_self == 1
        assert not np.any(star.graph.leaders == star.graph.followers)

    def test_retweet_of_retweet_credits_its_poster(self):
        star = build_star_graph([post(1, 10), post(2, 20, rid=1), post(3, 30, rid=2)])
        ids = star.user_ids
        edges = set(zip(ids[star.graph.leaders].tolist(), ids[star.graph.followers].tolist()))
        assert edges == {(10, 20), (20, 30)}

    def test_mean_degree_identity(self):
        # mean (in + out) degree equals twice the edge count over users
        assert 2 * 517421 / 181621 == pytest.approx(5.70, abs=5e-3)
        g = build_star_graph(synthetic_trace(200, 2000, seed=3)).graph
        deg = np.bincount(g.leaders, minlength=g.n) + np.bincount(g.followers, minlength=g.n)
        assert deg.mean() == pytest.approx(2 * g.n_edges / g.n, abs=1e-12)

    def test_fixture_file(self):
        parsed = parse_trace(DATA / "trace50.txt")
        star = build_star_graph(parsed.records)
        assert len(parsed.rejects) == 1 and star.graph.n_edges == 34


class TestTiers:
    def test_decile_cuts(self):
        g = star_with_counts([1, 2, 3, 4, 34, 35])
        ta = classify_influencers(g)
        assert (ta.nano_cut, ta.micro_cut) == (3, 34)
        expect = [Tier.NANO] * 3 + [Tier.MICRO] * 2 + [Tier.MACRO]
        np.testing.assert_array_equal(ta.tiers[:6], expect)
        assert np.all(ta.tiers[6:] == Tier.NON_INFLUENCER)
        assert ta.counts() == {"nano": 3, "micro": 2, "macro": 1}

    def test_equal_counts_all_nano(self):
        ta = classify_influencers(star_with_counts([4, 4, 4, 4]))
        np.testing.assert_array_equal(ta.tiers[:4], [Tier.NANO] * 4)

    def test_silent_user_is_not_an_influencer(self):
        g = star_with_counts([100, 2, 3])
        lam = g.lam.copy()
        lam[0] = 0.0
        ta = classify_influencers(g, lam)
        assert ta.tiers[0] == Tier.NON_INFLUENCER

    def test_no_candidates(self):
        with pytest.raises(ValueError):
            classify_influencers(star_with_counts([2, 3], lam=0.0))

    def test_partition_covers_candidates(self):
        g = build_star_graph(synthetic_trace(300, 3000, seed=1),
                             derive_rates(synthetic_trace(300, 3000, seed=1), 86400.0)).graph
        ta = classify_influencers(g)
        cand = (g.lam > 0) & (g.follower_counts() >= 1)
        assert sum(ta.counts().values()) == cand.sum()
        assert ta.nano_cut <= ta.micro_cut

    def test_decile_floor_rank(self):
        assert decile([5.0], 6) == 5.0
        assert decile(np.arange(1, 11), 6) == 6
        assert decile(np.arange(1, 11), 9) == 9
        with pytest.raises(ValueError):
            decile([], 6)


class TestCosts:
    def test_scales(self):
        g = star_with_counts([15, 0, 500])
        np.testing.assert_array_equal(default_costs(g, CostScale.UNIT)[:3], [30.0, 0.0, 1000.0])
        np.testing.assert_array_equal(default_costs(g, "per-thousand")[:3], [0.03, 0.0, 1.0])

    def test_bad_scale(self):
        with pytest.raises(ValueError):
            default_costs(star_with_counts([1]), "per-million")


class TestBudgetRule:
    def test_rules(self):
        assert parse_budget_rule("fixed:20", 500) == 20.0
        assert parse_budget_rule("per-user:0.01", 500) == 5.0

    @pytest.mark.parametrize("text", ["fixed", "fixed:x", "weekly:3", "fixed:-1"])
    def test_invalid(self, text):
        with pytest.raises(ValueError):
            parse_budget_rule(text, 10)


class TestSyntheticTrace:
    def test_deterministic_and_well_formed(self):
        a = synthetic_trace(50, 400, seed=2)
        assert a == synthetic_trace(50, 400, seed=2)
        ids = {r.tweet_id: r for r in a}
        for r in a:
            if r.is_repost:
                src = ids[r.retweet_id]
                assert not src.is_repost and src.tweet_id < r.tweet_id
                assert src.user_id != r.user_id
        assert [r.timestamp for r in a] == sorted(r.timestamp for r in a)

    def test_invalid(self):
        with pytest.raises(ValueError):
            synthetic_trace(1, 10)
