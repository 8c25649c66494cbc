"""Synthetic follower graphs and feed-snapshot impression estimates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .model import ImpressionMatrix


@dataclass(frozen=True)
class SocialGraph:
    """Directed follower graph: an edge ``leader -> follower`` means the
    follower sees the leader's posts.  ``lam`` and ``mu`` are per-user post
    and re-post rates."""

    n: int
    leaders: np.ndarray
    followers: np.ndarray
    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        lead = np.asarray(self.leaders, dtype=np.int64)
        fol = np.asarray(self.followers, dtype=np.int64)
        if lead.shape != fol.shape:
            raise ValueError("leaders and followers must have equal length")
        if len(lead) and (min(lead.min(), fol.min()) < 0
                          or max(lead.max(), fol.max()) >= self.n):
            raise ValueError("edge endpoint out of range")
        if np.any(lead == fol):
            raise ValueError("self-loops are not allowed")
        key = np.unique(lead * max(self.n, 1) + fol)
        lead, fol = key // max(self.n, 1), key % max(self.n, 1)
        lam = np.broadcast_to(np.asarray(self.lam, float), (self.n,)).copy()
        mu = np.broadcast_to(np.asarray(self.mu, float), (self.n,)).copy()
        if np.any(lam < 0) or np.any(mu < 0):
            raise ValueError("rates must be non-negative")
        for name, arr in (("leaders", lead), ("followers", fol),
                          ("lam", lam), ("mu", mu)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_undirected(cls, n: int, u, v, lam=1.0, mu=1.0) -> "SocialGraph":
        """Each undirected edge becomes two follower edges."""
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        return cls(n, np.concatenate([u, v]), np.concatenate([v, u]), lam, mu)

    def with_rates(self, lam=None, mu=None) -> "SocialGraph":
        return SocialGraph(self.n, self.leaders, self.followers,
                           self.lam if lam is None else lam,
                           self.mu if mu is None else mu)

    @property
    def n_edges(self) -> int:
        return len(self.leaders)

    def follower_counts(self) -> np.ndarray:
        return np.bincount(self.leaders, minlength=self.n)

    def follower_lists(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR-style ``(indptr, indices)`` of each user's followers."""
        counts = self.follower_counts()
        indptr = np.concatenate(([0], np.cumsum(counts)))
        return indptr, self.followers  # edges are sorted by leader

    def undirected_edge_count(self) -> int:
        return int(np.count_nonzero(self.leaders < self.followers))


def gen_ab(n: int, a: int, seed: int = 0, lam: float = 1.0,
           mu: Optional[float] = None) -> SocialGraph:
    """Preferential attachment (Albert-Barabasi) graph.

    Starts from a clique on ``a`` nodes; each later node links to ``a``
    distinct earlier nodes chosen with probability proportional to degree,
    giving ``a * (n - a) + a * (a - 1) / 2`` undirected edges.  ``mu``
    defaults to ``lam``.
    """
    if not 1 <= a < n:
        raise ValueError("need 1 <= a < n")
    rng = np.random.default_rng(seed)
    us, vs = [], []
    repeated: list[int] = []
    for i in range(a):
        for j in range(i + 1, a):
            us.append(i)
            vs.append(j)
            repeated += [i, j]
    if not repeated:
        repeated = list(range(a))  # a == 1: uniform start
    for new in range(a, n):
        if new == a:
            targets = set(range(a))
        else:
            targets = set()
            pool = len(repeated)
            while len(targets) < a:
                draws = rng.integers(0, pool, size=2 * a)
                for k in draws:
                    targets.add(repeated[k])
                    if len(targets) == a:
                        break
        for t in sorted(targets):
            us.append(new)
            vs.append(t)
            repeated += [new, t]
    return SocialGraph.from_undirected(n, us, vs, lam, lam if mu is None else mu)


def er_probability(n: int, a: float) -> float:
    pairs = n * (n - 1) / 2
    return a * (n - a) / pairs if pairs else 0.0


def gen_er(n: int, a: Optional[float] = None, seed: int = 0, lam: float = 1.0,
           mu: Optional[float] = None, *, prob: Optional[float] = None) -> SocialGraph:
    """Erdos-Renyi graph with edge probability ``a (n - a) / C(n, 2)``.

    ``prob`` overrides the probability directly.  Sampling draws the edge
    count from the binomial law and then a uniform set of distinct pairs,
    which is equivalent to independent per-pair coin flips.
    """
    if prob is None:
        if a is None:
            raise ValueError("give either a or prob")
        prob = er_probability(n, a)
    if not 0.0 <= prob <= 1.0 or n < 0:
        raise ValueError(f"invalid edge probability {prob!r}")
    rng = np.random.default_rng(seed)
    pairs = n * (n - 1) // 2
    m = int(rng.binomial(pairs, prob)) if pairs else 0
    k = np.sort(rng.choice(pairs, size=m, replace=False)) if m else np.zeros(0, np.int64)
    u, v = _pair_from_index(n, k)
    return SocialGraph.from_undirected(n, u, v, lam, lam if mu is None else mu)


def _pair_from_index(n: int, k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map row-major upper-triangle indices to pairs ``(u, v)`` with ``u < v``."""
    k = np.asarray(k, dtype=np.int64)
    # row u starts at start(u) = u*(2n - u - 1)/2
    u = np.floor((2 * n - 1 - np.sqrt((2 * n - 1) ** 2 - 8.0 * k)) / 2).astype(np.int64)
    start = u * (2 * n - u - 1) // 2
    # fix off-by-one from floating error
    over = start > k
    u[over] -= 1
    start = u * (2 * n - u - 1) // 2
    nxt = (u + 1) * (2 * n - u - 2) // 2
    under = k >= nxt
    u[under] += 1
    start = u * (2 * n - u - 1) // 2
    v = u + 1 + (k - start)
    return u, v


@dataclass(frozen=True)
class FeedSimConfig:
    feed_size: int = 20
    warmup_events: Optional[int] = None  # default 50 * N
    snapshots: int = 200
    snapshot_every: Optional[int] = None  # default N events
    seed: int = 0

    def __post_init__(self):
        if self.feed_size < 1:
            raise ValueError("feed_size must be >= 1")
        if self.snapshots < 1:
            raise ValueError("snapshots must be >= 1")


def estimate_impressions(g: SocialGraph, cfg: FeedSimConfig = FeedSimConfig()
                         ) -> ImpressionMatrix:
    """Average impression ratios from an event-driven newsfeed simulation.

    Every user owns a FIFO feed of ``cfg.feed_size`` items.  Events fire
    with probability proportional to the rates: a post by ``n`` pushes an
    item of origin ``n`` into all of ``n``'s followers' feeds; a re-post by
    ``n`` copies a uniformly chosen item of ``n``'s own feed (origin kept)
    into the followers' feeds.  After warm-up, each snapshot records, per
    viewer, the fraction of feed items from each origin.  The result is the
    mean over snapshots with self-origin shares removed.
    """
    n = g.n
    rates = np.concatenate([g.lam, g.mu])
    total = rates.sum()
    if not total > 0:
        raise ValueError("all posting and re-posting rates are zero")
    F = cfg.feed_size
    warmup = 50 * n if cfg.warmup_events is None else int(cfg.warmup_events)
    every = n if cfg.snapshot_every is None else int(cfg.snapshot_every)
    every = max(every, 1)
    rng = np.random.default_rng(cfg.seed)
    probs = rates / total
    cum = np.cumsum(probs)
    cum[-1] = 1.0

    indptr, indices = g.follower_lists()
    fol = [indices[indptr[u]:indptr[u + 1]].tolist() for u in range(n)]
    feeds = [[-1] * F for _ in range(n)]
    head = [0] * n
    filled = [0] * n

    def run(events: int) -> None:
        done = 0
        while done < events:
            batch = min(events - done, 65536)
            ev = np.searchsorted(cum, rng.random(batch), side="right").tolist()
            picks = rng.random(batch).tolist()
            for e, pick in zip(ev, picks):
                if e < n:
                    user, origin = e, e
                else:
                    user = e - n
                    m = filled[user]
                    if m == 0:
                        continue
                    origin = feeds[user][int(pick * m) % m]
                for f in fol[user]:
                    feed = feeds[f]
                    h = head[f]
                    feed[h] = origin
                    head[f] = (h + 1) % F
                    if filled[f] < F:
                        filled[f] += 1
            done += batch

    run(warmup)
    viewer = np.repeat(np.arange(n, dtype=np.int64), F)
    acc = sp.csr_matrix((n, n))
    for _ in range(cfg.snapshots):
        run(every)
        origin = np.asarray(feeds, dtype=np.int64).ravel()
        cnt = np.asarray(filled, dtype=np.float64)
        ok = origin >= 0
        wt = np.zeros(n)
        np.divide(1.0, cnt, out=wt, where=cnt > 0)
        acc = acc + sp.csr_matrix((wt[viewer[ok]], (origin[ok], viewer[ok])),
                                  shape=(n, n))
    acc = (acc / cfg.snapshots).tocoo()
    vals = np.minimum(acc.data, 1.0)
    return ImpressionMatrix(n, acc.row, acc.col, vals)


def neighbor_impressions(g: SocialGraph) -> ImpressionMatrix:
    """Long-run feed shares without re-posting.

    With ``mu = 0`` every feed slot holds a post of one of the viewer's
    leaders, chosen in proportion to the leaders' posting rates, so
    ``p[n, j] = lam_n / sum_{m leads j} lam_m``.
    """
    lam = g.lam
    inflow = np.bincount(g.followers, weights=lam[g.leaders], minlength=g.n)
    val = np.zeros(g.n_edges)
    ok = inflow[g.followers] > 0
    val[ok] = lam[g.leaders[ok]] / inflow[g.followers[ok]]
    return ImpressionMatrix(g.n, g.leaders, g.followers, val)
