"""Activity-trace ingestion: rates, retweet star graph, tiers and prices.

A trace holds one post per line as ``tweet_id timestamp user_id retweet_id``
(whitespace or comma separated), with ``retweet_id == -1`` for original
posts.
"""

from __future__ import annotations

import enum
import math
import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import Tier
from .netgen import SocialGraph

_SPLIT = re.compile(r"[,\s]+")


@dataclass(frozen=True)
class TraceRecord:
    tweet_id: int
    timestamp: float
    user_id: int
    retweet_id: int = -1

    @property
    def is_repost(self) -> bool:
        return self.retweet_id != -1


@dataclass(frozen=True)
class Reject:
    line_no: int
    text: str
    reason: str


@dataclass
class ParsedTrace:
    records: list[TraceRecord]
    rejects: list[Reject] = field(default_factory=list)


def parse_trace_lines(lines: Iterable[str]) -> ParsedTrace:
    """Parse trace lines; malformed ones are collected, not raised.

    Blank lines and ``#`` comments are skipped silently.
    """
    out = ParsedTrace([])
    for no, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        parts = [p for p in _SPLIT.split(text) if p]
        if len(parts) != 4:
            out.rejects.append(Reject(no, raw.rstrip("\n"), "expected 4 fields"))
            continue
        try:
            tid, uid, rid = int(parts[0]), int(parts[2]), int(parts[3])
            ts = float(parts[1])
        except ValueError:
            out.rejects.append(Reject(no, raw.rstrip("\n"), "non-numeric field"))
            continue
        if rid < -1 or not math.isfinite(ts):
            out.rejects.append(Reject(no, raw.rstrip("\n"), "invalid value"))
            continue
        out.records.append(TraceRecord(tid, ts, uid, rid))
    return out


def parse_trace(path: str | os.PathLike) -> ParsedTrace:
    """Read a trace file (raises ``OSError`` if unreadable)."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trace_lines(fh)


@dataclass(frozen=True)
class RateTable:
    """Per-user post (``lam``) and re-post (``mu``) rates per window.

    ``user_ids[k]`` is the trace id of dense user index ``k``.
    """

    user_ids: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    windows: int

    def index_of(self, user_id: int) -> int:
        k = int(np.searchsorted(self.user_ids, user_id))
        if k >= len(self.user_ids) or self.user_ids[k] != user_id:
            raise KeyError(f"user {user_id} does not appear in the trace")
        return k


def trace_users(records: Sequence[TraceRecord]) -> np.ndarray:
    return np.unique(np.fromiter((r.user_id for r in records), np.int64,
                                 count=len(records)))


def derive_rates(records: Sequence[TraceRecord], window_length: float) -> RateTable:
    """Counts of posts and re-posts per user divided by the number of windows.

    The number of windows is ``ceil(span / window_length)`` (at least one),
    where ``span`` runs from the first to the last timestamp.
    """
    if not window_length > 0:
        raise ValueError("window_length must be > 0")
    if not records:
        raise ValueError("empty trace")
    users = trace_users(records)
    idx = np.searchsorted(users, [r.user_id for r in records])
    repost = np.array([r.is_repost for r in records])
    ts = np.array([r.timestamp for r in records])
    windows = max(1, math.ceil((ts.max() - ts.min()) / window_length))
    n = len(users)
    lam = np.bincount(idx[~repost], minlength=n) / windows
    mu = np.bincount(idx[repost], minlength=n) / windows
    return RateTable(users, lam, mu, windows)


@dataclass(frozen=True)
class StarGraph:
    graph: SocialGraph
    user_ids: np.ndarray
    n_dangling: int
    n_self: int = 0


def build_star_graph(records: Sequence[TraceRecord],
                     rates: Optional[RateTable] = None) -> StarGraph:
    """Follower graph with one edge ``author -> retweeter`` per distinct pair.

    The author of a retweeted tweet is the user who posted that tweet id in
    the trace (first occurrence wins).  Retweets of ids absent from the
    trace are counted as dangling; self-retweets are dropped.  ``rates``
    attaches ``lam``/``mu`` to the graph (zero otherwise).
    """
    users = trace_users(records) if rates is None else rates.user_ids
    author: dict[int, int] = {}
    for r in records:
        author.setdefault(r.tweet_id, r.user_id)
    lead, fol = [], []
    dangling = selfs = 0
    for r in records:
        if not r.is_repost:
            continue
        src = author.get(r.retweet_id)
        if src is None:
            dangling += 1
        elif src == r.user_id:
            selfs += 1
        else:
            lead.append(src)
            fol.append(r.user_id)
    n = len(users)
    lead_i = np.searchsorted(users, np.asarray(lead, dtype=np.int64))
    fol_i = np.searchsorted(users, np.asarray(fol, dtype=np.int64))
    lam = np.zeros(n) if rates is None else rates.lam
    mu = np.zeros(n) if rates is None else rates.mu
    g = SocialGraph(n, lead_i, fol_i, lam, mu)  # deduplicates pairs
    return StarGraph(g, users, dangling, selfs)


@dataclass(frozen=True)
class TierAssignment:
    """Influencer tier per user and the two follower-count cuts.

    ``nano_cut`` is the 6th-decile and ``micro_cut`` the 9th-decile follower
    count over candidates (users with positive rate and a follower).
    """

    tiers: np.ndarray
    nano_cut: float
    micro_cut: float

    def counts(self) -> dict[str, int]:
        return {t.name.lower(): int(np.count_nonzero(self.tiers == t))
                for t in (Tier.NANO, Tier.MICRO, Tier.MACRO)}


def decile(values, k: int) -> float:
    """``k``-th decile as the order statistic of rank ``max(1, floor(k n / 10))``."""
    v = np.sort(np.asarray(values))
    if v.size == 0:
        raise ValueError("no values")
    rank = max(1, (k * v.size) // 10)
    return float(v[rank - 1])


def classify_influencers(g: SocialGraph, lam=None) -> TierAssignment:
    """Nano up to the 6th decile, Micro up to the 9th, Macro above.

    Values equal to a cut fall in the lower tier.
    """
    lam = g.lam if lam is None else np.asarray(lam, dtype=np.float64)
    followers = g.follower_counts()
    cand = (lam > 0) & (followers >= 1)
    if not cand.any():
        raise ValueError("no influencer candidates (positive rate and a follower)")
    q6 = decile(followers[cand], 6)
    q9 = decile(followers[cand], 9)
    tiers = np.full(g.n, int(Tier.NON_INFLUENCER), dtype=np.int64)
    f = followers[cand]
    tiers[cand] = np.where(f <= q6, int(Tier.NANO),
                           np.where(f <= q9, int(Tier.MICRO), int(Tier.MACRO)))
    return TierAssignment(tiers, q6, q9)


class CostScale(str, enum.Enum):
    UNIT = "unit"
    PER_THOUSAND = "per-thousand"


def default_costs(g: SocialGraph, scale: CostScale | str = CostScale.UNIT) -> np.ndarray:
    """Price per post: two units per follower, or per thousand followers."""
    f = g.follower_counts().astype(np.float64)
    if CostScale(scale) is CostScale.PER_THOUSAND:
        return 2.0 * f / 1000.0
    return 2.0 * f


def parse_budget_rule(text: str, n_users: int) -> float:
    """``fixed:<B>`` or ``per-user:<x>`` (``B = x * N``)."""
    kind, _, arg = text.partition(":")
    try:
        x = float(arg)
    except ValueError:
        raise ValueError(f"bad budget rule {text!r}") from None
    if kind == "fixed":
        b = x
    elif kind == "per-user":
        b = x * n_users
    else:
        raise ValueError(f"unknown budget rule {kind!r}")
    if not b >= 0:
        raise ValueError("budget must be non-negative")
    return b


def synthetic_trace(n_users: int, n_posts: int, repost_share: float = 0.6,
                    span: float = 57 * 86400.0, zipf: float = 1.2,
                    seed: int = 0) -> list[TraceRecord]:
    """Random retweet trace with heavy-tailed activity and popularity.

    Users post with Zipf-distributed activity; each re-post copies an
    earlier original post whose author is drawn by an independent Zipf
    popularity, which produces the star-like follower structure of real
    retweet crawls.  User ids start at 1000 and tweet ids at 1.
    """
    if n_users < 2 or n_posts < 1:
        raise ValueError("need at least two users and one post")
    rng = np.random.default_rng(seed)
    ranks = np.arange(1, n_users + 1, dtype=np.float64)
    activity = ranks ** -zipf
    activity /= activity.sum()
    popularity = activity[rng.permutation(n_users)]
    times = np.sort(rng.uniform(0.0, span, n_posts))
    users = rng.choice(n_users, size=n_posts, p=activity)
    authors = rng.choice(n_users, size=n_posts, p=popularity)
    coin = rng.random(n_posts)
    pick = rng.random(n_posts)
    originals: dict[int, list[int]] = {}
    out = []
    for k in range(n_posts):
        tid = k + 1
        u, src = int(users[k]), int(authors[k])
        pool = originals.get(src)
        if coin[k] < repost_share and pool and src != u:
            out.append(TraceRecord(tid, float(times[k]), 1000 + u,
                                   pool[int(pick[k] * len(pool))]))
        else:
            out.append(TraceRecord(tid, float(times[k]), 1000 + u, -1))
            originals.setdefault(u, []).append(tid)
    return out
