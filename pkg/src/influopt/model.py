"""Single-platform campaign instances.

An instance bundles the sparse matrix of average impression ratios
``p[n, j]`` (share of viewer ``j``'s feed that originates at source ``n``),
per-user posting rates, per-post costs, participation caps, the advertiser
and the budget.  Decision vectors always have length ``N - 1``: they are
indexed by the non-advertiser users in ascending id order
(``CampaignInstance.others``).
"""

from __future__ import annotations

import enum
import io
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

COLUMN_SUM_TOL = 1e-6
FEASIBILITY_TOL = 1e-9
SELECTION_TOL = 1e-9


class Tier(enum.IntEnum):
    NON_INFLUENCER = 0
    NANO = 1
    MICRO = 2
    MACRO = 3


def _readonly(x: np.ndarray) -> np.ndarray:
    x.setflags(write=False)
    return x


class ImpressionMatrix:
    """Sparse impression ratios, stored both by source row and by viewer row.

    Self-impressions (``n == j``) and explicit zeros are dropped.  Duplicate
    ``(n, j)`` pairs are rejected.  Values are not range-checked here; use
    :func:`validate_instance` for that.
    """

    def __init__(self, n_users: int, src, dst, val):
        n_users = int(n_users)
        if n_users < 0:
            raise ValueError("n_users must be non-negative")
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        val = np.asarray(val, dtype=np.float64).ravel()
        if not (len(src) == len(dst) == len(val)):
            raise ValueError("src, dst and val must have equal length")
        if len(src) and (src.min() < 0 or dst.min() < 0
                         or src.max() >= n_users or dst.max() >= n_users):
            raise ValueError("impression entry refers to an unknown user")
        keep = (src != dst) & (val != 0.0)
        src, dst, val = src[keep], dst[keep], val[keep]
        order = np.lexsort((dst, src))
        src, dst, val = src[order], dst[order], val[order]
        if len(src) > 1:
            dup = (src[1:] == src[:-1]) & (dst[1:] == dst[:-1])
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise ValueError(
                    f"duplicate impression entry ({src[k]}, {dst[k]})")
        self.n_users = n_users
        self.src = _readonly(src)
        self.dst = _readonly(dst)
        self.val = _readonly(val)
        # rows = source n, columns = viewer j
        self.by_source = sp.csr_matrix((val, (src, dst)),
                                       shape=(n_users, n_users))
        self.by_viewer = self.by_source.T.tocsr()

    @classmethod
    def from_dense(cls, p) -> "ImpressionMatrix":
        p = np.asarray(p, dtype=np.float64)
        n = p.shape[0]
        src, dst = np.nonzero(p)
        return cls(n, src, dst, p[src, dst])

    @property
    def nnz(self) -> int:
        return len(self.val)

    def to_dense(self) -> np.ndarray:
        return self.by_source.toarray()

    def column_sums(self) -> np.ndarray:
        """Per-viewer totals ``sum_n p[n, j]``."""
        return np.bincount(self.dst, weights=self.val, minlength=self.n_users)

    def __repr__(self) -> str:
        return f"ImpressionMatrix(n_users={self.n_users}, nnz={self.nnz})"


@dataclass(frozen=True)
class CampaignInstance:
    impressions: ImpressionMatrix
    advertiser: int
    rates: np.ndarray
    costs: np.ndarray
    caps: np.ndarray
    budget: float
    others: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.impressions.n_users
        for name in ("rates", "costs", "caps"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have length {n}")
            object.__setattr__(self, name, _readonly(arr))
        if not 0 <= int(self.advertiser) < n:
            raise ValueError(f"advertiser {self.advertiser} is not a user id")
        object.__setattr__(self, "advertiser", int(self.advertiser))
        object.__setattr__(self, "budget", float(self.budget))
        others = np.delete(np.arange(n), self.advertiser)
        object.__setattr__(self, "others", _readonly(others))

    @classmethod
    def build(cls, impressions: ImpressionMatrix, advertiser: int, budget: float,
              rates=1.0, costs=1.0, caps=1.0) -> "CampaignInstance":
        """Convenience constructor broadcasting scalar rates/costs/caps."""
        n = impressions.n_users
        return cls(impressions, advertiser,
                   np.broadcast_to(np.asarray(rates, float), (n,)),
                   np.broadcast_to(np.asarray(costs, float), (n,)),
                   np.broadcast_to(np.asarray(caps, float), (n,)),
                   budget)

    @property
    def n_users(self) -> int:
        return self.impressions.n_users

    @property
    def dim(self) -> int:
        return self.n_users - 1

    @property
    def rho(self) -> np.ndarray:
        """Cost of full participation per unit of ``a``: ``c_n * lambda_n``."""
        return self.costs[self.others] * self.rates[self.others]

    @property
    def decision_caps(self) -> np.ndarray:
        return self.caps[self.others]

    @property
    def advertiser_participation(self) -> float:
        return float(self.caps[self.advertiser])

    def full_participation(self, a) -> np.ndarray:
        """Length-N participation including the fixed advertiser entry."""
        a = _check_dim(self, a)
        full = np.empty(self.n_users)
        full[self.others] = a
        full[self.advertiser] = self.advertiser_participation
        return full

    def viewer_mask(self) -> np.ndarray:
        """1.0 for every viewer counted by the objective (all but the advertiser)."""
        w = np.ones(self.n_users)
        w[self.advertiser] = 0.0
        return w


def _check_dim(inst: CampaignInstance, a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (inst.dim,):
        raise ValueError(
            f"participation vector has shape {a.shape}, expected ({inst.dim},)")
    return a


@dataclass(frozen=True)
class Violation:
    rule: str
    where: str
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"[{self.severity}] {self.where}: {self.message}"


def validate_instance(inst: CampaignInstance, *,
                      include_warnings: bool = False) -> list[Violation]:
    """Check every instance invariant and return the violations found.

    The returned list is empty iff the instance is valid.  Columns whose
    impression ratios sum to less than one are legitimate (impressions from
    outside the modelled user set) and are reported only when
    ``include_warnings`` is set.
    """
    out: list[Violation] = []
    imp = inst.impressions
    bad = np.flatnonzero((imp.val < 0) | (imp.val > 1) | ~np.isfinite(imp.val))
    for k in bad:
        out.append(Violation(
            "value out of [0,1]", f"imp ({imp.src[k]}, {imp.dst[k]})",
            f"value out of [0,1]: {imp.val[k]!r}"))
    sums = imp.column_sums()
    for j in np.flatnonzero(sums > 1 + COLUMN_SUM_TOL):
        out.append(Violation(
            "column normalization exceeded", f"viewer {j}",
            f"column normalization exceeded: sum = {sums[j]:.12g}"))
    for name in ("rates", "costs"):
        arr = getattr(inst, name)
        for n in np.flatnonzero(~(arr >= 0) | ~np.isfinite(arr)):
            out.append(Violation(f"negative {name}", f"user {n}",
                                 f"{name} must be finite and >= 0, got {arr[n]!r}"))
    for n in np.flatnonzero(~((inst.caps >= 0) & (inst.caps <= 1))):
        out.append(Violation("cap out of [0,1]", f"user {n}",
                             f"cap out of [0,1]: {inst.caps[n]!r}"))
    if not (np.isfinite(inst.budget) and inst.budget >= 0):
        out.append(Violation("negative budget", "budget",
                             f"budget must be finite and >= 0, got {inst.budget!r}"))
    if include_warnings:
        for j in np.flatnonzero(sums < 1 - COLUMN_SUM_TOL):
            out.append(Violation("column subnormal", f"viewer {j}",
                                 f"column sum {sums[j]:.12g} < 1", "warning"))
    return out


def potentials(inst: CampaignInstance, a) -> np.ndarray:
    """Campaign share of every viewer's feed, ``w_j = sum_n a_n p[n, j]``.

    Returns a length-N array.  The advertiser contributes with its fixed
    participation.  The advertiser's own entry is computed as well but is
    never part of an objective.
    """
    full = inst.full_participation(a)
    return inst.impressions.by_viewer @ full


def spend(inst: CampaignInstance, a) -> float:
    a = _check_dim(inst, a)
    return float(inst.rho @ a)


def box_excess(inst: CampaignInstance, a) -> float:
    """Largest violation of ``0 <= a <= r`` (0.0 when inside the box)."""
    a = _check_dim(inst, a)
    if a.size == 0:
        return 0.0
    return float(max(0.0, np.max(a - inst.decision_caps), np.max(-a)))


def is_feasible(inst: CampaignInstance, a, tol: float = FEASIBILITY_TOL) -> bool:
    return (box_excess(inst, a) <= tol
            and spend(inst, a) <= inst.budget + tol)


@dataclass(frozen=True)
class MetricsReport:
    total_impressions: float
    total_sales: float
    total_reach: int
    nano: int
    micro: int
    macro: int
    selected: int
    spend: float


def metrics(inst: CampaignInstance, a, delta: float, eps: float = 0.0,
            tiers: Optional[Sequence[int]] = None) -> MetricsReport:
    """Impressions, sales, reach and selected-influencer counts for ``a``.

    ``tiers`` holds one :class:`Tier` code per user (length N); without it
    the per-tier counts are zero and only ``selected`` is populated.
    """
    if not delta > 0:
        raise ValueError("delta must be > 0")
    if eps < 0:
        raise ValueError("eps must be >= 0")
    a = _check_dim(inst, a)
    w = potentials(inst, a)
    viewers = inst.viewer_mask() > 0
    wv = w[viewers]
    chosen = inst.others[a > SELECTION_TOL]
    counts = {Tier.NANO: 0, Tier.MICRO: 0, Tier.MACRO: 0}
    if tiers is not None:
        tiers = np.asarray(tiers)
        if tiers.shape != (inst.n_users,):
            raise ValueError("tiers must have one entry per user")
        for t in counts:
            counts[t] = int(np.count_nonzero(tiers[chosen] == t))
    return MetricsReport(
        total_impressions=float(delta * wv.sum()),
        total_sales=float(np.log(delta * wv + 1.0).sum()),
        total_reach=int(np.count_nonzero(wv > eps)),
        nano=counts[Tier.NANO], micro=counts[Tier.MICRO],
        macro=counts[Tier.MACRO], selected=int(len(chosen)),
        spend=spend(inst, a))


# --- instance file format -------------------------------------------------

HEADER = "bpo-instance v1"


class FormatError(ValueError):
    """Malformed instance file."""


def _tokens(lines: Iterable[str]):
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def dumps_instance(inst: CampaignInstance) -> str:
    buf = io.StringIO()
    buf.write(f"{HEADER}\n")
    buf.write(f"N {inst.n_users}\n")
    buf.write(f"advertiser {inst.advertiser}\n")
    buf.write(f"budget {inst.budget!r}\n")
    for n in range(inst.n_users):
        buf.write(f"user {n} {float(inst.rates[n])!r} {float(inst.costs[n])!r} "
                  f"{float(inst.caps[n])!r}\n")
    imp = inst.impressions
    for s, d, v in zip(imp.src.tolist(), imp.dst.tolist(), imp.val.tolist()):
        buf.write(f"imp {s} {d} {v!r}\n")
    return buf.getvalue()


def loads_instance(text: str) -> CampaignInstance:
    it = _tokens(text.splitlines())
    try:
        lineno, head = next(it)
    except StopIteration:
        raise FormatError("empty instance file") from None
    if " ".join(head) != HEADER:
        raise FormatError(f"line {lineno}: expected header {HEADER!r}")
    n = adv = budget = None
    users: dict[int, tuple[float, float, float]] = {}
    src, dst, val = [], [], []
    for lineno, tok in it:
        try:
            key = tok[0]
            if key == "N" and len(tok) == 2:
                n = int(tok[1])
            elif key == "advertiser" and len(tok) == 2:
                adv = int(tok[1])
            elif key == "budget" and len(tok) == 2:
                budget = float(tok[1])
            elif key == "user" and len(tok) == 5:
                uid = int(tok[1])
                if uid in users:
                    raise FormatError(f"line {lineno}: user {uid} listed twice")
                users[uid] = (float(tok[2]), float(tok[3]), float(tok[4]))
            elif key == "imp" and len(tok) == 4:
                src.append(int(tok[1]))
                dst.append(int(tok[2]))
                val.append(float(tok[3]))
            else:
                raise FormatError(f"line {lineno}: cannot parse {' '.join(tok)!r}")
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"line {lineno}: {exc}") from None
    if n is None or adv is None or budget is None:
        raise FormatError("missing N, advertiser or budget line")
    rates = np.zeros(n)
    costs = np.zeros(n)
    caps = np.ones(n)
    for uid, (lam, c, r) in users.items():
        if not 0 <= uid < n:
            raise FormatError(f"user id {uid} out of range")
        rates[uid], costs[uid], caps[uid] = lam, c, r
    try:
        imp = ImpressionMatrix(n, src, dst, val)
        return CampaignInstance(imp, adv, rates, costs, caps, budget)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def save_instance(inst: CampaignInstance, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_instance(inst))


def load_instance(path: str | os.PathLike) -> CampaignInstance:
    with open(path, encoding="utf-8") as fh:
        return loads_instance(fh.read())
