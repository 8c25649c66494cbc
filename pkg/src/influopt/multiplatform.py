"""Campaigns spanning several platforms and content types.

Decision variables are indexed by ``(platform l, content q, user k)`` for
every non-advertiser ``k``.  Potentials on platform ``l`` sum the content
types with weights ``zeta[l, q]``; each platform's utility is weighted by
``sigma[l]``.  The shared-utility variant applies one utility to the sum of
all platform potentials instead.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .fw import PotentialProblem, SolveReport, SolverConfig, frank_wolfe
from .model import (COLUMN_SUM_TOL, CampaignInstance, FormatError,
                    ImpressionMatrix, Violation, _tokens)
from .utility import UtilitySpec, evaluate


class Variant(str, enum.Enum):
    PER_PLATFORM = "per-platform"
    SHARED = "shared"


@dataclass(frozen=True)
class MultiPlatformInstance:
    """All per-(l, q, n) arrays have shape ``(L, Q, N)``.

    ``impressions[l][q]`` is the impression matrix of content ``q`` on
    platform ``l``.  A user absent from a platform is encoded by zero rate,
    zero cap and no impressions there.
    """

    impressions: tuple
    advertiser: int
    rates: np.ndarray
    costs: np.ndarray
    caps: np.ndarray
    zeta: np.ndarray
    sigma: np.ndarray
    budget: float
    variant: Variant = Variant.PER_PLATFORM

    def __post_init__(self):
        imps = tuple(tuple(row) for row in self.impressions)
        L = len(imps)
        if L == 0 or any(len(row) != len(imps[0]) for row in imps) or not imps[0]:
            raise ValueError("impressions must be a non-empty L x Q grid")
        Q = len(imps[0])
        N = imps[0][0].n_users
        if any(m.n_users != N for row in imps for m in row):
            raise ValueError("all impression matrices must share the user count")
        object.__setattr__(self, "impressions", imps)
        for name in ("rates", "costs", "caps"):
            arr = np.array(np.broadcast_to(np.asarray(getattr(self, name), float),
                                           (L, Q, N)))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        zeta = np.array(np.broadcast_to(np.asarray(self.zeta, float), (L, Q)))
        sigma = np.array(np.broadcast_to(np.asarray(self.sigma, float), (L,)))
        for arr in (zeta, sigma):
            arr.setflags(write=False)
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "budget", float(self.budget))
        if not 0 <= int(self.advertiser) < N:
            raise ValueError(f"advertiser {self.advertiser} is not a user id")
        object.__setattr__(self, "advertiser", int(self.advertiser))
        if np.any(self.zeta < 0) or np.any(self.sigma < 0):
            raise ValueError("zeta and sigma must be non-negative")
        if not self.budget >= 0:
            raise ValueError("budget must be non-negative")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.rates.shape

    @property
    def others(self) -> np.ndarray:
        return np.delete(np.arange(self.shape[2]), self.advertiser)

    @property
    def dim(self) -> int:
        L, Q, N = self.shape
        return L * Q * (N - 1)


def uniform_zeta(L: int, Q: int) -> np.ndarray:
    """Equal content relevance, ``1/Q`` per content type."""
    return np.full((L, Q), 1.0 / Q)


def cost_proportional_sigma(prices) -> np.ndarray:
    """Platform weights proportional to each platform's price per post."""
    prices = np.asarray(prices, dtype=np.float64)
    if np.any(prices < 0) or not prices.sum() > 0:
        raise ValueError("prices must be non-negative with a positive sum")
    return prices / prices.sum()


def validate_mp(mp: MultiPlatformInstance) -> list[Violation]:
    """Per-platform column normalisation and range checks."""
    out: list[Violation] = []
    L, Q, N = mp.shape
    for l in range(L):
        col = np.zeros(N)
        for q in range(Q):
            m = mp.impressions[l][q]
            if m.nnz and (m.val.min() < 0 or m.val.max() > 1):
                out.append(Violation("value out of [0,1]", f"platform {l} content {q}",
                                     "impression value outside [0,1]"))
            col += m.column_sums()
        for j in np.flatnonzero(col > 1.0 + COLUMN_SUM_TOL):
            out.append(Violation("column normalization exceeded",
                                 f"platform {l} viewer {j}", f"sum {col[j]:.9g} > 1"))
    if np.any(mp.rates < 0) or np.any(mp.costs < 0):
        out.append(Violation("negative rate or cost", "instance", ""))
    if np.any(mp.caps < 0) or np.any(mp.caps > 1):
        out.append(Violation("cap out of [0,1]", "instance", ""))
    return out


@dataclass(frozen=True)
class FlatProblem:
    """A multi-platform instance as one :class:`PotentialProblem`.

    ``index[v] = (l, q, k)`` names flat variable ``v``; viewers are the
    ``(l, j)`` pairs ``l * N + j`` for the per-platform variant and plain
    users for the shared one.
    """

    problem: PotentialProblem
    index: np.ndarray
    shape: tuple[int, int, int]
    advertiser: int

    def unflatten(self, a) -> np.ndarray:
        """``(L, Q, N - 1)`` array of the non-advertiser coordinates."""
        L, Q, N = self.shape
        a = np.asarray(a, dtype=np.float64)
        if a.shape != (L * Q * (N - 1),):
            raise ValueError("flat vector has the wrong dimension")
        return a.reshape(L, Q, N - 1)

    def flatten(self, a) -> np.ndarray:
        L, Q, N = self.shape
        a = np.asarray(a, dtype=np.float64)
        if a.shape != (L, Q, N - 1):
            raise ValueError(f"expected shape {(L, Q, N - 1)}, got {a.shape}")
        return a.reshape(-1).copy()


def flatten(mp: MultiPlatformInstance, spec: UtilitySpec) -> FlatProblem:
    """Build the single-problem form in ``L * Q * (N - 1)`` variables.

    Variables run platform-major, then content, then user id.
    """
    L, Q, N = mp.shape
    i = mp.advertiser
    others = mp.others
    shared = mp.variant is Variant.SHARED
    n_view = N if shared else L * N
    blocks, offset = [], np.zeros(n_view)
    for l in range(L):
        row = []
        for q in range(Q):
            by_source = mp.impressions[l][q].by_source
            z = mp.zeta[l, q]
            block = z * by_source[others]
            adv = z * mp.caps[l, q, i] * by_source[i].toarray().ravel()
            if shared:
                row.append(block)
                offset += adv
            else:
                pad = [sp.csr_matrix((N - 1, N))] * L
                pad[l] = block
                row.append(sp.hstack(pad, format="csr"))
                offset[l * N:(l + 1) * N] += adv
        blocks.extend(row)
    matrix = sp.vstack(blocks, format="csr") if blocks else sp.csr_matrix((0, n_view))
    mask = np.ones(N)
    mask[i] = 0.0
    weights = mask if shared else np.concatenate([mp.sigma[l] * mask for l in range(L)])
    rho = (mp.costs * mp.rates)[:, :, others].reshape(-1)
    caps = mp.caps[:, :, others].reshape(-1)
    ll, qq, kk = np.meshgrid(np.arange(L), np.arange(Q), others, indexing="ij")
    index = np.stack([ll.ravel(), qq.ravel(), kk.ravel()], axis=1)
    problem = PotentialProblem(matrix, offset, weights, spec, rho, caps, mp.budget)
    return FlatProblem(problem, index, (L, Q, N), i)


def mp_potentials(mp: MultiPlatformInstance, a) -> np.ndarray:
    """Per-platform potentials ``omega[l, j]`` for flat or ``(L, Q, N-1)`` ``a``."""
    L, Q, N = mp.shape
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    if a.shape != (mp.dim,):
        raise ValueError(f"participation has {a.size} entries, expected {mp.dim}")
    a = a.reshape(L, Q, N - 1)
    others = mp.others
    omega = np.zeros((L, N))
    for l in range(L):
        for q in range(Q):
            full = np.empty(N)
            full[others] = a[l, q]
            full[mp.advertiser] = mp.caps[l, q, mp.advertiser]
            omega[l] += mp.zeta[l, q] * (mp.impressions[l][q].by_viewer @ full)
    return omega


def mp_objective_and_gradient(mp: MultiPlatformInstance, spec: UtilitySpec,
                              a, flat: Optional[FlatProblem] = None
                              ) -> tuple[float, np.ndarray]:
    """Objective value and flat gradient at ``a``."""
    if not spec.differentiable:
        raise ValueError("non-differentiable utility")
    flat = flat or flatten(mp, spec)
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    if a.shape != (mp.dim,):
        raise ValueError(f"participation has {a.size} entries, expected {mp.dim}")
    w = flat.problem.potentials(a)
    return flat.problem.value_at(w), flat.problem.gradient_at(w)


def platform_spend(mp: MultiPlatformInstance, a) -> np.ndarray:
    L, Q, N = mp.shape
    a = np.asarray(a, dtype=np.float64).reshape(L, Q, N - 1)
    rho = (mp.costs * mp.rates)[:, :, mp.others]
    return (rho * a).sum(axis=(1, 2))


def platform_roi(mp: MultiPlatformInstance, spec: UtilitySpec, a) -> np.ndarray:
    """``sigma[l] * sum_{j != i} U(omega[l, j])`` for every platform."""
    omega = mp_potentials(mp, a)
    mask = np.ones(mp.shape[2])
    mask[mp.advertiser] = 0.0
    return mp.sigma * (evaluate(spec, omega) @ mask)


@dataclass
class MultiPlatformReport:
    report: SolveReport
    a: np.ndarray  # (L, Q, N - 1)
    spend: np.ndarray
    roi: np.ndarray
    index: np.ndarray = field(repr=False, default=None)

    @property
    def roi_ratio(self) -> Optional[float]:
        """Second platform's ROI over the first's (two platforms only)."""
        if len(self.roi) != 2:
            return None
        return float(self.roi[1] / self.roi[0]) if self.roi[0] > 0 else float("inf")


def solve_mp(mp: MultiPlatformInstance, spec: UtilitySpec,
             cfg: Optional[SolverConfig] = None) -> MultiPlatformReport:
    """Frank-Wolfe on the flattened instance plus the per-platform split."""
    if not spec.differentiable:
        raise ValueError("non-differentiable utility")
    flat = flatten(mp, spec)
    rep = frank_wolfe(flat.problem, cfg or SolverConfig(), solver="fw-mp")
    spend = platform_spend(mp, rep.a)
    roi = platform_roi(mp, spec, rep.a)
    out = MultiPlatformReport(rep, flat.unflatten(rep.a), spend, roi, flat.index)
    rep.extra["platform_spend"] = spend.tolist()
    rep.extra["platform_roi"] = roi.tolist()
    if out.roi_ratio is not None:
        rep.extra["roi_ratio"] = out.roi_ratio
    return out


def single_platform(inst: CampaignInstance, zeta: float = 1.0,
                    sigma: float = 1.0) -> MultiPlatformInstance:
    """Wrap a single-platform instance as ``L = Q = 1``."""
    n = inst.n_users
    return MultiPlatformInstance(
        ((inst.impressions,),), inst.advertiser,
        inst.rates.reshape(1, 1, n), inst.costs.reshape(1, 1, n),
        inst.caps.reshape(1, 1, n), np.full((1, 1), zeta), np.full(1, sigma),
        inst.budget)


def combine_platforms(instances: Sequence[CampaignInstance], sigma, budget: float,
                      variant: Variant | str = Variant.PER_PLATFORM
                      ) -> tuple[MultiPlatformInstance, list[np.ndarray]]:
    """Join disjoint single-platform networks with a common advertiser.

    User 0 of the result is every platform's advertiser; the other users of
    platform ``l`` follow in a contiguous block.  Users are absent from the
    platforms they do not belong to.  Returns the instance and, per
    platform, the map from local user ids to combined ids.
    """
    L = len(instances)
    maps, start = [], 1
    for inst in instances:
        m = np.empty(inst.n_users, dtype=np.int64)
        m[inst.advertiser] = 0
        m[inst.others] = np.arange(start, start + inst.dim)
        start += inst.dim
        maps.append(m)
    N = start
    rates, costs, caps = np.zeros((L, 1, N)), np.zeros((L, 1, N)), np.zeros((L, 1, N))
    imps = []
    for l, (inst, m) in enumerate(zip(instances, maps)):
        rates[l, 0, m] = inst.rates
        costs[l, 0, m] = inst.costs
        caps[l, 0, m] = inst.caps
        imp = inst.impressions
        imps.append((ImpressionMatrix(N, m[imp.src], m[imp.dst], imp.val),))
    mp = MultiPlatformInstance(tuple(imps), 0, rates, costs, caps,
                               np.ones((L, 1)), sigma, budget, variant)
    return mp, maps


# --- file format ------------------------------------------------------------

MP_HEADER = "bpo-mp v1"


def dumps_mp(mp: MultiPlatformInstance) -> str:
    L, Q, N = mp.shape
    out = [MP_HEADER, f"L {L}", f"Q {Q}", f"N {N}", f"advertiser {mp.advertiser}",
           f"budget {mp.budget!r}", f"variant {mp.variant.value}"]
    for l in range(L):
        for q in range(Q):
            out.append(f"zeta {l} {q} {float(mp.zeta[l, q])!r}")
    for l in range(L):
        out.append(f"sigma {l} {float(mp.sigma[l])!r}")
    for l in range(L):
        for q in range(Q):
            for n in range(N):
                out.append(f"user {l} {q} {n} {float(mp.rates[l, q, n])!r} "
                           f"{float(mp.costs[l, q, n])!r} {float(mp.caps[l, q, n])!r}")
    for l in range(L):
        for q in range(Q):
            m = mp.impressions[l][q]
            for s, d, v in zip(m.src.tolist(), m.dst.tolist(), m.val.tolist()):
                out.append(f"imp {l} {q} {s} {d} {v!r}")
    return "\n".join(out) + "\n"


def loads_mp(text: str) -> MultiPlatformInstance:
    it = iter(_tokens(text.splitlines()))
    try:
        no, head = next(it)
    except StopIteration:
        raise FormatError("empty file") from None
    if " ".join(head) != MP_HEADER:
        raise FormatError(f"line {no}: expected header {MP_HEADER!r}")
    scalars: dict[str, str] = {}
    zeta, sigma, users, imps = {}, {}, [], []
    try:
        for no, tok in it:
            key = tok[0]
            if key in ("L", "Q", "N", "advertiser", "budget", "variant") and len(tok) == 2:
                scalars[key] = tok[1]
            elif key == "zeta" and len(tok) == 4:
                zeta[int(tok[1]), int(tok[2])] = float(tok[3])
            elif key == "sigma" and len(tok) == 3:
                sigma[int(tok[1])] = float(tok[2])
            elif key == "user" and len(tok) == 7:
                users.append((int(tok[1]), int(tok[2]), int(tok[3]),
                              float(tok[4]), float(tok[5]), float(tok[6])))
            elif key == "imp" and len(tok) == 6:
                imps.append((int(tok[1]), int(tok[2]), int(tok[3]), int(tok[4]),
                             float(tok[5])))
            else:
                raise FormatError(f"line {no}: unrecognised record {' '.join(tok)!r}")
        L, Q, N = int(scalars["L"]), int(scalars["Q"]), int(scalars["N"])
        rates, costs = np.zeros((L, Q, N)), np.zeros((L, Q, N))
        caps = np.ones((L, Q, N))
        for l, q, n, lam, c, r in users:
            rates[l, q, n], costs[l, q, n], caps[l, q, n] = lam, c, r
        z = uniform_zeta(L, Q)
        for (l, q), w in zeta.items():
            z[l, q] = w
        s = np.ones(L)
        for l, w in sigma.items():
            s[l] = w
        cells = [[([], [], []) for _ in range(Q)] for _ in range(L)]
        for l, q, a, b, v in imps:
            for lst, x in zip(cells[l][q], (a, b, v)):
                lst.append(x)
        grid = tuple(tuple(ImpressionMatrix(N, *cells[l][q]) for q in range(Q))
                     for l in range(L))
        return MultiPlatformInstance(grid, int(scalars["advertiser"]), rates, costs,
                                     caps, z, s, float(scalars["budget"]),
                                     scalars.get("variant", Variant.PER_PLATFORM.value))
    except FormatError:
        raise
    except (KeyError, IndexError, ValueError) as exc:
        raise FormatError(f"invalid multi-platform instance: {exc}") from None


def save_mp(mp: MultiPlatformInstance, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_mp(mp))


def load_mp(path: str | os.PathLike) -> MultiPlatformInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_mp(fh.read())
