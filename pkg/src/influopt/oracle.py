"""Exact linear maximisation over the budget-capped box.

Maximise ``<K, s>`` subject to ``sum(rho * s) <= B`` and ``0 <= s <= r``.
Users with ``rho == 0`` are free and sit at their cap iff ``K > 0``; paying
users with positive ``K`` are filled greedily by decreasing ``K / rho``
until the budget runs out, the last one possibly fractionally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PREFIX_START = 64


@dataclass(frozen=True)
class LinearSubproblem:
    K: np.ndarray
    rho: np.ndarray
    caps: np.ndarray
    budget: float

    def __post_init__(self):
        for name in ("K", "rho", "caps"):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=np.float64))
        if not (self.K.shape == self.rho.shape == self.caps.shape):
            raise ValueError("K, rho and caps must have equal shapes")
        if np.any(self.rho < 0):
            raise ValueError("rho must be non-negative")
        if not self.budget >= 0:
            raise ValueError("budget must be non-negative")

    def value(self, s) -> float:
        return float(self.K @ np.asarray(s, dtype=np.float64))


class LinearOracle:
    """Linear maximiser for fixed costs, caps and budget.

    The split into free and paying users is computed once; each call sorts
    only the leading candidates needed to exhaust the budget.
    """

    def __init__(self, rho, caps, budget: float):
        rho = np.asarray(rho, dtype=np.float64)
        caps = np.asarray(caps, dtype=np.float64)
        if rho.shape != caps.shape:
            raise ValueError("rho and caps must have equal shapes")
        if np.any(rho < 0):
            raise ValueError("rho must be non-negative")
        if not budget >= 0:
            raise ValueError("budget must be non-negative")
        self.rho = rho
        self.caps = caps
        self.budget = float(budget)
        self.free = rho == 0
        self.paying = np.flatnonzero(~self.free)
        self._paying_rho = rho[self.paying]
        self._paying_cost = rho[self.paying] * caps[self.paying]

    def order(self, K) -> np.ndarray:
        """Positions (into ``paying``) of candidates in fill order."""
        Kp = np.asarray(K, dtype=np.float64)[self.paying]
        cand = np.flatnonzero(Kp > 0)
        ratio = Kp[cand] / self._paying_rho[cand]
        # stable sort keeps ascending user id among equal ratios
        return cand[np.argsort(-ratio, kind="stable")]

    def fill_prefix(self, K) -> np.ndarray:
        """Leading part of :meth:`order` that is enough to spend the budget.

        Candidates above a ratio threshold are found with a linear-time
        partition and only those are sorted; the threshold is lowered until
        their total cost reaches the budget.  Ties at the threshold are all
        kept, so the result is a prefix of the full order.
        """
        Kp = np.asarray(K, dtype=np.float64)[self.paying]
        cand = np.flatnonzero(Kp > 0)
        ratio = Kp[cand] / self._paying_rho[cand]
        m = len(cand)
        k = min(m, PREFIX_START)
        while True:
            if k < m:
                thr = np.partition(ratio, m - k)[m - k]
                top = np.flatnonzero(ratio >= thr)
            else:
                top = np.arange(m)
            top = top[np.lexsort((top, -ratio[top]))]
            if len(top) == m or self._paying_cost[cand[top]].sum() >= self.budget:
                return cand[top]
            k *= 4

    def __call__(self, K) -> np.ndarray:
        K = np.asarray(K, dtype=np.float64)
        if K.shape != self.rho.shape:
            raise ValueError("K has the wrong dimension")
        s = np.where(self.free & (K > 0), self.caps, 0.0)
        pos = self.fill_prefix(K)
        if pos.size == 0:
            return s
        cost = self._paying_cost[pos]
        prefix = np.cumsum(cost)
        tau = int(np.searchsorted(prefix, self.budget, side="right"))
        users = self.paying[pos]
        s[users[:tau]] = self.caps[users[:tau]]
        if tau < len(users):
            spent = prefix[tau - 1] if tau else 0.0
            u = users[tau]
            s[u] = min(self.caps[u], max(0.0, (self.budget - spent) / self.rho[u]))
        return s


def solve_linear_subproblem(sub: LinearSubproblem) -> np.ndarray:
    return LinearOracle(sub.rho, sub.caps, sub.budget)(sub.K)


def fw_gap(grad, s, a) -> float:
    """Frank-Wolfe gap ``<grad, s - a>``."""
    grad = np.asarray(grad, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if not (grad.shape == s.shape == a.shape):
        raise ValueError("dimension mismatch")
    return float(grad @ (s - a))


@dataclass(frozen=True)
class DualCertificate:
    """Optimal multipliers for the dual of the linear sub-problem.

    ``y0`` prices the budget row and ``y`` the upper caps.  ``objective`` is
    ``B * y0 + <r, y>``, which equals the primal optimum.
    """

    y0: float
    y: np.ndarray
    objective: float

    def max_violation(self, sub: LinearSubproblem) -> float:
        """Largest violation of ``rho * y0 + y >= K``, ``y0 >= 0``, ``y >= 0``."""
        lhs = sub.rho * self.y0 + self.y
        viol = [0.0, -self.y0, float(np.max(sub.K - lhs, initial=0.0)),
                float(np.max(-self.y, initial=0.0))]
        return max(viol)


def dual_certificate(sub: LinearSubproblem) -> DualCertificate:
    """Dual solution built from the greedy fill order.

    The budget price is the ratio ``K / rho`` of the first user that does
    not fit entirely (zero when the budget covers every candidate); each
    user's cap price is whatever of ``K`` the budget price leaves uncovered.
    """
    oracle = LinearOracle(sub.rho, sub.caps, sub.budget)
    pos = oracle.order(sub.K)
    y0 = 0.0
    if pos.size:
        prefix = np.cumsum(oracle._paying_cost[pos])
        tau = int(np.searchsorted(prefix, sub.budget, side="right"))
        if tau < len(pos):
            u = oracle.paying[pos[tau]]
            y0 = sub.K[u] / sub.rho[u]
    y = np.maximum(sub.K - sub.rho * y0, 0.0)
    return DualCertificate(y0, y, float(sub.budget * y0 + sub.caps @ y))
