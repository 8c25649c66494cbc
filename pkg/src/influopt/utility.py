"""Per-viewer utility families and the campaign objective.

All functions accept scalars or arrays of potentials and are vectorised.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import CampaignInstance, potentials

MAXMIN_ALPHA = 8.0


class Kind(str, enum.Enum):
    LINEAR = "linear"
    LOG = "log"
    ALPHA_FAIR = "afair"
    REACH = "reach"


@dataclass(frozen=True)
class UtilitySpec:
    """Utility ``U(w)`` applied to every viewer's potential.

    * ``LINEAR``: ``delta * w``
    * ``LOG``: ``log(delta * w + 1)``
    * ``ALPHA_FAIR``: ``(1 + w)**(1 - alpha) / (1 - alpha)``, and
      ``log(1 + w)`` at ``alpha == 1``
    * ``REACH``: ``1`` if ``w > eps`` else ``0`` (evaluation only)
    """

    kind: Kind
    delta: float = 1.0
    alpha: float = 0.0
    eps: float = 0.0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind in (Kind.LINEAR, Kind.LOG) and not self.delta > 0:
            raise ValueError(f"{self.kind.value} utility needs delta > 0")
        if self.kind is Kind.ALPHA_FAIR and not self.alpha >= 0:
            raise ValueError("alpha-fair utility needs alpha >= 0")
        if self.kind is Kind.REACH and not self.eps >= 0:
            raise ValueError("reach utility needs eps >= 0")

    @classmethod
    def linear(cls, delta: float = 1.0) -> "UtilitySpec":
        return cls(Kind.LINEAR, delta=delta)

    @classmethod
    def log(cls, delta: float = 1.0) -> "UtilitySpec":
        return cls(Kind.LOG, delta=delta)

    @classmethod
    def alpha_fair(cls, alpha: float) -> "UtilitySpec":
        return cls(Kind.ALPHA_FAIR, alpha=alpha)

    @classmethod
    def maxmin(cls, alpha: float = MAXMIN_ALPHA) -> "UtilitySpec":
        """Large-alpha fair utility used as the smooth max-min surrogate."""
        return cls(Kind.ALPHA_FAIR, alpha=alpha, label="maxmin")

    @classmethod
    def reach(cls, eps: float = 0.0) -> "UtilitySpec":
        return cls(Kind.REACH, eps=eps)

    @classmethod
    def parse(cls, text: str) -> "UtilitySpec":
        """Parse ``linear:d``, ``log:d``, ``afair:a``, ``maxmin[:a]`` or ``reach:e``."""
        name, _, arg = text.strip().partition(":")
        name = name.lower()
        try:
            if name == "maxmin":
                return cls.maxmin(float(arg) if arg else MAXMIN_ALPHA)
            if not arg:
                raise ValueError(f"utility {name!r} needs a parameter")
            value = float(arg)
        except ValueError as exc:
            raise ValueError(f"bad utility {text!r}: {exc}") from None
        if name == "linear":
            return cls.linear(value)
        if name == "log":
            return cls.log(value)
        if name == "afair":
            return cls.alpha_fair(value)
        if name == "reach":
            return cls.reach(value)
        raise ValueError(f"unknown utility {name!r}")

    @property
    def differentiable(self) -> bool:
        return self.kind is not Kind.REACH

    def __str__(self) -> str:
        if self.label == "maxmin":
            return f"maxmin:{self.alpha:g}"
        param = {Kind.LINEAR: self.delta, Kind.LOG: self.delta,
                 Kind.ALPHA_FAIR: self.alpha, Kind.REACH: self.eps}[self.kind]
        return f"{self.kind.value}:{param:g}"


def _check_omega(omega):
    w = np.asarray(omega, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("potentials must be non-negative")
    return w


def _ret(w, out):
    return float(out) if np.ndim(w) == 0 else out


def evaluate(spec: UtilitySpec, omega):
    w = _check_omega(omega)
    k = spec.kind
    if k is Kind.LINEAR:
        out = spec.delta * w
    elif k is Kind.LOG:
        out = np.log1p(spec.delta * w)
    elif k is Kind.ALPHA_FAIR:
        if spec.alpha == 1.0:
            out = np.log1p(w)
        else:
            out = (1.0 + w) ** (1.0 - spec.alpha) / (1.0 - spec.alpha)
    else:
        out = (w > spec.eps).astype(np.float64)
    return _ret(w, out)


def derivative(spec: UtilitySpec, omega):
    if not spec.differentiable:
        raise ValueError("non-differentiable utility")
    w = _check_omega(omega)
    k = spec.kind
    if k is Kind.LINEAR:
        out = np.full_like(w, spec.delta)
    elif k is Kind.LOG:
        out = spec.delta / (spec.delta * w + 1.0)
    else:
        out = (1.0 + w) ** (-spec.alpha)
    return _ret(w, out)


def total_utility(inst: CampaignInstance, spec: UtilitySpec, a) -> float:
    """Sum of viewer utilities over every user except the advertiser."""
    w = potentials(inst, a)
    return float(np.dot(inst.viewer_mask(), evaluate(spec, w)))


def gradient(inst: CampaignInstance, spec: UtilitySpec, a) -> np.ndarray:
    """Partial derivatives of :func:`total_utility` w.r.t. each ``a_k``.

    One sparse pass over the source rows: ``grad_k = sum_j U'(w_j) p[k, j]``
    with the advertiser's column masked out.
    """
    if not spec.differentiable:
        raise ValueError("non-differentiable utility")
    inst.full_participation(a)  # dimension check
    mask = inst.viewer_mask()
    rows = inst.impressions.by_source[inst.others]
    if spec.kind is Kind.LINEAR:
        # constant gradient: scale after summation so it is exactly
        # delta times the aggregate influence used by the rule of thumb
        return spec.delta * (rows @ mask)
    w = potentials(inst, a)
    return rows @ (mask * derivative(spec, w))
