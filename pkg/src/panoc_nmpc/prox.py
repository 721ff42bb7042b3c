"""Proximal mappings, Moreau envelopes and the smoothed soft-constraint penalty.

Every supported penalty has a closed-form prox. Functions accept either a
single block ``v`` of shape ``(d,)`` or a stack of blocks of shape ``(N, d)``;
the penalty is then applied to every row and summed, which is how the
stagewise-separable input penalty ``g(u) = sum_n g_n(u_n)`` is evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "ProxSpec",
    "SoftPenaltyResult",
    "prox_apply",
    "penalty_value",
    "moreau_value",
    "soft_penalty",
]

KINDS = ("box", "inf_ball", "euclidean_ball", "l1", "finite_set", "zero")
INDICATORS = ("box", "inf_ball", "euclidean_ball", "finite_set")


@dataclass(frozen=True)
class ProxSpec:
    """Tagged description of a proximable penalty.

    Use the classmethod constructors rather than building instances by hand::

        ProxSpec.box(-1.0, 1.0)
        ProxSpec.inf_ball(1.0)
        ProxSpec.l1(0.1)
    """

    kind: str
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    radius: float = 1.0
    weight: float = 0.0
    points: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown prox kind {self.kind!r}")
        if self.kind == "box":
            lo, hi = np.broadcast_arrays(np.asarray(self.lo, float), np.asarray(self.hi, float))
            if np.any(lo > hi):
                raise ValueError("box requires lo <= hi componentwise")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        elif self.kind in ("inf_ball", "euclidean_ball"):
            if not self.radius > 0:
                raise ValueError("radius must be positive")
        elif self.kind == "l1":
            if self.weight < 0:
                raise ValueError("l1 weight must be nonnegative")
        elif self.kind == "finite_set":
            pts = np.asarray(self.points, dtype=float)
            if pts.ndim == 1:
                pts = pts[:, None]
            if pts.shape[0] == 0:
                raise ValueError("finite_set needs at least one point")
            object.__setattr__(self, "points", pts)

    @classmethod
    def box(cls, lo, hi):
        return cls("box", lo=lo, hi=hi)

    @classmethod
    def inf_ball(cls, radius=1.0):
        return cls("inf_ball", radius=float(radius))

    @classmethod
    def euclidean_ball(cls, radius=1.0):
        return cls("euclidean_ball", radius=float(radius))

    @classmethod
    def l1(cls, weight=1.0):
        return cls("l1", weight=float(weight))

    @classmethod
    def finite_set(cls, points):
        return cls("finite_set", points=points)

    @classmethod
    def zero(cls):
        """The zero penalty; prox is the identity."""
        return cls("zero")

    @property
    def is_indicator(self) -> bool:
        return self.kind in INDICATORS

    @property
    def dim(self) -> Optional[int]:
        """Block dimension if the parameters fix one, else None."""
        if self.kind == "box" and self.lo.ndim == 1:
            return self.lo.shape[0]
        if self.kind == "finite_set":
            return self.points.shape[1]
        return None


def _check_dim(g: ProxSpec, v: np.ndarray):
    d = g.dim
    if d is not None and v.shape[-1] != d:
        raise ValueError(f"dimension mismatch: penalty acts on size {d}, got {v.shape[-1]}")


def prox_apply(g: ProxSpec, v, gamma: float) -> np.ndarray:
    """Return ``argmin_w g(w) + ||w - v||^2 / (2 gamma)``.

    For ``finite_set`` the nearest point is returned, ties going to the
    lowest-index point.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    v = np.asarray(v, dtype=float)
    _check_dim(g, v)
    kind = g.kind
    if kind == "zero":
        return v.copy()
    if kind == "box":
        return np.clip(v, g.lo, g.hi)
    if kind == "inf_ball":
        return np.clip(v, -g.radius, g.radius)
    if kind == "l1":
        t = gamma * g.weight
        return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)
    if kind == "euclidean_ball":
        nrm = np.linalg.norm(v, axis=-1, keepdims=True)
        scale = np.minimum(1.0, g.radius / np.maximum(nrm, np.finfo(float).tiny))
        return v * scale
    # finite_set
    blocks = np.atleast_2d(v)
    d2 = ((blocks[:, None, :] - g.points[None, :, :]) ** 2).sum(axis=-1)
    out = g.points[np.argmin(d2, axis=1)]
    return out.reshape(v.shape)


def penalty_value(g: ProxSpec, w, at_prox: bool = False) -> float:
    """Evaluate ``g(w)`` (``inf`` outside an indicator's set).

    With ``at_prox=True`` the caller asserts ``w`` came out of
    :func:`prox_apply`, so indicators evaluate to exactly zero without a
    floating-point membership test.
    """
    w = np.asarray(w, dtype=float)
    kind = g.kind
    if kind == "zero":
        return 0.0
    if kind == "l1":
        return g.weight * float(np.abs(w).sum())
    if at_prox:
        return 0.0
    if kind == "box":
        inside = np.all((w >= g.lo) & (w <= g.hi))
    elif kind == "inf_ball":
        inside = np.all(np.abs(w) <= g.radius)
    elif kind == "euclidean_ball":
        inside = np.all(np.linalg.norm(w, axis=-1) <= g.radius)
    else:
        blocks = np.atleast_2d(w)
        inside = all(np.any(np.all(g.points == b, axis=1)) for b in blocks)
    return 0.0 if inside else np.inf


def moreau_value(g: ProxSpec, v, gamma: float) -> float:
    """Moreau envelope ``g(p) + ||p - v||^2 / (2 gamma)`` at ``p = prox(v)``."""
    v = np.asarray(v, dtype=float)
    p = prox_apply(g, v, gamma)
    return penalty_value(g, p, at_prox=True) + float(np.sum((p - v) ** 2)) / (2.0 * gamma)


@dataclass(frozen=True)
class SoftPenaltyResult:
    s: np.ndarray
    q: np.ndarray
    value: float


def soft_penalty(z, lower, mu) -> SoftPenaltyResult:
    """Moreau-smoothed indicator of ``z >= lower`` with per-component weights.

    ``s`` is the prox point (projection onto the half-line), ``q = mu (z - s)``
    the envelope gradient and ``value = sum mu_i/2 * min(0, z_i - b_i)^2``.
    Components with ``mu_i = 0`` contribute nothing.
    """
    z = np.asarray(z, dtype=float)
    lower = np.asarray(lower, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if not (z.shape == lower.shape == mu.shape):
        raise ValueError(f"dimension mismatch: z{z.shape}, lower{lower.shape}, mu{mu.shape}")
    s = np.maximum(z, lower)
    viol = z - s
    q = mu * viol
    value = 0.5 * float(np.dot(mu, viol * viol))
    return SoftPenaltyResult(s=s, q=q, value=value)
