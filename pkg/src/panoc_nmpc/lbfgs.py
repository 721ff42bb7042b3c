"""Limited-memory BFGS on fixed-point residual pairs."""

from __future__ import annotations

from collections import deque

import numpy as np

__all__ = ["LbfgsBuffer"]

EPS_CURVATURE = 1e-12


class LbfgsBuffer:
    """Ring buffer of ``(s, y)`` pairs producing directions ``d = -H r``.

    ``s = u^{k+1} - u^k`` and ``y = r^{k+1} - r^k``. A pair is stored only if
    ``<s, y> > 1e-12 ||s|| ||y||``, which keeps the implicit ``H`` positive
    definite. ``H`` is applied by the two-loop recursion with initial scaling
    ``<s, y> / <y, y>`` taken from the newest pair.
    """

    def __init__(self, memory: int = 10):
        if memory < 1:
            raise ValueError("memory must be >= 1")
        self.memory = memory
        self._pairs = deque(maxlen=memory)  # (s, y, rho), newest last
        self._dim = None

    def __len__(self):
        return len(self._pairs)

    @property
    def count(self) -> int:
        return len(self._pairs)

    @property
    def pairs(self):
        return tuple(self._pairs)

    def push(self, s, y) -> bool:
        s = np.array(s, dtype=float)
        y = np.array(y, dtype=float)
        if s.shape != y.shape or (self._dim is not None and s.shape != self._dim):
            raise ValueError(f"dimension mismatch: s{s.shape}, y{y.shape}")
        sy = float(s @ y)
        if not sy > EPS_CURVATURE * np.linalg.norm(s) * np.linalg.norm(y):
            return False
        self._dim = s.shape
        self._pairs.append((s, y, 1.0 / sy))
        return True

    def direction(self, r) -> np.ndarray:
        q = -np.array(r, dtype=float)
        if not self._pairs:
            return q
        alphas = []
        for s, y, rho in reversed(self._pairs):
            a = rho * float(s @ q)
            q -= a * y
            alphas.append(a)
        s, y, rho = self._pairs[-1]
        q *= 1.0 / (rho * float(y @ y))
        for (s, y, rho), a in zip(self._pairs, reversed(alphas)):
            b = rho * float(y @ q)
            q += (a - b) * s
        return q

    def reset(self):
        self._pairs.clear()
        return self
