"""Axis-aligned boxes in state space."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Domain:
    """Box ``prod_i [lo_i, hi_i]`` with ``lo_i < 0 < hi_i``."""

    bounds: tuple

    def __post_init__(self):
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if not b:
            raise ValueError("domain needs at least one axis")
        for i, (lo, hi) in enumerate(b, start=1):
            if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
                raise ValueError(f"invalid bounds for x{i}: [{lo}, {hi}]")
        object.__setattr__(self, "bounds", b)

    @classmethod
    def cube(cls, n: int, half_width: float) -> "Domain":
        return cls(tuple((-half_width, half_width) for _ in range(n)))

    @classmethod
    def parse(cls, text: str, n: int | None = None) -> "Domain":
        """Parse ``"x1=-2:2,x2=-1:1"``; axes not listed raise ``ValueError``."""
        found = {}
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            name, _, rng = part.partition("=")
            lo, sep, hi = rng.partition(":")
            name = name.strip()
            if not sep or name not in ("x1", "x2", "x3"):
                raise ValueError(f"bad domain component {part!r}; expected like x1=-2:2")
            found[int(name[1])] = (float(lo), float(hi))
        n = n or max(found, default=0)
        missing = [i for i in range(1, n + 1) if i not in found]
        if missing or any(i > n for i in found):
            raise ValueError(f"domain must give bounds for exactly x1..x{n}")
        return cls(tuple(found[i] for i in range(1, n + 1)))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def __str__(self):
        return ",".join(f"x{i}={lo:g}:{hi:g}" for i, (lo, hi) in enumerate(self.bounds, start=1))

    def axes(self, resolution: int) -> list:
        return [np.linspace(lo, hi, resolution) for lo, hi in self.bounds]

    def grid(self, resolution: int) -> np.ndarray:
        """Tensor grid as an array of shape ``(dim, resolution**dim)``."""
        mesh = np.meshgrid(*self.axes(resolution), indexing="ij")
        return np.stack([m.ravel() for m in mesh])

    def corners(self) -> np.ndarray:
        return np.array(list(itertools.product(*self.bounds))).T

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        ok = np.ones(p.shape[1:], dtype=bool)
        for i, (lo, hi) in enumerate(self.bounds):
            ok &= (p[i] >= lo) & (p[i] <= hi)
        return ok

    def scaled(self, factor: float) -> "Domain":
        return Domain(tuple((lo * factor, hi * factor) for lo, hi in self.bounds))

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return (lo[:, None] + (hi - lo)[:, None] * rng.random((self.dim, count)))

    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.bounds]))
