"""Continuous piecewise-linear spatial profiles on a closed interval.

Profiles carry the spatial factors of the weights, the dispersal coefficient
and the fitness landscapes.  All operations (evaluation, integration,
extrema, min/max combination) are exact for piecewise-linear data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SpatialProfile",
    "constant_profile",
    "step_profile",
    "union_nodes",
]


@dataclass(frozen=True)
class SpatialProfile:
    """Continuous piecewise-linear function on [nodes[0], nodes[-1]].

    Evaluation outside the interval is an error; the interval endpoints are
    part of the data, not an implicit convention.
    """

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("profile needs at least two nodes")
        if values.shape != nodes.shape:
            raise ValueError("nodes and values must have equal length")
        if not np.all(np.diff(nodes) > 0):
            raise ValueError("nodes must be strictly increasing")
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(values))):
            raise ValueError("profile data must be finite")
        nodes.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    @property
    def interval(self) -> tuple[float, float]:
        return float(self.nodes[0]), float(self.nodes[-1])

    def _check_inside(self, x):
        lo, hi = self.interval
        x = np.asarray(x, dtype=float)
        if np.any(x < lo) or np.any(x > hi):
            raise ValueError(f"position outside profile interval [{lo}, {hi}]")
        return x

    def __call__(self, x):
        """Evaluate at a scalar or array of positions inside the interval."""
        xa = self._check_inside(x)
        out = np.interp(xa, self.nodes, self.values)
        if np.isscalar(x) or np.ndim(x) == 0:
            return float(out)
        return out

    def integral(self, lo: float | None = None, hi: float | None = None) -> float:
        """Exact integral over [lo, hi] (defaults to the full interval)."""
        a, b = self.interval
        lo = a if lo is None else float(lo)
        hi = b if hi is None else float(hi)
        if not (a <= lo <= hi <= b):
            raise ValueError("integration bounds outside profile interval")
        if lo == hi:
            return 0.0
        xs = self.nodes[(self.nodes > lo) & (self.nodes < hi)]
        xs = np.concatenate(([lo], xs, [hi]))
        vs = np.interp(xs, self.nodes, self.values)
        return float(np.trapezoid(vs, xs))

    def min_max(self, lo: float | None = None, hi: float | None = None) -> tuple[float, float]:
        """Exact (min, max) over [lo, hi]; extrema of a pw-linear function sit at nodes."""
        a, b = self.interval
        lo = a if lo is None else float(lo)
        hi = b if hi is None else float(hi)
        if not (a <= lo <= hi <= b):
            raise ValueError("bounds outside profile interval")
        inner = self.values[(self.nodes >= lo) & (self.nodes <= hi)]
        ends = np.array([np.interp(lo, self.nodes, self.values),
                         np.interp(hi, self.nodes, self.values)])
        allv = np.concatenate((inner, ends))
        return float(allv.min()), float(allv.max())

    def resample(self, nodes) -> "SpatialProfile":
        """Profile with the given node set (values by linear interpolation)."""
        nodes = np.asarray(nodes, dtype=float)
        return SpatialProfile(nodes, np.interp(nodes, self.nodes, self.values))

    def clipped(self, lo: float | None = None, hi: float | None = None) -> "SpatialProfile":
        """Pointwise clip of the values; node set refined at clip crossings."""
        nodes = _with_level_crossings(self.nodes, self.values, lo, hi)
        vals = np.interp(nodes, self.nodes, self.values)
        if lo is not None:
            vals = np.maximum(vals, lo)
        if hi is not None:
            vals = np.minimum(vals, hi)
        return SpatialProfile(nodes, vals)

    def scaled(self, factor: float) -> "SpatialProfile":
        return SpatialProfile(self.nodes, self.values * float(factor))


def constant_profile(interval, value: float) -> SpatialProfile:
    lo, hi = float(interval[0]), float(interval[1])
    return SpatialProfile(np.array([lo, hi]), np.array([float(value)] * 2))


def step_profile(interval, patch, inside: float = 1.0, outside: float = -1.0,
                 ramp: float = 0.015625) -> SpatialProfile:
    """Two-level profile: `inside` on the patch, `outside` elsewhere.

    Transitions are linear ramps of width ``ramp`` centered on the patch
    endpoints, so the profile stays continuous while the integral equals the
    sharp-step value exactly.
    """
    lo, hi = float(interval[0]), float(interval[1])
    a, b = float(patch[0]), float(patch[1])
    r = float(ramp) / 2.0
    if not (lo < a - r and a + r < b - r and b + r < hi):
        raise ValueError("patch with ramps must fit strictly inside the interval")
    nodes = np.array([lo, a - r, a + r, b - r, b + r, hi])
    values = np.array([outside, outside, inside, inside, outside, outside], dtype=float)
    return SpatialProfile(nodes, values)


def union_nodes(profiles) -> np.ndarray:
    """Sorted union of the node sets of several profiles on a common interval."""
    profiles = list(profiles)
    iv = profiles[0].interval
    for p in profiles[1:]:
        if p.interval != iv:
            raise ValueError("profiles do not share an interval")
    return np.unique(np.concatenate([p.nodes for p in profiles]))


def _with_level_crossings(nodes, values, lo, hi):
    """Node set refined with the positions where the data crosses lo or hi."""
    extra = []
    for level in (lo, hi):
        if level is None:
            continue
        v = values - level
        for j in range(len(nodes) - 1):
            if v[j] * v[j + 1] < 0.0:
                t = v[j] / (v[j] - v[j + 1])
                extra.append(nodes[j] + t * (nodes[j + 1] - nodes[j]))
    if not extra:
        return nodes
    return np.unique(np.concatenate((nodes, np.asarray(extra))))


def combine_pointwise(profiles, op) -> SpatialProfile:
    """Pointwise min/max of several profiles, exact including interior crossings.

    ``op`` is ``np.minimum`` or ``np.maximum`` (applied pairwise).
    """
    profiles = list(profiles)
    nodes = union_nodes(profiles)
    # refine with pairwise crossing points so the result is exactly pw-linear
    extra = [nodes]
    for i in range(len(profiles)):
        vi = np.interp(nodes, profiles[i].nodes, profiles[i].values)
        for j in range(i + 1, len(profiles)):
            vj = np.interp(nodes, profiles[j].nodes, profiles[j].values)
            d = vi - vj
            for k in range(len(nodes) - 1):
                if d[k] * d[k + 1] < 0.0:
                    t = d[k] / (d[k] - d[k + 1])
                    extra.append(np.array([nodes[k] + t * (nodes[k + 1] - nodes[k])]))
    refined = np.unique(np.concatenate(extra))
    acc = np.interp(refined, profiles[0].nodes, profiles[0].values)
    for p in profiles[1:]:
        acc = op(acc, np.interp(refined, p.nodes, p.values))
    return SpatialProfile(refined, acc)
