"""Grid paths, coalescing families, and the two path-level metrics.

A grid path is a piecewise-linear function sampled at a uniform time
step.  Forward paths run up in time from their starting time; backward
paths run down.  Outside the recorded window a path is extended by
freezing its endpoint value, and the starting-side freeze is exactly
the t-or-sigma clamp the path-space distance requires.

The ancestor distance between two marked points adds the time each
point travels along its path before the two trajectories merge, which
is a tree metric whenever the family coalesces permanently.  Meeting
detection on grids uses the family's documented tolerance: the meeting
time is the first grid time at which the paths agree within tolerance
and keep agreeing for the rest of the common window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metric import FiniteMetricSpace

__all__ = [
    "GridPath",
    "PathFamily",
    "first_meeting",
    "validate_tree_like",
    "ancestor_metric",
    "path_distance",
    "grid_path_from_lattice",
]

FORWARD = "forward"
BACKWARD = "backward"


@dataclass(frozen=True)
class GridPath:
    """Uniformly sampled path; values[k] sits at start_time -+ k*step."""

    start_time: float
    step: float
    values: tuple
    orientation: str = FORWARD

    def __post_init__(self) -> None:
        if self.orientation not in (FORWARD, BACKWARD):
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if len(self.values) < 1:
            raise ValueError("a path needs at least one value")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def direction(self) -> int:
        return 1 if self.orientation == FORWARD else -1

    @property
    def times(self) -> np.ndarray:
        return self.start_time + self.direction * self.step * np.arange(len(self))

    @property
    def end_time(self) -> float:
        return self.start_time + self.direction * self.step * (len(self) - 1)

    @property
    def start_value(self) -> float:
        return self.values[0]

    def value_at(self, t: float) -> float:
        """Piecewise-linear value, frozen beyond the recorded window."""
        k = (t - self.start_time) / self.step * self.direction
        if k <= 0:
            return self.values[0]
        if k >= len(self) - 1:
            return self.values[-1]
        lo = int(math.floor(k))
        frac = k - lo
        return self.values[lo] * (1 - frac) + self.values[lo + 1] * frac

    def index_of(self, t: float) -> int:
        """Grid index of time ``t``; the time must sit on the grid."""
        k = (t - self.start_time) / self.step * self.direction
        ki = round(k)
        if abs(k - ki) > 1e-6 or ki < 0 or ki >= len(self):
            raise ValueError(f"time {t} is not a grid time of this path")
        return ki


@dataclass
class PathFamily:
    """Paths of one orientation on a shared grid."""

    paths: list
    orientation: str
    step: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for p in self.paths:
            if p.orientation != self.orientation:
                raise ValueError("family orientation mismatch")
            if abs(p.step - self.step) > 1e-12 * max(1.0, self.step):
                raise ValueError("family step mismatch")
            offset = (p.start_time % self.step) / self.step
            if min(offset, 1 - offset) > 1e-6:
                raise ValueError("path start does not sit on the family grid")

    def __len__(self) -> int:
        return len(self.paths)


def _common_window(p1: GridPath, p2: GridPath):
    """Values of both paths on their shared grid times, evolution order.

    Returns (times, v1, v2) or None when the windows do not overlap.
    """
    d = p1.direction
    if d > 0:
        lo = max(p1.start_time, p2.start_time)
        hi = min(p1.end_time, p2.end_time)
        if hi < lo - 1e-12:
            return None
        k1 = round((lo - p1.start_time) / p1.step)
        k2 = round((lo - p2.start_time) / p2.step)
        count = round((hi - lo) / p1.step) + 1
    else:
        lo = min(p1.start_time, p2.start_time)
        hi = max(p1.end_time, p2.end_time)
        if lo < hi - 1e-12:
            return None
        k1 = round((p1.start_time - lo) / p1.step)
        k2 = round((p2.start_time - lo) / p2.step)
        count = round((lo - hi) / p1.step) + 1
    v1 = np.asarray(p1.values[k1 : k1 + count])
    v2 = np.asarray(p2.values[k2 : k2 + count])
    times = lo + d * p1.step * np.arange(count)
    return times, v1, v2


def first_meeting(p1: GridPath, p2: GridPath, cell: float = 0.0):
    """Meeting time: first grid time agreeing within ``cell`` for good.

    Returns None when the paths never merge inside the common window.
    """
    if p1.orientation != p2.orientation:
        raise ValueError("paths must share an orientation")
    window = _common_window(p1, p2)
    if window is None:
        return None
    times, v1, v2 = window
    apart = np.abs(v1 - v2) > cell
    if not apart.any():
        return float(times[0])
    last_apart = np.nonzero(apart)[0][-1]
    if last_apart == len(times) - 1:
        return None
    return float(times[last_apart + 1])


def validate_tree_like(family: PathFamily, cell: float = 0.0) -> list[str]:
    """Violations of the coalescing-tree conditions; empty means valid.

    Absorption is judged from the first within-tolerance contact, so a
    pair that touches and separates is reported even though a later
    permanent merge exists.
    """
    problems: list[str] = []
    starts = [(p.start_time, p.start_value) for p in family.paths]
    seen: dict = {}
    for i, s in enumerate(starts):
        if s in seen:
            problems.append(f"paths {seen[s]} and {i} share the start point {s}")
        else:
            seen[s] = i
    for i in range(len(family.paths)):
        for j in range(i + 1, len(family.paths)):
            window = _common_window(family.paths[i], family.paths[j])
            if window is None:
                problems.append(f"paths {i} and {j} have no common window")
                continue
            times, v1, v2 = window
            close = np.abs(v1 - v2) <= cell
            idx = np.nonzero(close)[0]
            if idx.size == 0:
                problems.append(
                    f"paths {i} and {j} never meet within the horizon"
                )
                continue
            first = idx[0]
            if not close[first:].all():
                problems.append(
                    f"paths {i} and {j} separate after meeting at "
                    f"t={times[first]:g}"
                )
    return problems


def _carrier(family: PathFamily, point, atol: float):
    y, s = point
    for p in family.paths:
        k = (s - p.start_time) / p.step * p.direction
        ki = round(k)
        if abs(k - ki) > 1e-6 or ki < 0 or ki >= len(p):
            continue
        if abs(p.values[ki] - y) <= atol:
            return p
    raise ValueError(f"point {point} does not lie on any family path")


def ancestor_metric(
    family: PathFamily, sample: list, atol: float = 1e-7
) -> FiniteMetricSpace:
    """Tree metric on marked points of a coalescing family.

    Each sample entry is a (value, time) pair lying on some path.  The
    distance adds the two travel times to the merge of the trajectories
    started at the points, which for a forward family is
    2*gamma - (s1 + s2) and for a backward family (s1 + s2) - 2*gamma.
    """
    carriers = [_carrier(family, pt, atol) for pt in sample]
    m = len(sample)
    sign = 1 if family.orientation == FORWARD else -1
    dist = np.zeros((m, m))
    for i in range(m):
        yi, si = sample[i]
        for j in range(i + 1, m):
            yj, sj = sample[j]
            if sign > 0:
                clip = max(si, sj)
                sub_i = _clip_from(carriers[i], clip)
                sub_j = _clip_from(carriers[j], clip)
            else:
                clip = min(si, sj)
                sub_i = _clip_from(carriers[i], clip)
                sub_j = _clip_from(carriers[j], clip)
            gamma = first_meeting(sub_i, sub_j, cell=0.0)
            if gamma is None:
                raise ValueError(
                    f"sample points {i} and {j} never merge within the horizon"
                )
            d = sign * (2 * gamma - (si + sj))
            dist[i, j] = dist[j, i] = d
    labels = [f"{y:.10g}@{s:.10g}" for y, s in sample]
    return FiniteMetricSpace(
        labels=labels,
        dist=dist,
        meta={
            "orientation": family.orientation,
            "gamma_tolerance": family.step,
        },
    )


def _clip_from(path: GridPath, t: float) -> GridPath:
    """The path restarted at grid time ``t`` (or at its own start)."""
    d = path.direction
    if (d > 0 and t <= path.start_time) or (d < 0 and t >= path.start_time):
        return path
    k = path.index_of(t)
    return GridPath(
        start_time=t,
        step=path.step,
        values=path.values[k:],
        orientation=path.orientation,
    )


def path_distance(p1: GridPath, p2: GridPath) -> float:
    """Path-space distance: starting-time gap or weighted sup gap.

    The supremum is evaluated on the union of both paths' grid times
    plus the origin, which contains the maximizer up to the paths' grid
    modulus of continuity.
    """
    if p1.orientation != p2.orientation:
        raise ValueError("paths must share an orientation")
    if p1.orientation == BACKWARD:
        return path_distance(_reflected(p1), _reflected(p2))
    s1, s2 = p1.start_time, p2.start_time
    # the time weight peaks at the origin, which the recorded windows
    # need not contain; with it, the frozen tails are dominated by
    # their nearest evaluated point and the sup ranges over all times
    grid = np.union1d(np.union1d(p1.times, p2.times), [0.0])
    vals1 = np.array([p1.value_at(t) for t in grid])
    vals2 = np.array([p2.value_at(t) for t in grid])
    spread = np.abs(np.tanh(vals1) - np.tanh(vals2)) / (1 + np.abs(grid))
    return float(max(abs(math.tanh(s1) - math.tanh(s2)), spread.max()))


def _reflected(path: GridPath) -> GridPath:
    return GridPath(
        start_time=-path.start_time,
        step=path.step,
        values=path.values,
        orientation=FORWARD,
    )


def grid_path_from_lattice(lattice_path) -> GridPath:
    """Unit-step grid path from a lattice trajectory."""
    orientation = FORWARD if lattice_path.orientation == "forward" else BACKWARD
    return GridPath(
        start_time=float(lattice_path.start.t),
        step=1.0,
        values=tuple(float(x) for x in lattice_path.positions),
        orientation=orientation,
    )
