"""Arrow fields on the two-dimensional space-time lattice.

Walker sites live on the even sublattice {(x, t): x + t even}; every
such site carries an independent fair +-1 arrow, and the forward step
moves a walker to (x + arrow, t + 1).  Walkers started anywhere follow
the same field, so two walkers that land on a common site stay together
forever: coalescence is implicit in the representation and never needs
an explicit merge rule.

The dual sublattice {(y, s): y + s odd} carries backward steps.  The
dual step from (y, s) consults the arrow of the even site (y, s - 1)
directly below and moves against it, to (y - arrow, s - 1).  With this
sign the dual edge runs parallel to the forward edge out of (y, s - 1)
and the two planar edge families never intersect; the opposite sign
would cross the forward edge of every site it consults.  The test suite
pins this convention by enumerating both candidates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .rng import arrow_value, arrow_values, derive_seed

__all__ = [
    "ParityError",
    "Site",
    "even_site",
    "dual_site",
    "LatticeEnvironment",
    "ExplicitEnvironment",
    "arrow",
    "step_forward",
    "step_dual",
    "LatticePath",
    "forward_path",
    "dual_path",
    "SliceEvolution",
    "evolve_slice",
    "envelope_walk",
    "count_edge_crossings",
    "derive_seed",
]

EVEN = "even"
DUAL = "dual"


class ParityError(ValueError):
    """A site was used with the wrong sublattice parity."""


@dataclass(frozen=True)
class Site:
    """Lattice site with its sublattice membership as an explicit tag."""

    x: int
    t: int
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in (EVEN, DUAL):
            raise ParityError(f"unknown site kind {self.kind!r}")
        expected = EVEN if (self.x + self.t) % 2 == 0 else DUAL
        if self.kind != expected:
            raise ParityError(
                f"site ({self.x}, {self.t}) lies on the {expected} sublattice, "
                f"not {self.kind}"
            )

    @property
    def coords(self) -> tuple[int, int]:
        return (self.x, self.t)


def even_site(x: int, t: int) -> Site:
    return Site(x, t, EVEN)


def dual_site(x: int, t: int) -> Site:
    return Site(x, t, DUAL)


@dataclass(frozen=True)
class LatticeEnvironment:
    """Lazily evaluated i.i.d. arrow field keyed by a 64-bit seed."""

    seed: int

    def arrow_at(self, x: int, t: int) -> int:
        if (x + t) % 2 != 0:
            raise ParityError(f"({x}, {t}) is not a walker site")
        return arrow_value(self.seed, x, t)

    def arrows(self, xs, ts) -> np.ndarray:
        return arrow_values(self.seed, xs, ts)


@dataclass(frozen=True)
class ExplicitEnvironment:
    """Arrow field backed by a literal table, for enumeration and tests.

    With ``strict=True`` a lookup outside the table raises, which the
    enumeration tests use to certify which sites an operation consults.
    """

    table: dict
    default: int = 0
    strict: bool = True

    def arrow_at(self, x: int, t: int) -> int:
        if (x + t) % 2 != 0:
            raise ParityError(f"({x}, {t}) is not a walker site")
        try:
            return self.table[(x, t)]
        except KeyError:
            if self.strict:
                raise
            return self.default

    def arrows(self, xs, ts) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(xs, dtype=np.int64))
        ts = np.broadcast_to(np.asarray(ts, dtype=np.int64), xs.shape)
        out = np.empty(xs.shape, dtype=np.int8)
        flat_x = xs.ravel()
        flat_t = ts.ravel()
        flat_o = out.ravel()
        for i in range(flat_x.size):
            flat_o[i] = self.arrow_at(int(flat_x[i]), int(flat_t[i]))
        return out


def arrow(env, site: Site) -> int:
    """Arrow bit of a walker site."""
    if site.kind != EVEN:
        raise ParityError("arrows live on the walker sublattice")
    return env.arrow_at(site.x, site.t)


def step_forward(env, site: Site) -> Site:
    """One walker step: (x, t) -> (x + arrow, t + 1)."""
    b = arrow(env, site)
    return even_site(site.x + b, site.t + 1)


def step_dual(env, site: Site) -> Site:
    """One dual step: (y, s) -> (y - arrow(y, s-1), s - 1).

    Moving against the arrow of the site below keeps dual edges parallel
    to forward edges and the two edge families non-crossing.
    """
    if site.kind != DUAL:
        raise ParityError("dual steps start from the dual sublattice")
    b = env.arrow_at(site.x, site.t - 1)
    return dual_site(site.x - b, site.t - 1)


@dataclass(frozen=True)
class LatticePath:
    """Positions of a single walker at consecutive integer times.

    ``positions[k]`` is the coordinate at time ``start.t + k`` for a
    forward path and ``start.t - k`` for a dual path.
    """

    start: Site
    orientation: str
    positions: tuple[int, ...]

    def site_at(self, k: int) -> Site:
        if self.orientation == "forward":
            return even_site(self.positions[k], self.start.t + k)
        return dual_site(self.positions[k], self.start.t - k)

    def __len__(self) -> int:
        return len(self.positions)


def forward_path(env, site: Site, horizon: int) -> LatticePath:
    """Walker trajectory for ``horizon`` steps."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if site.kind != EVEN:
        raise ParityError("forward paths start on the walker sublattice")
    xs = [site.x]
    x, t = site.x, site.t
    for _ in range(horizon):
        x += env.arrow_at(x, t)
        t += 1
        xs.append(x)
    return LatticePath(site, "forward", tuple(xs))


def dual_path(env, site: Site, horizon: int) -> LatticePath:
    """Dual trajectory for ``horizon`` backward steps."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if site.kind != DUAL:
        raise ParityError("dual paths start on the dual sublattice")
    ys = [site.x]
    y, s = site.x, site.t
    for _ in range(horizon):
        y -= env.arrow_at(y, s - 1)
        s -= 1
        ys.append(y)
    return LatticePath(site, "dual", tuple(ys))


@dataclass(frozen=True)
class SliceEvolution:
    """Occupancy after evolving a time slice, plus the merge record."""

    time: int
    positions: np.ndarray
    ancestry: dict

    @property
    def occupied_count(self) -> int:
        return int(self.positions.size)


def evolve_slice(env, sites: Sequence[Site], steps: int) -> SliceEvolution:
    """Evolve walkers sitting at a common time for ``steps`` steps.

    Distinct positions are advanced once per step; walkers that land on
    a common site are merged, and ``ancestry`` maps every input site to
    the representative position its group occupies at the final time.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    sites = list(sites)
    if not sites:
        raise ValueError("need at least one walker")
    t0 = sites[0].t
    for s in sites:
        if s.kind != EVEN:
            raise ParityError("slice evolution acts on walker sites")
        if s.t != t0:
            raise ValueError("all walkers must share one time slice")
    inputs = np.array(sorted({s.x for s in sites}), dtype=np.int64)
    positions, group = _evolve_positions(env, inputs, t0, steps)
    lookup = {int(x): i for i, x in enumerate(inputs)}
    ancestry = {
        s.coords: int(positions[group[lookup[s.x]]]) for s in sites
    }
    return SliceEvolution(t0 + steps, positions, ancestry)


def _evolve_positions(env, xs: np.ndarray, t0: int, steps: int):
    """Advance distinct sorted positions; returns (final, input-to-group)."""
    positions = xs
    group = np.arange(xs.size)
    t = t0
    for _ in range(steps):
        moved = positions + env.arrows(positions, t).astype(np.int64)
        positions, inverse = np.unique(moved, return_inverse=True)
        group = inverse[group]
        t += 1
    return positions, group


def envelope_walk(env, root: Site, cap: int):
    """Dual trajectories from the two neighbours of a walker site.

    Runs the dual walks from (x-1, t) and (x+1, t) until they coalesce
    or ``cap`` steps have been taken.  Returns (left, right, met) where
    the position arrays have one entry per level, level 0 first, and
    ``met`` says whether coalescence happened within the cap (in which
    case the shared final position is the last entry of both arrays).
    """
    if root.kind != EVEN:
        raise ParityError("envelopes are anchored at a walker site")
    if cap < 0:
        raise ValueError("cap must be nonnegative")
    left = [root.x - 1]
    right = [root.x + 1]
    y_l, y_r = root.x - 1, root.x + 1
    s = root.t
    met = False
    for _ in range(cap):
        y_l -= env.arrow_at(y_l, s - 1)
        y_r -= env.arrow_at(y_r, s - 1)
        s -= 1
        left.append(y_l)
        right.append(y_r)
        if y_l == y_r:
            met = True
            break
    return np.array(left, dtype=np.int64), np.array(right, dtype=np.int64), met


def count_edge_crossings(env, x_range: tuple[int, int], t_range: tuple[int, int]) -> int:
    """Planar intersections between forward and dual edges in a window.

    A forward edge out of (x, t) spans times [t, t+1]; the only dual
    edges sharing that strip start at (y, t+1).  Writing both as linear
    segments over the strip, they intersect iff the differences at the
    two ends have opposite signs.  Endpoint contact is impossible by
    parity, so the product test is exact.
    """
    x_lo, x_hi = x_range
    t_lo, t_hi = t_range
    total = 0
    for t in range(t_lo, t_hi):
        xs = np.arange(x_lo, x_hi + 1, dtype=np.int64)
        xs = xs[(xs + t) % 2 == 0]
        ys = np.arange(x_lo - 1, x_hi + 2, dtype=np.int64)
        ys = ys[(ys + t + 1) % 2 == 1]
        if xs.size == 0 or ys.size == 0:
            continue
        a = env.arrows(xs, t).astype(np.int64)
        b = env.arrows(ys, t).astype(np.int64)
        # dual edge from (y, t+1) descends to (y - b, t); forward edge
        # from (x, t) ascends to (x + a, t + 1)
        d0 = xs[:, None] - (ys[None, :] - b[None, :])
        d1 = (xs[:, None] + a[:, None]) - ys[None, :]
        total += int(np.count_nonzero(d0 * d1 < 0))
    return total
