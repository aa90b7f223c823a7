"""Samplers for the limiting continuum objects.

Everything here lives on a uniform time grid of step delta.  Brownian
paths are simulated by Gaussian increments; contact between two paths
is declared either when their sampled difference changes sign or when
a Bernoulli indicator fires with the exact conditional probability
that the Brownian bridge between the two sampled differences touched
zero inside the step.  Sign checks alone systematically miss sub-step
touches and bias every conditioned quantity (the acceptance-rate
checks catch this at several sigma), while a spatial proximity
threshold biases the other way; the bridge indicator is unbiased and
parameter-free.

Merge times are always reported at the lower grid time of the
bracketing step.  The same convention is used by every sampler in
this module so their outputs are directly comparable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .paths import BACKWARD, FORWARD, GridPath, PathFamily, ancestor_metric
from .metric import FiniteMetricSpace

__all__ = [
    "HorizonError",
    "DensityError",
    "BoundaryPair",
    "GammaResult",
    "ConditionedPair",
    "Skeleton",
    "sample_boundary",
    "gamma_map",
    "gamma_n_map",
    "sample_conditioned_pair",
    "delta_raster",
    "backward_skeleton",
    "forward_skeleton",
    "skeleton_metric",
    "skeleton_to_json",
    "skeleton_from_json",
]

SKELETON_SCHEMA = "scheidegger-skeleton/1"

# tail recorded past the coalescence point, in time units
_TAIL = 0.25
# required backward paths per forward start
_DENSITY_FACTOR = 4


class HorizonError(RuntimeError):
    """Simulation horizon exhausted before the construction finished."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DensityError(RuntimeError):
    """Backward skeleton too sparse for the requested forward paths."""


def _bridge_touch_prob(d0: float, d1: float, dt: float) -> float:
    """P(the difference bridge hits 0 inside a step), same-sign ends.

    The difference of two independent standard Brownian motions has
    variance 2 per unit time, so P = exp(-2*d0*d1 / (2*dt)).
    """
    if d0 * d1 <= 0:
        return 1.0
    return math.exp(-d0 * d1 / dt)


def _touch_probs(d0: np.ndarray, d1: np.ndarray, dt: float) -> np.ndarray:
    prod = d0 * d1
    with np.errstate(invalid="ignore"):
        out = np.where(prod > 0, np.exp(-np.where(prod > 0, prod, 1.0) / dt), 1.0)
    return out


def _contacts(d0: np.ndarray, d1: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """Per-step contact indicators; NaN differences never make contact."""
    prod = d0 * d1
    crossed = prod <= 0
    with np.errstate(invalid="ignore"):
        fired = u < np.exp(-np.where(prod > 0, prod, np.inf) / dt)
    return np.where(np.isnan(prod), False, crossed | fired)


def _unit_steps(delta: float) -> int:
    m = round(1.0 / delta)
    if delta <= 0 or abs(m * delta - 1.0) > 1e-9:
        raise ValueError("the step must evenly divide the unit window")
    return m


@dataclass
class BoundaryPair:
    """The conditioned pair bounding the wedge, backward from time 0.

    upper(0) = lower(0) = 0, the gap is strictly positive on
    (meet_time, 0), and the two paths coincide at and beyond
    meet_time, which the conditioning places strictly below -1.
    """

    upper: GridPath
    lower: GridPath
    meet_time: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.upper.orientation != BACKWARD or self.lower.orientation != BACKWARD:
            raise ValueError("boundary paths must be backward")
        if self.upper.start_time != 0.0 or self.lower.start_time != 0.0:
            raise ValueError("boundary paths must start at time 0")
        if not (self.meet_time < -1.0):
            raise ValueError("boundary pair must stay apart past time -1")

    @property
    def step(self) -> float:
        return self.upper.step

    def gap_at(self, t: float) -> float:
        return self.upper.value_at(t) - self.lower.value_at(t)

    def validate(self) -> list[str]:
        """Invariant violations; empty when the pair is well formed."""
        problems: list[str] = []
        hi = np.asarray(self.upper.values)
        lo = np.asarray(self.lower.values)
        if len(hi) != len(lo):
            return ["boundary paths have different lengths"]
        merge = round(-self.meet_time / self.step)
        if hi[0] != 0.0 or lo[0] != 0.0:
            problems.append("paths do not start at 0")
        gap = hi - lo
        if (gap < 0).any():
            problems.append("upper dips below lower")
        if merge < len(gap) and (gap[merge:] != 0).any():
            problems.append("paths differ beyond the meeting time")
        if (gap[1:merge] <= 0).any():
            problems.append("gap not strictly positive before the meeting")
        return problems


def sample_boundary(
    seed: int,
    delta: float = 1e-3,
    horizon: float = 8.0,
    max_extensions: int = 40,
) -> BoundaryPair:
    """Sample the conditioned boundary pair.

    Two independent Brownian motions are run until their difference
    first keeps one sign, without a bridge touch, across a full unit
    window of grid steps; the window start becomes time 0 after
    recentering to the mean of the two values there, and the next
    contact beyond the window is the meeting.  The merged tail is
    recorded for a further fixed stretch.

    The meeting waits on a heavy-tailed excursion, so a horizon cap is
    unavoidable; callers drawing many samples should catch
    HorizonError and move to the next seed (this conditions on
    |meet_time| below the cap, which downstream truncation makes
    harmless).
    """
    m = _unit_steps(delta)
    rng = np.random.default_rng(seed)

    block = max(round(horizon / delta), 4 * m)
    b1 = np.zeros(1)
    b2 = np.zeros(1)
    clean = np.zeros(0, dtype=bool)

    def extend() -> None:
        nonlocal b1, b2, clean
        inc = rng.normal(0.0, math.sqrt(delta), size=(2, block))
        u = rng.uniform(size=block)
        n1 = np.concatenate([b1, b1[-1] + np.cumsum(inc[0])])
        n2 = np.concatenate([b2, b2[-1] + np.cumsum(inc[1])])
        d = n1 - n2
        lo = len(b1) - 1
        ok = ~_contacts(d[lo:-1], d[lo + 1 :], u, delta)
        b1, b2 = n1, n2
        clean = np.concatenate([clean, ok])

    extend()
    for _ in range(max_extensions):
        # window at sample a is clean iff steps a .. a+m-1 are all
        # contact-free
        bad = np.concatenate([[0], np.cumsum(~clean)])
        n_steps = len(clean)
        starts = np.arange(n_steps - m + 1)
        free = bad[starts + m] - bad[starts] == 0
        hits = np.nonzero(free)[0]
        if hits.size:
            a = int(hits[0])
            later = np.nonzero(~clean[a + m :])[0]
            if later.size:
                i_star = a + m + int(later[0])
                tail_steps = round(_TAIL / delta)
                end = i_star + 1 + tail_steps
                if end < len(b1):
                    x0 = 0.5 * (b1[a] + b2[a])
                    v1 = b1[a : end + 1] - x0
                    v2 = b2[a : end + 1] - x0
                    hi = np.maximum(v1, v2)
                    lo_ = np.minimum(v1, v2)
                    hi[0] = lo_[0] = 0.0
                    merge = i_star + 1 - a
                    tail_vals = v1[merge:]
                    hi[merge:] = tail_vals
                    lo_[merge:] = tail_vals
                    return BoundaryPair(
                        upper=GridPath(0.0, delta, tuple(hi), BACKWARD),
                        lower=GridPath(0.0, delta, tuple(lo_), BACKWARD),
                        meet_time=-merge * delta,
                        meta={"seed": seed, "window_sample": a},
                    )
        extend()
    raise HorizonError(
        "no conditioned window with subsequent meeting found",
        diagnostics={
            "seed": seed,
            "delta": delta,
            "samples": len(b1),
            "extensions": max_extensions,
        },
    )


@dataclass
class GammaResult:
    """Ordered, recentered pair produced by the window maps.

    When the map does not apply the input paths are passed through
    unchanged with applied=False; pivot_time is still reported if a
    pivot was found but the subsequent meeting lies beyond the
    recorded horizon, so ensembles can censor consistently.
    """

    upper: GridPath
    lower: GridPath
    applied: bool
    pivot_time: float | None = None
    merge_time: float | None = None

    def __iter__(self):
        yield self.upper
        yield self.lower


def _window_scan(f1: GridPath, f2: GridPath, level: float, rng):
    """Shared scan for the window maps.

    Finds the largest grid time where the pair pivots (level > 0: the
    sampled |f1-f2| crosses the level; level 0: a contact step) with a
    contact-free unit window hanging below, then the first contact
    below that window.  Returns (anchor index, merge step index or
    None) or None when no pivot exists.  The anchor is the sample the
    output is rebased to: the crossing sample for level > 0, the
    window's first sample for level 0, matching the boundary sampler.
    """
    if f1.orientation != BACKWARD or f2.orientation != BACKWARD:
        raise ValueError("window maps take backward paths")
    if f1.start_time != f2.start_time or abs(f1.step - f2.step) > 1e-15:
        raise ValueError("paths must share their grid")
    delta = f1.step
    m = _unit_steps(delta)
    n_steps = min(len(f1), len(f2)) - 1
    if n_steps < m + 1:
        return None
    v1 = np.asarray(f1.values[: n_steps + 1])
    v2 = np.asarray(f2.values[: n_steps + 1])
    d = v1 - v2
    u = rng.uniform(size=n_steps)
    contact = _contacts(d[:-1], d[1:], u, delta)
    bad = np.concatenate([[0], np.cumsum(contact)])
    if level > 0:
        a = np.abs(d) - level
        pivots = a[:-1] * a[1:] <= 0
        # a contact step also passes through every level below its
        # endpoint samples, even when neither endpoint lands inside it
        pivots |= contact & (np.maximum(np.abs(d[:-1]), np.abs(d[1:])) >= level)
    else:
        pivots = contact
    for k in range(n_steps - m):
        if not pivots[k]:
            continue
        if level > 0:
            # the crossing instant sits inside step k, so the unit
            # window hangs below it; testing step k's own bridge would
            # reject almost every crossing of a small level
            anchor = k
            window_lo = k + 1
        else:
            anchor = k + 1
            window_lo = k + 1
        if window_lo + m > n_steps:
            continue
        if bad[window_lo + m] - bad[window_lo] != 0:
            continue
        later = np.nonzero(contact[window_lo + m :])[0]
        merge_step = window_lo + m + int(later[0]) if later.size else None
        return anchor, merge_step
    return None


def _assemble(f1, f2, anchor, i_star, y0, snap):
    v1 = np.asarray(f1.values[anchor:])
    v2 = np.asarray(f2.values[anchor:])
    hi = np.maximum(v1, v2) - y0
    lo = np.minimum(v1, v2) - y0
    merge = i_star + 1 - anchor
    if merge < len(hi):
        tail = v1[merge:] - y0
        hi[merge:] = tail
        lo[merge:] = tail
    if snap:
        hi[0] = lo[0] = 0.0
    return (
        GridPath(0.0, f1.step, tuple(hi), BACKWARD),
        GridPath(0.0, f1.step, tuple(lo), BACKWARD),
    )


def gamma_map(f1: GridPath, f2: GridPath, seed: int = 0) -> GammaResult:
    """The limit window map: pivot at a contact of f1 and f2.

    Recenters to the mean at the window start and snaps those values
    to zero, mirroring the boundary sampler, so the output satisfies
    the BoundaryPair invariants whenever the map applies.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC0)))
    found = _window_scan(f1, f2, 0.0, rng)
    if found is None:
        return GammaResult(f1, f2, applied=False)
    anchor, i_star = found
    pivot_time = -anchor * f1.step
    if i_star is None:
        return GammaResult(f1, f2, applied=False, pivot_time=pivot_time)
    y0 = 0.5 * (f1.values[anchor] + f2.values[anchor])
    hi, lo = _assemble(f1, f2, anchor, i_star, y0, snap=True)
    return GammaResult(
        hi,
        lo,
        applied=True,
        pivot_time=pivot_time,
        merge_time=-(i_star + 1 - anchor) * f1.step,
    )


def gamma_n_map(f1: GridPath, f2: GridPath, n: int, seed: int = 0) -> GammaResult:
    """The level-1/n window map.

    The pivot is the last time the sampled |f1-f2| crosses 1/n above
    a unit window free of contacts; recentering subtracts the smaller
    of the two pivot values, so the output pair starts near (1/n, 0).
    Pairs outside the map's domain come back unchanged with
    applied=False.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC0)))
    found = _window_scan(f1, f2, 1.0 / n, rng)
    if found is None:
        return GammaResult(f1, f2, applied=False)
    anchor, i_star = found
    pivot_time = -anchor * f1.step
    if i_star is None:
        return GammaResult(f1, f2, applied=False, pivot_time=pivot_time)
    y0 = min(f1.values[anchor], f2.values[anchor])
    hi, lo = _assemble(f1, f2, anchor, i_star, y0, snap=False)
    return GammaResult(
        hi,
        lo,
        applied=True,
        pivot_time=pivot_time,
        merge_time=-(i_star + 1 - anchor) * f1.step,
    )


@dataclass
class ConditionedPair:
    """Accepted output of the conditioned-pair rejection sampler.

    The coalescence waits on a heavy-tailed excursion (infinite mean),
    so runs are censored at max_length: a censored pair carries
    meet_time = -max_length and unmerged paths.
    """

    upper: GridPath
    lower: GridPath
    meet_time: float
    acceptance_rate: float
    attempts: int
    n: int
    censored: bool = False

    def __iter__(self):
        yield self.upper
        yield self.lower


def sample_conditioned_pair(
    seed: int,
    n: int,
    delta: float = 1e-3,
    max_attempts: int = 100_000,
    max_length: float = 64.0,
) -> ConditionedPair:
    """Backward pair from (1/n, 0) and (0, 0) given no contact on [-1, 0].

    Rejection sampling: the pair difference evolves as a Brownian
    difference; contact within the first unit window rejects the
    attempt, after that the walk runs until contact, which is the
    coalescence.  The exact per-step bridge indicator keeps the
    acceptance probability at its continuum value
    2*Phi(1/(sqrt(2)*n)) - 1.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    m = _unit_steps(delta)
    rng = np.random.default_rng(seed)
    sq = math.sqrt(delta)
    gap0 = 1.0 / n

    for attempt in range(1, max_attempts + 1):
        inc = rng.normal(0.0, sq, size=(2, m))
        u = rng.uniform(size=m)
        w1 = gap0 + np.concatenate([[0.0], np.cumsum(inc[0])])
        w2 = np.concatenate([[0.0], np.cumsum(inc[1])])
        d = w1 - w2
        if _contacts(d[:-1], d[1:], u, delta).any():
            continue
        # accepted: extend in unit blocks until contact or the censor
        i_star = None
        max_blocks = math.ceil(max_length) - 1
        for _ in range(max_blocks):
            inc = rng.normal(0.0, sq, size=(2, m))
            u = rng.uniform(size=m)
            w1 = np.concatenate([w1, w1[-1] + np.cumsum(inc[0])])
            w2 = np.concatenate([w2, w2[-1] + np.cumsum(inc[1])])
            d0 = w1[-m - 1 : -1] - w2[-m - 1 : -1]
            d1 = w1[-m:] - w2[-m:]
            hits = np.nonzero(_contacts(d0, d1, u, delta))[0]
            if hits.size:
                i_star = len(w1) - 1 - m + int(hits[0])
                break
        rate = 1.0 / attempt
        if i_star is None:
            return ConditionedPair(
                upper=GridPath(0.0, delta, tuple(w1), BACKWARD),
                lower=GridPath(0.0, delta, tuple(w2), BACKWARD),
                meet_time=-(len(w1) - 1) * delta,
                acceptance_rate=rate,
                attempts=attempt,
                n=n,
                censored=True,
            )
        tail_steps = round(_TAIL / delta)
        end = i_star + 1 + tail_steps
        while len(w1) <= end:
            inc1 = rng.normal(0.0, sq, size=m)
            w1 = np.concatenate([w1, w1[-1] + np.cumsum(inc1)])
        v1 = w1[: end + 1]
        v2 = np.concatenate([w2[: i_star + 1], v1[i_star + 1 :]])
        return ConditionedPair(
            upper=GridPath(0.0, delta, tuple(v1), BACKWARD),
            lower=GridPath(0.0, delta, tuple(v2), BACKWARD),
            meet_time=-(i_star + 1) * delta,
            acceptance_rate=rate,
            attempts=attempt,
            n=n,
        )
    raise HorizonError(
        "rejection sampler exhausted its attempt cap",
        diagnostics={"seed": seed, "n": n, "attempts": max_attempts},
    )


def delta_raster(boundary: BoundaryPair, count: int, min_gap: float = 1e-6):
    """First ``count`` points of the dyadic raster of the open wedge.

    Depth d = 1, 2, ... emits the points with time fraction i/2^d and
    gap fraction q/2^d whose coordinate pair was not emitted at a
    shallower depth; times snap to the grid, and degenerate or
    duplicate points are skipped.  The enumeration is deterministic,
    so a longer prefix extends a shorter one.
    """
    delta = boundary.step
    meet = boundary.meet_time
    k_meet = round(-meet / delta)
    out: list[tuple[float, float]] = []
    seen: set[tuple[int, float]] = set()
    depth = 0
    while len(out) < count:
        depth += 1
        emitted_before = len(out)
        # any wedge with one usable time gains points at every depth,
        # so a barren pass means no point will ever appear
        if depth > 24 or (depth > 3 and emitted_before == 0):
            raise HorizonError(
                "raster cannot fill the request",
                diagnostics={"requested": count, "emitted": len(out), "depth": depth},
            )
        scale = 1 << depth
        for i in range(1, scale):
            for q in range(1, scale):
                if i % 2 == 0 and q % 2 == 0:
                    continue
                k = round(k_meet * (i / scale))
                k = min(max(k, 1), k_meet - 1)
                t = -k * delta
                gap = boundary.gap_at(t)
                if gap <= min_gap:
                    continue
                key = (k, round(q / scale, 12))
                if key in seen:
                    continue
                seen.add(key)
                out.append((boundary.lower.value_at(t) + (q / scale) * gap, t))
                if len(out) == count:
                    return out
    return out


@dataclass
class Skeleton:
    """Coalescing path family inside the wedge plus its merge history."""

    paths: PathFamily
    boundary: BoundaryPair
    starts: list
    merges: list
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.paths)


def _target_rows(targets, t0: float, n_steps: int, delta: float) -> np.ndarray:
    """Values of every target on this path's grid; NaN where unborn."""
    rows = np.full((len(targets), n_steps + 1), np.nan)
    for d, g in enumerate(targets):
        off = round((g.start_time - t0) / delta)
        vals = np.asarray(g.values)
        lo = max(0, -off)
        hi = min(n_steps + 1, len(vals) - off)
        if hi > lo:
            rows[d, lo:hi] = vals[lo + off : hi + off]
    return rows


def backward_skeleton(
    boundary: BoundaryPair, k: int, seed: int, delta: float | None = None
) -> Skeleton:
    """Backward coalescing paths from the first k raster starts.

    Each path follows fresh Brownian increments until its first
    contact with the boundary or an earlier path, then copies its
    target forever, which makes merges exact and permanent.  Contact
    uses the sign-change-or-bridge-touch rule; when several targets
    fire in one step the one nearest at the step bottom wins, with
    ties resolved toward the upper boundary, then the lower, then the
    earliest path.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if delta is None:
        delta = boundary.step
    if abs(delta - boundary.step) > 1e-15:
        raise ValueError("skeleton step must match the boundary grid")
    starts = delta_raster(boundary, k)
    bottom = boundary.upper.end_time
    targets: list[GridPath] = [boundary.upper, boundary.lower]
    target_names: list = ["upper", "lower"]
    paths: list[GridPath] = []
    merges: list[dict] = []
    for i, (x0, t0) in enumerate(starts):
        rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
        n_steps = round((t0 - bottom) / delta)
        inc = rng.normal(0.0, math.sqrt(delta), size=n_steps)
        u = rng.uniform(size=(n_steps, len(targets)))
        free = x0 + np.concatenate([[0.0], np.cumsum(inc)])
        rows = _target_rows(targets, t0, n_steps, delta)
        diff = free[None, :] - rows
        fired = _contacts(diff[:, :-1], diff[:, 1:], u.T, delta)
        first = np.where(fired.any(axis=1), fired.argmax(axis=1), n_steps)
        j_min = int(first.min())
        if j_min >= n_steps:
            # the wedge pinches shut at the meeting, so contact is
            # guaranteed; this is a numerical backstop
            best = 0
            merge_j = n_steps
        else:
            cands = np.nonzero(first == j_min)[0]
            gaps = np.abs(diff[cands, j_min + 1])
            best = int(cands[int(np.argmin(gaps))])
            merge_j = j_min + 1
        values = free.copy()
        values[merge_j:] = rows[best, merge_j:]
        path = GridPath(t0, delta, tuple(values), BACKWARD)
        paths.append(path)
        merges.append(
            {"path": i, "target": target_names[best], "time": t0 - merge_j * delta}
        )
        targets.append(path)
        target_names.append(i)
    family = PathFamily(paths, BACKWARD, delta, meta={"seed": seed})
    return Skeleton(
        paths=family,
        boundary=boundary,
        starts=starts,
        merges=merges,
        meta={"seed": seed, "orientation": BACKWARD},
    )


def forward_skeleton(
    boundary: BoundaryPair,
    backward: Skeleton,
    k: int,
    seed: int = 0,
    delta: float | None = None,
) -> Skeleton:
    """Forward paths determined by the backward skeleton.

    At every grid time the path sits at the midpoint of the tightest
    pair of live backward paths straddling it, the discrete form of
    the dual-determination squeeze; a path that lands exactly on a
    backward path follows it for the step.  No randomness enters: the
    seed parameter is kept for interface parity with the samplers.
    Positions never cross a backward path, stay inside the wedge, and
    every path reaches the apex (0, 0), where the wedge closes.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if delta is None:
        delta = boundary.step
    if abs(delta - boundary.step) > 1e-15:
        raise ValueError("skeleton step must match the boundary grid")
    if len(backward.paths) < _DENSITY_FACTOR * k:
        raise DensityError(
            f"forward skeleton with {k} paths needs at least "
            f"{_DENSITY_FACTOR * k} backward paths, got {len(backward.paths)}"
        )
    duals = [boundary.upper, boundary.lower, *backward.paths.paths]
    # dual values indexed by global grid position K (time -K*delta)
    k_bot = round(-boundary.upper.end_time / delta)
    grid = np.full((len(duals), k_bot + 1), np.nan)
    for d, g in enumerate(duals):
        born = round(-g.start_time / delta)
        vals = np.asarray(g.values)
        grid[d, born : born + len(vals)] = vals

    starts = delta_raster(boundary, k)
    paths: list[GridPath] = []
    merges: list[dict] = []
    positions: list[np.ndarray] = []
    for i, (x0, t0) in enumerate(starts):
        k0 = round(-t0 / delta)
        values = np.empty(k0 + 1)
        values[0] = x0
        for j in range(k0):
            col_now = grid[:, k0 - j]
            col_next = grid[:, k0 - j - 1]
            live = ~np.isnan(col_now) & ~np.isnan(col_next)
            here = values[j]
            on = live & (col_now == here)
            if on.any():
                values[j + 1] = col_next[np.nonzero(on)[0][0]]
                continue
            below = live & (col_now < here)
            above = live & (col_now > here)
            if not below.any() or not above.any():
                raise DensityError(
                    "forward path lost its straddling pair; the backward "
                    "skeleton is too sparse"
                )
            values[j + 1] = 0.5 * (col_next[below].max() + col_next[above].min())
        merged_into = None
        merge_t = None
        for p_idx, other in enumerate(positions):
            off = round((starts[p_idx][1] - t0) / delta)
            a = max(0, off)
            mine = values[a:]
            theirs = other[a - off :]
            mlen = min(len(mine), len(theirs))
            eq = mine[:mlen] == theirs[:mlen]
            if eq.any():
                merged_into = p_idx
                merge_t = t0 + (a + int(np.argmax(eq))) * delta
                break
        merges.append(
            {
                "path": i,
                "target": merged_into if merged_into is not None else "apex",
                "time": merge_t if merge_t is not None else 0.0,
            }
        )
        positions.append(values)
        paths.append(GridPath(t0, delta, tuple(values), FORWARD))
    family = PathFamily(paths, FORWARD, delta, meta={"determined_by": "duals"})
    return Skeleton(
        paths=family,
        boundary=boundary,
        starts=starts,
        merges=merges,
        meta={"seed": seed, "orientation": FORWARD},
    )


def skeleton_metric(skeleton: Skeleton, m: int) -> FiniteMetricSpace:
    """Ancestor metric on the first m path start points."""
    if m < 1 or m > len(skeleton.paths):
        raise ValueError(f"need 1 <= m <= {len(skeleton.paths)} sample points")
    pts = [(p.start_value, p.start_time) for p in skeleton.paths.paths[:m]]
    space = ancestor_metric(skeleton.paths, pts)
    space.meta["orientation"] = skeleton.paths.orientation
    space.meta["meet_time"] = skeleton.boundary.meet_time
    return space


def skeleton_to_json(skeleton: Skeleton) -> str:
    def encode_path(p: GridPath) -> dict:
        return {
            "start_time": p.start_time,
            "step": p.step,
            "orientation": p.orientation,
            "values": list(p.values),
        }

    doc = {
        "schema": SKELETON_SCHEMA,
        "orientation": skeleton.paths.orientation,
        "boundary": {
            "upper": encode_path(skeleton.boundary.upper),
            "lower": encode_path(skeleton.boundary.lower),
            "meet_time": skeleton.boundary.meet_time,
        },
        "starts": [list(s) for s in skeleton.starts],
        "paths": [encode_path(p) for p in skeleton.paths.paths],
        "merges": skeleton.merges,
        "meta": skeleton.meta,
    }
    return json.dumps(doc)


def skeleton_from_json(text: str) -> Skeleton:
    doc = json.loads(text)
    if doc.get("schema") != SKELETON_SCHEMA:
        raise ValueError(f"unsupported skeleton schema {doc.get('schema')!r}")

    def decode_path(d: dict) -> GridPath:
        return GridPath(d["start_time"], d["step"], tuple(d["values"]), d["orientation"])

    boundary = BoundaryPair(
        upper=decode_path(doc["boundary"]["upper"]),
        lower=decode_path(doc["boundary"]["lower"]),
        meet_time=doc["boundary"]["meet_time"],
    )
    paths = [decode_path(d) for d in doc["paths"]]
    family = PathFamily(paths, doc["orientation"], boundary.step)
    return Skeleton(
        paths=family,
        boundary=boundary,
        starts=[tuple(s) for s in doc["starts"]],
        merges=doc["merges"],
        meta=doc.get("meta", {}),
    )
