"""Statistics that tie the lattice model to its continuum limit.

The estimators here come in pairs: a Monte-Carlo routine and an exact
or independent reference (dynamic program, closed form, or factorized
identity) that the test suite compares against.  Every routine is a
pure function of its seed, parallelizes over derived per-replicate
seeds, and reduces in replicate order so results do not depend on the
worker count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .cluster import (
    RootedTree,
    extract_cluster,
    extract_dual_tree,
    scale_tree,
    tree_diameter,
)
from .lattice import LatticeEnvironment, envelope_walk, even_site, evolve_slice
from .metric import FiniteMetricSpace, gh_bounds
from .paths import BACKWARD, PathFamily, ancestor_metric
from .rng import derive_seed
from .skeleton import (
    HorizonError,
    backward_skeleton,
    sample_boundary,
)

__all__ = [
    "EtaSample",
    "EtaEstimate",
    "DepthTailRow",
    "KappaSample",
    "KappaEstimate",
    "KappaIdentityReport",
    "HortonStats",
    "SummaryReport",
    "ConvergeReport",
    "eta_estimate",
    "depth_tail_oracle",
    "depth_tail_mc",
    "kappa_estimate",
    "kappa_identity_check",
    "horton",
    "uniform_binary_tree",
    "conditioned_dual_metric",
    "continuum_dual_metric",
    "summary_compare",
    "converge",
    "FUNCTIONALS",
]

# time-depth factor at which conditioned samples are truncated; shared
# by the discrete and continuum corpus builders so their censoring
# matches
_MEET_CAP = 24.0


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    if len(values) < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(len(values)))


def _chunk_ranges(total: int, workers: int) -> list[tuple[int, int]]:
    """Contiguous index ranges covering [0, total)."""
    parts = max(1, min(workers, total))
    base, extra = divmod(total, parts)
    ranges = []
    lo = 0
    for p in range(parts):
        hi = lo + base + (1 if p < extra else 0)
        ranges.append((lo, hi))
        lo = hi
    return ranges


def _pool_map(fn, jobs: list, workers: int) -> list:
    """Ordered map over job tuples; forks only when it can pay off.

    Replicate indices are seeded absolutely, so any sharding reproduces
    the serial run value for value; the ordered reduction keeps output
    bytes identical for every worker count.
    """
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


@dataclass(frozen=True)
class EtaSample:
    """One replicate of the scaled path-count statistic."""

    n: int
    count: int
    window_pad: float

    def __post_init__(self) -> None:
        if self.count < 0:
            raise ValueError("count must be nonnegative")
        if self.window_pad < 1.0:
            raise ValueError("window pad below the supported minimum 1")


@dataclass
class EtaEstimate:
    n: int
    replicates: int
    pad: float
    mean: float
    se: float
    samples: list[EtaSample]


def _eta_chunk(job) -> np.ndarray:
    master_seed, n, pad, lo_r, hi_r = job
    root = math.sqrt(n)
    lo = math.floor(-pad * root)
    hi = math.ceil(root + pad * root)
    if lo % 2 != n % 2:
        lo -= 1
    xs = np.arange(lo, hi + 1, 2, dtype=np.int64)
    sites = [even_site(int(x), -n) for x in xs]
    counts = np.empty(hi_r - lo_r, dtype=np.int64)
    for i, r in enumerate(range(lo_r, hi_r)):
        env = LatticeEnvironment(derive_seed(master_seed, r))
        ev = evolve_slice(env, sites, n)
        counts[i] = int(((ev.positions >= 0) & (ev.positions < root)).sum())
    return counts


def eta_estimate(
    master_seed: int,
    n: int,
    replicates: int,
    pad: float = 6.0,
    site_cap: int = 2_000_000,
    workers: int = 1,
) -> EtaEstimate:
    """Mean count of distinct walkers crossing [0, sqrt(n)) at time 0.

    All parity-feasible sites at time -n inside [-pad*sqrt(n),
    sqrt(n) + pad*sqrt(n)] are evolved to time 0 and the distinct
    occupied integer positions in [0, sqrt(n)) are counted.  A walker
    starting outside the window reaches the counting strip only by
    covering pad*sqrt(n) in n steps, probability below
    exp(-pad^2 / 2) by the sub-Gaussian bound, under 1e-8 at the
    default pad.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if replicates < 1:
        raise ValueError("need at least one replicate")
    if pad < 1.0:
        raise ValueError("window pad below the supported minimum 1")
    root = math.sqrt(n)
    lo = math.floor(-pad * root)
    hi = math.ceil(root + pad * root)
    if lo % 2 != n % 2:
        lo -= 1
    n_sites = (hi - lo) // 2 + 1
    if n_sites > site_cap:
        raise MemoryError(
            f"window holds {n_sites} sites, above the cap {site_cap}"
        )
    jobs = [
        (master_seed, n, pad, lo, hi)
        for lo, hi in _chunk_ranges(replicates, workers)
    ]
    counts = np.concatenate(_pool_map(_eta_chunk, jobs, workers))
    samples = [EtaSample(n=n, count=int(c), window_pad=pad) for c in counts]
    mean, se = _mean_se(counts.astype(float))
    return EtaEstimate(
        n=n, replicates=replicates, pad=pad, mean=mean, se=se, samples=samples
    )


def depth_tail_oracle(n: int) -> float:
    """Exact P(L(0,0) >= n) by dynamic programming.

    The half-gap between the two envelope duals is a lazy walk with
    steps -1/0/+1 at probabilities 1/4, 1/2, 1/4, absorbed at 0 and
    started at 1; the cluster survives n levels exactly when the walk
    is unabsorbed after n steps.  All masses are dyadic rationals, so
    float64 is exact for small n and loses only rounding beyond that.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 1.0
    p = np.zeros(n + 2)
    p[1] = 1.0
    for _ in range(n):
        shifted_up = np.concatenate([[0.0], p[:-1]])
        shifted_down = np.concatenate([p[1:], [0.0]])
        new = 0.25 * shifted_up + 0.5 * p + 0.25 * shifted_down
        new[0] = 0.0
        p = new
    return float(p.sum())


@dataclass
class DepthTailRow:
    n: int
    estimate: float
    se: float
    oracle: float

    @property
    def z(self) -> float:
        if self.se == 0.0:
            return 0.0 if self.estimate == self.oracle else math.inf
        return (self.estimate - self.oracle) / self.se


def _depth_chunk(job) -> np.ndarray:
    master_seed, cap, lo_r, hi_r = job
    depths = np.empty(hi_r - lo_r, dtype=np.int64)
    for i, r in enumerate(range(lo_r, hi_r)):
        env = LatticeEnvironment(derive_seed(master_seed, r))
        tree = extract_cluster(env, even_site(0, 0), max_depth=cap)
        depths[i] = tree.depth
    return depths


def depth_tail_mc(
    master_seed: int, n_list: list[int], replicates: int, workers: int = 1
) -> list[DepthTailRow]:
    """Monte-Carlo depth tails with the DP oracle column attached."""
    if replicates < 1:
        raise ValueError("need at least one replicate")
    n_list = sorted(set(int(n) for n in n_list))
    if not n_list or n_list[0] < 1:
        raise ValueError("tail levels must be positive")
    cap = n_list[-1]
    jobs = [
        (master_seed, cap, lo, hi)
        for lo, hi in _chunk_ranges(replicates, workers)
    ]
    depths = np.concatenate(_pool_map(_depth_chunk, jobs, workers))
    rows = []
    for n in n_list:
        ind = (depths >= n).astype(float)
        mean, se = _mean_se(ind)
        rows.append(DepthTailRow(n=n, estimate=mean, se=se, oracle=depth_tail_oracle(n)))
    return rows


@dataclass(frozen=True)
class Functional:
    """A named bounded functional of a (tree, dual tree) pair."""

    name: str
    fn: object
    sup: float
    needs_trees: bool = True


FUNCTIONALS = {
    f.name: f
    for f in (
        Functional("one", lambda tree, dual: 1.0, sup=1.0, needs_trees=False),
        Functional(
            "tanh-diam-forward",
            lambda tree, dual: math.tanh(float(tree_diameter(tree))),
            sup=1.0,
        ),
        Functional(
            "tanh-diam-dual",
            lambda tree, dual: math.tanh(float(tree_diameter(dual))),
            sup=1.0,
        ),
    )
}


@dataclass(frozen=True)
class KappaSample:
    n: int
    value: float
    functional_id: str
    count: int = 0

    def __post_init__(self) -> None:
        sup = FUNCTIONALS[self.functional_id].sup
        if abs(self.value) > self.count * sup + 1e-12:
            raise ValueError("value exceeds the count * sup bound")


@dataclass
class KappaEstimate:
    n: int
    replicates: int
    functional_id: str
    mean: float
    se: float
    samples: list[KappaSample]


def _eligible_sites(n: int) -> list[int]:
    """Parity-feasible lattice positions in [0, sqrt(n)) at time 0."""
    return [k for k in range(0, math.ceil(math.sqrt(n))) if k % 2 == 0 and k < math.sqrt(n)]


def _site_trees(env, k: int, n: int):
    """Scaled (tree, dual tree) at site k, truncated at depth n."""
    root = even_site(k, 0)
    tree = extract_cluster(env, root, max_depth=n)
    if tree.depth < n:
        return None
    dual = extract_dual_tree(env, root, max_depth=n)
    return scale_tree(tree, n), scale_tree(dual, n)


def _kappa_chunk(job) -> tuple[np.ndarray, np.ndarray]:
    # the registry holds lambdas, so workers receive the id and look the
    # functional up in their own copy of the module
    master_seed, n, functional_id, lo_r, hi_r = job
    functional = FUNCTIONALS[functional_id]
    sites = _eligible_sites(n)
    values = np.empty(hi_r - lo_r)
    counts = np.empty(hi_r - lo_r, dtype=np.int64)
    for i, r in enumerate(range(lo_r, hi_r)):
        env = LatticeEnvironment(derive_seed(master_seed, r))
        total = 0.0
        count = 0
        for k in sites:
            if functional.needs_trees:
                pair = _site_trees(env, k, n)
                if pair is None:
                    continue
                count += 1
                total += functional.fn(*pair)
            else:
                tree = extract_cluster(env, even_site(k, 0), max_depth=n)
                if tree.depth < n:
                    continue
                count += 1
                total += functional.fn(None, None)
        values[i] = total
        counts[i] = count
    return values, counts


def kappa_estimate(
    master_seed: int,
    n: int,
    replicates: int,
    functional_id: str,
    workers: int = 1,
) -> KappaEstimate:
    """Mean of the summed functional over qualifying sites.

    Per replicate the functional is applied at every parity-feasible
    site in [0, sqrt(n)) whose cluster survives n levels, to the pair
    (scaled cluster tree, scaled dual tree), both truncated at depth n
    so the summand stays a fixed bounded function of the conditioned
    window.
    """
    if functional_id not in FUNCTIONALS:
        raise KeyError(
            f"unknown functional {functional_id!r}; "
            f"registered: {sorted(FUNCTIONALS)}"
        )
    if replicates < 1:
        raise ValueError("need at least one replicate")
    jobs = [
        (master_seed, n, functional_id, lo, hi)
        for lo, hi in _chunk_ranges(replicates, workers)
    ]
    parts = _pool_map(_kappa_chunk, jobs, workers)
    values = np.concatenate([p[0] for p in parts])
    counts = np.concatenate([p[1] for p in parts])
    samples = [
        KappaSample(
            n=n, value=float(v), functional_id=functional_id, count=int(c)
        )
        for v, c in zip(values, counts)
    ]
    mean, se = _mean_se(values)
    return KappaEstimate(
        n=n,
        replicates=replicates,
        functional_id=functional_id,
        mean=mean,
        se=se,
        samples=samples,
    )


@dataclass
class KappaIdentityReport:
    """Direct estimate vs the translation-invariance factorization.

    E[sum over qualifying sites of f] equals (expected qualifying
    count) * E[f | the site qualifies]; the three estimates come from
    independent seed streams.
    """

    n: int
    functional_id: str
    direct: float
    direct_se: float
    count_mean: float
    count_se: float
    conditional_mean: float
    conditional_se: float

    @property
    def factorized(self) -> float:
        return self.count_mean * self.conditional_mean

    @property
    def z(self) -> float:
        var = (
            self.direct_se**2
            + (self.conditional_mean * self.count_se) ** 2
            + (self.count_mean * self.conditional_se) ** 2
        )
        if var == 0.0:
            return 0.0 if self.direct == self.factorized else math.inf
        return (self.direct - self.factorized) / math.sqrt(var)


def _qualify_count_chunk(job) -> np.ndarray:
    count_seed, n, lo_r, hi_r = job
    sites = _eligible_sites(n)
    counts = np.empty(hi_r - lo_r)
    for i, r in enumerate(range(lo_r, hi_r)):
        env = LatticeEnvironment(derive_seed(count_seed, r))
        c = 0
        for k in sites:
            tree = extract_cluster(env, even_site(k, 0), max_depth=n)
            if tree.depth >= n:
                c += 1
        counts[i] = c
    return counts


def _kappa_cond_chunk(job) -> list[float]:
    cond_seed, n, functional_id, lo_a, hi_a = job
    functional = FUNCTIONALS[functional_id]
    out = []
    for a in range(lo_a, hi_a):
        env = LatticeEnvironment(derive_seed(cond_seed, a))
        if functional.needs_trees:
            pair = _site_trees(env, 0, n)
            if pair is not None:
                out.append(functional.fn(*pair))
        else:
            tree = extract_cluster(env, even_site(0, 0), max_depth=n)
            if tree.depth >= n:
                out.append(functional.fn(None, None))
    return out


def kappa_identity_check(
    master_seed: int,
    n: int,
    replicates: int,
    functional_id: str,
    conditioned_samples: int | None = None,
    workers: int = 1,
) -> KappaIdentityReport:
    if conditioned_samples is None:
        conditioned_samples = max(replicates // 3, 100)

    direct = kappa_estimate(
        master_seed, n, replicates, functional_id, workers=workers
    )

    count_seed = derive_seed(master_seed, 1_000_001)
    count_jobs = [
        (count_seed, n, lo, hi)
        for lo, hi in _chunk_ranges(replicates, workers)
    ]
    counts = np.concatenate(_pool_map(_qualify_count_chunk, count_jobs, workers))
    count_mean, count_se = _mean_se(counts)

    # rejection sampling sharded in attempt waves: every attempt index is
    # seeded absolutely and the first conditioned_samples successes are
    # kept in attempt order, so the kept values do not depend on the
    # worker count
    cond_seed = derive_seed(master_seed, 1_000_002)
    kept: list[float] = []
    wave = max(conditioned_samples, 8 * max(workers, 1))
    base = 0
    while len(kept) < conditioned_samples:
        if base > 100_000 * conditioned_samples:
            raise HorizonError(
                "conditioned sampling exhausted the attempt budget",
                diagnostics={"n": n, "attempts": base, "kept": len(kept)},
            )
        jobs = [
            (cond_seed, n, functional_id, base + lo, base + hi)
            for lo, hi in _chunk_ranges(wave, workers)
        ]
        for part in _pool_map(_kappa_cond_chunk, jobs, workers):
            kept.extend(part)
        base += wave
    values = np.asarray(kept[:conditioned_samples])
    cond_mean, cond_se = _mean_se(values)

    return KappaIdentityReport(
        n=n,
        functional_id=functional_id,
        direct=direct.mean,
        direct_se=direct.se,
        count_mean=count_mean,
        count_se=count_se,
        conditional_mean=cond_mean,
        conditional_se=cond_se,
    )


@dataclass
class HortonStats:
    max_order: int
    branch_counts: list[int]
    ratios: list[float]

    def __post_init__(self) -> None:
        if self.max_order < 1 or len(self.branch_counts) != self.max_order:
            raise ValueError("need one branch count per order")
        if any(c < 1 for c in self.branch_counts):
            raise ValueError("branch counts must be positive up to max_order")


def horton(tree: RootedTree) -> HortonStats:
    """Horton-Strahler orders and branch counts.

    Leaves have order 1; a parent takes the maximum child order, plus
    one when at least two children attain it.  Single-child nodes pass
    the order through unchanged (pruning removes degree-two chains).
    A branch is a maximal chain of equal-order nodes; N_k counts the
    order-k branches.
    """
    kids = tree.children_map()
    order: dict = {}
    stack = [(tree.root, False)]
    while stack:
        node, expanded = stack.pop()
        children = kids[node]
        if not children:
            order[node] = 1
            continue
        if not expanded:
            stack.append((node, True))
            stack.extend((c, False) for c in children)
            continue
        top = max(order[c] for c in children)
        attained = sum(1 for c in children if order[c] == top)
        order[node] = top + 1 if attained >= 2 else top
    max_order = order[tree.root]
    counts = [0] * max_order
    for node in tree.nodes:
        k = order[node]
        par = tree.parent.get(node)
        if par is None or order[par] != k:
            counts[k - 1] += 1
    ratios = [
        counts[i] / counts[i + 1] for i in range(max_order - 1)
    ]
    return HortonStats(max_order=max_order, branch_counts=counts, ratios=ratios)


def uniform_binary_tree(leaves: int, seed: int) -> RootedTree:
    """Uniformly random full binary tree with labeled leaves.

    Growth sampler: each new leaf is grafted onto a uniformly chosen
    existing node, which yields the uniform distribution over
    leaf-labeled rooted binary shapes.  Leaves are the ids 0..leaves-1
    in creation order; internal nodes continue the numbering.
    """
    if leaves < 1:
        raise ValueError("need at least one leaf")
    from fractions import Fraction

    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xB17)))
    if leaves == 1:
        return RootedTree(
            root=0,
            nodes=[0],
            parent={},
            edge_weight=Fraction(1),
            depth=0,
            orientation="abstract",
            meta={"leaves": [0]},
        )
    nodes = [0]
    parent: dict = {}
    root = 0
    next_internal = leaves
    for new_leaf in range(1, leaves):
        graft = nodes[int(rng.integers(len(nodes)))]
        joint = next_internal
        next_internal += 1
        old_parent = parent.get(graft)
        parent[joint] = old_parent
        if old_parent is None:
            root = joint
        parent[graft] = joint
        parent[new_leaf] = joint
        if old_parent is None:
            del parent[joint]
        nodes.append(new_leaf)
        nodes.append(joint)
    depth = max(RootedTree(
        root=root,
        nodes=nodes,
        parent=parent,
        edge_weight=Fraction(1),
        depth=0,
        orientation="abstract",
    ).node_depths().values())
    return RootedTree(
        root=root,
        nodes=nodes,
        parent=parent,
        edge_weight=Fraction(1),
        depth=depth,
        orientation="abstract",
        meta={"leaves": list(range(leaves))},
    )


def _dual_raster_sites(left, right, levels: int, points: int):
    """Dyadic site raster inside the discrete envelope.

    Mirrors the continuum wedge raster: time fractions i/2^d of the
    coalescence level, gap fractions q/2^d across the dual sites of
    that level, skipping both-even pairs, deduplicating landed sites,
    and skipping single-site levels.
    """
    supply = 0
    for s in range(1, levels):
        inner = (int(right[s]) - int(left[s])) // 2 - 1
        if inner > 0:
            supply += inner
        if supply >= points:
            break
    if supply < points:
        return None
    out: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    depth = 0
    while len(out) < points:
        depth += 1
        # a depth-8 pass is 65k site lookups; an envelope that thin is
        # cheaper to resample than to scan further
        if depth > 8:
            return None
        scale = 1 << depth
        for i in range(1, scale):
            for q in range(1, scale):
                if i % 2 == 0 and q % 2 == 0:
                    continue
                s = round(levels * (i / scale))
                s = min(max(s, 1), levels - 1)
                inner = (int(right[s]) - int(left[s])) // 2 - 1
                if inner < 1:
                    continue
                y = int(left[s]) + 2 * (1 + round((q / scale) * (inner - 1)))
                key = (s, y)
                if key in seen:
                    continue
                seen.add(key)
                out.append((y, s))
                if len(out) == points:
                    return out
    return out


def conditioned_dual_metric(
    master_seed: int,
    index: int,
    n: int,
    points: int = 8,
    meet_cap: float = _MEET_CAP,
    max_attempts: int = 100_000,
) -> FiniteMetricSpace:
    """Sampled ancestor metric of a conditioned discrete dual tree.

    Environments are drawn from the (master_seed, index) stream until
    the cluster at the origin survives n levels with dual coalescence
    at most meet_cap * n (matching the continuum truncation).  The
    space holds the two level-1 envelope duals plus `points` raster
    sites, with all level distances scaled by 1/n.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    base = derive_seed(master_seed, index)
    cap = round(meet_cap * n)
    attempt = 0
    while True:
        if attempt >= max_attempts:
            raise HorizonError(
                "no conditioned environment within the attempt budget",
                diagnostics={"n": n, "attempts": attempt},
            )
        env = LatticeEnvironment(derive_seed(base, attempt))
        attempt += 1
        left, right, met = envelope_walk(env, even_site(0, 0), cap)
        levels = len(left) - 1
        if not met or levels <= n:
            continue
        raster = _dual_raster_sites(left, right, levels, points)
        if raster is None:
            continue
        break
    # reference order mirrors the continuum space: the raster measures
    # gap fractions from the left wall there (the lower path), and the
    # first point is the opposite wall
    pts = [(int(right[1]), 1), (int(left[1]), 1)] + raster
    # follow all dual paths down one level at a time; a pair's meeting
    # level is the first at which both are active and collide
    m = len(pts)
    ys = np.array([y for y, _ in pts], dtype=np.int64)
    born = np.array([s for _, s in pts], dtype=np.int64)
    meet = np.full((m, m), -1, dtype=np.int64)
    np.fill_diagonal(meet, born)
    for s in range(1, levels + 1):
        active = born <= s
        if s > 1:
            move = active & (born < s)
            if move.any():
                arrows = env.arrows(ys[move], -s)
                ys = ys.copy()
                ys[move] = ys[move] - arrows.astype(np.int64)
        unresolved = meet < 0
        same = active[:, None] & active[None, :] & (ys[:, None] == ys[None, :])
        newly = unresolved & same
        meet[newly] = s
        if (meet >= 0).all():
            break
    if (meet < 0).any():
        # the envelope pinch forces every pair to meet by the
        # coalescence level
        meet[meet < 0] = levels
    levels_arr = born[:, None] + born[None, :]
    dist = (2 * meet - levels_arr) / n
    np.fill_diagonal(dist, 0.0)
    labels = [f"{y}@L{s}" for y, s in pts]
    return FiniteMetricSpace(
        labels=labels,
        dist=dist.astype(float),
        meta={
            "orientation": BACKWARD,
            "kind": "lattice-dual",
            "n": n,
            "levels": levels,
            "attempts": attempt,
        },
    )


def continuum_dual_metric(
    seed: int,
    points: int = 8,
    meet_cap: float = _MEET_CAP,
    delta: float = 1e-2,
) -> FiniteMetricSpace | None:
    """Sampled ancestor metric of a continuum skeleton.

    Returns None when the boundary draw fails its horizon or exceeds
    the meet cap, so corpus builders can skip to the next seed.  The
    space holds one point on each boundary path one grid step below
    the apex plus the `points` raster starts, mirroring the discrete
    construction.
    """
    try:
        boundary = sample_boundary(seed=seed, delta=delta)
        if -boundary.meet_time > meet_cap:
            return None
        sk = backward_skeleton(boundary, k=points, seed=derive_seed(seed, 0x5E))
    except HorizonError:
        return None
    family = PathFamily(
        [boundary.upper, boundary.lower, *sk.paths.paths],
        BACKWARD,
        delta,
    )
    pts = [
        (boundary.upper.value_at(-delta), -delta),
        (boundary.lower.value_at(-delta), -delta),
    ] + [(p.start_value, p.start_time) for p in sk.paths.paths]
    space = ancestor_metric(family, pts)
    space.meta["orientation"] = BACKWARD
    space.meta["kind"] = "continuum-dual"
    space.meta["meet_time"] = boundary.meet_time
    return space


def _space_summaries(space: FiniteMetricSpace) -> dict[str, float]:
    d = space.dist
    from_first = d[0]
    return {
        "diameter": float(d.max()),
        "height": float(from_first.max()),
        "count-r-0.5": float((from_first <= 0.5).sum()),
        "count-r-1.0": float((from_first <= 1.0).sum()),
    }


@dataclass
class SummaryRow:
    name: str
    statistic: float
    pvalue: float


@dataclass
class SummaryReport:
    """Two-sample KS comparison of scalar tree summaries.

    A diagnostic, not a proof: small statistics say the sampled
    summaries are compatible, nothing more.
    """

    rows: list[SummaryRow]
    sizes: tuple[int, int]

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": "scheidegger-summary/1",
                "sizes": list(self.sizes),
                "summaries": [
                    {"name": r.name, "statistic": r.statistic, "pvalue": r.pvalue}
                    for r in self.rows
                ],
            }
        )


def summary_compare(
    discrete: list[FiniteMetricSpace],
    continuum: list[FiniteMetricSpace],
    seed: int = 0,
    pair_draws: int = 200,
) -> SummaryReport:
    """KS statistics of four scalar summaries plus a GH-midpoint probe.

    The fifth row compares Gromov-Hausdorff bound midpoints of cross
    pairs (one space from each list) against within-continuum pairs;
    matching distributions are what convergence predicts.  Pairs are
    disjoint, each space entering at most one pair and the two pair
    sets drawing from disjoint thirds of the continuum list, because
    the KS test needs independent draws; `pair_draws` only caps the
    pair counts.
    """
    from scipy.stats import ks_2samp

    if not discrete or not continuum:
        raise ValueError("both space lists must be nonempty")
    orientations = {s.meta.get("orientation") for s in discrete + continuum}
    if len(orientations) != 1:
        raise ValueError("orientations of the two samples do not match")

    rows = []
    disc = [_space_summaries(s) for s in discrete]
    cont = [_space_summaries(s) for s in continuum]
    for name in ("diameter", "height", "count-r-0.5", "count-r-1.0"):
        a = np.array([s[name] for s in disc])
        b = np.array([s[name] for s in cont])
        res = ks_2samp(a, b)
        rows.append(SummaryRow(name, float(res.statistic), float(res.pvalue)))

    third = len(continuum) // 3
    n_cross = min(len(discrete), third, pair_draws)
    n_within = min((len(continuum) - third) // 2, pair_draws)
    if n_cross < 1 or n_within < 1:
        raise ValueError(
            "midpoint probe needs at least three continuum spaces"
        )
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x6D)))
    drows = rng.permutation(len(discrete))[:n_cross]
    crows = rng.permutation(third)[:n_cross]
    cross = np.array(
        [
            gh_bounds(discrete[int(i)], continuum[int(j)]).midpoint
            for i, j in zip(drows, crows)
        ]
    )
    rest = third + rng.permutation(len(continuum) - third)
    within = np.array(
        [
            gh_bounds(
                continuum[int(rest[2 * i])], continuum[int(rest[2 * i + 1])]
            ).midpoint
            for i in range(n_within)
        ]
    )
    res = ks_2samp(cross, within)
    rows.append(SummaryRow("gh-midpoint", float(res.statistic), float(res.pvalue)))
    return SummaryReport(rows=rows, sizes=(len(discrete), len(continuum)))


@dataclass
class ConvergeReport:
    n_values: list[int]
    reports: dict[int, SummaryReport]
    continuum_size: int

    def decreased(self) -> int:
        """How many of the five summaries shrank from first to last n."""
        first = self.reports[self.n_values[0]]
        last = self.reports[self.n_values[-1]]
        return sum(
            1
            for a, b in zip(first.rows, last.rows)
            if b.statistic < a.statistic
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": "scheidegger-converge/1",
                "n_values": self.n_values,
                "continuum_size": self.continuum_size,
                "decreased": self.decreased(),
                "reports": {
                    str(n): json.loads(r.to_json()) for n, r in self.reports.items()
                },
            }
        )


def _continuum_chunk(job) -> list[FiniteMetricSpace]:
    master_seed, points, meet_cap, delta, lo_a, hi_a = job
    out = []
    for a in range(lo_a, hi_a):
        space = continuum_dual_metric(
            derive_seed(master_seed, 7_000_000 + a),
            points=points,
            meet_cap=meet_cap,
            delta=delta,
        )
        if space is not None:
            out.append(space)
    return out


def _discrete_chunk(job) -> list[FiniteMetricSpace]:
    seed, n, points, meet_cap, lo_r, hi_r = job
    return [
        conditioned_dual_metric(
            seed, index=i, n=n, points=points, meet_cap=meet_cap
        )
        for i in range(lo_r, hi_r)
    ]


def converge(
    master_seed: int,
    n_values: tuple[int, ...] = (100, 400),
    replicates: int = 1500,
    points: int = 8,
    meet_cap: float = _MEET_CAP,
    delta: float = 1e-3,
    continuum_replicates: int | None = None,
    workers: int = 1,
) -> ConvergeReport:
    """Discrete-vs-continuum summary comparison across scales.

    One continuum corpus is drawn once and each n's conditioned
    discrete corpus is compared against it; the five KS statistics
    shrinking with n is the desk-scale shadow of convergence in
    distribution.  The reference grid must stay well below 1/n for
    every compared scale, otherwise the reference's own grid bias can
    mask the lattice bias the diagnostic is after; continuum draws are
    the cheap side, so their corpus defaults to twice the discrete
    size.
    """
    if len(n_values) < 2:
        raise ValueError("need at least two scales to compare")
    if continuum_replicates is None:
        continuum_replicates = 2 * replicates
    # the continuum side rejects rare runaway draws, so the corpus is
    # filled in attempt waves; keeping the first K successes in attempt
    # order makes the corpus independent of the worker count
    attempt_cap = 50 * continuum_replicates
    continuum: list[FiniteMetricSpace] = []
    base = 0
    while len(continuum) < continuum_replicates:
        if base >= attempt_cap:
            raise HorizonError(
                "continuum corpus could not be filled",
                diagnostics={
                    "requested": continuum_replicates,
                    "found": len(continuum),
                },
            )
        wave = min(
            attempt_cap - base,
            max(continuum_replicates - len(continuum), 64),
        )
        jobs = [
            (master_seed, points, meet_cap, delta, base + lo, base + hi)
            for lo, hi in _chunk_ranges(wave, workers)
        ]
        for part in _pool_map(_continuum_chunk, jobs, workers):
            continuum.extend(part)
        base += wave
    continuum = continuum[:continuum_replicates]
    reports = {}
    for n in n_values:
        seed = derive_seed(master_seed, 8_000_000 + n)
        jobs = [
            (seed, n, points, meet_cap, lo, hi)
            for lo, hi in _chunk_ranges(replicates, workers)
        ]
        discrete = [
            space
            for part in _pool_map(_discrete_chunk, jobs, workers)
            for space in part
        ]
        reports[n] = summary_compare(discrete, continuum, seed=master_seed)
    return ConvergeReport(
        n_values=list(n_values), reports=reports, continuum_size=len(continuum)
    )
