"""Tests for the continuum samplers and the wedge skeletons."""

import json
import math

import numpy as np
import pytest
from scipy.stats import ks_2samp, kstest, norm

from scheidegger.metric import four_point_check
from scheidegger.paths import BACKWARD, FORWARD, GridPath, validate_tree_like
from scheidegger.skeleton import (
    BoundaryPair,
    ConditionedPair,
    DensityError,
    HorizonError,
    Skeleton,
    _bridge_touch_prob,
    _contacts,
    _touch_probs,
    backward_skeleton,
    delta_raster,
    forward_skeleton,
    gamma_map,
    gamma_n_map,
    sample_boundary,
    sample_conditioned_pair,
    skeleton_from_json,
    skeleton_metric,
    skeleton_to_json,
)

from _oracles import rayleigh_cdf


def walk_pair(rng, delta, n_steps, gap=0.0):
    inc = rng.normal(0.0, math.sqrt(delta), size=(2, n_steps))
    v1 = np.concatenate([[0.0], np.cumsum(inc[0])])
    v2 = gap + np.concatenate([[0.0], np.cumsum(inc[1])])
    return (
        GridPath(0.0, delta, tuple(v1), BACKWARD),
        GridPath(0.0, delta, tuple(v2), BACKWARD),
    )


class TestBridgeRule:
    def test_same_sign_probability(self):
        assert _bridge_touch_prob(0.3, 0.2, 0.1) == pytest.approx(
            math.exp(-0.3 * 0.2 / 0.1)
        )

    def test_sign_change_is_certain(self):
        assert _bridge_touch_prob(0.3, -0.2, 0.1) == 1.0
        assert _bridge_touch_prob(0.0, 0.5, 0.1) == 1.0

    def test_vectorised_matches_scalar(self):
        d0 = np.array([0.3, -0.1, 0.2, 0.0])
        d1 = np.array([0.2, 0.4, -0.5, 0.3])
        out = _touch_probs(d0, d1, 0.05)
        for a, b, p in zip(d0, d1, out):
            assert p == pytest.approx(_bridge_touch_prob(a, b, 0.05))

    def test_nan_never_contacts(self):
        d0 = np.array([np.nan, 0.3])
        d1 = np.array([0.2, np.nan])
        out = _contacts(d0, d1, np.zeros(2), 0.1)
        assert not out.any()

    @pytest.mark.parametrize("gap", [0.1, 0.25, 0.5])
    def test_unit_window_survival(self, gap):
        # with the bridge correction the survival of a unit window is
        # exact at any step size; a sign-only rule would overshoot by
        # far more than the tolerance at this coarse step
        delta = 0.05
        m = 20
        trials = 40_000
        rng = np.random.default_rng(hash(("survival", gap)) % 2**32)
        inc = rng.normal(0.0, math.sqrt(2 * delta), size=(trials, m))
        d = gap + np.cumsum(inc, axis=1)
        d = np.concatenate([np.full((trials, 1), gap), d], axis=1)
        u = rng.uniform(size=(trials, m))
        hit = _contacts(d[:, :-1], d[:, 1:], u, delta).any(axis=1)
        observed = 1.0 - hit.mean()
        exact = 2 * norm.cdf(gap / math.sqrt(2)) - 1
        se = math.sqrt(exact * (1 - exact) / trials)
        assert abs(observed - exact) < 3.5 * se


class TestBoundary:
    def test_invariants_over_seeds(self):
        found = 0
        for seed in range(1, 40):
            try:
                b = sample_boundary(seed=seed, delta=1e-2)
            except HorizonError:
                continue
            found += 1
            assert b.validate() == []
            assert b.meet_time < -1.0
            assert b.gap_at(-1.0) > 0.0
            merge = round(-b.meet_time / b.step)
            assert len(b.upper) >= merge + round(0.25 / b.step)
        assert found >= 30

    def test_deterministic(self):
        a = sample_boundary(seed=7, delta=1e-2)
        b = sample_boundary(seed=7, delta=1e-2)
        assert a.upper.values == b.upper.values
        assert a.meet_time == b.meet_time

    def test_horizon_error_diagnostics(self):
        with pytest.raises(HorizonError) as err:
            sample_boundary(seed=1, delta=1e-2, max_extensions=0)
        assert err.value.diagnostics["seed"] == 1
        assert err.value.diagnostics["extensions"] == 0

    def test_step_must_divide_unit(self):
        with pytest.raises(ValueError, match="evenly divide"):
            sample_boundary(seed=1, delta=0.3)

    def test_constructor_rejects_bad_pairs(self):
        b = sample_boundary(seed=3, delta=1e-2)
        with pytest.raises(ValueError, match="backward"):
            BoundaryPair(
                GridPath(0.0, 0.01, (0.0, 1.0), FORWARD), b.lower, b.meet_time
            )
        with pytest.raises(ValueError, match="past time -1"):
            BoundaryPair(b.upper, b.lower, -0.5)

    def test_gap_at_minus_one_is_rayleigh(self):
        # the gap one unit below the window start, divided by sqrt(2),
        # follows the standard Rayleigh law
        gaps = []
        seed = 0
        while len(gaps) < 1000:
            seed += 1
            try:
                b = sample_boundary(seed=seed, delta=1e-2, max_extensions=200)
            except HorizonError:
                continue
            gaps.append(b.gap_at(-1.0) / math.sqrt(2))
        result = kstest(np.array(gaps), rayleigh_cdf)
        assert result.pvalue > 0.01


class TestConditionedPair:
    def test_acceptance_rate_n1(self):
        total = 0
        for s in range(1500):
            p = sample_conditioned_pair(seed=s, n=1, delta=1e-2, max_length=8.0)
            total += p.attempts
        rate = 1500 / total
        exact = 2 * norm.cdf(1 / math.sqrt(2)) - 1
        se = math.sqrt(exact * (1 - exact) / total)
        assert abs(rate - exact) < 3.5 * se

    def test_meet_below_minus_one(self):
        for s in range(50):
            p = sample_conditioned_pair(seed=s, n=2, delta=1e-2, max_length=8.0)
            assert p.meet_time < -1.0

    def test_start_values(self):
        p = sample_conditioned_pair(seed=11, n=4, delta=1e-2, max_length=8.0)
        assert p.upper.values[0] == pytest.approx(0.25)
        assert p.lower.values[0] == 0.0

    def test_merged_tail(self):
        for s in range(40):
            p = sample_conditioned_pair(seed=s, n=1, delta=1e-2, max_length=16.0)
            if p.censored:
                continue
            merge = round(-p.meet_time / p.upper.step)
            hi = np.asarray(p.upper.values)
            lo = np.asarray(p.lower.values)
            assert (hi[merge:] == lo[merge:]).all()
            assert (hi[:merge] - lo[:merge] > 0).all()
            return
        pytest.fail("no uncensored sample found")

    def test_censoring(self):
        hit = None
        for s in range(200):
            p = sample_conditioned_pair(seed=s, n=1, delta=1e-2, max_length=2.0)
            if p.censored:
                hit = p
                break
        assert hit is not None
        assert hit.meet_time == pytest.approx(-2.0, abs=0.02)
        hi = np.asarray(hit.upper.values)
        lo = np.asarray(hit.lower.values)
        assert (hi - lo > 0).all()

    def test_deterministic(self):
        a = sample_conditioned_pair(seed=5, n=2, delta=1e-2)
        b = sample_conditioned_pair(seed=5, n=2, delta=1e-2)
        assert a.upper.values == b.upper.values
        assert a.meet_time == b.meet_time

    def test_rejects_bad_n(self):
        with pytest.raises(ValueError, match="at least 1"):
            sample_conditioned_pair(seed=1, n=0)


class TestGammaMaps:
    def test_passthrough_when_no_pivot(self):
        # constant paths far apart never cross the level and never touch
        delta = 1e-2
        vals1 = tuple([0.0] * 301)
        vals2 = tuple([5.0] * 301)
        f1 = GridPath(0.0, delta, vals1, BACKWARD)
        f2 = GridPath(0.0, delta, vals2, BACKWARD)
        for result in (gamma_map(f1, f2), gamma_n_map(f1, f2, n=10)):
            assert not result.applied
            assert result.pivot_time is None
            assert result.merge_time is None
            assert result.upper is f1
            assert result.lower is f2

    def test_too_short_paths_pass_through(self):
        delta = 1e-2
        f1 = GridPath(0.0, delta, (0.0, 0.1, 0.2), BACKWARD)
        f2 = GridPath(0.0, delta, (1.0, 1.1, 1.2), BACKWARD)
        assert not gamma_map(f1, f2).applied

    def test_orientation_and_grid_checks(self):
        delta = 1e-2
        f1 = GridPath(0.0, delta, tuple(np.zeros(200)), FORWARD)
        f2 = GridPath(0.0, delta, tuple(np.ones(200)), BACKWARD)
        with pytest.raises(ValueError, match="backward"):
            gamma_map(f1, f2)
        f3 = GridPath(-1.0, delta, tuple(np.ones(200)), BACKWARD)
        f4 = GridPath(0.0, delta, tuple(np.zeros(200)), BACKWARD)
        with pytest.raises(ValueError, match="share their grid"):
            gamma_map(f4, f3)

    def test_gamma_output_is_boundary_pair(self):
        # the limit map recenters and snaps exactly like the boundary
        # sampler, so an applied result satisfies every BoundaryPair
        # invariant
        rng = np.random.default_rng(101)
        checked = 0
        for trial in range(40):
            f1, f2 = walk_pair(rng, 1e-2, 3000, gap=0.5)
            g = gamma_map(f1, f2, seed=trial)
            if not g.applied:
                continue
            pair = BoundaryPair(g.upper, g.lower, g.merge_time)
            assert pair.validate() == []
            assert g.merge_time <= -1.0 - 1e-2 + 1e-12
            checked += 1
        assert checked >= 20

    def test_gamma_n_start_gap(self):
        # recentering subtracts the smaller pivot value, so the lower
        # path starts at exactly 0 and the upper near 1/n, up to the
        # one-step crossing overshoot
        rng = np.random.default_rng(202)
        delta = 1e-3
        checked = 0
        for trial in range(30):
            f1, f2 = walk_pair(rng, delta, 20_000)
            g = gamma_n_map(f1, f2, n=10, seed=trial)
            if not g.applied:
                continue
            assert g.lower.values[0] == 0.0
            start_gap = g.upper.values[0]
            assert 0.0 < start_gap < 0.1 + 6 * math.sqrt(2 * delta)
            hi = np.asarray(g.upper.values)
            lo = np.asarray(g.lower.values)
            merge = round(-g.merge_time / delta)
            assert (hi[:merge] - lo[:merge] > 0).all()
            assert (hi[merge:] == lo[merge:]).all()
            checked += 1
        assert checked >= 15

    def test_pivot_reported_when_merge_beyond_domain(self):
        # a pair that crosses the level but never touches within the
        # record comes back unapplied with the pivot still reported
        delta = 1e-2
        steps = np.full(400, 0.004)
        v1 = np.concatenate([[0.0], np.cumsum(steps)])
        f1 = GridPath(0.0, delta, tuple(v1), BACKWARD)
        f2 = GridPath(0.0, delta, tuple(np.zeros(401)), BACKWARD)
        g = gamma_n_map(f1, f2, n=2, seed=3)
        assert not g.applied
        assert g.pivot_time is not None
        assert g.merge_time is None
        assert g.upper is f1

    def test_merge_times_match_rejection_sampler(self):
        # the level map applied to independent walks reproduces the
        # conditioned pair's coalescing time; both sides censored at a
        # common horizon
        delta = 2e-3
        n = 10
        censor = 8.0
        length = 16.0
        n_steps = round(length / delta)
        per_side = 600

        rej = []
        for s in range(per_side):
            p = sample_conditioned_pair(
                seed=90_000 + s, n=n, delta=delta, max_length=censor
            )
            rej.append(min(-p.meet_time, censor))

        rng = np.random.default_rng(321)
        gam = []
        trial = 0
        while len(gam) < per_side and trial < 4 * per_side:
            trial += 1
            f1, f2 = walk_pair(rng, delta, n_steps)
            g = gamma_n_map(f1, f2, n=n, seed=trial)
            if g.pivot_time is None or -g.pivot_time > length - censor - 1:
                continue
            gam.append(censor if g.merge_time is None else min(-g.merge_time, censor))
        assert len(gam) == per_side

        result = ks_2samp(np.array(rej), np.array(gam))
        assert result.pvalue > 0.01


@pytest.fixture(scope="module")
def boundary():
    return sample_boundary(seed=1, delta=1e-2)


@pytest.fixture(scope="module")
def backward(boundary):
    return backward_skeleton(boundary, k=12, seed=5)


class TestDeltaRaster:
    def test_prefix_property(self, boundary):
        r8 = delta_raster(boundary, 8)
        r20 = delta_raster(boundary, 20)
        assert r20[:8] == r8
        assert len(r20) == 20

    def test_points_interior(self, boundary):
        for x, t in delta_raster(boundary, 30):
            assert boundary.meet_time < t < 0.0
            assert boundary.lower.value_at(t) < x < boundary.upper.value_at(t)

    def test_no_duplicates(self, boundary):
        pts = delta_raster(boundary, 40)
        assert len(set(pts)) == 40

    def test_thin_wedge_raises(self):
        delta = 1e-2
        n = 300
        hi = np.full(n, 1e-9)
        hi[0] = 0.0
        lo = np.zeros(n)
        thin = BoundaryPair(
            GridPath(0.0, delta, tuple(hi), BACKWARD),
            GridPath(0.0, delta, tuple(lo), BACKWARD),
            meet_time=-1.5,
        )
        with pytest.raises(HorizonError, match="raster cannot fill"):
            delta_raster(thin, 5)


class TestBackwardSkeleton:
    def test_tree_like(self, backward):
        assert validate_tree_like(backward.paths) == []

    def test_paths_stay_in_wedge(self, boundary, backward):
        for p in backward.paths.paths:
            for j, v in enumerate(p.values):
                t = p.start_time - j * p.step
                assert boundary.lower.value_at(t) - 1e-9 <= v
                assert v <= boundary.upper.value_at(t) + 1e-9

    def test_merge_records(self, boundary, backward):
        named = {"upper": boundary.upper, "lower": boundary.lower}
        for rec, p in zip(backward.merges, backward.paths.paths):
            target = named.get(rec["target"])
            if target is None:
                target = backward.paths.paths[rec["target"]]
                assert rec["target"] < rec["path"]
            merge_j = round((p.start_time - rec["time"]) / p.step)
            mine = np.asarray(p.values[merge_j:])
            off = round((target.start_time - rec["time"]) / p.step)
            theirs = np.asarray(target.values[off : off + len(mine)])
            assert (mine == theirs).all()

    def test_deterministic(self, boundary):
        a = backward_skeleton(boundary, k=4, seed=9)
        b = backward_skeleton(boundary, k=4, seed=9)
        for pa, pb in zip(a.paths.paths, b.paths.paths):
            assert pa.values == pb.values

    def test_single_path(self, boundary):
        sk = backward_skeleton(boundary, k=1, seed=2)
        assert len(sk) == 1
        assert sk.merges[0]["target"] in ("upper", "lower")

    def test_step_mismatch(self, boundary):
        with pytest.raises(ValueError, match="match the boundary grid"):
            backward_skeleton(boundary, k=2, seed=0, delta=1e-3)


class TestForwardSkeleton:
    def test_density_guard(self, boundary, backward):
        with pytest.raises(DensityError, match="needs at least"):
            forward_skeleton(boundary, backward, k=4)

    def test_tree_like_and_apex(self, boundary, backward):
        fw = forward_skeleton(boundary, backward, k=3)
        assert validate_tree_like(fw.paths) == []
        for p in fw.paths.paths:
            assert p.end_time == pytest.approx(0.0, abs=1e-9)
            assert p.values[-1] == pytest.approx(0.0, abs=1e-9)

    def test_never_crosses_duals(self, boundary, backward):
        # the defining property: forward positions may touch but never
        # strictly cross any backward path
        fw = forward_skeleton(boundary, backward, k=3)
        delta = boundary.step
        duals = [boundary.upper, boundary.lower, *backward.paths.paths]
        for p in fw.paths.paths:
            times = p.times
            vals = np.asarray(p.values)
            for g in duals:
                for j in range(len(vals) - 1):
                    t, t_next = times[j], times[j + 1]
                    if g.start_time < t_next - 1e-12:
                        continue
                    a = vals[j] - g.value_at(t)
                    b = vals[j + 1] - g.value_at(t_next)
                    assert a * b >= 0.0 or a == 0.0 or b == 0.0

    def test_stays_in_wedge(self, boundary, backward):
        fw = forward_skeleton(boundary, backward, k=3)
        for p in fw.paths.paths:
            for j, v in enumerate(p.values):
                t = p.start_time + j * p.step
                assert boundary.lower.value_at(t) - 1e-9 <= v
                assert v <= boundary.upper.value_at(t) + 1e-9

    def test_merge_records(self, boundary, backward):
        fw = forward_skeleton(boundary, backward, k=3)
        for rec in fw.merges:
            if rec["target"] == "apex":
                assert rec["time"] == 0.0
            else:
                other = fw.paths.paths[rec["target"]]
                mine = fw.paths.paths[rec["path"]]
                j = mine.index_of(rec["time"])
                oj = other.index_of(rec["time"])
                assert mine.values[j] == other.values[oj]


class TestSkeletonMetric:
    def test_single_point(self, backward):
        space = skeleton_metric(backward, 1)
        assert space.dist.shape == (1, 1)
        assert space.dist[0, 0] == 0.0

    def test_valid_metric(self, backward):
        space = skeleton_metric(backward, 6)
        assert space.validate() == []
        assert space.meta["orientation"] == BACKWARD
        assert space.meta["meet_time"] == backward.boundary.meet_time

    def test_four_point(self, backward):
        space = skeleton_metric(backward, 8)
        assert four_point_check(space, tol=2 * backward.paths.step)

    def test_range_check(self, backward):
        with pytest.raises(ValueError, match="sample points"):
            skeleton_metric(backward, 0)
        with pytest.raises(ValueError, match="sample points"):
            skeleton_metric(backward, len(backward.paths) + 1)


class TestSerialization:
    def test_round_trip(self, backward):
        text = skeleton_to_json(backward)
        back = skeleton_from_json(text)
        assert back.starts == backward.starts
        assert back.merges == backward.merges
        assert back.boundary.meet_time == backward.boundary.meet_time
        for pa, pb in zip(back.paths.paths, backward.paths.paths):
            assert pa.values == pb.values
            assert pa.start_time == pb.start_time

    def test_schema_rejected(self, backward):
        doc = json.loads(skeleton_to_json(backward))
        doc["schema"] = "something-else/9"
        with pytest.raises(ValueError, match="unsupported skeleton schema"):
            skeleton_from_json(json.dumps(doc))
