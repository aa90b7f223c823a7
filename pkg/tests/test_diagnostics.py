"""Estimator checks against the exact gap-walk law and brute oracles.

The depth-tail dynamic program is compared against an independent
enumeration implemented in _oracles.py; Monte-Carlo estimators are
held to 3-sigma bands around exact anchors (the depth-1 tail 3/4 and
friends); Horton orders are checked against a literal pruning
simulation that never computes a max over children.
"""

import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scheidegger.cluster import RootedTree
from scheidegger.diagnostics import (
    FUNCTIONALS,
    EtaSample,
    HortonStats,
    KappaSample,
    conditioned_dual_metric,
    continuum_dual_metric,
    converge,
    depth_tail_mc,
    depth_tail_oracle,
    eta_estimate,
    horton,
    kappa_estimate,
    kappa_identity_check,
    summary_compare,
    uniform_binary_tree,
)
from scheidegger.metric import four_point_check
from scheidegger.skeleton import HorizonError

from _oracles import gap_survival_probabilities, strahler_by_pruning


def perfect_binary(depth):
    nodes = list(range(2 ** (depth + 1) - 1))
    parent = {i: (i - 1) // 2 for i in nodes if i > 0}
    return RootedTree(
        root=0,
        nodes=nodes,
        parent=parent,
        edge_weight=Fraction(1),
        depth=depth,
        orientation="abstract",
    )


class TestDepthTailOracle:
    def test_exact_anchors(self):
        assert depth_tail_oracle(0) == 1.0
        assert depth_tail_oracle(1) == 0.75
        assert depth_tail_oracle(2) == 0.625
        assert depth_tail_oracle(3) == 35 / 64

    def test_matches_independent_enumeration(self):
        ref = gap_survival_probabilities(32)
        for n in range(33):
            assert depth_tail_oracle(n) == pytest.approx(ref[n], abs=1e-12)

    def test_monotone_decreasing(self):
        vals = [depth_tail_oracle(n) for n in range(40)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_asymptotic_constant(self):
        # the tail decays like 2 / sqrt(pi n)
        for n in (256, 1024):
            assert depth_tail_oracle(n) * math.sqrt(math.pi * n) == pytest.approx(
                2.0, abs=0.02
            )

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            depth_tail_oracle(-1)


class TestEta:
    def test_unit_window_expectation(self):
        est = eta_estimate(11, n=1, replicates=3000)
        assert abs(est.mean - 0.75) <= 3 * est.se
        assert est.se > 0

    def test_samples_recorded(self):
        est = eta_estimate(3, n=4, replicates=50)
        assert len(est.samples) == 50
        assert est.mean == pytest.approx(
            np.mean([s.count for s in est.samples])
        )

    def test_deterministic(self):
        a = eta_estimate(7, n=9, replicates=40)
        b = eta_estimate(7, n=9, replicates=40)
        assert a.mean == b.mean and a.se == b.se

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            eta_estimate(0, n=0, replicates=10)
        with pytest.raises(ValueError):
            eta_estimate(0, n=4, replicates=0)

    def test_site_cap(self):
        with pytest.raises(MemoryError):
            eta_estimate(0, n=400, replicates=1, site_cap=10)

    def test_sample_invariants(self):
        with pytest.raises(ValueError):
            EtaSample(n=1, count=-1, window_pad=6.0)
        with pytest.raises(ValueError):
            EtaSample(n=1, count=0, window_pad=0.5)


class TestDepthTailMC:
    def test_vs_oracle(self):
        rows = depth_tail_mc(13, [1, 2, 4, 8], replicates=3000)
        assert [r.n for r in rows] == [1, 2, 4, 8]
        for row in rows:
            assert abs(row.z) < 3.5

    def test_oracle_column(self):
        rows = depth_tail_mc(0, [1, 2], replicates=10)
        assert rows[0].oracle == 0.75
        assert rows[1].oracle == 0.625

    def test_duplicates_collapse(self):
        rows = depth_tail_mc(1, [4, 4, 2], replicates=20)
        assert [r.n for r in rows] == [2, 4]

    def test_validation(self):
        with pytest.raises(ValueError):
            depth_tail_mc(0, [0, 1], replicates=10)
        with pytest.raises(ValueError):
            depth_tail_mc(0, [], replicates=10)
        with pytest.raises(ValueError):
            depth_tail_mc(0, [1], replicates=0)


class TestKappa:
    def test_unit_functional_counts_sites(self):
        est = kappa_estimate(31, n=9, replicates=200, functional_id="one")
        assert all(s.value == s.count for s in est.samples)
        assert est.mean == pytest.approx(
            np.mean([s.count for s in est.samples])
        )

    def test_unknown_functional(self):
        with pytest.raises(KeyError):
            kappa_estimate(0, n=4, replicates=10, functional_id="nope")

    def test_bounded_functionals(self):
        est = kappa_estimate(5, n=16, replicates=60, functional_id="tanh-diam-dual")
        for s in est.samples:
            assert abs(s.value) <= s.count * FUNCTIONALS["tanh-diam-dual"].sup + 1e-12

    def test_sample_bound_enforced(self):
        with pytest.raises(ValueError):
            KappaSample(n=4, value=2.5, functional_id="one", count=2)

    def test_identity_factorizes(self):
        rep = kappa_identity_check(32, n=25, replicates=600, functional_id="tanh-diam-dual")
        assert abs(rep.z) < 3
        assert rep.factorized == pytest.approx(
            rep.count_mean * rep.conditional_mean
        )

    def test_identity_unit_functional(self):
        # with f = 1 the conditional mean is exactly 1
        rep = kappa_identity_check(33, n=4, replicates=300, functional_id="one")
        assert rep.conditional_mean == 1.0
        assert rep.conditional_se == 0.0
        assert abs(rep.z) < 3


class TestHorton:
    def test_perfect_binary_table(self):
        hs = horton(perfect_binary(4))
        assert hs.max_order == 5
        assert hs.branch_counts == [16, 8, 4, 2, 1]
        assert hs.ratios == [2.0, 2.0, 2.0, 2.0]

    def test_single_node(self):
        hs = horton(uniform_binary_tree(1, seed=0))
        assert hs.max_order == 1
        assert hs.branch_counts == [1]
        assert hs.ratios == []

    def test_chain_passes_order_through(self):
        nodes = list(range(5))
        parent = {i: i - 1 for i in range(1, 5)}
        tree = RootedTree(
            root=0, nodes=nodes, parent=parent, edge_weight=Fraction(1),
            depth=4, orientation="abstract",
        )
        hs = horton(tree)
        assert hs.max_order == 1
        assert hs.branch_counts == [1]

    def test_star(self):
        nodes = list(range(6))
        parent = {i: 0 for i in range(1, 6)}
        tree = RootedTree(
            root=0, nodes=nodes, parent=parent, edge_weight=Fraction(1),
            depth=1, orientation="abstract",
        )
        hs = horton(tree)
        assert hs.max_order == 2
        assert hs.branch_counts == [5, 1]
        assert hs.ratios == [5.0]

    def test_matches_pruning_simulation(self):
        for seed in range(25):
            tree = uniform_binary_tree(40, seed=seed)
            kids = {v: list(c) for v, c in tree.children_map().items()}
            assert horton(tree).max_order == strahler_by_pruning(kids, tree.root)

    def test_child_order_irrelevant(self):
        tree = uniform_binary_tree(30, seed=4)
        flipped = RootedTree(
            root=tree.root,
            nodes=list(reversed(tree.nodes)),
            parent=dict(reversed(list(tree.parent.items()))),
            edge_weight=tree.edge_weight,
            depth=tree.depth,
            orientation=tree.orientation,
        )
        assert horton(tree).branch_counts == horton(flipped).branch_counts

    def test_stats_validation(self):
        with pytest.raises(ValueError):
            HortonStats(max_order=2, branch_counts=[3], ratios=[])
        with pytest.raises(ValueError):
            HortonStats(max_order=2, branch_counts=[3, 0], ratios=[])

    @given(st.integers(min_value=1, max_value=40), st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_full_binary_invariants(self, leaves, seed):
        tree = uniform_binary_tree(leaves, seed=seed)
        hs = horton(tree)
        # every leaf heads an order-1 branch in a full binary tree
        assert hs.branch_counts[0] == leaves
        assert hs.max_order <= math.floor(math.log2(leaves)) + 1
        assert all(c >= 1 for c in hs.branch_counts)


class TestUniformBinaryTree:
    def test_node_count(self):
        for leaves in (1, 2, 5, 17):
            tree = uniform_binary_tree(leaves, seed=9)
            assert len(tree.nodes) == 2 * leaves - 1

    def test_leaves_are_labelled_prefix(self):
        tree = uniform_binary_tree(6, seed=3)
        kids = tree.children_map()
        assert sorted(v for v in tree.nodes if not kids[v]) == list(range(6))

    def test_internal_nodes_binary(self):
        tree = uniform_binary_tree(12, seed=1)
        kids = tree.children_map()
        for v in tree.nodes:
            assert len(kids[v]) in (0, 2)

    def test_deterministic(self):
        a = uniform_binary_tree(9, seed=5)
        b = uniform_binary_tree(9, seed=5)
        assert a.parent == b.parent

    def test_three_leaf_shapes_uniform(self):
        from scipy.stats import chisquare

        counts = {0: 0, 1: 0, 2: 0}
        for s in range(30_000):
            tree = uniform_binary_tree(3, seed=s)
            kids = tree.children_map()
            lone = [c for c in kids[tree.root] if not kids[c]]
            assert len(lone) == 1
            counts[lone[0]] += 1
        res = chisquare(list(counts.values()))
        assert res.pvalue > 0.01

    def test_validation(self):
        with pytest.raises(ValueError):
            uniform_binary_tree(0, seed=0)


class TestConditionedDualMetric:
    def test_is_tree_metric(self):
        space = conditioned_dual_metric(21, index=0, n=25)
        assert space.validate() == []
        assert four_point_check(space, tol=1e-12)

    def test_diameter_floor(self):
        for i in range(5):
            space = conditioned_dual_metric(2, index=i, n=16)
            assert space.diameter >= 2.0
            # the apex pair spans the whole coalescence depth
            assert space.dist[0, 1] == space.diameter

    def test_point_budget(self):
        space = conditioned_dual_metric(3, index=0, n=9, points=5)
        assert len(space.labels) == 7

    def test_meta(self):
        space = conditioned_dual_metric(4, index=1, n=9)
        assert space.meta["levels"] > 9
        assert space.meta["kind"] == "lattice-dual"
        assert space.labels[0].endswith("@L1")
        assert space.labels[1].endswith("@L1")

    def test_deterministic(self):
        a = conditioned_dual_metric(8, index=2, n=9)
        b = conditioned_dual_metric(8, index=2, n=9)
        assert np.array_equal(a.dist, b.dist)
        assert a.labels == b.labels

    def test_validation_and_budget(self):
        with pytest.raises(ValueError):
            conditioned_dual_metric(0, index=0, n=0)
        with pytest.raises(HorizonError):
            conditioned_dual_metric(0, index=0, n=9, max_attempts=0)


@pytest.fixture(scope="module")
def continuum_corpus():
    spaces = []
    seed = 0
    while len(spaces) < 24:
        space = continuum_dual_metric(seed=5000 + seed, points=6, delta=1e-2)
        seed += 1
        if space is not None:
            spaces.append(space)
    return spaces


class TestContinuumDualMetric:
    def test_valid_spaces(self, continuum_corpus):
        for space in continuum_corpus[:6]:
            assert space.validate() == []
            assert space.diameter >= 2.0
            assert space.meta["kind"] == "continuum-dual"
            assert space.meta["meet_time"] < -1.0

    def test_point_budget(self, continuum_corpus):
        assert all(len(s.labels) == 8 for s in continuum_corpus)

    def test_near_tree_metric(self, continuum_corpus):
        # merges are recorded at grid times, so the four-point defect
        # is bounded by a couple of grid steps
        for space in continuum_corpus[:6]:
            assert four_point_check(space, tol=2 * 1e-2)

    def test_deterministic_and_skippable(self):
        a = continuum_dual_metric(seed=5000, points=4, delta=1e-2)
        b = continuum_dual_metric(seed=5000, points=4, delta=1e-2)
        assert (a is None) == (b is None)
        if a is not None:
            assert np.array_equal(a.dist, b.dist)
        # an impossible cap forces the skip path
        assert continuum_dual_metric(seed=5000, meet_cap=1.0, delta=1e-2) is None


class TestSummaryCompare:
    def test_self_split(self, continuum_corpus):
        report = summary_compare(continuum_corpus[:12], continuum_corpus[12:], seed=1)
        assert [r.name for r in report.rows] == [
            "diameter",
            "height",
            "count-r-0.5",
            "count-r-1.0",
            "gh-midpoint",
        ]
        low = sum(1 for r in report.rows if r.pvalue < 0.01)
        assert low <= 1
        assert report.sizes == (12, 12)

    def test_json_schema(self, continuum_corpus):
        report = summary_compare(continuum_corpus[:8], continuum_corpus[8:], seed=0)
        payload = json.loads(report.to_json())
        assert payload["schema"] == "scheidegger-summary/1"
        assert len(payload["summaries"]) == 5

    def test_empty_rejected(self, continuum_corpus):
        with pytest.raises(ValueError):
            summary_compare([], continuum_corpus)
        with pytest.raises(ValueError):
            summary_compare(continuum_corpus, [])

    def test_orientation_mismatch(self, continuum_corpus):
        from scheidegger.metric import FiniteMetricSpace
        from scheidegger.paths import FORWARD

        rogue = FiniteMetricSpace(
            labels=["a", "b"],
            dist=np.array([[0.0, 1.0], [1.0, 0.0]]),
            meta={"orientation": FORWARD},
        )
        with pytest.raises(ValueError):
            summary_compare([rogue], continuum_corpus)

    def test_midpoint_needs_spaces(self, continuum_corpus):
        with pytest.raises(ValueError):
            summary_compare(continuum_corpus[:4], continuum_corpus[:2])


class TestConverge:
    def test_small_scale_report(self):
        report = converge(
            77,
            n_values=(4, 16),
            replicates=30,
            points=4,
            delta=1e-2,
            continuum_replicates=30,
        )
        assert report.n_values == [4, 16]
        assert set(report.reports) == {4, 16}
        assert report.continuum_size == 30
        for rep in report.reports.values():
            assert len(rep.rows) == 5
        assert 0 <= report.decreased() <= 5
        payload = json.loads(report.to_json())
        assert payload["schema"] == "scheidegger-converge/1"
        assert payload["decreased"] == report.decreased()

    def test_needs_two_scales(self):
        with pytest.raises(ValueError):
            converge(0, n_values=(100,), replicates=2)
