"""Tests for the exact pathological constructions: the Cantor staircase family
with its derivative-variation audit, the piecewise-linear circle map without a
regular square root, and the brick-flow half-time pathology."""

import math
from fractions import Fraction

import pytest

from difflab import (
    build_staircase,
    bv_group_demo,
    hyperbolic_example,
    sergeraert_check,
    staircase_report,
)
from difflab.counterexamples import ConstructionError, _audit_tree


@pytest.fixture(scope="module")
def tree():
    return build_staircase(8)


class TestCantorTree:
    def test_depth_one_plateau_values(self):
        t1 = build_staircase(1)
        assert t1.u[()] == Fraction(1, 2)
        assert t1.u[(0,)] == Fraction(1, 4)
        assert t1.u[(1,)] == Fraction(3, 4)

    def test_intervals_ordered_and_disjoint(self, tree):
        items = tree.sorted_intervals()
        assert len(items) == 2 ** (tree.depth + 1) - 1
        for (a1, b1, _), (a2, b2, _) in zip(items, items[1:]):
            assert b1 < a2

    def test_u_monotone_in_position(self, tree):
        items = tree.sorted_intervals()
        us = [tree.u[w] for (_, _, w) in items]
        assert all(a < b for a, b in zip(us, us[1:]))

    def test_exact_audit_passes(self, tree):
        _audit_tree(tree)  # must not raise

    def test_audit_detects_tampering(self, tree):
        t = build_staircase(3)
        w = (0, 1)
        t.u[w] = t.u[w] + Fraction(1, 1000)
        with pytest.raises(ConstructionError):
            _audit_tree(t)

    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            build_staircase(0)
        with pytest.raises(ValueError):
            build_staircase(4, Fraction(1))


class TestStaircaseReport:
    def test_exact_quarter_lower_bound(self, tree):
        for n in (1, 2, 3, 4):
            rep = staircase_report(tree, n)
            assert rep.var_lower_bound == Fraction(1, 4)
            assert rep.holds

    def test_family_sup_bound(self, tree):
        for n in (2, 3, 4):
            rep = staircase_report(tree, n)
            assert rep.sup_deriv_dist <= rep.sup_bound

    def test_sup_distance_decreases(self, tree):
        sups = [staircase_report(tree, n).sup_deriv_dist for n in (1, 2, 3, 4)]
        assert all(a > b for a, b in zip(sups, sups[1:]))

    def test_derivative_variation_geometric_decay(self, tree):
        for n in (1, 2, 3, 4):
            rep = staircase_report(tree, n)
            assert rep.var_deriv <= rep.M_prime * (2.0 / 3.0) ** n + 1e-12

    def test_piece_count(self, tree):
        assert staircase_report(tree, 3).piece_count == 8

    def test_depth_guard(self, tree):
        with pytest.raises(ValueError):
            staircase_report(tree, 0)
        with pytest.raises(ValueError):
            staircase_report(tree, tree.depth)


class TestBvGroupDemo:
    def test_conjugator_goes_to_identity_in_d1(self, tree):
        d2 = bv_group_demo(tree, 2).d1_phi
        d5 = bv_group_demo(tree, 5).d1_phi
        assert d5 < d2 / 10.0

    def test_bv_distance_stays_bounded_away(self, tree):
        for n in (2, 5):
            rep = bv_group_demo(tree, n)
            assert rep.d1pbv_left >= 0.2

    def test_bad_n(self, tree):
        with pytest.raises(ValueError):
            bv_group_demo(tree, 0)


class TestHyperbolicExample:
    def test_exact_annulus_variation(self):
        rep = hyperbolic_example(50)
        for k in (1, 2, 3, 10):
            assert rep.annulus_var_g[k - 1] == Fraction(1, k * k)

    def test_root_partial_sum_dominates_harmonic(self):
        rep = hyperbolic_example(1000)
        assert float(rep.partial_sum_root) >= 0.9 * float(rep.harmonic_N)

    def test_basel_tail_consistency(self):
        rep = hyperbolic_example(1000)
        total = float(rep.partial_sum_g) + rep.basel_tail
        assert total == pytest.approx(math.pi ** 2 / 6.0, abs=1e-3)

    def test_residuals_tiny(self):
        rep = hyperbolic_example(200)
        assert rep.endpoint_residual < 1e-12
        assert rep.annulus_map_residual < 1e-12
        assert rep.sampled_var_gap < 1e-2

    def test_bad_n(self):
        with pytest.raises(ValueError):
            hyperbolic_example(0)


class TestSergeraert:
    def test_half_map_squares_to_full_map(self):
        for k in (3, 4):
            rep = sergeraert_check(k)
            assert rep.half_map_residual <= 1e-12
            assert rep.orbit_residual <= 1e-12

    def test_variation_ratio_stable_in_k(self):
        r3 = sergeraert_check(3).ratio_unit_scale
        r4 = sergeraert_check(4).ratio_unit_scale
        assert abs(r3 - r4) <= 0.05 * max(r3, r4)

    def test_variation_count_grows(self):
        l3 = sergeraert_check(3).log2_total
        l4 = sergeraert_check(4).log2_total
        assert l4 > l3

    def test_variation_identity(self):
        rep = sergeraert_check(3)
        assert rep.var_identity_gap <= 1e-6 * max(rep.var_measured, 1e-300)

    def test_field_junction_smoothness(self):
        rep = sergeraert_check(3)
        assert rep.junction_jump_d1 < 1e-5
        assert rep.junction_jump_d2 < 0.1

    def test_bad_k(self):
        with pytest.raises(ValueError):
            sergeraert_check(2)
