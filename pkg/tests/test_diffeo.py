"""Tests for interval/circle diffeomorphisms: group operations, metrics,
rotation numbers, commutators, and fixed-point analysis."""

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from difflab import (
    ActionTuple,
    AnalyticField,
    Bump,
    BumpPerturbation,
    CircleGrid,
    Composition,
    FlowTime,
    GridFunction,
    Moebius,
    Rotation,
    circle_compose,
    circle_inverse,
    commutator_residual,
    compose,
    evaluate,
    fixed_point_analysis,
    identity,
    inverse,
    iterate,
    metric,
    moebius_field,
    rotation_number,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def conjugated_rotation(alpha, amp=0.2, freq=1, N=4096):
    x = np.linspace(0.0, 1.0, N + 1)
    w = 2.0 * math.pi * freq
    h = CircleGrid(GridFunction(amp * np.sin(w * x) / w),
                   GridFunction(np.log1p(amp * np.cos(w * x))))
    return circle_compose(h, circle_compose(Rotation(alpha),
                                            circle_inverse(h)))


class TestEvaluate:
    def test_moebius_log_deriv_at_zero(self):
        assert evaluate(Moebius(2.0), 0.0, "log_deriv") == pytest.approx(
            -math.log(2.0), abs=1e-14)

    def test_identity_affine_deriv(self):
        assert evaluate(identity(), 0.3, "affine_deriv") == 0.0

    def test_moebius_value(self):
        # x/(2-x) at 1/2
        assert evaluate(Moebius(2.0), 0.5, "value") == pytest.approx(
            1.0 / 3.0, abs=1e-15)

    def test_domain_violation(self):
        with pytest.raises(ValueError):
            evaluate(Moebius(2.0), 1.5, "value")


class TestGroupOps:
    def test_moebius_composition_law(self):
        h = compose(Moebius(2.0), Moebius(3.0))
        x = np.linspace(0.0, 1.0, 101)
        assert np.max(np.abs(h.value(x) - Moebius(6.0).value(x))) < 1e-14

    def test_moebius_inverse(self):
        h = inverse(Moebius(2.0))
        x = np.linspace(0.0, 1.0, 101)
        assert np.max(np.abs(h.value(x) - Moebius(0.5).value(x))) < 1e-12

    def test_iterate_zero_is_identity(self):
        h = iterate(Moebius(2.0), 0)
        x = np.linspace(0.0, 1.0, 11)
        assert np.max(np.abs(h.value(x) - x)) == 0.0

    def test_iterate_matches_repeated_composition(self):
        f = Moebius(2.0)
        x = np.linspace(0.0, 1.0, 101)
        assert np.max(np.abs(iterate(f, 3).value(x)
                             - Moebius(8.0).value(x))) < 1e-13

    def test_negative_iterate(self):
        f = Moebius(2.0)
        x = np.linspace(0.0, 1.0, 101)
        assert np.max(np.abs(iterate(f, -2).value(x)
                             - Moebius(0.25).value(x))) < 1e-12

    def test_commuting_iterate_distributes(self):
        f, g = Moebius(2.0), Moebius(3.0)
        x = np.linspace(0.0, 1.0, 101)
        lhs = iterate(compose(f, g), 3).value(x)
        rhs = compose(iterate(f, 3), iterate(g, 3)).value(x)
        assert np.max(np.abs(lhs - rhs)) < 1e-12


class TestReflect:
    def test_moebius_reflect_closed_form(self):
        # 1 - h_a(1 - x) = h_{1/a}(x) exactly
        x = np.linspace(0.0, 1.0, 101)
        r = Moebius(2.0).reflect()
        assert np.max(np.abs(r.value(x) - Moebius(0.5).value(x))) < 1e-15

    def test_reflect_involution(self):
        f = compose(Moebius(2.0), Moebius(1.5))
        x = np.linspace(0.0, 1.0, 101)
        assert np.max(np.abs(f.reflect().reflect().value(x)
                             - f.value(x))) < 1e-14

    def test_reflect_tail_precision(self):
        # structural reflection keeps relative precision near the endpoint
        f = Moebius(2.0).inverse_map().reflect()
        y = 1e-14
        expected = Moebius(2.0).value(y)  # the reflected contraction rate
        assert f.value(y) == pytest.approx(y / 2.0, rel=1e-12)
        assert expected == pytest.approx(y / 2.0, rel=1e-10)


class TestMetric:
    def test_zero_on_equal(self):
        f = Moebius(2.0)
        for r in ("1", "1+bv", "1+ac", "2"):
            assert metric(f, f, r) == pytest.approx(0.0, abs=1e-12)

    def test_moebius_1bv_starred(self):
        # log Df monotone from -ln 2 to ln 2: var = 2 ln 2
        d = metric(Moebius(2.0), identity(), "1+bv", starred=True)
        assert d == pytest.approx(2.0 * math.log(2.0), abs=1e-6)

    def test_moebius_1bv_unstarred(self):
        # sup |x - x/(2-x)| = 3 - 2 sqrt(2) at x = 2 - sqrt(2)
        d = metric(Moebius(2.0), identity(), "1+bv", starred=False)
        assert d == pytest.approx(3.0 - 2.0 * math.sqrt(2.0)
                                  + 2.0 * math.log(2.0), abs=1e-6)

    def test_symmetry_and_triangle(self):
        rng = random.Random(7)
        maps = [Moebius(math.exp(rng.uniform(-1, 1))) for _ in range(6)]
        for r in ("1", "1+bv"):
            for f, g, h in [maps[:3], maps[3:]]:
                assert metric(f, g, r) == pytest.approx(metric(g, f, r),
                                                        abs=1e-9)
                assert metric(f, h, r) <= metric(f, g, r) + metric(g, h, r) \
                    + 1e-9

    def test_d1_below_d1bv(self):
        f, g = Moebius(2.0), Moebius(1.3)
        assert metric(f, g, "1") <= metric(f, g, "1+bv") + 1e-12

    def test_starred_sandwich(self):
        f, g = Moebius(2.5), Moebius(0.7)
        for r in ("1", "1+bv", "1+ac", "2"):
            ds, d = metric(f, g, r, starred=True), metric(f, g, r)
            assert ds - 1e-12 <= d <= 2.0 * ds + 1e-12

    def test_unsupported_selector(self):
        with pytest.raises(ValueError):
            metric(Moebius(2.0), identity(), "3")


class TestRotationNumber:
    def test_rigid_rotation(self):
        assert rotation_number(Rotation(0.375)).value == pytest.approx(
            0.375, abs=1e-12)

    def test_conjugated_golden(self):
        f = conjugated_rotation(GOLDEN)
        rn = rotation_number(f)
        assert rn.value == pytest.approx(GOLDEN, abs=1e-6)

    def test_fixed_point_gives_zero(self):
        # displacement vanishing at 0 pins the rotation number at 0
        x = np.linspace(0.0, 1.0, 4097)
        f = CircleGrid(GridFunction(0.1 * np.sin(2 * np.pi * x) ** 2))
        assert rotation_number(f).value == pytest.approx(0.0, abs=1e-9)

    def test_iterate_scaling(self):
        f = conjugated_rotation(GOLDEN)
        r1 = rotation_number(f)
        r2 = rotation_number(circle_compose(f, f))
        expect = (2.0 * r1.value) % 1.0
        tol = 1e-6 + 2 * r1.uncertainty + r2.uncertainty
        assert min(abs(r2.value - expect), 1 - abs(r2.value - expect)) < tol


class TestCommutatorResidual:
    def test_powers_commute(self):
        f = Moebius(2.0)
        t = ActionTuple(generators=(f, iterate(f, 2)))
        assert commutator_residual(t) < 1e-9

    def test_flow_times_commute(self):
        X = moebius_field(2.0)
        t = ActionTuple(generators=(FlowTime(X, 1.0),
                                    FlowTime(X, math.sqrt(2.0))))
        assert commutator_residual(t) < 1e-5

    def test_non_commuting_pair_detected(self):
        f = Moebius(2.0)
        g = BumpPerturbation(identity(), [Bump(0.5, 0.2, 0.1)])
        t = ActionTuple(generators=(f, g))
        assert commutator_residual(t) > 1e-3


class TestFixedPointAnalysis:
    def test_single_moebius(self):
        rep = fixed_point_analysis(ActionTuple(generators=(Moebius(2.0),)))
        locs = sorted(p.location for p in rep.points)
        assert locs == pytest.approx([0.0, 1.0], abs=1e-9)
        by_loc = {round(p.location): p for p in rep.points}
        assert by_loc[0].classification == "hyperbolic"
        assert by_loc[0].multipliers[0] == pytest.approx(-math.log(2.0),
                                                         abs=1e-9)
        assert by_loc[1].multipliers[0] == pytest.approx(math.log(2.0),
                                                         abs=1e-9)

    def test_identity_tuple(self):
        rep = fixed_point_analysis(ActionTuple(generators=(identity(),)))
        assert rep.global_fixed_intervals == ((0.0, 1.0),)
        assert rep.components == ()

    def test_parabolic_endpoint(self):
        X = AnalyticField("parabolic_right", 1.0)
        t = ActionTuple(generators=(FlowTime(X, 1.0), FlowTime(X, 0.5)))
        rep = fixed_point_analysis(t)
        by_loc = {round(p.location): p for p in rep.points}
        assert by_loc[1].classification in ("parabolic", "2-parabolic")
        assert by_loc[0].classification == "hyperbolic"


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0))
def test_moebius_group_isomorphism(a, b):
    """h_a o h_b = h_{ab} pointwise."""
    x = np.linspace(0.0, 1.0, 33)
    lhs = Moebius(a).value(Moebius(b).value(x))
    rhs = Moebius(a * b).value(x)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 3.0), st.integers(1, 5))
def test_iterate_is_power(a, n):
    x = np.linspace(0.0, 1.0, 33)
    assert np.max(np.abs(iterate(Moebius(a), n).value(x)
                         - Moebius(a ** n).value(x))) < 1e-10
