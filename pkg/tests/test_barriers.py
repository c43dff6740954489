import math

import numpy as np
import pytest

from gracecbf.barriers import (
    BarrierSpec,
    CatastropheBoundary,
    ClassKFn,
    ComplexRoots,
    DegenerateConstraint,
    DistanceBarrier,
    GracefulBarrier,
    OutsideDomain,
    SafetyRegion,
    characteristic_roots,
    classify_region,
    exponential_constraint,
    graceful1_constraint,
    graceful2_constraint,
    high_order_h2,
    layer_transform,
    reciprocal_constraint,
    zeroing_constraint,
)
from gracecbf.plants import double_integrator, first_order_integrator

WALL = GracefulBarrier(raw=DistanceBarrier(0.0), catastrophe=1.0, primary=3.0)
P1 = first_order_integrator()
P2 = double_integrator()


class TestLayerTransform:
    def test_primary_boundary_maps_to_zero(self):
        assert layer_transform(3.0, 1.0, 3.0) == 0.0

    def test_catastrophe_boundary_maps_to_minus_one(self):
        assert layer_transform(1.0, 1.0, 3.0) == -1.0

    def test_hand_value(self):
        assert layer_transform(5.0, 1.0, 3.0) == 1.0

    def test_rejects_degenerate_ordering(self):
        with pytest.raises(ValueError):
            layer_transform(0.0, 3.0, 3.0)
        with pytest.raises(ValueError):
            layer_transform(0.0, 4.0, 3.0)

    def test_anchors_exact_for_many_thresholds(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            a = float(rng.uniform(-50, 50))
            b = a + float(rng.uniform(1e-6, 40))
            assert layer_transform(b, a, b) == 0.0
            assert layer_transform(a, a, b) == -1.0


class TestGracefulBarrier:
    def test_wall_layer_values(self):
        assert WALL.value(3.0) == 0.0
        assert WALL.value(1.0) == -1.0
        assert WALL.value(5.0) == 1.0
        assert WALL.value(2.0) == -0.5

    def test_grad_and_curvature(self):
        assert WALL.grad(2.0) == 0.5
        assert WALL.curvature(2.0) == 0.0

    def test_rejects_bad_ordering(self):
        with pytest.raises(ValueError):
            GracefulBarrier(raw=DistanceBarrier(0.0), catastrophe=3.0, primary=1.0)


class TestClassifyRegion:
    def test_boundaries(self):
        assert classify_region(0.0) is SafetyRegion.SAFE
        assert classify_region(-0.5) is SafetyRegion.DANGER
        assert classify_region(-1.0) is SafetyRegion.CATASTROPHE

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            classify_region(float("nan"))

    def test_total_and_exclusive(self):
        for hg in np.linspace(-3.0, 3.0, 4001):
            hg = float(hg)
            label = classify_region(hg)
            members = [hg >= 0.0, -1.0 < hg < 0.0, hg <= -1.0]
            assert sum(members) == 1
            expected = [SafetyRegion.SAFE, SafetyRegion.DANGER, SafetyRegion.CATASTROPHE][
                members.index(True)
            ]
            assert label is expected


class TestClassKFn:
    def test_zero_at_zero(self):
        assert ClassKFn(3.0)(0.0) == 0.0

    def test_strictly_increasing(self):
        fn = ClassKFn(0.7)
        grid = np.linspace(-5, 5, 101)
        vals = [fn(float(r)) for r in grid]
        assert all(v1 < v2 for v1, v2 in zip(vals, vals[1:]))

    def test_rejects_bad_gain_or_kind(self):
        with pytest.raises(ValueError):
            ClassKFn(0.0)
        with pytest.raises(ValueError):
            ClassKFn(1.0, kind="tanh")


class TestZeroing:
    SPEC = BarrierSpec.zeroing(DistanceBarrier(3.0), gamma=3.0)

    def test_hand_values(self):
        assert zeroing_constraint((5.0,), self.SPEC, P1).offset == -6.0
        assert zeroing_constraint((3.0,), self.SPEC, P1).offset == 0.0
        assert zeroing_constraint((2.0,), self.SPEC, P1).offset == 3.0

    def test_normal_is_one(self):
        assert zeroing_constraint((5.0,), self.SPEC, P1).normal == 1.0

    def test_degenerate_on_second_order_plant(self):
        with pytest.raises(DegenerateConstraint):
            zeroing_constraint((5.0, -1.0), self.SPEC, P2)


class TestReciprocal:
    SPEC = BarrierSpec.reciprocal(DistanceBarrier(3.0), gamma=3.0)

    def test_hand_value(self):
        # B = 1/h, Bdot <= gamma h  <=>  hdot >= -gamma h^3; at h = 2: -24
        assert reciprocal_constraint((5.0,), self.SPEC, P1).offset == -24.0

    def test_tight_bound_near_boundary(self):
        c = reciprocal_constraint((3.0001,), self.SPEC, P1)
        assert math.isfinite(c.offset)
        assert abs(c.offset) < 1e-9

    def test_boundary_excluded(self):
        with pytest.raises(OutsideDomain):
            reciprocal_constraint((3.0,), self.SPEC, P1)
        with pytest.raises(OutsideDomain):
            reciprocal_constraint((2.0,), self.SPEC, P1)


class TestExponential:
    SPEC = BarrierSpec.exponential(DistanceBarrier(3.0), gamma1=4.5, gamma2=0.5)

    def test_hand_values(self):
        assert exponential_constraint((3.0, 0.0), self.SPEC, P2).offset == 0.0
        assert exponential_constraint((5.0, -25.0), self.SPEC, P2).offset == 120.5
        assert exponential_constraint((10.0, 0.0), self.SPEC, P2).offset == -15.75

    def test_rejects_nonpositive_gains(self):
        with pytest.raises(ValueError):
            BarrierSpec.exponential(DistanceBarrier(3.0), gamma1=0.0, gamma2=0.5)
        with pytest.raises(ValueError):
            BarrierSpec.exponential(DistanceBarrier(3.0), gamma1=4.5, gamma2=-1.0)

    def test_requires_second_order_plant(self):
        with pytest.raises(DegenerateConstraint):
            exponential_constraint((5.0,), self.SPEC, P1)

    def test_curvature_term(self):
        # h = x^2 - 1 on the double integrator: 2x u >= -g1 g2 h - (g1+g2) 2xv - 2v^2
        class Quadratic:
            def value(self, x):
                return x * x - 1.0

            def grad(self, x):
                return 2.0 * x

            def curvature(self, x):
                return 2.0

        spec = BarrierSpec.exponential(Quadratic(), gamma1=1.0, gamma2=2.0)
        c = exponential_constraint((2.0, 3.0), spec, P2)
        # acoef = 4; rhs = -2*3 - 3*12 - 2*9 = -60; offset = -15
        assert c.normal == 1.0
        assert c.offset == -15.0


class TestHighOrderH2:
    def test_hand_values(self):
        b = DistanceBarrier(3.0)
        assert high_order_h2((3.0, 0.0), 4.5, b) == 0.0
        assert high_order_h2((5.0, -25.0), 4.5, b) == -16.0
        assert high_order_h2((10.0, -25.0), 4.5, b) == 6.5

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            high_order_h2((float("nan"), 0.0), 4.5, DistanceBarrier(3.0))


class TestGraceful1:
    SPEC = BarrierSpec.graceful1(WALL, gamma=3.0)

    def test_hand_values(self):
        assert graceful1_constraint((3.0,), self.SPEC, P1).offset == 0.0
        assert graceful1_constraint((5.0,), self.SPEC, P1).offset == -3.0
        assert graceful1_constraint((2.0,), self.SPEC, P1).offset == 6.0

    def test_catastrophe_boundary(self):
        with pytest.raises(CatastropheBoundary):
            graceful1_constraint((1.0,), self.SPEC, P1)
        with pytest.raises(CatastropheBoundary):
            graceful1_constraint((0.5,), self.SPEC, P1)

    def test_offset_monotone_tightening(self):
        # strictly decreasing in x on (x_w, inf); +inf at the wall,
        # -gamma (x_sf - x_w) far away
        x = 1.0 + np.logspace(-6.0, 3.0, 1000)
        c = np.array([graceful1_constraint((float(v),), self.SPEC, P1).offset for v in x])
        assert np.all(np.diff(c) < 0.0)
        assert c[0] > 1e5
        assert -6.0 < c[-1] < -5.95

    def test_matches_zeroing_to_first_order_at_boundary(self):
        zspec = BarrierSpec.zeroing(DistanceBarrier(3.0), gamma=3.0)
        ratios = []
        for delta in (1e-3, 1e-4, 1e-5):
            worst = 0.0
            for x in (3.0 + delta, 3.0 - delta):
                cg = graceful1_constraint((x,), self.SPEC, P1).offset
                cz = zeroing_constraint((x,), zspec, P1).offset
                worst = max(worst, abs(cg - cz) / abs(x - 3.0))
            ratios.append(worst)
        # exact ratio is 3 |x - 3| / (x - 1) ~ 1.5 delta
        assert ratios[0] < 2e-3
        assert ratios[1] < ratios[0] / 5.0
        assert ratios[2] < ratios[1] / 5.0


class TestGraceful2:
    SPEC = BarrierSpec.graceful2(WALL, zeta=2.0, omega_n=2.0)

    def test_hand_values(self):
        assert graceful2_constraint((3.0, 0.0), self.SPEC, P2).offset == 0.0
        assert graceful2_constraint((2.0, -25.0), self.SPEC, P2).offset == 208.0
        assert graceful2_constraint((5.0, 0.0), self.SPEC, P2).offset == -4.0

    def test_catastrophe_boundary(self):
        with pytest.raises(CatastropheBoundary):
            graceful2_constraint((1.0, -5.0), self.SPEC, P2)

    def test_rejects_bad_gains(self):
        with pytest.raises(ValueError):
            BarrierSpec.graceful2(WALL, zeta=0.0, omega_n=2.0)
        with pytest.raises(ValueError):
            BarrierSpec.graceful2(WALL, zeta=1.0, omega_n=0.0)

    def test_reduces_to_exponential_at_primary_boundary(self):
        # linearized at hg = 0 the graceful constraint matches the exponential
        # one built from the characteristic roots, for any velocity
        rng = np.random.default_rng(11)
        for zeta in (1.5, 2.0, 3.0):
            g1, g2 = characteristic_roots(zeta, 2.0)
            espec = BarrierSpec.exponential(DistanceBarrier(3.0), gamma1=g1, gamma2=g2)
            gspec = BarrierSpec.graceful2(WALL, zeta=zeta, omega_n=2.0)
            for v in rng.uniform(-100.0, 100.0, 100):
                ce = exponential_constraint((3.0, float(v)), espec, P2).offset
                cg = graceful2_constraint((3.0, float(v)), gspec, P2).offset
                assert abs(ce - cg) <= 1e-9


class TestBarrierSpecValidation:
    def test_graceful_requires_graceful_barrier(self):
        with pytest.raises(TypeError):
            BarrierSpec.graceful1(DistanceBarrier(3.0), gamma=3.0)

    def test_plain_families_reject_graceful_barrier(self):
        with pytest.raises(TypeError):
            BarrierSpec.zeroing(WALL, gamma=3.0)

    def test_gamma_required_positive(self):
        with pytest.raises(ValueError):
            BarrierSpec.zeroing(DistanceBarrier(3.0), gamma=-1.0)


class TestCharacteristicRoots:
    def test_critical_damping(self):
        assert characteristic_roots(1.0, 2.0) == (2.0, 2.0)

    def test_hand_value(self):
        g1, g2 = characteristic_roots(2.0, 2.0)
        assert abs(g1 - (4.0 - 2.0 * math.sqrt(3.0))) < 1e-12
        assert abs(g2 - (4.0 + 2.0 * math.sqrt(3.0))) < 1e-12

    def test_complex_roots_rejected(self):
        with pytest.raises(ComplexRoots):
            characteristic_roots(0.5, 2.0)

    def test_omega_must_be_positive(self):
        with pytest.raises(ValueError):
            characteristic_roots(2.0, 0.0)

    def test_vieta_identities(self):
        rng = np.random.default_rng(3)
        zetas = rng.uniform(1.0, 10.0, 10_000)
        omegas = rng.uniform(1e-6, 10.0, 10_000)
        for zeta, wn in zip(zetas, omegas):
            g1, g2 = characteristic_roots(float(zeta), float(wn))
            assert 0.0 < g1 <= g2
            assert abs(g1 * g2 - wn * wn) <= 1e-12 * wn * wn
            assert abs(g1 + g2 - 2.0 * zeta * wn) <= 1e-12 * 2.0 * zeta * wn
