"""Lifted metrics on mixtures of measures and the point-mass shortcuts."""

import numpy as np
import pytest

from bayesmerge import (
    DeterminingClass,
    DiscreteMeasure,
    InvalidInput,
    Level2Class,
    MeasureOnMeasures,
    RealLine,
    TupleClass,
    dirac,
    expected_distance_to_dirac,
    level2_dist,
    prokhorov,
    prokhorov_to_dirac,
    quotient_dist,
    w1_real,
)
from conftest import random_label_measure, random_real_measure


def _mixture(rng, space, k=5):
    support = [random_label_measure(rng, space) for _ in range(k)]
    return MeasureOnMeasures.uniform(space, support)


class TestMeasureOnMeasures:
    def test_merge_and_normalize(self, labels3, rng):
        p = random_label_measure(rng, labels3)
        mm = MeasureOnMeasures(labels3, [p, p], [0.5, 0.5])
        assert mm.support_size == 1
        assert mm.weights[0] == 1.0

    def test_rejects_bad(self, labels3, rng):
        p = random_label_measure(rng, labels3)
        with pytest.raises(InvalidInput):
            MeasureOnMeasures(labels3, [p], [0.9])


class TestLevel2:
    def test_zero_on_equal(self, labels3, rng):
        nu = _mixture(rng, labels3)
        for which, base in (("G1", "G1"), ("P", "P")):
            assert level2_dist(nu, nu, which, base) <= 1e-9

    def test_g1_to_dirac_is_expected_distance(self, labels3, rng):
        for _ in range(10):
            nu = _mixture(rng, labels3)
            e = random_label_measure(rng, labels3)
            lifted = level2_dist(nu, MeasureOnMeasures.dirac(e), "G1", "G1")
            shortcut = expected_distance_to_dirac(nu, e, "G1")
            assert abs(lifted - shortcut) <= 1e-9

    def test_p_between_diracs(self, labels3, rng):
        # the lifted Prokhorov distance of two point masses is min{1, base}
        p1 = random_label_measure(rng, labels3)
        p2 = random_label_measure(rng, labels3)
        base = prokhorov(p1, p2)
        val = level2_dist(
            MeasureOnMeasures.dirac(p1), MeasureOnMeasures.dirac(p2), "P", "P"
        )
        assert val == pytest.approx(min(1.0, base), abs=1e-9)

    def test_w_requires_classes(self, labels3, rng):
        nu = _mixture(rng, labels3)
        with pytest.raises(InvalidInput):
            level2_dist(nu, nu, "W", "W")

    def test_w_zero_and_positive(self, labels3, rng):
        ground = DeterminingClass.for_space(labels3, truncation_K=9)
        anchors = [random_label_measure(rng, labels3) for _ in range(3)]
        cls2 = Level2Class(ground, anchors, truncation_K=9)
        nu = _mixture(rng, labels3)
        e = random_label_measure(rng, labels3)
        assert level2_dist(nu, nu, "W", "W", cls=ground, cls2=cls2) == 0.0
        assert level2_dist(nu, MeasureOnMeasures.dirac(e), "W", "W", cls=ground, cls2=cls2) >= 0.0


class TestProkhorovToDirac:
    def test_zero_at_own_point(self, labels3, rng):
        e = random_label_measure(rng, labels3)
        assert prokhorov_to_dirac(MeasureOnMeasures.dirac(e), e, "P") <= 1e-12

    def test_two_measure_example(self, real_line):
        # mass 1/2 at base-distance 0.1 and 1/2 at 0.5: the survival mass
        # above 0.1 is 1/2 > 0.1, so the radius is 0.5
        e = dirac(real_line, 0.0)
        near = dirac(real_line, 0.1)
        far = dirac(real_line, 0.5)
        nu = MeasureOnMeasures(real_line, [near, far], [0.5, 0.5])
        assert prokhorov_to_dirac(nu, e, "P") == pytest.approx(0.5, abs=1e-12)
        lifted = level2_dist(nu, MeasureOnMeasures.dirac(e), "P", "P")
        assert lifted == pytest.approx(0.5, abs=1e-9)

    def test_agrees_with_level2(self, labels3, rng):
        for _ in range(200):
            nu = _mixture(rng, labels3, k=int(rng.integers(1, 6)))
            e = random_label_measure(rng, labels3)
            fast = prokhorov_to_dirac(nu, e, "P")
            lifted = level2_dist(nu, MeasureOnMeasures.dirac(e), "P", "P")
            assert abs(fast - lifted) <= 1e-9


class TestQuotient:
    def test_zero_on_equal(self, labels3):
        a = TupleClass(labels3, ["a", "b", "b"])
        assert quotient_dist(a, a, "G1") == 0.0
        assert quotient_dist(a, a, "P") == 0.0

    def test_m1_ground_distance(self, real_line):
        a = TupleClass(real_line, [0.0])
        b = TupleClass(real_line, [0.4])
        assert quotient_dist(a, b, "G1") == pytest.approx(0.4)
        assert quotient_dist(a, b, "P") == pytest.approx(0.4, abs=1e-9)
        far = TupleClass(real_line, [9.0])
        assert quotient_dist(a, far, "P") == pytest.approx(1.0, abs=1e-9)

    def test_permutation_invariance(self, real_line, rng):
        pts = rng.normal(size=4)
        perm = rng.permutation(pts)
        other = rng.normal(size=4)
        a1 = TupleClass(real_line, pts)
        a2 = TupleClass(real_line, perm)
        b = TupleClass(real_line, other)
        assert quotient_dist(a1, b, "G1") == quotient_dist(a2, b, "G1")

    def test_arity_mismatch(self, real_line):
        with pytest.raises(InvalidInput):
            quotient_dist(TupleClass(real_line, [0.0]), TupleClass(real_line, [0.0, 1.0]), "G1")

    def test_w1_reduction(self, real_line, rng):
        # the quotient metric is the transport distance of the two
        # point-configuration measures
        xs, ys = rng.normal(size=3), rng.normal(size=3)
        a, b = TupleClass(real_line, xs), TupleClass(real_line, ys)
        mu = DiscreteMeasure(real_line, xs, np.full(3, 1 / 3))
        nu = DiscreteMeasure(real_line, ys, np.full(3, 1 / 3))
        assert quotient_dist(a, b, "G1") == pytest.approx(w1_real(mu, nu), abs=1e-12)
