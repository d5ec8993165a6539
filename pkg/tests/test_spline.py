import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbcrawl.spline import HermiteSegment, PhaseSpline, hermite_coefficients, resample


def endpoint_system_solution(u0, du0, u1, du1, T):
    # oracle: solve the 4x4 endpoint conditions directly
    A = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [1, T, T**2, T**3], [0, 1, 2 * T, 3 * T**2]], float)
    return np.linalg.solve(A, [u0, du0, u1, du1])


def printed_coefficients(u0, du0, u1, du1, T):
    # the closed form as typeset in the source formulation
    a2 = -(3 * (u0 - u1) + T * (2 * du0 - du1)) / T**2
    a3 = -(2 * (u0 - u1) + T * (du0 - du1)) / T**3
    return u0, du0, a2, a3


def test_constant_segment():
    assert hermite_coefficients(2.5, 0, 2.5, 0, 3.0) == (2.5, 0, 0.0, 0.0)


def test_unit_step():
    expected = endpoint_system_solution(0, 0, 1, 0, 1.0)
    np.testing.assert_allclose(expected, [0, 0, 3, -2], atol=1e-14)
    np.testing.assert_allclose(hermite_coefficients(0, 0, 1, 0, 1.0), expected, atol=1e-14)


def test_printed_form_misses_end_value():
    a = printed_coefficients(0, 0, 1, 0, 1.0)
    assert abs(sum(a) - 1.0) > 1.0  # p(T) = 5, not 1


def test_straight_line():
    np.testing.assert_allclose(hermite_coefficients(0, 1, 1, 1, 1.0), [0, 1, 0, 0], atol=1e-15)


def test_nonpositive_duration():
    with pytest.raises(ValueError):
        hermite_coefficients(0, 0, 1, 0, 0.0)


def test_random_endpoint_identity():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        u0, du0, u1, du1 = rng.uniform(-10, 10, 4)
        T = rng.uniform(1e-3, 10)
        seg = HermiteSegment(T, u0, du0, u1, du1)
        scale = max(1.0, abs(u0), abs(u1), abs(du0), abs(du1))
        assert abs(seg(0.0) - u0) < 1e-10 * scale
        assert abs(seg(0.0, 1) - du0) < 1e-10 * scale
        assert abs(seg(T) - u1) < 1e-10 * scale
        assert abs(seg(T, 1) - du1) < 1e-10 * scale / min(T, 1.0)


@given(st.lists(st.floats(0.01, 5), min_size=1, max_size=8), st.integers(0, 2**31 - 1))
@settings(max_examples=50, deadline=None)
def test_c1_and_partition(durations, seed):
    rng = np.random.default_rng(seed)
    n = len(durations)
    sp = PhaseSpline.from_knots(durations, rng.normal(size=n + 1), rng.normal(size=n + 1))
    assert abs(sp.duration - sum(durations)) < 1e-9
    for t in sp.knot_times[1:-1]:
        k = int(np.searchsorted(sp.knot_times, t)) - 1
        left, right = sp.segments[k], sp.segments[k + 1]
        assert abs(left(left.duration) - right(0.0)) < 1e-10
        assert abs(left(left.duration, 1) - right(0.0, 1)) < 1e-10 * max(1.0, 1 / left.duration)


def test_eval_examples():
    assert PhaseSpline.constant(4.2, 3.0)(1.7) == 4.2
    sp = PhaseSpline([HermiteSegment(1.0, 0, 0, 1, 0)])
    assert sp(0.5) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        sp(1.5)


def test_derivative_consistency():
    rng = np.random.default_rng(5)
    sp = PhaseSpline.from_knots([0.7, 1.3, 2.0], rng.normal(size=4), rng.normal(size=4))
    h = 1e-6
    for t in rng.uniform(0.01, sp.duration - 0.01, 50):
        fd = (sp(t + h) - sp(t - h)) / (2 * h)
        d = sp(t, 1)
        assert abs(fd - d) <= 1e-5 * max(1.0, abs(d))
        fd2 = (sp(t + h, 1) - sp(t - h, 1)) / (2 * h)
        if not np.any(np.abs(sp.knot_times - t) < 2 * h):
            assert abs(fd2 - sp(t, 2)) <= 1e-4 * max(1.0, abs(sp(t, 2)))


def test_resample_counts():
    sp = PhaseSpline.from_knots([5.0] * 4, np.arange(5.0), np.zeros(5))
    t100, v100 = resample(sp, 100)
    t50, v50 = resample(sp, 50)
    assert len(t100) == 2001 and len(t50) == 1001
    assert t100[0] == 0.0 and t100[-1] == 20.0
    np.testing.assert_allclose(v50, v100[::2], atol=1e-12)
    _, vc = resample(PhaseSpline.constant(1.5, 20.0), 100)
    assert np.all(vc == 1.5)


def test_split_equal_preserves_curve():
    sp = PhaseSpline.from_knots([2.0, 1.0], [0, 1, -1], [0.5, 0, 2])
    sp3 = sp.split_equal(3)
    t = np.linspace(0, 3, 101)
    np.testing.assert_allclose(sp3(t), sp(t), atol=1e-12)
    assert len(sp3.segments) == 6
