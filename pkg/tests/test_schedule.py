import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbcrawl.schedule import CONTACT, SWING, ContactSchedule, arm_phase_kinds, staggered_schedule


def test_single_contact_phase():
    s = ContactSchedule.from_durations([(20.0,)], True)
    for t in (0.0, 7.3, 20.0):
        assert s.phase_at(0, t).kind == CONTACT


def test_prefix_sum_lookup():
    s = ContactSchedule.from_durations([(5, 5, 5, 5)], True)
    info = s.phase_at(0, 7.0)
    assert (info.kind, info.index, info.local_time) == (SWING, 1, 2.0)
    assert s.phase_at(0, 5.0).index == 1  # boundary belongs to the later phase


def test_final_instant():
    s = ContactSchedule.from_durations([(5, 5, 5, 5)], True)
    info = s.phase_at(0, 20.0)
    assert info.index == 3 and info.local_time == 5.0


def test_out_of_range():
    s = ContactSchedule.from_durations([(5, 5)], True)
    with pytest.raises(ValueError):
        s.phase_at(0, 10.5)


def test_partition_enforced():
    with pytest.raises(ValueError):
        ContactSchedule.from_durations([(5, 5), (5, 4)], True, total=10.0)


def test_counts_case_starts():
    s1 = staggered_schedule(4, 4, 20.0, starts_in_contact=True)
    assert s1.count_in_contact(0.0) == 4
    s2 = staggered_schedule(4, 4, 20.0, starts_in_contact=False)
    assert s2.count_in_contact(0.0) == 0
    ts = np.linspace(0, 20, 2001)
    counts = [s1.count_in_contact(t) for t in ts]
    assert set(counts) <= {3, 4} and 3 in counts


def test_phase_kinds():
    assert arm_phase_kinds(4, True) == (CONTACT, SWING, CONTACT, SWING, CONTACT, SWING, CONTACT)
    assert arm_phase_kinds(2, False) == (SWING, CONTACT, SWING, CONTACT)


@given(st.lists(st.floats(0.01, 10), min_size=1, max_size=9), st.booleans())
@settings(max_examples=60, deadline=None)
def test_partition_monotone_roundtrip(durations, first_contact):
    s = ContactSchedule.from_durations([durations], first_contact)
    total = s.total
    # tiling: measure of phases equals total
    assert abs(sum(d for d in s.arms[0].durations) - total) < 1e-9
    ts = np.linspace(0, total, 300)
    idx = [s.phase_at(0, t).index for t in ts]
    assert all(a <= b for a, b in zip(idx, idx[1:]))
    back = ContactSchedule.from_boundaries(s.boundaries(), first_contact)
    np.testing.assert_allclose(back.arms[0].durations, durations, atol=1e-12)
