import itertools

import numpy as np
from hypothesis import given, strategies as st

from gplab.lattice import build_lattice, index_of


def test_mode_counts():
    assert build_lattice(0).mode_count_plus == 0
    assert build_lattice(0).mode_count == 1
    assert build_lattice(1).mode_count_plus == 26
    assert build_lattice(2).mode_count_plus == 124


def test_zero_index_and_absent(lat1):
    assert index_of(lat1, (0, 0, 0)) == lat1.zero_index
    assert index_of(lat1, (2, 0, 0)) is None
    i = index_of(lat1, (1, -1, 0))
    assert lat1.mode_at(i) == (1, -1, 0)


def test_lexicographic_order():
    lat = build_lattice(2)
    rows = [tuple(m) for m in lat.modes]
    assert rows == sorted(rows)
    assert rows == list(itertools.product(range(-2, 3), repeat=3))


def test_deterministic_ordering():
    a, b = build_lattice(3), build_lattice(3)
    assert np.array_equal(a.modes, b.modes)


def test_p2_is_integer_norm_times_four_pi_squared(lat1):
    n2 = np.sum(lat1.modes.astype(float) ** 2, axis=1)
    assert np.allclose(lat1.p2, 4 * np.pi**2 * n2, rtol=0, atol=1e-12)


@given(st.integers(0, 3), st.data())
def test_round_trip_and_inversion(pmax, data):
    lat = build_lattice(pmax)
    n = tuple(data.draw(st.integers(-pmax, pmax)) for _ in range(3))
    i = lat.index_of(n)
    assert lat.mode_at(i) == n
    j = lat.index_of(tuple(-c for c in n))
    assert j is not None and lat.neg[i] == j


@given(st.integers(1, 2), st.data())
def test_sum_table_matches_vector_addition(pmax, data):
    lat = build_lattice(pmax)
    i = data.draw(st.integers(0, lat.mode_count - 1))
    j = data.draw(st.integers(0, lat.mode_count - 1))
    s = lat.modes[i] + lat.modes[j]
    k = lat.sum_table[i, j]
    if np.max(np.abs(s)) > pmax:
        assert k == -1
    else:
        assert tuple(lat.modes[k]) == tuple(s)
