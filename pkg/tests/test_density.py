import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from strategies import lattice_sets
from sumsetlab import density as D
from sumsetlab.errors import NotFound, RadiusTooLarge, WrongConvention
from sumsetlab.families import gen_optimal_C, gen_upper_pair
from sumsetlab.lattice import LatticeSet, Window, build_set, make_set
from sumsetlab.morphology import dilate_cube, erode_cube, sumset


def odds(n):
    return LatticeSet.from_members(Window.classical(n), np.arange(1, n + 1, 2))


def naive_ratio(s, n):
    w = s.window
    members = set(s.coords())
    if w.low == 1:
        cells = [(x,) for x in range(1, n + 1)]
    else:
        import itertools
        cells = list(itertools.product(range(-n, n + 1), repeat=w.dim))
    return Fraction(sum(c in members for c in cells), len(cells))


@given(lattice_sets(max_radius=12, dims=(1, 2)))
def test_prefix_ratios_are_exact(a):
    prof = D.prefix_profile(a, sample_count=4)
    assert list(prof.n) == sorted(set(prof.n))
    for n, r in prof.samples:
        assert r == naive_ratio(a, n)
    lo, up = D.tail_estimates(prof)
    tail = [r for n, r in prof.samples if n * 2 >= a.window.radius]
    assert (lo, up) == (min(tail), max(tail))


def test_profile_examples():
    full = LatticeSet.full(Window.classical(500))
    assert all(r == 1 for _, r in D.prefix_profile(full).samples)
    assert D.tail_estimates(D.prefix_profile(full)) == (1, 1)
    prof = D.prefix_profile(odds(1000))
    for n, r in prof.samples:
        assert Fraction(1, 2) <= r <= Fraction(-(-n // 2), n)
    lo, up = D.tail_estimates(prof)
    assert lo == Fraction(1, 2) and up - Fraction(1, 2) <= Fraction(1, 500)


def test_profile_includes_n_and_geometric_samples():
    prof = D.prefix_profile(odds(10_000), sample_count=16, dense_tail=False)
    assert prof.n[-1] == 10_000 and len(prof.n) <= 17


def test_upper_pair_profile_oscillates():
    a, _ = gen_upper_pair(Window.classical(2**16))
    lo, up = D.tail_estimates(D.prefix_profile(a))
    assert abs(lo - Fraction(1, 2)) < Fraction(1, 50)
    assert abs(up - Fraction(2, 3)) < Fraction(1, 50)


def test_schnirelmann_examples():
    w = Window.classical(100)
    assert D.schnirelmann(build_set(w, range(2, 101, 2))) == 0
    assert D.schnirelmann(odds(100)) == Fraction(1, 2)
    assert D.schnirelmann(LatticeSet.full(w)) == 1
    with pytest.raises(WrongConvention):
        D.schnirelmann(LatticeSet.full(Window.centered(3)))


@given(lattice_sets(max_radius=30, dims=(1,)))
def test_schnirelmann_is_min_prefix(a):
    if a.window.low != 1:
        return
    sigma = D.schnirelmann(a)
    ratios = [naive_ratio(a, n) for n in range(1, a.window.radius + 1)]
    assert sigma == min(ratios)
    assert all(sigma <= r <= 1 for r in ratios)
    if 1 not in a:
        assert sigma == 0


def test_banach_examples():
    w = Window.centered(40)
    thick = build_set(w, range(-5, 6))
    assert D.banach_profile(thick, [5]) == [(5, Fraction(1))]
    evens = build_set(w, range(-40, 41, 2))
    assert D.banach_profile(evens, [5]) == [(5, Fraction(6, 11))]
    assert D.banach_profile(LatticeSet.empty(w), [5]) == [(5, Fraction(0))]
    with pytest.raises(RadiusTooLarge):
        D.banach_profile(evens, [21])


@given(lattice_sets(max_radius=12, dims=(1, 2)), st.integers(1, 6))
def test_banach_dominates_prefix(a, n):
    w = a.window
    if 2 * n > w.radius or 2 * n + 1 > w.side:
        with pytest.raises(RadiusTooLarge):
            D.banach_profile(a, [n])
        return
    (_, sup), = D.banach_profile(a, [n])
    if w.low != 1:
        assert sup >= naive_ratio(a, n)
    # brute force over every in-window cube
    import itertools
    members = set(a.coords())
    best = Fraction(0)
    lo, hi = w.low + n, w.high - n
    for x in itertools.product(range(lo, hi + 1), repeat=w.dim):
        cells = itertools.product(*[range(c - n, c + n + 1) for c in x])
        best = max(best, Fraction(sum(c in members for c in cells), (2 * n + 1) ** w.dim))
    assert sup == best


def test_witness_table_full_window():
    table = D.witness_table(LatticeSet.full(Window.classical(400)), 3, 3)
    assert len(table.entries) == 16
    assert all(e.lower_est == e.upper_est == e.strong_upper_est == 1 for e in table.entries)


def test_witness_table_guards_radius():
    with pytest.raises(RadiusTooLarge):
        D.witness_table(LatticeSet.full(Window.classical(40)), 6, 5)


@given(st.integers(0, 2**32 - 1))
def test_witness_table_monotone(seed):
    rng = np.random.default_rng(seed)
    w = Window.classical(400)
    s = make_set(w, rng.random(400) < rng.uniform(0.3, 0.9))
    table = D.witness_table(s, 4, 4)
    e = {(x.m, x.k): x for x in table.entries}
    for m in range(4):
        for k in range(5):
            if True:
                assert e[m + 1, k].lower_est >= e[m, k].lower_est
                assert e[m + 1, k].upper_est >= e[m, k].upper_est


@given(st.integers(0, 2**32 - 1))
def test_witness_sets_are_nested(seed):
    # the estimates are normalized per interior, so nesting is checked on the sets themselves
    rng = np.random.default_rng(seed)
    w = Window.classical(300)
    s = make_set(w, rng.random(300) < 0.6)
    for m in range(3):
        for k in range(3):
            wk = D.witness_set(s, m, k)
            assert D.witness_set(s, m, k + 1).issubset(wk)
            assert wk.issubset(D.witness_set(s, m + 1, k))


def test_witness_table_reports():
    table = D.witness_table(odds(200), 1, 1, source="odds")
    text = table.to_csv().splitlines()
    assert text[0] == "m,k,lower,upper,strong"
    assert text[1].startswith("0,0,1/2,")
    rec = json.loads(table.to_json())
    assert rec["source"] == "odds" and rec["entries"][0]["lower_est"] == "1/2"


def test_witness_table_threads_are_deterministic():
    rng = np.random.default_rng(3)
    s = make_set(Window.classical(500), rng.random(500) < 0.7)
    assert (D.witness_table(s, 3, 3, threads=3).to_csv()
            == D.witness_table(s, 3, 3, threads=1).to_csv())


def test_strong_sequence_is_used_verbatim():
    s = odds(400)
    t = D.witness_table(s, 0, 0, strong_sequence=[201])
    assert t.entries[0].strong_upper_est == Fraction(101, 201)


def test_minimal_m_search_examples():
    assert D.minimal_m_search(LatticeSet.full(Window.classical(400)), Fraction(1), 0, 3) == 0
    w = Window.classical(2**16)
    a, b = gen_upper_pair(w)
    assert D.minimal_m_search(sumset(a, b), Fraction(2, 3), Fraction(1, 50), 4, "upper") == 0
    # odds need m = 1 before any k-cube fits
    assert D.minimal_m_search(odds(400), Fraction(1), 0, 2) == 1


def test_optimal_C_has_no_lower_witness_level():
    # at 10! the tail block has s = 4, so only m = 1 leaves full gaps behind
    c = gen_optimal_C(Window.classical(math.factorial(10)))
    assert D.minimal_m_search(c, Fraction(1, 2), 0, 4, "lower", m_max=1) is None


def test_saturation_examples():
    full = LatticeSet.full(Window.classical(400))
    assert D.saturation_search(full, Fraction(1, 10)) == 0
    assert D.saturation_search(full, Fraction(1, 10), "banach_dilate") == 0
    assert D.saturation_search(odds(1000), Fraction(1, 10)) == 0
    _, b = gen_upper_pair(Window.classical(40320))
    m = D.saturation_search(b, Fraction(1, 10), "banach_dilate", [100])
    (_, ratio), = D.banach_profile(dilate_cube(b, m), [100])
    assert ratio > Fraction(9, 10)
    (_, before), = D.banach_profile(dilate_cube(b, m - 1), [100])
    assert before <= Fraction(9, 10)


def test_saturation_not_found():
    w = Window.classical(400)
    sparse = build_set(w, [200])
    with pytest.raises(NotFound):
        D.saturation_search(sparse, Fraction(1, 100), "banach_dilate", [190])


def test_adaptive_gap_examples():
    full = LatticeSet.full(Window.classical(800))
    assert D.adaptive_gap_check(full, [1, 2, 4], 2) == 1
    rng = np.random.default_rng(0)
    s = make_set(Window.classical(800), rng.random(800) < 0.5)
    expect, _ = D.tail_estimates(D.prefix_profile(s))
    assert D.adaptive_gap_check(s, [0, 0], 1) == expect


def test_adaptive_gap_rejects_decreasing_f():
    with pytest.raises(ValueError):
        D.adaptive_gap_check(odds(400), [3, 1], 1)
    with pytest.raises(RadiusTooLarge):
        D.adaptive_gap_check(odds(400), [0, 200], 1)


def test_exact_extremes_settle_near_ties():
    counts = np.array([333333333, 1000000000 // 3])
    sizes = np.array([1000000000, 999999999])
    lo = D.exact_min_ratio(counts, sizes)
    assert lo == min(Fraction(333333333, 1000000000), Fraction(333333333, 999999999))


def test_thick_bound_small_random():
    rng = np.random.default_rng(11)
    w = Window.classical(2000)
    for k in (1, 2):
        for _ in range(20):
            bits = rng.random(2000) < 0.95
            bits[::2 * k + 1] = False
            a = make_set(w, bits)
            assert erode_cube(a, k).cardinality == 0
            for n, r in D.banach_profile(a, [100 * k, 200 * k]):
                assert r <= Fraction(2 * k, 2 * k + 1) + Fraction(2 * k + 1, n)
