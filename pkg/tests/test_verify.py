import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from strategies import lattice_sets
from sumsetlab import verify as V
from sumsetlab.errors import ConfigInvalid, HypothesisFailed, NotCoverable, RadiusTooLarge
from sumsetlab.lattice import LatticeSet, Window, build_set, make_set


def sigma_naive(members, n):
    return min(Fraction(sum(1 for x in members if x <= k), k) for k in range(1, n + 1))


def zero_sum_naive(a, b, n):
    a0, b0 = set(a) | {0}, set(b) | {0}
    return {x + y for x in a0 for y in b0 if 1 <= x + y <= n}


def subset(n, mask):
    return [i + 1 for i in range(n) if mask >> i & 1]


# -- Mann ----------------------------------------------------------------

def test_mann_examples():
    w = Window.classical(50)
    odds = build_set(w, range(1, 51, 2))
    evens = build_set(w, range(2, 51, 2))
    assert V.mann_sigma_sum(odds, odds) == 1
    assert V.mann_sigma_sum(LatticeSet.full(w), LatticeSet.empty(w)) == 1
    v = V.mann_check(odds, odds)
    assert v.holds and v.lhs == 1 and v.rhs == 1 and v.witness is None
    v = V.mann_check(evens, evens)
    assert v.holds and v.rhs == 0


@given(st.integers(1, 9), st.data())
def test_mann_sigma_sum_matches_naive(n, data):
    ma, mb = data.draw(st.integers(0, 2**n - 1)), data.draw(st.integers(0, 2**n - 1))
    a, b = subset(n, ma), subset(n, mb)
    w = Window.classical(n)
    got = V.mann_sigma_sum(build_set(w, a), build_set(w, b))
    assert got == sigma_naive(zero_sum_naive(a, b, n), n)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_mann_exhaustive_agrees_with_checker(n):
    w = Window.classical(n)
    sets = [build_set(w, subset(n, m)) for m in range(2**n)]
    bad = sum(not V.mann_check(a, b).holds for a in sets for b in sets)
    assert V.mann_exhaustive(n) == (bad, 4**n)
    assert bad == 0


def test_mann_exhaustive_threads_agree():
    assert V.mann_exhaustive(8, threads=4) == V.mann_exhaustive(8) == (0, 4**8)


def test_mann_exhaustive_limits():
    with pytest.raises(ValueError):
        V.mann_exhaustive(15)
    with pytest.raises(ValueError):
        V.mann_exhaustive(0)


def test_mann_random_small():
    bad, fails = V.mann_random(50, 200, seed=1)
    assert bad == 0 and fails == []


def test_verdict_json():
    w = Window.classical(10)
    v = V.mann_check(build_set(w, [1, 3]), build_set(w, [1]))
    rec = v.to_dict()
    assert rec["check"] == "mann" and rec["holds"] is True
    assert len(rec["inputs_digest"]) == 16
    assert V.mann_check(build_set(w, [1, 3]), build_set(w, [1])).to_json() == v.to_json()


# -- covering lemma --------------------------------------------------------

def test_covering_examples():
    v = V.covering_bound_check(V.CoverInstance([1, 2, 3, 4], [[1, 2], [3, 4]], 1, Fraction(1, 2), [1]))
    assert v.holds and v.lhs == Fraction(1, 4) and v.rhs == Fraction(1, 2)
    v = V.covering_bound_check(V.CoverInstance([1, 2], [[1, 2]], 1, Fraction(1, 3), []))
    assert v.holds and v.lhs == 0
    with pytest.raises(HypothesisFailed) as err:
        V.covering_bound_check(V.CoverInstance([1, 2], [[1]], 1, Fraction(1, 2), []))
    assert err.value.reason == "uncovered cell" and err.value.detail == 2


def test_covering_hypothesis_failures():
    with pytest.raises(HypothesisFailed) as err:
        V.covering_bound_check(V.CoverInstance([1, 2], [[1, 2], [1]], 1, Fraction(1, 2), []))
    assert err.value.reason == "multiplicity exceeded"
    with pytest.raises(HypothesisFailed) as err:
        V.covering_bound_check(V.CoverInstance([1, 2], [[1, 2]], 1, Fraction(1, 3), [1]))
    assert err.value.reason == "per-set ratio exceeded"


def test_covering_accepts_multidimensional_cells():
    ground = [(0, 0), (0, 1), (1, 0), (1, 1)]
    v = V.covering_bound_check(V.CoverInstance(ground, [ground[:2], ground[2:]], 1, Fraction(1, 2), [(0, 0)]))
    assert v.holds


def brute_sweep(max_ground, max_subsets, thresholds):
    instances = checked = violations = 0
    for size in range(1, max_ground + 1):
        ground = list(range(size))
        masks = range(1, 2**size)
        for r in range(1, max_subsets + 1):
            for coll in itertools.combinations_with_replacement(masks, r):
                subsets = [[c for c in ground if m >> c & 1] for m in coll]
                for e_mask in range(2**size):
                    target = [c for c in ground if e_mask >> c & 1]
                    for t in thresholds:
                        for m in range(1, max_subsets + 1):
                            instances += 1
                            try:
                                v = V.covering_bound_check(V.CoverInstance(ground, subsets, m, t, target))
                            except HypothesisFailed:
                                continue
                            checked += 1
                            violations += not v.holds
    return V.CoverSweep(instances, checked, violations)


def test_covering_exhaustive_matches_checker():
    ts = (Fraction(1, 3), Fraction(1, 2))
    assert V.covering_exhaustive(3, 2, ts) == brute_sweep(3, 2, ts)


def test_covering_bound_is_tight_somewhere():
    # m = 1 partitions: E picks t of every block
    inst = V.CoverInstance(range(6), [[0, 1], [2, 3], [4, 5]], 1, Fraction(1, 2), [0, 2, 4])
    v = V.covering_bound_check(inst)
    assert v.holds and v.lhs == v.rhs


# -- Besicovitch --------------------------------------------------------------

def test_besicovitch_single_cube():
    w = Window.centered(10)
    ground = build_set(w, range(-2, 3))
    cubes = [((0,), 2)] + [((x,), 1) for x in (-2, -1, 1, 2)]
    sel = V.besicovitch_select(cubes, ground)
    assert sel == [0]
    audit = V.cover_audit(cubes, sel, ground)
    assert audit.ok and audit.max_multiplicity == 1


def test_besicovitch_line_example():
    w = Window.centered(10)
    ground = build_set(w, range(0, 5))
    cubes = [((x,), 1) for x in range(5)]
    sel = V.besicovitch_select(cubes, ground)
    audit = V.cover_audit(cubes, sel, ground)
    assert audit.covers and 1 <= audit.min_multiplicity and audit.max_multiplicity <= 4


def test_besicovitch_not_coverable():
    w = Window.centered(5)
    with pytest.raises(NotCoverable):
        V.besicovitch_select([((0,), 1)], build_set(w, [0, 3]))


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_besicovitch_random_audit(dim):
    rng = np.random.default_rng(dim)
    w = Window.centered({1: 60, 2: 12, 3: 5}[dim], dim)
    for _ in range(40):
        cubes, ground = V.random_cover_instance(rng, w, 0.3, 4, extra=10)
        if ground.cardinality == 0:
            continue
        audit = V.cover_audit(cubes, V.besicovitch_select(cubes, ground), ground)
        assert audit.ok, audit


def test_besicovitch_two_dimensional_200_cubes():
    rng = np.random.default_rng(200)
    w = Window.centered(12, 2)
    cubes, ground = V.random_cover_instance(rng, w, 200 / w.size, 3)
    assert len(cubes) > 150
    audit = V.cover_audit(cubes, V.besicovitch_select(cubes, ground), ground)
    assert audit.ok and audit.max_multiplicity <= 16


# -- two-scale ------------------------------------------------------------------

def test_two_scale_config_validation():
    with pytest.raises(ConfigInvalid):
        V.TwoScaleConfig(100, 30, 2).validate()
    with pytest.raises(ConfigInvalid):
        V.TwoScaleConfig(1000, 10, 10).validate()
    with pytest.raises(ConfigInvalid):
        V.TwoScaleConfig(1000, 10, 1, Fraction(1, 2)).validate()
    assert V.TwoScaleConfig(10**6, 1000, 10).ladder() == [80, 160, 320, 640, 1000]


def test_two_scale_full_and_evens():
    cfg = V.TwoScaleConfig(400, 40, 1)
    w = Window.centered(400)
    assert V.two_scale_density_fraction(LatticeSet.full(w), cfg) == (1, 1)
    evens = build_set(w, range(-400, 401, 2))
    frac, smeared = V.two_scale_density_fraction(evens, cfg)
    assert smeared == 1 and frac > Fraction(9, 10)


def test_two_scale_half_line_small():
    w = Window.centered(20000)
    e = build_set(w, range(0, 20001))
    frac, smeared = V.two_scale_density_fraction(e, V.TwoScaleConfig(20000, 100, 2))
    assert abs(frac - smeared) < Fraction(1, 100)


def test_two_scale_rejects_wrong_window():
    with pytest.raises(ConfigInvalid):
        V.two_scale_density_fraction(LatticeSet.full(Window.centered(300)), V.TwoScaleConfig(400, 40, 1))


def test_syndetic_point_examples():
    w = Window.centered(200)
    cfg = V.TwoScaleConfig(200, 20, 1)
    full = LatticeSet.full(w)
    assert V.syndetic_point_fraction(full, full, cfg, 0) == [(0, 1)]
    cube = build_set(w, range(-20, 21))
    (_, frac), = V.syndetic_point_fraction(cube, cube, cfg, 0)
    assert frac > 0
    with pytest.raises(RadiusTooLarge):
        V.syndetic_point_fraction(full, full, V.TwoScaleConfig(200, 45, 1), 160)


@given(st.integers(0, 2**32 - 1))
def test_syndetic_point_fraction_monotone(seed):
    rng = np.random.default_rng(seed)
    w = Window.centered(300)
    x = make_set(w, rng.random(w.shape) < 0.05)
    y = make_set(w, rng.random(w.shape) < 0.05)
    rows = V.syndetic_point_fraction(x, y, V.TwoScaleConfig(300, 10, 1), 6)
    fr = [f for _, f in rows]
    assert fr == sorted(fr)


def test_interval_unions_agree():
    rng = np.random.default_rng(5)
    cfg = V.TwoScaleConfig(20000, 200, 5)
    for _ in range(5):
        e = V.random_interval_union(rng, 20000, 8, 200)
        frac, smeared = V.two_scale_density_fraction(e, cfg)
        assert frac <= smeared
        assert smeared - frac <= Fraction(2 * 8 * (200 + 5) + 1, 40001)


# -- morphology audit -----------------------------------------------------------

@given(lattice_sets(max_radius=16, dims=(1,)), st.integers(0, 3), st.integers(1, 5))
def test_morphology_audit_clean(a, k, n):
    if k * 2 >= a.window.side:
        return
    assert V.morphology_audit(a, k, n) == []
