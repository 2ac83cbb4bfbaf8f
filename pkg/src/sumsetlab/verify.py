"""Executable checks: Mann's theorem, the covering bound, greedy Besicovitch
selection, and the two-scale density-point experiment.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .density import fraction_str, prefix_counts, schnirelmann
from .errors import ConfigInvalid, HypothesisFailed, NotCoverable, RadiusTooLarge, WrongConvention
from .lattice import Convention, LatticeSet, Window, dumps, make_set
from .morphology import (block_fill, block_quotient, box_counts, dilate_cube, erode_cube,
                         interior_mask, sumset)


def _jsonable(x):
    if isinstance(x, Fraction):
        return fraction_str(x)
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    return x


def digest(*parts: str) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(p.encode())
        h.update(b"\0")
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class Verdict:
    """Outcome of one check: ``holds`` is ``lhs`` vs ``rhs`` in the check's sense."""

    check: str
    inputs_digest: str
    holds: bool
    lhs: Fraction
    rhs: Fraction
    witness: object = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"check": self.check, "inputs_digest": self.inputs_digest, "holds": self.holds,
                "lhs": _jsonable(self.lhs), "rhs": _jsonable(self.rhs),
                "witness": _jsonable(self.witness)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# -- Mann ------------------------------------------------------------------

def _require_classical(*sets: LatticeSet) -> None:
    for s in sets:
        if s.window.convention is not Convention.CLASSICAL:
            raise WrongConvention("Mann's theorem is checked on [1, N] windows")


def zero_sum(a: LatticeSet, b: LatticeSet) -> LatticeSet:
    """``((A ∪ {0}) + (B ∪ {0})) ∩ [1, N]`` = ``A ∪ B ∪ (A + B)``."""
    _require_classical(a, b)
    return a | b | sumset(a, b)


def mann_sigma_sum(a: LatticeSet, b: LatticeSet) -> Fraction:
    return schnirelmann(zero_sum(a, b))


def mann_check(a: LatticeSet, b: LatticeSet) -> Verdict:
    """Compare ``sigma(A ⊕ B)`` with ``min(sigma A + sigma B, 1)``.

    ``witness`` is the first ``n`` with ``|C ∩ [1, n]| < bound * n``; it is
    ``None`` whenever the inequality holds.
    """
    sa, sb = schnirelmann(a), schnirelmann(b)
    sc = mann_sigma_sum(a, b)
    bound = min(sa + sb, Fraction(1))
    first = None
    if sc < bound:
        counts, sizes = prefix_counts(zero_sum(a, b))
        bad = np.flatnonzero(counts * bound.denominator < bound.numerator * sizes)
        first = int(sizes[bad[0]])
    return Verdict("mann", digest(dumps(a), dumps(b)), sc >= bound, sc, bound, first,
                   {"sigma_a": sa, "sigma_b": sb})


def _scaled_sigma_table(n: int) -> tuple[np.ndarray, int]:
    """``L * sigma(mask)`` for every mask over ``[1, n]``; ``L = lcm(1..n)``.

    Bit ``i`` of a mask stands for the element ``i + 1``.
    """
    scale = math.lcm(*range(1, n + 1))
    masks = np.arange(1 << n, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n)) & 1
    counts = np.cumsum(bits, axis=1)
    per = scale // np.arange(1, n + 1, dtype=np.int64)
    return (counts * per).min(axis=1), scale


def _mann_chunk(n: int, a_masks: range, sig: np.ndarray, scale: int) -> int:
    full = (1 << n) - 1
    b = np.arange(1 << n, dtype=np.int64)
    bad = 0
    for a in a_masks:
        c = a | b
        x = a
        elem = 1
        while x:
            if x & 1:
                c |= b << elem
            x >>= 1
            elem += 1
        c &= full
        bound = np.minimum(sig[a] + sig, scale)
        bad += int(np.count_nonzero(sig[c] < bound))
    return bad


def mann_exhaustive(n: int, threads: int = 1) -> tuple[int, int]:
    """Check every pair of subsets of ``[1, n]``; returns ``(violations, pairs)``.

    Sets are bitmasks and sigma is tabulated once per mask as an integer
    multiple of ``1 / lcm(1..n)``, so the whole sweep is exact.
    """
    if not 1 <= n <= 14:
        raise ValueError("exhaustive Mann check supports 1 <= n <= 14")
    sig, scale = _scaled_sigma_table(n)
    total = 1 << n
    threads = max(1, int(threads))
    step = -(-total // threads)
    chunks = [range(lo, min(lo + step, total)) for lo in range(0, total, step)]
    if threads == 1:
        bad = sum(_mann_chunk(n, ch, sig, scale) for ch in chunks)
    else:
        with ThreadPoolExecutor(threads) as pool:
            bad = sum(pool.map(lambda ch: _mann_chunk(n, ch, sig, scale), chunks))
    return bad, total * total


def mann_random(count: int, big_n: int, seed: int = 0) -> tuple[int, list[Verdict]]:
    """``count`` random pairs on ``[1, N]``; returns the violation count and failing verdicts."""
    rng = np.random.default_rng(seed)
    w = Window.classical(big_n)
    failures = []
    for _ in range(count):
        pa, pb = rng.random(2)
        a = make_set(w, rng.random(big_n) < pa)
        b = make_set(w, rng.random(big_n) < pb)
        v = mann_check(a, b)
        if not v.holds:
            failures.append(v)
    return len(failures), failures


# -- covering lemma --------------------------------------------------------

@dataclass(frozen=True)
class CoverInstance:
    ground: tuple
    subsets: tuple
    mult_bound: int
    threshold: Fraction
    target: tuple

    def __init__(self, ground: Iterable, subsets: Iterable[Iterable], mult_bound: int,
                 threshold, target: Iterable):
        object.__setattr__(self, "ground", tuple(ground))
        object.__setattr__(self, "subsets", tuple(tuple(t) for t in subsets))
        object.__setattr__(self, "mult_bound", int(mult_bound))
        object.__setattr__(self, "threshold", Fraction(threshold))
        object.__setattr__(self, "target", tuple(target))

    def digest(self) -> str:
        return digest(repr(self.ground), repr(self.subsets), str(self.mult_bound),
                      str(self.threshold), repr(self.target))


def covering_rhs(m: int, t: Fraction) -> Fraction:
    return m * t / (1 + (m - 1) * t)


def covering_bound_check(inst: CoverInstance) -> Verdict:
    """``|E| / |X| <= m t / (1 + (m - 1) t)`` once the hypotheses are confirmed."""
    ground = set(inst.ground)
    if len(ground) != len(inst.ground) or not ground:
        raise ValueError("ground must be a non-empty list of distinct cells")
    if inst.mult_bound < 1 or not 0 < inst.threshold < 1:
        raise ValueError("need m >= 1 and t in (0, 1)")
    subsets = [set(t) for t in inst.subsets]
    target = set(inst.target)
    for t in subsets:
        if not t <= ground:
            raise ValueError(f"subset {sorted(t - ground)} leaves the ground set")
    if not target <= ground:
        raise ValueError("target must lie in the ground set")
    for cell in inst.ground:
        hits = sum(cell in t for t in subsets)
        if hits == 0:
            raise HypothesisFailed("uncovered cell", cell)
        if hits > inst.mult_bound:
            raise HypothesisFailed("multiplicity exceeded", cell)
    for i, t in enumerate(subsets):
        if t and Fraction(len(t & target), len(t)) > inst.threshold:
            raise HypothesisFailed("per-set ratio exceeded", i)
    lhs = Fraction(len(target), len(ground))
    rhs = covering_rhs(inst.mult_bound, inst.threshold)
    return Verdict("covering", inst.digest(), lhs <= rhs, lhs, rhs, None)


COVER_THRESHOLDS = (Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3))


@dataclass(frozen=True)
class CoverSweep:
    instances: int
    checked: int
    violations: int


def covering_exhaustive(max_ground: int = 6, max_subsets: int = 3,
                        thresholds: Sequence = COVER_THRESHOLDS) -> CoverSweep:
    """Sweep every instance with ``|X| <= max_ground`` and at most ``max_subsets`` sets.

    Collections are multisets of non-empty subsets; for each one every target
    ``E``, threshold ``t`` and multiplicity bound ``m`` from the collection's
    own maximum up to ``max_subsets`` is tried.  The hypotheses and the
    conclusion are compared in integers, vectorized over collections and E.
    """
    instances = checked = violations = 0
    ts = [Fraction(t) for t in thresholds]
    for size in range(1, max_ground + 1):
        masks = np.arange(1, 1 << size, dtype=np.int64)
        pop = np.array([bin(x).count("1") for x in range(1 << size)], dtype=np.int64)
        targets = np.arange(1 << size, dtype=np.int64)
        for r in range(1, max_subsets + 1):
            coll = np.array(list(itertools.combinations_with_replacement(masks.tolist(), r)),
                            dtype=np.int64).reshape(-1, r)
            cell_bits = (1 << np.arange(size, dtype=np.int64))
            mult = ((coll[:, :, None] & cell_bits) != 0).sum(axis=1)  # (C, size)
            covered = (mult >= 1).all(axis=1)
            maxmult = mult.max(axis=1)
            inter = pop[coll[:, :, None] & targets[None, None, :]]  # (C, r, E)
            sizes = pop[coll][:, :, None]
            e_size = pop[targets][None, :]
            for t in ts:
                p, q = t.numerator, t.denominator
                ratio_ok = (inter * q <= p * sizes).all(axis=1)  # (C, E)
                for m in range(1, max_subsets + 1):
                    mult_ok = covered & (maxmult <= m)
                    n_inst = len(coll) * len(targets)
                    instances += n_inst
                    ok = mult_ok[:, None] & ratio_ok
                    checked += int(ok.sum())
                    # |E| (q + (m-1) p) <= |X| m p
                    concl = e_size * (q + (m - 1) * p) <= size * m * p
                    violations += int((ok & ~concl).sum())
    return CoverSweep(instances, checked, violations)


# -- Besicovitch selection -------------------------------------------------

Cube = tuple[tuple[int, ...], int]


def _cube_slices(w: Window, center: Sequence[int], r: int):
    sl = []
    for c in center:
        lo, hi = max(c - r, w.low), min(c + r, w.high)
        if lo > hi:
            return None
        sl.append(slice(lo - w.low, hi - w.low + 1))
    return tuple(sl)


def besicovitch_select(cubes: Sequence[Cube], ground: LatticeSet) -> list[int]:
    """Greedy largest-first selection of cubes covering ``ground``.

    Cubes are visited by decreasing radius, ties by row-major center.  A cube
    is kept when its center is a ground cell no kept cube covers yet.  Every
    ground cell must be the center of some cube.
    """
    w = ground.window
    centers = {}
    for i, (c, r) in enumerate(cubes):
        c = tuple(int(x) for x in c)
        if len(c) != w.dim or int(r) < 1:
            raise ValueError(f"cube {i} is malformed")
        centers.setdefault(c, i)
    missing = [g for g in ground.coords() if g not in centers]
    if missing:
        raise NotCoverable(f"ground cell {missing[0]} is not the center of any cube")
    order = sorted(range(len(cubes)), key=lambda i: (-int(cubes[i][1]), tuple(cubes[i][0])))
    covered = np.zeros(w.shape, dtype=bool)
    chosen = []
    for i in order:
        c, r = tuple(int(x) for x in cubes[i][0]), int(cubes[i][1])
        if not w.contains(c):
            continue
        idx = w.index_of(c)
        if not ground.bits[idx] or covered[idx]:
            continue
        sl = _cube_slices(w, c, r)
        covered[sl] = True
        chosen.append(i)
    return sorted(chosen)


@dataclass(frozen=True)
class CoverAudit:
    covers: bool
    min_multiplicity: int
    max_multiplicity: int
    bound: int

    @property
    def ok(self) -> bool:
        return self.covers and 1 <= self.min_multiplicity and self.max_multiplicity <= self.bound


def cover_audit(cubes: Sequence[Cube], selected: Sequence[int], ground: LatticeSet) -> CoverAudit:
    """Pointwise multiplicity of the selected cubes on the ground cells."""
    w = ground.window
    count = np.zeros(w.shape, dtype=np.int64)
    for i in selected:
        c, r = cubes[i]
        sl = _cube_slices(w, c, int(r))
        if sl is not None:
            count[sl] += 1
    on = count[ground.bits]
    if on.size == 0:
        return CoverAudit(True, 0, 0, 4**w.dim)
    return CoverAudit(bool((on >= 1).all()), int(on.min()), int(on.max()), 4**w.dim)


def random_cover_instance(rng: np.random.Generator, w: Window, density: float = 0.3,
                          max_radius: int = 3, extra: int = 0) -> tuple[list[Cube], LatticeSet]:
    """Random ground set with one cube per ground cell, plus ``extra`` decoys."""
    ground = make_set(w, rng.random(w.shape) < density)
    cubes: list[Cube] = [(c, int(rng.integers(1, max_radius + 1))) for c in ground.coords()]
    for _ in range(extra):
        c = tuple(int(x) for x in rng.integers(w.low, w.high + 1, size=w.dim))
        cubes.append((c, int(rng.integers(1, max_radius + 1))))
    order = rng.permutation(len(cubes))
    return [cubes[i] for i in order], ground


# -- two-scale experiment --------------------------------------------------

@dataclass(frozen=True)
class TwoScaleConfig:
    outer_radius: int
    inner_radius: int
    smear: int
    delta: Fraction = Fraction(1, 50)

    def validate(self) -> None:
        if not 0 <= self.smear < self.inner_radius:
            raise ConfigInvalid("need 0 <= smear < inner_radius")
        if 4 * self.inner_radius >= self.outer_radius:
            raise ConfigInvalid("need inner_radius < outer_radius / 4")
        if not 0 < Fraction(self.delta) < Fraction(1, 2):
            raise ConfigInvalid("delta must lie in (0, 1/2)")

    def ladder(self) -> list[int]:
        """Radii ``8s, 16s, ...`` doubling up to ``ν``, with ``ν`` itself last."""
        r = max(8 * self.smear, 1)
        out = []
        while r < self.inner_radius:
            out.append(r)
            r *= 2
        out.append(self.inner_radius)
        return out


def two_scale_density_fraction(e: LatticeSet, cfg: TwoScaleConfig) -> tuple[Fraction, Fraction]:
    """(fraction of density points, density of ``E + [-s, s]^d``) on the window.

    A cell is a density point when, at every ladder radius ``r``, the smeared
    set fills at least ``1 - delta`` of ``x + [-r, r]^d`` (clipped to the window).
    """
    cfg.validate()
    w = e.window
    if w.convention is not Convention.CENTERED or w.radius != cfg.outer_radius:
        raise ConfigInvalid(f"E must live on a centered window of radius {cfg.outer_radius}")
    delta = Fraction(cfg.delta)
    smeared = dilate_cube(e, cfg.smear)
    good = np.ones(w.shape, dtype=bool)
    p, q = (1 - delta).numerator, (1 - delta).denominator
    ones = np.ones(w.shape, dtype=bool)
    for r in cfg.ladder():
        # cubes cut by the window edge are measured on their in-window part
        counts = box_counts(smeared.bits, r)
        good &= counts * q >= p * box_counts(ones, r)
    return Fraction(int(np.count_nonzero(good)), w.size), Fraction(smeared.cardinality, w.size)


def syndetic_point_fraction(x: LatticeSet, y: LatticeSet, cfg: TwoScaleConfig,
                            m_max: int) -> list[tuple[int, Fraction]]:
    """For each ``m <= m_max``, the fraction of cells ``z`` (among those whose
    ``ν``-cube fits the window) with ``z + [-ν, ν]^d ⊆ X + Y + [-m, m]^d``.
    """
    nu = cfg.inner_radius
    w = x.window
    if nu + m_max > w.radius:
        raise RadiusTooLarge(f"inner radius {nu} plus m_max {m_max} exceeds N = {w.radius}")
    s = sumset(x, y)
    inner = interior_mask(w, nu)
    room = int(np.count_nonzero(inner))
    rows = []
    for m in range(m_max + 1):
        wit = erode_cube(dilate_cube(s, m), nu)
        rows.append((m, Fraction(int(np.count_nonzero(wit.bits)), room)))
    return rows


def random_interval_union(rng: np.random.Generator, big_n: int, count: int,
                          min_len: int) -> LatticeSet:
    """Union of ``count`` random intervals of length at least ``min_len`` in ``[-N, N]``."""
    w = Window.centered(big_n)
    bits = np.zeros(w.shape, dtype=bool)
    for _ in range(count):
        length = int(rng.integers(min_len, max(min_len + 1, big_n // 4)))
        start = int(rng.integers(0, w.side - length))
        bits[start:start + length] = True
    return make_set(w, bits)


# -- morphology audit ------------------------------------------------------

def morphology_audit(a: LatticeSet, k: int, n: int) -> list[str]:
    """Names of the morphology identities that fail for ``a`` (empty when all hold).

    Checked: erosion/dilation duality on the interior, opening and closing
    inclusions, ``A ⊆ A^[n]``, idempotence of the fill, and the block
    equivalence ``x ∈ A_[n]`` iff the block of ``x`` lies in ``A^[n]`` iff it
    meets ``A`` (blocks cut by the window edge are compared on their
    in-window part).
    """
    fails = []
    w = a.window
    inner = interior_mask(w, k)
    er = erode_cube(a, k).bits
    if not np.array_equal(er, ~dilate_cube(~a, k).bits & inner):
        fails.append("duality")
    if np.any(dilate_cube(erode_cube(a, k), k).bits & ~a.bits):
        fails.append("opening")
    if np.any(a.bits & inner & ~erode_cube(dilate_cube(a, k), k).bits):
        fails.append("closing")
    fill = block_fill(a, n)
    if np.any(a.bits & ~fill.bits):
        fails.append("fill_contains")
    if block_fill(fill, n) != fill:
        fails.append("fill_idempotent")
    quo = block_quotient(a, n)
    if w.dim == 1:
        qw = quo.window
        lab = np.floor_divide(w.axis_coords(), n) - qw.low
        inside = (lab >= 0) & (lab < qw.side)
        lab = lab[inside]
        if lab.size:
            # labels are sorted, so each block is a contiguous run
            starts = np.flatnonzero(np.r_[True, lab[1:] != lab[:-1]])
            all_fill = np.logical_and.reduceat(fill.bits[inside], starts)
            any_a = np.logical_or.reduceat(a.bits[inside], starts)
            q = quo.bits[lab[starts]]
            if not (np.array_equal(q, all_fill) and np.array_equal(q, any_a)):
                fails.append("block_equivalence")
    return fails
