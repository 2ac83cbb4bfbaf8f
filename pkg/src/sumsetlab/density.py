"""Finite-scale densities and witness tables.

All ratios are exact :class:`fractions.Fraction` values.  Counts are kept in
integer numpy arrays; a ratio is only turned into a Fraction when it is
reported or compared, so the dense kernels never touch floating point for
anything that decides a result.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import NotFound, RadiusTooLarge, WrongConvention
from .lattice import Convention, LatticeSet, Window, make_set
from .morphology import box_counts, dilate_cube, erode_cube, interior_mask

log = logging.getLogger(__name__)

DEFAULT_SAMPLES = 64
DEFAULT_TAIL = Fraction(1, 2)


def fraction_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


# -- exact extremes over count/size arrays ---------------------------------

def _exact_extreme(counts: np.ndarray, sizes: np.ndarray, largest: bool) -> tuple[Fraction, int]:
    """Exact min (or max) of ``counts[i] / sizes[i]``; returns (value, position).

    A float pass proposes the winner; integer cross-multiplication settles
    near-ties.  Products stay below 2**62 because sizes never exceed 2**31.
    """
    if len(counts) == 0:
        raise ValueError("no samples")
    counts = np.asarray(counts, dtype=np.int64)
    sizes = np.asarray(sizes, dtype=np.int64)
    ratios = counts / sizes
    best = int(np.argmax(ratios) if largest else np.argmin(ratios))
    while True:
        c, s = counts[best], sizes[best]
        lhs = counts * s
        rhs = c * sizes
        better = lhs > rhs if largest else lhs < rhs
        if not better.any():
            return Fraction(int(c), int(s)), best
        cand = np.flatnonzero(better)
        sub = ratios[cand]
        best = int(cand[np.argmax(sub) if largest else np.argmin(sub)])


def exact_min_ratio(counts, sizes) -> Fraction:
    return _exact_extreme(counts, sizes, largest=False)[0]


def exact_max_ratio(counts, sizes) -> Fraction:
    return _exact_extreme(counts, sizes, largest=True)[0]


# -- prefix counts -----------------------------------------------------------

def prefix_counts(a: LatticeSet, domain: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Counts ``|A ∩ W_n|`` and sizes ``|W_n|`` for every ``n = 1..N``.

    ``W_n`` is ``[1, n]`` for classical windows and ``[-n, n]^d`` otherwise.
    A boolean ``domain`` mask restricts both the set and the sizes to the
    cells it marks (used for eroded sets, which live on an interior).
    """
    w = a.window
    bits = a.bits if domain is None else a.bits & domain
    n = np.arange(1, w.radius + 1, dtype=np.int64)
    if w.convention is Convention.CLASSICAL:
        sizes = n if domain is None else np.cumsum(domain, dtype=np.int64)
        return np.cumsum(bits, dtype=np.int64), sizes
    # Chebyshev distance of each cell to the origin
    dist = np.zeros(w.shape, dtype=np.int64)
    for axis in range(w.dim):
        shape = [1] * w.dim
        shape[axis] = w.side
        dist = np.maximum(dist, np.abs(w.axis_coords()).reshape(shape))
    counts = np.cumsum(np.bincount(dist[bits], minlength=w.radius + 1), dtype=np.int64)[1:]
    if domain is None:
        return counts, (2 * n + 1) ** w.dim
    sizes = np.cumsum(np.bincount(dist[domain], minlength=w.radius + 1), dtype=np.int64)[1:]
    return counts, sizes


def geometric_samples(n_max: int, count: int) -> np.ndarray:
    pts = np.unique(np.round(np.geomspace(1, n_max, max(count, 2))).astype(np.int64))
    return np.union1d(pts, [n_max])


@dataclass(frozen=True)
class DensityProfile:
    """Prefix ratios ``|A ∩ W_n| / |W_n|`` at sampled ``n``.

    ``n``/``counts``/``sizes`` are parallel integer arrays, strictly increasing
    in ``n``.  ``samples`` gives the exact ratios.
    """

    n: np.ndarray
    counts: np.ndarray
    sizes: np.ndarray
    convention: Convention
    radius: int
    tail_fraction: Fraction = DEFAULT_TAIL

    @property
    def samples(self) -> list[tuple[int, Fraction]]:
        return [(int(n), Fraction(int(c), int(s))) for n, c, s in zip(self.n, self.counts, self.sizes)]

    def tail_mask(self) -> np.ndarray:
        # n >= tail_fraction * N, exactly
        tf = self.tail_fraction
        return self.n * tf.denominator >= tf.numerator * self.radius

    def ratio_at(self, n: int) -> Fraction:
        i = int(np.searchsorted(self.n, n))
        if i >= len(self.n) or self.n[i] != n:
            raise KeyError(n)
        return Fraction(int(self.counts[i]), int(self.sizes[i]))


def prefix_profile(a: LatticeSet, sample_count: int = DEFAULT_SAMPLES,
                   tail_fraction: Fraction = DEFAULT_TAIL, dense_tail: bool = True) -> DensityProfile:
    """Geometric samples up to ``N`` (plus ``N``) and, with ``dense_tail``,
    every ``n`` in the tail ``n >= tail_fraction * N``.

    Sparse geometric samples alone miss the peaks of sets that oscillate on
    dyadic scales, so the tail is dense by default.
    """
    if sample_count < 2:
        raise ValueError("sample_count must be at least 2")
    tail_fraction = Fraction(tail_fraction)
    if not 0 < tail_fraction < 1:
        raise ValueError("tail_fraction must lie in (0, 1)")
    counts, sizes = prefix_counts(a)
    big_n = a.window.radius
    picks = geometric_samples(big_n, sample_count)
    if dense_tail:
        picks = np.union1d(picks, np.arange(_tail_start(big_n, tail_fraction) + 1, big_n + 1))
    idx = picks - 1
    return DensityProfile(picks, counts[idx], sizes[idx], a.window.convention, big_n, tail_fraction)


def tail_estimates(p: DensityProfile) -> tuple[Fraction, Fraction]:
    """(min, max) of the ratios in the tail: finite stand-ins for liminf/limsup."""
    mask = p.tail_mask()
    if not mask.any():
        raise ValueError("profile has no sample in the tail")
    c, s = p.counts[mask], p.sizes[mask]
    return exact_min_ratio(c, s), exact_max_ratio(c, s)


def _sigma_from_counts(counts: np.ndarray, sizes: np.ndarray) -> Fraction:
    return exact_min_ratio(counts, sizes)


def schnirelmann(a: LatticeSet) -> Fraction:
    """``min_{1<=n<=N} |A ∩ [1, n]| / n``."""
    if a.window.convention is not Convention.CLASSICAL:
        raise WrongConvention("Schnirelmann density is defined on [1, N] windows")
    if not a.bits[0]:
        return Fraction(0)
    return _sigma_from_counts(*prefix_counts(a))


def banach_profile(a: LatticeSet, n_values: Sequence[int]) -> list[tuple[int, Fraction]]:
    """For each ``n``: max over cubes ``x + [-n, n]^d`` inside the window of the density of A."""
    w = a.window
    out = []
    for n in n_values:
        n = int(n)
        if n < 1 or 2 * n > w.radius:
            raise RadiusTooLarge(f"banach radius {n} must satisfy 1 <= n <= N/2 = {w.radius / 2}")
        if 2 * n + 1 > w.side:
            raise RadiusTooLarge(f"a cube of radius {n} does not fit in {w.spec()}")
        counts = box_counts(a.bits, n)
        inner = tuple(slice(n, w.side - n) for _ in range(w.dim))
        best = int(counts[inner].max()) if a.cardinality else 0
        out.append((n, Fraction(best, (2 * n + 1) ** w.dim)))
    return out


# -- witness tables --------------------------------------------------------------

@dataclass(frozen=True)
class WitnessEntry:
    m: int
    k: int
    lower_est: Fraction
    upper_est: Fraction
    strong_upper_est: Fraction


@dataclass
class WitnessTable:
    entries: list[WitnessEntry]
    source: str = ""
    anchor: str = "center"

    def entry(self, m: int, k: int) -> WitnessEntry:
        for e in self.entries:
            if e.m == m and e.k == k:
                return e
        raise KeyError((m, k))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["m", "k", "lower", "upper", "strong"])
        for e in self.entries:
            wr.writerow([e.m, e.k, fraction_str(e.lower_est), fraction_str(e.upper_est),
                         fraction_str(e.strong_upper_est)])
        return buf.getvalue()

    def to_records(self) -> list[dict]:
        return [{"m": e.m, "k": e.k, "lower_est": fraction_str(e.lower_est),
                 "upper_est": fraction_str(e.upper_est),
                 "strong_upper_est": fraction_str(e.strong_upper_est)} for e in self.entries]

    def to_json(self) -> str:
        return json.dumps({"source": self.source, "anchor": self.anchor,
                           "entries": self.to_records()}, indent=2)


def witness_set(s: LatticeSet, m: int, k: int, anchor: str = "center") -> LatticeSet:
    """``{z : z + [-k, k]^d ⊆ S + [-m, m]^d}`` (one-sided cubes with ``anchor='origin'``)."""
    return erode_cube(dilate_cube(s, m, anchor), k, anchor)


def witness_counts(dilated: LatticeSet, k: int, anchor: str = "center") -> tuple[np.ndarray, np.ndarray]:
    """Prefix counts of ``erode(dilated, k)`` measured against the erosion interior.

    Cells near the window edge can never be witnesses, so they are left out
    of the denominators too; a full window then has every ratio equal to 1.
    """
    eroded = erode_cube(dilated, k, anchor)
    return prefix_counts(eroded, interior_mask(dilated.window, k, anchor))


def _tail_start(big_n: int, tail_fraction: Fraction) -> int:
    """Index of the first ``n >= tail_fraction * N`` in a 1..N array."""
    first = -(-tail_fraction.numerator * big_n // tail_fraction.denominator)
    return max(first, 1) - 1


def _tail_and_strong(counts: np.ndarray, sizes: np.ndarray, big_n: int, tail_fraction: Fraction,
                     strong_n: np.ndarray) -> tuple[Fraction, Fraction, Fraction]:
    lo = _tail_start(big_n, tail_fraction)
    lower = exact_min_ratio(counts[lo:], sizes[lo:])
    upper = exact_max_ratio(counts[lo:], sizes[lo:])
    sn = strong_n[strong_n - 1 >= lo] - 1
    if len(sn) == 0:
        raise ValueError("strong_sequence has no term in the tail")
    strong = exact_max_ratio(counts[sn], sizes[sn])
    return lower, upper, strong


def witness_table(s: LatticeSet, m_max: int, k_max: int, strong_sequence: Sequence[int] | None = None,
                  *, anchor: str = "center", tail_fraction: Fraction = DEFAULT_TAIL,
                  m_values: Sequence[int] | None = None, k_values: Sequence[int] | None = None,
                  threads: int = 1, source: str = "") -> WitnessTable:
    """Tail estimates of the witness sets ``erode(dilate(S, m), k)`` for every (m, k).

    ``m_values``/``k_values`` restrict the grid; by default it is
    ``0..m_max`` x ``0..k_max``.  The strong estimate is the largest ratio
    over ``strong_sequence`` within the tail (geometric samples by default).
    """
    big_n = s.window.radius
    if 4 * (m_max + k_max) > big_n:
        raise RadiusTooLarge(f"m_max + k_max = {m_max + k_max} exceeds N/4 = {big_n / 4}")
    ms = list(range(m_max + 1)) if m_values is None else sorted(set(int(m) for m in m_values))
    ks = list(range(k_max + 1)) if k_values is None else sorted(set(int(k) for k in k_values))
    if ms and max(ms) > m_max or ks and max(ks) > k_max:
        raise ValueError("m_values/k_values must lie within m_max/k_max")
    tail_fraction = Fraction(tail_fraction)
    if strong_sequence is None:
        strong_n = geometric_samples(big_n, DEFAULT_SAMPLES)
    else:
        strong_n = np.array(sorted(set(int(n) for n in strong_sequence if 1 <= n <= big_n)), dtype=np.int64)

    def row(m: int) -> list[WitnessEntry]:
        dil = dilate_cube(s, m, anchor)
        cells = []
        for k in ks:
            counts, sizes = witness_counts(dil, k, anchor)
            lo, up, st = _tail_and_strong(counts, sizes, big_n, tail_fraction, strong_n)
            cells.append(WitnessEntry(m, k, lo, up, st))
        return cells

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(row, ms))
    else:
        rows = [row(m) for m in ms]
    return WitnessTable([e for r in rows for e in r], source=source, anchor=anchor)


def minimal_m_search(s: LatticeSet, level: Fraction, epsilon: Fraction, k_max: int,
                     mode: str = "lower", *, anchor: str = "center", m_max: int | None = None,
                     tail_fraction: Fraction = DEFAULT_TAIL) -> int | None:
    """Smallest ``m`` whose witness sets reach ``level - epsilon`` for every ``k <= k_max``.

    ``mode`` picks the lower or upper tail estimate.  Returns ``None`` when no
    ``m`` up to the cap (``N/4 - k_max`` unless ``m_max`` is given) works.
    """
    if mode not in ("lower", "upper"):
        raise ValueError("mode must be 'lower' or 'upper'")
    level, epsilon = Fraction(level), Fraction(epsilon)
    if not 0 < level <= 1 or epsilon < 0:
        raise ValueError("need level in (0, 1] and epsilon >= 0")
    target = level - epsilon
    big_n = s.window.radius
    cap = big_n // 4 - k_max
    if m_max is not None:
        cap = min(cap, m_max)
    tail_fraction = Fraction(tail_fraction)
    for m in range(cap + 1):
        dil = dilate_cube(s, m, anchor)
        ok = True
        # the largest k is the most demanding, so test it first
        for k in range(k_max, -1, -1):
            counts, sizes = witness_counts(dil, k, anchor)
            lo = _tail_start(big_n, tail_fraction)
            if mode == "lower":
                est = exact_min_ratio(counts[lo:], sizes[lo:])
            else:
                est = exact_max_ratio(counts[lo:], sizes[lo:])
            if est < target:
                ok = False
                break
        if ok:
            return m
    return None


def sigma_any(a: LatticeSet) -> Fraction:
    """Schnirelmann-style infimum of the prefix ratios for either convention."""
    return _sigma_from_counts(*prefix_counts(a))


def centered_cube(w: Window, m: int) -> LatticeSet:
    """``[-m, m]^d ∩ window``; for classical windows this is ``[1, m]``."""
    bits = np.zeros(w.shape, dtype=bool)
    lo = max(-m, w.low) - w.low
    hi = min(m, w.high) - w.low
    if hi >= lo:
        bits[tuple(slice(lo, hi + 1) for _ in range(w.dim))] = True
    return make_set(w, bits)


def saturation_search(a: LatticeSet, epsilon: Fraction, mode: str = "schnirelmann_union",
                      n_values: Sequence[int] | None = None) -> int:
    """Smallest ``m`` satisfying one of the two saturation inequalities.

    ``schnirelmann_union``: sigma(A ∪ [-m, m]^d) >= upper tail estimate of A - epsilon.
    ``banach_dilate``: the Banach ratio of ``A + [-m, m]^d`` at the largest
    ``n`` in ``n_values`` exceeds ``1 - epsilon``.
    """
    epsilon = Fraction(epsilon)
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    big_n = a.window.radius
    cap = big_n // 4
    if mode == "schnirelmann_union":
        _, upper = tail_estimates(prefix_profile(a))
        target = upper - epsilon
        for m in range(cap + 1):
            if sigma_any(a | centered_cube(a.window, m)) >= target:
                return m
    elif mode == "banach_dilate":
        if n_values is None:
            n_values = [max(1, big_n // 8)]
        n_top = max(int(n) for n in n_values)
        if banach_profile(a, n_values)[-1][1] == 0 and a.cardinality == 0:
            raise ValueError("banach mode needs a set of positive Banach estimate")
        for m in range(cap + 1):
            if banach_profile(dilate_cube(a, m), [n_top])[0][1] > 1 - epsilon:
                return m
    else:
        raise ValueError(f"unknown saturation mode {mode!r}")
    raise NotFound(f"no m <= {cap} satisfies {mode} at epsilon {epsilon}")


def adaptive_gap_check(s: LatticeSet, f: Sequence[int] | Callable[[int], int], m_f: int,
                       *, tail_fraction: Fraction = DEFAULT_TAIL) -> Fraction:
    """Lower tail estimate of ``{n : exists m < m_f, n + [-f(m), f(m)] ⊆ S + [-m, m]}``."""
    if m_f < 1:
        raise ValueError("m_f must be positive")
    table = [int(f(m)) if callable(f) else int(f[m]) for m in range(m_f + 1)]
    if any(b < a for a, b in zip(table, table[1:])):
        raise ValueError("f must be non-decreasing")
    if 4 * (table[m_f] + m_f) > s.window.radius:
        raise RadiusTooLarge(f"f(m_f) + m_f = {table[m_f] + m_f} exceeds N/4")
    acc = np.zeros(s.window.shape, dtype=bool)
    for m in range(m_f):
        acc |= witness_set(s, m, table[m]).bits
    # no witness can sit closer to the edge than f(0)
    counts, sizes = prefix_counts(make_set(s.window, acc), interior_mask(s.window, table[0]))
    lo = _tail_start(s.window.radius, Fraction(tail_fraction))
    return exact_min_ratio(counts[lo:], sizes[lo:])
