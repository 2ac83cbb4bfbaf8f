"""Generators for the explicit example sets.

Every generator is deterministic and builds its set with vectorized numpy
passes over the window, block by block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from .errors import GrowthTooLarge, UnknownFamily, WrongConvention
from .lattice import Convention, LatticeSet, Window, make_set

FAMILY_NAMES = ("upper_pair", "epsilon_set", "optimal_C", "big_pair", "non_pws")
OPTIMAL_C_MAX = math.factorial(11)


def _require_classical(w: Window, what: str) -> None:
    if w.convention is not Convention.CLASSICAL:
        raise WrongConvention(f"{what} lives on a Classical1D window")


def _fill(bits: np.ndarray, w: Window, lo: int, hi: int, step: int = 1, phase: int | None = None) -> None:
    """Mark ``[lo, hi] ∩ window``; with ``step > 1`` only cells ``≡ phase (mod step)``."""
    lo, hi = max(lo, w.low), min(hi, w.high)
    if lo > hi:
        return
    if step > 1:
        phase = 0 if phase is None else phase
        lo += (phase - lo) % step
    bits[lo - w.low:hi - w.low + 1:step] = True


# -- upper pair --------------------------------------------------------------

def gen_upper_pair(window: Window) -> tuple[LatticeSet, LatticeSet]:
    """``A = ⋃ [2^n, 2^n + 2^(n-1)]`` and ``B = ⋃ [n!, n! + n]``, truncated."""
    _require_classical(window, "upper_pair")
    big_n = window.radius
    a = np.zeros(window.shape, dtype=bool)
    n = 1
    while 2**n <= big_n:
        _fill(a, window, 2**n, 2**n + 2**(n - 1))
        n += 1
    b = np.zeros(window.shape, dtype=bool)
    n = 1
    while math.factorial(n) <= big_n:
        f = math.factorial(n)
        _fill(b, window, f, f + n)
        n += 1
    return make_set(window, a), make_set(window, b)


# -- epsilon set -------------------------------------------------------------

def gen_epsilon_set(window: Window) -> LatticeSet:
    """``⋃_j ⋃_{i<=j} (iℕ) ∩ [2^j - 2^(j-i), 2^j - 2^(j-i-1)]``.

    Endpoints with a negative exponent are rationals; the intersection
    keeps the integers between them.
    """
    _require_classical(window, "epsilon_set")
    bits = np.zeros(window.shape, dtype=bool)
    j = 1
    while 2**j - 2**(j - 1) <= window.radius:
        for i in range(1, j + 1):
            lo = Fraction(2**j) - Fraction(2)**(j - i)
            hi = Fraction(2**j) - Fraction(2)**(j - i - 1)
            _fill(bits, window, math.ceil(lo), math.floor(hi), step=i)
        j += 1
    return make_set(window, bits)


# -- optimal C ---------------------------------------------------------------

def s_sequence(i: int) -> int:
    """``s_i`` for ``1,2, 1,2,3, 1,2,3,4, ...`` (first row has length 2)."""
    if i < 1:
        raise ValueError("s_i is indexed from 1")
    row = 2
    while i > row:
        i -= row
        row += 1
    return i


def optimal_C_block_size(i: int) -> int:
    return s_sequence(i)


def _optimal_C_bits(lo: int, hi: int) -> np.ndarray:
    """Membership of C on the coordinates ``lo..hi``."""
    out = np.zeros(hi - lo + 1, dtype=bool)
    i = 1
    while math.factorial(i) <= hi:
        start, stop = math.factorial(i), math.factorial(i + 1) - 1
        a, b = max(start, lo), min(stop, hi)
        if a <= b:
            s = s_sequence(i)
            coords = np.arange(a, b + 1, dtype=np.int64)
            out[a - lo:b - lo + 1] = (coords % (2 * s)) < s
        i += 1
    return out


def gen_optimal_C(window: Window) -> LatticeSet:
    """On ``[i!, (i+1)!)`` keep ``n`` with ``n mod 2 s_i < s_i``."""
    _require_classical(window, "optimal_C")
    if window.radius > OPTIMAL_C_MAX:
        raise ValueError(f"optimal_C is generated densely only up to 11! = {OPTIMAL_C_MAX}")
    return make_set(window, _optimal_C_bits(1, window.radius))


def gen_optimal_C_slice(start: int, length: int) -> LatticeSet:
    """C on ``[start, start + length)``, stored on a ``[1, length]`` window.

    Cell ``t`` of the result stands for the integer ``start + t - 1``.  This
    reaches blocks far beyond any dense window (``s_i = 5`` first appears on
    ``[14!, 15!)``).
    """
    if start < 1 or length < 1:
        raise ValueError("start and length must be positive")
    w = Window.classical(length)
    return make_set(w, _optimal_C_bits(start, start + length - 1))


def first_block_with(s: int) -> int:
    """Smallest ``i`` with ``s_i = s``."""
    if s < 1:
        raise ValueError("s must be positive")
    i = 1
    while s_sequence(i) != s:
        i += 1
    return i


# -- big pair ----------------------------------------------------------------

def r_p(base: int, p: int) -> Fraction:
    """``(b^p - 2) / (2 (b^p - 1))``, the interval fraction of ``C_{n,p}``."""
    if p < 1:
        raise ValueError("r_p needs p >= 1")
    q = base**p
    return Fraction(q - 2, 2 * (q - 1))


DEFAULT_EXPONENTS = {
    (1, 0): 1, (1, 1): 2,
    (2, 0): 3, (2, 1): 4, (2, 2): 5,
    (3, 0): 6, (3, 1): 7, (3, 2): 8, (3, 3): 12,
}


def default_growth(base: int) -> dict[tuple[int, int], int]:
    """``g(n, p) = base^e(n, p)`` with small exponents standing in for ``(n² + p)²``."""
    return {key: base**e for key, e in DEFAULT_EXPONENTS.items()}


def _growth_table(base: int, growth) -> dict[tuple[int, int], int]:
    if growth is None:
        return default_growth(base)
    if callable(growth):
        table = {}
        n = 1
        # a callable is sampled until a level fails to be defined
        while True:
            try:
                row = {(n, p): int(growth(n, p)) for p in range(n + 1)}
            except (KeyError, ValueError):
                break
            table.update(row)
            n += 1
            if n > 64:
                break
        return table
    return {tuple(k): int(v) for k, v in growth.items()}


def _check_growth(table: Mapping[tuple[int, int], int], big_n: int) -> list[int]:
    levels = sorted({n for n, _ in table})
    if not levels or levels != list(range(1, levels[-1] + 1)):
        raise ValueError("growth map must define levels 1, 2, ... consecutively")
    seq = []
    for n in levels:
        for p in range(n + 1):
            if (n, p) not in table:
                raise ValueError(f"growth map is missing g({n}, {p})")
            seq.append(table[(n, p)])
    if any(b <= a for a, b in zip(seq, seq[1:])):
        raise ValueError("growth map must be strictly increasing")
    too_big = [v for v in seq if v > big_n]
    if too_big:
        raise GrowthTooLarge(f"growth value {too_big[0]} exceeds window radius {big_n}")
    return levels


def d_set_bits(base: int, lo: int, hi: int, p_max: int | None = None) -> np.ndarray:
    """Membership of ``D`` (or ``D_{p_max}``) on ``lo..hi``, with ``0 <= lo``.

    ``D_p`` removes ``E_q = ⋃_k (k b^(2q) - [1, b^q])`` for ``q <= p``.
    Without ``p_max`` every ``q`` that can reach ``hi`` is removed, which
    gives ``D`` exactly on the range.
    """
    coords = np.arange(lo, hi + 1, dtype=np.int64)
    keep = np.ones(len(coords), dtype=bool)
    q = 1
    while (p_max is None or q <= p_max) and base**(2 * q) - base**q <= hi:
        period = base**(2 * q)
        # x ∈ E_q iff x mod b^2q lies in [b^2q - b^q, b^2q - 1] and x >= b^2q - b^q
        keep &= ~((coords % period >= period - base**q) & (coords >= period - base**q))
        q += 1
    return keep


def gen_big_pair(base: int = 4, growth=None, window: Window | None = None) -> tuple[LatticeSet, LatticeSet]:
    """The pair built from ``C_{n,p}`` blocks and translated copies of ``F_n``.

    ``growth`` maps ``(n, p)`` to ``g(n, p)`` (dict or callable); the default
    is :func:`default_growth`.  ``C_{n,p}`` for ``1 <= p < n`` is an
    interval covering the fraction ``r_p`` of ``[g(n,p), g(n,p+1)]`` followed
    by the multiples of ``base^p``.  ``C_{n,0}`` and ``C_{n,n}`` are the even
    numbers of their ranges.  ``B = ⋃_{n>=2} g(n, 0) + F_n`` with
    ``F_n = D ∩ [0, base^(2n) - 1]``.
    """
    if base < 3:
        raise ValueError("base must be at least 3")
    if window is None:
        raise ValueError("a window is required")
    _require_classical(window, "big_pair")
    table = _growth_table(base, growth)
    levels = _check_growth(table, window.radius)
    a = np.zeros(window.shape, dtype=bool)
    for n in levels:
        for p in range(n + 1):
            lo = table[(n, p)]
            nxt = table.get((n, p + 1), table.get((n + 1, 0), window.radius))
            if p == 0 or p == n:
                _fill(a, window, lo, nxt, step=2, phase=0)
                continue
            cut = lo + math.floor(r_p(base, p) * (nxt - lo))
            _fill(a, window, lo, cut)
            _fill(a, window, cut, nxt, step=base**p, phase=0)
    b = np.zeros(window.shape, dtype=bool)
    for n in levels:
        if n < 2:
            continue
        shift = table[(n, 0)]
        top = min(base**(2 * n) - 1, window.radius - shift)
        if top < 0:
            continue
        keep = d_set_bits(base, 0, top)
        cells = shift + np.flatnonzero(keep)
        b[cells[cells >= window.low] - window.low] = True
    return make_set(window, a), make_set(window, b)


def d_density(base: int, big_n: int) -> Fraction:
    """``|D ∩ [1, N]| / N`` by direct counting."""
    keep = d_set_bits(base, 1, big_n)
    return Fraction(int(np.count_nonzero(keep)), big_n)


def big_pair_window(base: int = 4, growth=None) -> tuple[Window, int]:
    """The window ``[1, H]`` with ``H = g(n, 2p + 1)`` at the last level, and that ``p``."""
    table = _growth_table(base, growth)
    top = max(n for n, _ in table)
    p = (top - 1) // 2
    return Window.classical(table[(top, 2 * p + 1)]), p


# -- non piecewise syndetic ----------------------------------------------------

def gen_non_pws(n0: int, window: Window) -> LatticeSet:
    """``Z \\ B`` with ``B = ⋃_{j>=n0} ⋃_{x≠0} (j! x + [1, (j-1)!])``."""
    if n0 < 3:
        raise ValueError("n0 must be at least 3")
    if window.dim != 1:
        raise ValueError("non_pws is generated in one dimension")
    coords = window.axis_coords()
    in_b = np.zeros(window.shape, dtype=bool)
    j = n0
    while math.factorial(j) - math.factorial(j - 1) <= window.radius:
        fj, fj1 = math.factorial(j), math.factorial(j - 1)
        x, rem = np.divmod(coords - 1, fj)
        in_b |= (rem < fj1) & (x != 0)
        j += 1
    return make_set(window, ~in_b)


def non_pws_lower_bound(n0: int, big_n: int) -> Fraction:
    """``1 - Σ 1/j`` over the ``j`` whose blocks reach ``[1, N]``."""
    total = Fraction(0)
    j = n0
    while math.factorial(j) - math.factorial(j - 1) <= big_n:
        total += Fraction(1, j)
        j += 1
    return 1 - total


# -- dispatch ------------------------------------------------------------------

@dataclass(frozen=True)
class FamilySpec:
    name: str
    params: tuple[tuple[str, int], ...] = field(default=())

    def __post_init__(self):
        if self.name not in FAMILY_NAMES:
            raise UnknownFamily(self.name)

    def param(self, key: str, default: int | None = None) -> int | None:
        return dict(self.params).get(key, default)


_ALLOWED = {
    "upper_pair": set(),
    "epsilon_set": set(),
    "optimal_C": set(),
    "big_pair": {"base"},
    "non_pws": {"n0"},
}


def generate(spec: FamilySpec, window: Window) -> dict[str, LatticeSet]:
    """Build a family; the result maps part names (``A``, ``B``) to sets."""
    extra = set(dict(spec.params)) - _ALLOWED[spec.name]
    if extra:
        raise ValueError(f"family {spec.name} takes no parameter(s) {sorted(extra)}")
    if spec.name == "upper_pair":
        a, b = gen_upper_pair(window)
        return {"A": a, "B": b}
    if spec.name == "epsilon_set":
        return {"A": gen_epsilon_set(window)}
    if spec.name == "optimal_C":
        return {"A": gen_optimal_C(window)}
    if spec.name == "big_pair":
        a, b = gen_big_pair(spec.param("base", 4), None, window)
        return {"A": a, "B": b}
    return {"A": gen_non_pws(spec.param("n0", 3), window)}


GENERATORS: dict[str, Callable] = {
    "upper_pair": gen_upper_pair,
    "epsilon_set": gen_epsilon_set,
    "optimal_C": gen_optimal_C,
    "big_pair": gen_big_pair,
    "non_pws": gen_non_pws,
}
