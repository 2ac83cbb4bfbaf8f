"""Minkowski operations on lattice sets.

Sumsets, dilation and erosion by the cube ``[-m, m]^d`` (or the one-sided
cube ``[0, m]^d``), and the n-block transforms ``A_[n]`` / ``A^[n]``.
"""

from __future__ import annotations

import numpy as np

from .errors import RadiusTooLarge, WindowMismatch
from .lattice import LatticeSet, Window, make_set, shift_array

ANCHORS = ("center", "origin")


# -- sumset -----------------------------------------------------------------

def _runs(bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    flat = np.concatenate(([0], bits.astype(np.int8), [0]))
    edges = np.flatnonzero(np.diff(flat))
    return edges[::2], edges[1::2] - edges[::2]


def _sumset_int(big: int, small_bits: np.ndarray) -> int:
    """OR of ``big << t`` over every index ``t`` of ``small_bits``.

    Each run ``[s, s+L)`` of the small operand costs one shift plus
    ``log2 L`` doubling steps.
    """
    acc = 0
    starts, lengths = _runs(small_bits)
    for s, length in zip(starts.tolist(), lengths.tolist()):
        block = big
        done = 1
        while done < length:
            step = min(done, length - done)
            block |= block << step
            done += step
        acc |= block << s
    return acc


def sumset(a: LatticeSet, b: LatticeSet, expand: bool = False) -> LatticeSet:
    """``{x + y : x in a, y in b}`` on the common window.

    With ``expand`` the result lives on a window of twice the radius, which
    holds every sum without clipping.
    """
    if a.window != b.window:
        raise WindowMismatch(f"{a.window.spec()} vs {b.window.spec()}")
    w = a.window
    out_w = w.scaled(2 * w.radius) if expand else w
    if a.cardinality == 0 or b.cardinality == 0:
        return LatticeSet.empty(out_w)
    if w.dim == 1:
        return _sumset_1d(a, b, out_w)
    return _sumset_nd(a, b, out_w)


def _sumset_1d(a: LatticeSet, b: LatticeSet, out_w: Window) -> LatticeSet:
    big, small = (a, b) if a.cardinality >= b.cardinality else (b, a)
    raw = _sumset_int(big.to_int(), small.bits)
    # raw bit t holds index-sum t; coordinate = t + 2*low
    offset = 2 * big.window.low - out_w.low
    if offset >= 0:
        full = raw << offset
        lost_low = False
    else:
        lost_low = bool(raw & ((1 << -offset) - 1))
        full = raw >> -offset
    size = out_w.size
    clipped = lost_low or bool(full >> size)
    return LatticeSet.from_int(out_w, full & ((1 << size) - 1), clipped=clipped)


def _sumset_nd(a: LatticeSet, b: LatticeSet, out_w: Window) -> LatticeSet:
    big, small = (a, b) if a.cardinality >= b.cardinality else (b, a)
    src = big.bits
    if out_w != big.window:
        src = np.zeros(out_w.shape, dtype=bool)
        lo = big.window.low - out_w.low
        src[tuple(slice(lo, lo + big.window.side) for _ in range(out_w.dim))] = big.bits
    out = np.zeros(out_w.shape, dtype=bool)
    clipped = False
    for coord in np.argwhere(small.bits) + small.window.low:
        moved, lost = shift_array(src, coord.tolist())
        out |= moved
        clipped |= lost
    return make_set(out_w, out, clipped=clipped)


# -- cube dilation / erosion ------------------------------------------------

def _window_counts(bits: np.ndarray, axis: int, lo: int, hi: int, dtype=None) -> np.ndarray:
    """Sum of cells in ``[z+lo, z+hi]`` along ``axis`` for every ``z``.

    Cells outside the array count as empty.
    """
    n = bits.shape[axis]
    if dtype is None:
        dtype = np.int32 if n < 2**31 - 1 else np.int64
    moved = np.moveaxis(bits, axis, -1)
    # prefix sums padded with their edge values, so both ends are plain slices
    pad_lo, pad_hi = max(0, -lo), max(0, hi) + 1
    ext = np.empty(moved.shape[:-1] + (pad_lo + n + 1 + pad_hi,), dtype=dtype)
    ext[..., :pad_lo + 1] = 0
    np.cumsum(moved, axis=-1, dtype=dtype, out=ext[..., pad_lo + 1:pad_lo + n + 1])
    ext[..., pad_lo + n + 1:] = ext[..., pad_lo + n:pad_lo + n + 1]
    top = ext[..., pad_lo + hi + 1:pad_lo + hi + 1 + n]
    bot = ext[..., pad_lo + lo:pad_lo + lo + n]
    return np.moveaxis(top - bot, -1, axis)


def _window_sums(values: np.ndarray, axis: int, lo: int, hi: int) -> np.ndarray:
    return _window_counts(values, axis, lo, hi, dtype=np.int64)


def box_counts(bits: np.ndarray, r: int) -> np.ndarray:
    """``|S ∩ (z + [-r, r]^d)|`` for every cell ``z``; outside cells are empty."""
    out = bits.astype(np.int64)
    for axis in range(bits.ndim):
        out = _window_sums(out, axis, -r, r)
    return out


def _check_radius(w: Window, r: int, what: str) -> None:
    if r < 0:
        raise ValueError(f"{what} radius must be non-negative, got {r}")
    if r > w.radius:
        raise RadiusTooLarge(f"{what} radius {r} exceeds window radius {w.radius}")


def _bounds(r: int, anchor: str, dilation: bool) -> tuple[int, int]:
    if anchor == "center":
        return -r, r
    if anchor != "origin":
        raise ValueError(f"anchor must be one of {ANCHORS}")
    # A + [0,r] looks back; {z : z + [0,r] ⊆ S} looks forward
    return (-r, 0) if dilation else (0, r)


def dilate_cube(a: LatticeSet, m: int, anchor: str = "center") -> LatticeSet:
    """``A + [-m, m]^d`` (or ``A + [0, m]^d`` with ``anchor='origin'``), clipped."""
    _check_radius(a.window, m, "dilation")
    if m == 0:
        return a
    lo, hi = _bounds(m, anchor, dilation=True)
    bits = a.bits
    for axis in range(bits.ndim):
        bits = _window_counts(bits, axis, lo, hi) > 0
    return make_set(a.window, bits)


def erode_cube(s: LatticeSet, k: int, anchor: str = "center") -> LatticeSet:
    """``{z : z + [-k, k]^d ⊆ S}`` restricted to cubes lying inside the window.

    Cells within ``k`` of the boundary never qualify; nothing outside the
    window is assumed to belong to ``S``.
    """
    _check_radius(s.window, k, "erosion")
    if k == 0:
        return s
    lo, hi = _bounds(k, anchor, dilation=False)
    need = hi - lo + 1
    bits = s.bits
    for axis in range(bits.ndim):
        bits = _window_counts(bits, axis, lo, hi) == need
    return make_set(s.window, bits)


def interior_mask(w: Window, k: int, anchor: str = "center") -> np.ndarray:
    """Cells whose ``k``-cube lies inside the window."""
    lo, hi = _bounds(k, anchor, dilation=False)
    axis_ok = np.zeros(w.side, dtype=bool)
    axis_ok[max(0, -lo):w.side - max(0, hi)] = True
    mask = axis_ok
    for _ in range(w.dim - 1):
        mask = np.logical_and.outer(mask, axis_ok)
    return mask


# -- n-block transforms -----------------------------------------------------

def _quotient_window(w: Window, n: int) -> Window:
    return w.scaled(max(1, w.radius // n))


def block_quotient(a: LatticeSet, n: int) -> LatticeSet:
    """``A_[n] = {x : (n x + [0, n-1]^d) ∩ A ≠ ∅}`` on the window of radius ``N // n``."""
    if n < 1:
        raise ValueError("block size must be positive")
    if n == 1:
        return a
    w = a.window
    qw = _quotient_window(w, n)
    out = np.zeros(qw.shape, dtype=bool)
    if a.cardinality:
        idx = np.argwhere(a.bits) + w.low
        q = np.floor_divide(idx, n)
        inside = np.all((q >= qw.low) & (q <= qw.high), axis=1)
        q = q[inside] - qw.low
        out[tuple(q.T)] = True
    return make_set(qw, out)


def _block_any(a: LatticeSet, n: int) -> np.ndarray:
    """For every cell, whether its n-block meets ``a`` (blocks clipped to the window)."""
    w = a.window
    coords = w.axis_coords()
    labels = np.floor_divide(coords, n)
    labels -= labels[0]
    bits = a.bits
    for axis in range(w.dim):
        moved = np.moveaxis(bits, axis, -1)
        starts = np.flatnonzero(np.r_[True, labels[1:] != labels[:-1]])
        hit = np.logical_or.reduceat(moved, starts, axis=-1)
        bits = np.moveaxis(hit[..., labels], -1, axis)
    return bits


def block_fill(a: LatticeSet, n: int) -> LatticeSet:
    """``A^[n] = n A_[n] + [0, n-1]^d``: every n-block meeting ``A``, filled in.

    Blocks are the cells sharing ``floor(c / n)``; blocks cut by the window
    edge are filled inside the window, so ``A ⊆ A^[n]`` always holds.
    """
    if n < 1:
        raise ValueError("block size must be positive")
    if n == 1:
        return a
    return make_set(a.window, _block_any(a, n))
