"""Windowed lattice sets.

A :class:`Window` is a bounded box of integer points, either the classical
interval ``[1, N]`` or the centered cube ``[-N, N]^dim``.  A
:class:`LatticeSet` is a dense boolean array over a window, stored in
row-major order.  Every operation returns a new set; the underlying array is
marked read-only.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import OutOfWindow, WindowMismatch

MAX_CELLS = 2**31


class Convention(enum.Enum):
    CLASSICAL = "Classical1D"
    CENTERED = "Centered"


@dataclass(frozen=True)
class Window:
    dim: int
    convention: Convention
    radius: int

    def __post_init__(self):
        if not 1 <= self.dim <= 3:
            raise ValueError(f"dim must be 1..3, got {self.dim}")
        if self.radius < 1:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.convention is Convention.CLASSICAL and self.dim != 1:
            raise ValueError("Classical1D windows are one-dimensional")
        if self.size > MAX_CELLS:
            raise ValueError(f"window has {self.size} cells (limit {MAX_CELLS})")

    @classmethod
    def classical(cls, n: int) -> "Window":
        return cls(1, Convention.CLASSICAL, n)

    @classmethod
    def centered(cls, n: int, dim: int = 1) -> "Window":
        return cls(dim, Convention.CENTERED, n)

    @classmethod
    def parse(cls, spec: str) -> "Window":
        """Parse ``1d:N`` (classical ``[1,N]``) or ``cN:d`` (centered)."""
        spec = spec.strip()
        m = re.fullmatch(r"1d:(\d+)", spec)
        if m:
            return cls.classical(int(m.group(1)))
        m = re.fullmatch(r"c(\d+):([123])", spec)
        if m:
            return cls.centered(int(m.group(1)), int(m.group(2)))
        raise ValueError(f"bad window spec {spec!r}; expected '1d:N' or 'cN:d'")

    def spec(self) -> str:
        if self.convention is Convention.CLASSICAL:
            return f"1d:{self.radius}"
        return f"c{self.radius}:{self.dim}"

    @property
    def side(self) -> int:
        if self.convention is Convention.CLASSICAL:
            return self.radius
        return 2 * self.radius + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.dim

    @property
    def size(self) -> int:
        return self.side**self.dim

    @property
    def low(self) -> int:
        """Smallest coordinate along every axis."""
        return 1 if self.convention is Convention.CLASSICAL else -self.radius

    @property
    def high(self) -> int:
        return self.radius

    def contains(self, coord: Sequence[int]) -> bool:
        return len(coord) == self.dim and all(self.low <= c <= self.high for c in coord)

    def index_of(self, coord: Sequence[int]) -> tuple[int, ...]:
        return tuple(int(c) - self.low for c in coord)

    def scaled(self, radius: int) -> "Window":
        return Window(self.dim, self.convention, radius)

    def axis_coords(self) -> np.ndarray:
        return np.arange(self.low, self.high + 1, dtype=np.int64)


def _as_tuple(coord, dim: int) -> tuple[int, ...]:
    if isinstance(coord, (int, np.integer)):
        coord = (int(coord),)
    coord = tuple(int(c) for c in coord)
    if len(coord) != dim:
        raise OutOfWindow(coord)
    return coord


@dataclass(frozen=True, eq=False)
class LatticeSet:
    """Dense membership array over a :class:`Window`.

    ``clipped`` records whether the operation that produced the set dropped
    points that fell outside the window.
    """

    window: Window
    bits: np.ndarray
    clipped: bool = False
    cardinality: int = field(init=False)

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.shape != self.window.shape:
            raise ValueError(f"bits shape {bits.shape} != window shape {self.window.shape}")
        if bits.flags.writeable:
            bits = bits.copy()
            bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "cardinality", int(np.count_nonzero(bits)))

    # construction -------------------------------------------------------
    @classmethod
    def empty(cls, window: Window) -> "LatticeSet":
        return cls(window, np.zeros(window.shape, dtype=bool))

    @classmethod
    def full(cls, window: Window) -> "LatticeSet":
        return cls(window, np.ones(window.shape, dtype=bool))

    @classmethod
    def from_coords(cls, window: Window, coords: Iterable) -> "LatticeSet":
        return build_set(window, coords)

    @classmethod
    def from_members(cls, window: Window, members) -> "LatticeSet":
        """Build a 1-D set from an integer array, silently dropping outsiders."""
        if window.dim != 1:
            raise ValueError("from_members is one-dimensional")
        members = np.asarray(members, dtype=np.int64)
        inside = (members >= window.low) & (members <= window.high)
        bits = np.zeros(window.shape, dtype=bool)
        bits[members[inside] - window.low] = True
        return make_set(window, bits, clipped=bool((~inside).any()))

    # inspection ---------------------------------------------------------
    def __len__(self) -> int:
        return self.cardinality

    def __contains__(self, coord) -> bool:
        coord = _as_tuple(coord, self.window.dim)
        if not self.window.contains(coord):
            return False
        return bool(self.bits[self.window.index_of(coord)])

    def __eq__(self, other) -> bool:
        if not isinstance(other, LatticeSet):
            return NotImplemented
        return self.window == other.window and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.window, self.bits.tobytes()))

    def __repr__(self) -> str:
        return f"LatticeSet({self.window.spec()}, |A|={self.cardinality})"

    def members(self) -> np.ndarray:
        """Sorted coordinates of a 1-D set."""
        if self.window.dim != 1:
            raise ValueError("members() is one-dimensional; use coords()")
        return np.flatnonzero(self.bits).astype(np.int64) + self.window.low

    def coords(self) -> list[tuple[int, ...]]:
        idx = np.argwhere(self.bits) + self.window.low
        return [tuple(int(c) for c in row) for row in idx]

    def recount(self) -> int:
        return int(np.count_nonzero(self.bits))

    def issubset(self, other: "LatticeSet") -> bool:
        _same_window(self, other)
        return not np.any(self.bits & ~other.bits)

    # bit-parallel views (1-D) -------------------------------------------
    def to_int(self) -> int:
        """Membership as a Python integer; bit ``i`` is flat cell ``i``."""
        packed = np.packbits(self.bits.reshape(-1), bitorder="little")
        return int.from_bytes(packed.tobytes(), "little")

    @classmethod
    def from_int(cls, window: Window, value: int, clipped: bool = False) -> "LatticeSet":
        size = window.size
        value &= (1 << size) - 1
        raw = value.to_bytes((size + 7) // 8, "little")
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:size]
        return make_set(window, bits.astype(bool).reshape(window.shape), clipped=clipped)

    # operator sugar -----------------------------------------------------
    def __or__(self, other):
        return boolean_op("union", self, other)

    def __and__(self, other):
        return boolean_op("intersect", self, other)

    def __sub__(self, other):
        return boolean_op("difference", self, other)

    def __invert__(self):
        return boolean_op("complement", self)


def make_set(window: Window, bits: np.ndarray, clipped: bool = False) -> LatticeSet:
    """Wrap a freshly computed array without copying it."""
    bits = np.asarray(bits, dtype=bool)
    bits.flags.writeable = False
    return LatticeSet(window, bits, clipped=clipped)


def _same_window(a: LatticeSet, b: LatticeSet) -> None:
    if a.window != b.window:
        raise WindowMismatch(f"{a.window.spec()} vs {b.window.spec()}")


def build_set(window: Window, coords: Iterable) -> LatticeSet:
    """Materialize a coordinate collection; any outsider raises OutOfWindow."""
    bits = np.zeros(window.shape, dtype=bool)
    for coord in coords:
        coord = _as_tuple(coord, window.dim)
        if not window.contains(coord):
            raise OutOfWindow(coord if window.dim > 1 else coord[0])
        bits[window.index_of(coord)] = True
    return make_set(window, bits)


def boolean_op(op: str, a: LatticeSet, b: LatticeSet | None = None) -> LatticeSet:
    if op == "complement":
        if b is not None:
            raise ValueError("complement takes a single operand")
        return make_set(a.window, ~a.bits)
    if b is None:
        raise ValueError(f"{op} needs two operands")
    _same_window(a, b)
    if op == "union":
        bits = a.bits | b.bits
    elif op == "intersect":
        bits = a.bits & b.bits
    elif op == "difference":
        bits = a.bits & ~b.bits
    else:
        raise ValueError(f"unknown boolean op {op!r}")
    return make_set(a.window, bits)


def shift_array(bits: np.ndarray, offset: Sequence[int]) -> tuple[np.ndarray, bool]:
    """Shift an n-d boolean array by ``offset`` cells, dropping what falls off.

    Returns the shifted array and whether any set cell was dropped.
    """
    out = np.zeros_like(bits)
    src, dst = [], []
    for size, v in zip(bits.shape, offset):
        if abs(v) >= size:
            return out, bool(bits.any())
        if v >= 0:
            src.append(slice(0, size - v))
            dst.append(slice(v, size))
        else:
            src.append(slice(-v, size))
            dst.append(slice(0, size + v))
    kept = bits[tuple(src)]
    out[tuple(dst)] = kept
    return out, int(np.count_nonzero(kept)) != int(np.count_nonzero(bits))


def translate(a: LatticeSet, v) -> LatticeSet:
    v = _as_tuple(v, a.window.dim)
    bits, clipped = shift_array(a.bits, v)
    return make_set(a.window, bits, clipped=clipped)


def embed(a: LatticeSet, window: Window) -> LatticeSet:
    """Copy ``a`` into another window of the same dimension, keeping coordinates."""
    if window.dim != a.window.dim:
        raise WindowMismatch("embedding needs equal dimensions")
    bits = np.zeros(window.shape, dtype=bool)
    lo = max(a.window.low, window.low)
    hi = min(a.window.high, window.high)
    if lo <= hi:
        src = tuple(slice(lo - a.window.low, hi - a.window.low + 1) for _ in range(window.dim))
        dst = tuple(slice(lo - window.low, hi - window.low + 1) for _ in range(window.dim))
        bits[dst] = a.bits[src]
    lost = int(np.count_nonzero(bits)) != a.cardinality
    return make_set(window, bits, clipped=lost)


# serialization ------------------------------------------------------------

def dumps(a: LatticeSet) -> str:
    """Run-length text form: a ``window`` header then ``run start length`` lines."""
    w = a.window
    lines = [f"window {w.dim} {w.convention.value} {w.radius}"]
    flat = np.concatenate(([False], a.bits.reshape(-1), [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(flat))
    for start, stop in zip(edges[::2], edges[1::2]):
        lines.append(f"run {int(start)} {int(stop - start)}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> LatticeSet:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty set serialization")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "window":
        raise ValueError(f"bad header line {lines[0]!r}")
    window = Window(int(head[1]), Convention(head[2]), int(head[3]))
    flat = np.zeros(window.size, dtype=bool)
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3 or parts[0] != "run":
            raise ValueError(f"bad run line {ln!r}")
        start, length = int(parts[1]), int(parts[2])
        if start < 0 or length < 1 or start + length > window.size:
            raise ValueError(f"run {start}+{length} exceeds window")
        flat[start:start + length] = True
    return make_set(window, flat.reshape(window.shape))
