"""Robinson-type aperiodic Wang tile set and its canonical tiling.

The tiling lives on cells ``(x, y)`` with ``x, y >= 1`` (``y`` grows to the
north).  Every column and row carries a level given by the ruler sequence
``level(x) = v2(x) + 1``, the fixed point of the substitution
``r_k = r_{k-1} + [k] + r_{k-1}``.  A cross of level ``k`` sits where the
column and row levels are both ``k``.  Crosses of level ``k`` are the corners
of squares of side ``2**k``; the segment from each side midpoint of such a
square to its centre (a "spoke") is also drawn.  Odd levels give the nested
family of squares with sides ``2, 8, 32, ...``; even levels give the
interlocking family.

Edge markings record which lines cross an edge, which half of its segment
the edge lies in, and the parities of the cell coordinates.  The tile set is
the set of tiles that occur in the canonical tiling; it has 51 tiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .tiling import Grid, TileSet

ORIGIN = 1 << 30  # a cross of level 31; canonical patches are centred here

NONE, LO, HI = 0, 1, 2  # line absent / edge in lower half / upper half of a segment


def level(x):
    """Ruler level ``v2(x) + 1`` of a positive coordinate (scalar or array)."""
    x = np.asarray(x, dtype=np.int64)
    if np.any(x < 1):
        raise DomainError("coordinates must be positive")
    low = x & -x
    return np.round(np.log2(low)).astype(np.int64) + 1


def ruler(k: int) -> list:
    """Level sequence of ``x = 1 .. 2**k - 1`` built by substitution."""
    seq: list = []
    for j in range(1, k + 1):
        seq = seq + [j] + seq
    return seq


def _segment(x, k):
    """Position of ``x`` relative to the level-``k`` segments along a line.

    Segments run from ``2**(k-1) + m * 2**(k+1)`` over a length ``2**k``.
    Returns codes for the line crossing the east and west edge of the cell.
    """
    half = np.left_shift(1, k - 1)
    side = np.left_shift(1, k)
    u = np.mod(x - half, 2 * side)
    on = u <= side
    east = np.where(on & (u < side), np.where(u < half, LO, HI), NONE)
    west = np.where(on & (u > 0), np.where(u <= half, LO, HI), NONE)
    return east, west


def _lines(x, y):
    """Border and spoke codes crossing the east/west edges of cell ``(x, y)``."""
    k = level(y)
    be, bw = _segment(x, k)
    j = np.maximum(k - 1, 1)
    se, sw = _segment(x, j)
    has = k >= 2
    return be, bw, np.where(has, se, NONE), np.where(has, sw, NONE)


def _code(p, q, border, spoke):
    return ((p * 2 + q) * 3 + border) * 3 + spoke


def _edge_codes(x, y):
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    px, py = x % 2, y % 2
    be, bw, se, sw = _lines(x, y)
    bn, bs, sn, ss = _lines(y, x)
    return (_code(py, px, bn, sn), _code(px, py, be, se),
            _code(1 - py, px, bs, ss), _code(1 - px, py, bw, sw))


def _tile_key(codes):
    n, e, s, w = codes
    return ((n * 36 + e) * 36 + s) * 36 + w


@dataclass(frozen=True)
class _Table:
    tiles: TileSet
    keys: np.ndarray  # sorted tile keys, index = tile index
    marking_codes: np.ndarray  # marking id -> raw edge code
    borders: np.ndarray = field(repr=False)  # (n_tiles, 4) bool, N E S W
    spokes: np.ndarray = field(repr=False)


@lru_cache(maxsize=1)
def _table() -> _Table:
    xs, ys = np.meshgrid(np.arange(1, 256), np.arange(1, 256))
    codes = np.stack(_edge_codes(xs.ravel(), ys.ravel()), axis=1)
    keys, first = np.unique(_tile_key(codes.T), return_index=True)
    raw = codes[first]
    marking_codes = np.unique(raw)
    ids = np.searchsorted(marking_codes, raw)
    tiles = TileSet(tuple(map(tuple, ids)), len(marking_codes))
    borders = (raw // 3) % 3 != NONE
    spokes = raw % 3 != NONE
    return _Table(tiles, keys, marking_codes, borders, spokes)


def robinson_tileset() -> TileSet:
    """The 51-tile set, ordered by its marking codes."""
    return _table().tiles


def tile_index(x, y):
    """Tile index of the canonical tiling at cell(s) ``(x, y)``."""
    t = _table()
    key = _tile_key(_edge_codes(x, y))
    idx = np.searchsorted(t.keys, key)
    if np.any(idx >= len(t.keys)) or np.any(t.keys[np.minimum(idx, len(t.keys) - 1)] != key):
        raise RuntimeError("canonical tiling produced a tile outside the tile set")
    return idx


def canonical_window(x0: int, y0: int, width: int, height: int) -> Grid:
    """Patch of the canonical tiling with lower-left cell ``(x0, y0)``.

    Row 0 of the returned grid is the northernmost row ``y0 + height - 1``.
    """
    if x0 < 1 or y0 < 1:
        raise DomainError("window must lie in the positive quadrant")
    xs = np.arange(x0, x0 + width, dtype=np.int64)
    ys = np.arange(y0 + height - 1, y0 - 1, -1, dtype=np.int64)
    X, Y = np.meshgrid(xs, ys)
    return Grid.from_array(tile_index(X, Y))


def window_origin(size: int) -> int:
    return ORIGIN - size // 2


def generate_robinson(size: int) -> Grid:
    """``size x size`` patch centred on the level-31 cross at ``(2**30, 2**30)``."""
    if size < 1:
        raise DomainError("size must be positive")
    o = window_origin(size)
    return canonical_window(o, o, size, size)


def cross_levels(grid_x0: int, grid_y0: int, width: int, height: int) -> np.ndarray:
    """Cross level per cell of a window (0 where there is no cross), row 0 north."""
    xs = np.arange(grid_x0, grid_x0 + width, dtype=np.int64)
    ys = np.arange(grid_y0 + height - 1, grid_y0 - 1, -1, dtype=np.int64)
    lx, ly = level(xs)[None, :], level(ys)[:, None]
    return np.where(lx == ly, lx, 0)


# ---------------------------------------------------------------- squares

@dataclass
class SquareCensus:
    """Completed square borders by side length.

    A square's side is its corner-to-corner distance in lattice units (the
    border runs over ``side + 1`` cells).  In the ``nested`` family the sides
    are ``BASE * 4**j``.
    """

    counts: dict
    family: str = "nested"
    base: int = 2

    def ladder(self):
        return sorted(self.counts)


BASE = 2


def _side_flags(grid: Grid):
    t = _table()
    a = grid.as_array()
    known = a < len(t.keys)
    b = np.zeros(a.shape + (4,), dtype=bool)
    b[known] = t.borders[a[known]]
    return b[..., 0], b[..., 1], b[..., 2], b[..., 3]


def find_squares(grid: Grid):
    """All complete square borders as ``(row, col, side)`` of the north-west corner."""
    bN, bE, bS, bW = _side_flags(grid)
    h, w = bN.shape
    found = []
    for r, c in zip(*np.nonzero(bE & bN & ~bW & ~bS)):  # south-west corners
        s = 1
        while c + s < w and bW[r, c + s] and bE[r, c + s]:
            s += 1
        cr = c + s
        if cr >= w or not (bW[r, cr] and bN[r, cr]) or bE[r, cr] or bS[r, cr]:
            continue
        top = r - s
        if top < 0:
            continue
        if not (np.all(bN[top + 1:r, c] & bS[top + 1:r, c]) and np.all(bN[top + 1:r, cr] & bS[top + 1:r, cr])):
            continue
        if not (np.all(bW[top, c + 1:cr] & bE[top, c + 1:cr])):
            continue
        if not (bS[top, c] and bE[top, c] and not bN[top, c] and not bW[top, c]):
            continue
        if not (bS[top, cr] and bW[top, cr] and not bN[top, cr] and not bE[top, cr]):
            continue
        found.append((int(top), int(c), int(s)))
    return sorted(found)


def in_nested_family(side: int) -> bool:
    """Sides ``2 * 4**j``: odd powers of two."""
    return side >= 2 and side & (side - 1) == 0 and (side.bit_length() - 1) % 2 == 1


def square_census(grid: Grid, family: str = "nested") -> SquareCensus:
    """Count complete squares by side; ``family`` is ``"nested"`` or ``"all"``."""
    if family not in ("nested", "all"):
        raise DomainError("family must be 'nested' or 'all'")
    counts: dict = {}
    for _, _, s in find_squares(grid):
        if family == "all" or in_nested_family(s):
            counts[s] = counts.get(s, 0) + 1
    return SquareCensus(dict(sorted(counts.items())), family=family, base=BASE)


def borders_cross(a, b) -> bool:
    """Whether the border outlines of two squares ``(row, col, side)`` intersect
    without one containing the other."""
    def box(q):
        r, c, s = q
        return r, c, r + s, c + s
    r0, c0, r1, c1 = box(a)
    R0, C0, R1, C1 = box(b)
    if r1 < R0 or R1 < r0 or c1 < C0 or C1 < c0:
        return False
    inside = R0 < r0 and r1 < R1 and C0 < c0 and c1 < C1
    outside = r0 < R0 and R1 < r1 and c0 < C0 and C1 < c1
    return not (inside or outside)


def robinson_palette() -> np.ndarray:
    """One colour per tile: dark for square borders, mid for spokes, light otherwise."""
    t = _table()
    n = len(t.keys)
    pal = np.empty((n, 3), dtype=np.uint8)
    for i in range(n):
        if t.borders[i].any():
            pal[i] = (40 + 12 * (i % 4), 40, 90)
        elif t.spokes[i].any():
            pal[i] = (150, 160 + 10 * (i % 3), 200)
        else:
            pal[i] = (235, 232 - 6 * (i % 3), 220)
    return pal
