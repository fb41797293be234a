"""Wang tiles, finite tilings and their classical Hamiltonians.

Grid convention: ``cells`` is row-major with row 0 at the top (north).  Cell
``(r, c)`` touches ``(r, c + 1)`` through its east edge and ``(r + 1, c)``
through its south edge.  Boundaries are open.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional

import numpy as np

from .errors import DomainError, MalformedInputError, ResourceGuardError
from .spectra import LocalHamiltonian

SOLVE_GUARD = 400


class WangTile(NamedTuple):
    north: int
    east: int
    south: int
    west: int


@dataclass(frozen=True, eq=False)
class TileSet:
    """Ordered Wang tiles; the index of a tile is its basis label."""

    tiles: tuple
    n_markings: int
    _arr: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        tiles = tuple(WangTile(*map(int, t)) for t in self.tiles)
        if not tiles:
            raise DomainError("tile set is empty")
        if len(set(tiles)) != len(tiles):
            raise DomainError("tile set contains duplicate tiles")
        arr = np.array(tiles, dtype=np.int64).reshape(len(tiles), 4)
        if arr.min() < 0 or arr.max() >= self.n_markings:
            raise DomainError(f"markings must lie in [0, {self.n_markings})")
        object.__setattr__(self, "tiles", tiles)
        object.__setattr__(self, "_arr", arr)

    def __len__(self):
        return len(self.tiles)

    def __getitem__(self, i):
        return self.tiles[i]

    @property
    def N(self):
        return self._arr[:, 0]

    @property
    def E(self):
        return self._arr[:, 1]

    @property
    def S(self):
        return self._arr[:, 2]

    @property
    def W(self):
        return self._arr[:, 3]

    def horizontal_ok(self):
        """``ok[i, j]``: tile ``j`` may sit directly east of tile ``i``."""
        return self.E[:, None] == self.W[None, :]

    def vertical_ok(self):
        """``ok[i, j]``: tile ``j`` may sit directly south of tile ``i``."""
        return self.S[:, None] == self.N[None, :]


@dataclass(frozen=True, eq=False)
class Grid:
    width: int
    height: int
    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int64).ravel()
        if self.width < 1 or self.height < 1:
            raise MalformedInputError("grid sides must be positive")
        if cells.size != self.width * self.height:
            raise MalformedInputError(
                f"grid {self.width}x{self.height} needs {self.width * self.height} cells, got {cells.size}")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=np.int64)
        return cls(a.shape[1], a.shape[0], a.ravel())

    def as_array(self):
        return self.cells.reshape(self.height, self.width)

    def __getitem__(self, rc):
        r, c = rc
        return int(self.cells[r * self.width + c])

    def replace(self, rc, tile):
        a = self.as_array().copy()
        a[rc] = tile
        return Grid.from_array(a)

    def window(self, r0, c0, h, w):
        return Grid.from_array(self.as_array()[r0:r0 + h, c0:c0 + w])

    def __eq__(self, other):
        return (isinstance(other, Grid) and self.width == other.width
                and self.height == other.height and np.array_equal(self.cells, other.cells))

    __hash__ = None


@dataclass
class MismatchReport:
    count: int
    locations: list

    @property
    def valid(self):
        return self.count == 0


def _check_indices(grid: Grid, tiles: TileSet):
    if grid.cells.size and (grid.cells.min() < 0 or grid.cells.max() >= len(tiles)):
        raise MalformedInputError(f"grid references tiles outside [0, {len(tiles)})")


def verify_tiling(grid: Grid, tiles: TileSet) -> MismatchReport:
    """All adjacent cell pairs whose shared edge markings differ."""
    _check_indices(grid, tiles)
    a = grid.as_array()
    locs = []
    bad_h = tiles.E[a[:, :-1]] != tiles.W[a[:, 1:]]
    for r, c in zip(*np.nonzero(bad_h)):
        locs.append(((int(r), int(c)), (int(r), int(c) + 1)))
    bad_v = tiles.S[a[:-1, :]] != tiles.N[a[1:, :]]
    for r, c in zip(*np.nonzero(bad_v)):
        locs.append(((int(r), int(c)), (int(r) + 1, int(c))))
    locs.sort()
    return MismatchReport(len(locs), locs)


def defect_energy(grid: Grid, tiles: TileSet) -> int:
    """Mismatch count; the energy of ``grid`` under :func:`tiling_hamiltonian`."""
    return verify_tiling(grid, tiles).count


def tiling_hamiltonian(tiles: TileSet) -> LocalHamiltonian:
    """Diagonal 0/1 penalty on every non-matching ordered neighbour pair."""
    d = len(tiles)
    h_row = np.diag((~tiles.horizontal_ok()).astype(float).ravel())
    h_col = np.diag((~tiles.vertical_ok()).astype(float).ravel())
    return LocalHamiltonian(d, h_row, h_col, np.zeros((d, d)))


def _boundary_array(boundary, width, height, n_tiles):
    fixed = np.full((height, width), -1, dtype=np.int64)
    if boundary is None:
        return fixed
    if isinstance(boundary, Grid):
        if (boundary.width, boundary.height) != (width, height):
            raise DomainError("boundary grid has the wrong shape")
        fixed = boundary.as_array().copy()
        fixed[fixed < 0] = -1
    else:
        for (r, c), t in dict(boundary).items():
            if not (0 <= r < height and 0 <= c < width):
                raise DomainError(f"boundary cell {(r, c)} outside grid")
            fixed[r, c] = t
    if fixed.max() >= n_tiles:
        raise MalformedInputError("boundary references unknown tile")
    return fixed


def solve_tiling(tiles: TileSet, width: int, height: int,
                 boundary: Optional[Mapping | Grid] = None,
                 max_cells: int = SOLVE_GUARD, periodic: bool = False) -> Optional[Grid]:
    """Backtracking search for a zero-mismatch grid.

    Cells are filled row-major and candidate tiles are tried in index order,
    so the first solution found is deterministic.  ``boundary`` fixes cells,
    given either as ``{(row, col): tile}`` or as a grid with ``-1`` marking
    free cells.  With ``periodic=True`` the grid is a torus (used only as an
    empirical aperiodicity probe).  Returns ``None`` if no consistent tiling
    exists.
    """
    if width < 1 or height < 1:
        raise DomainError("grid sides must be positive")
    if width * height > max_cells:
        raise ResourceGuardError(f"{width}x{height} exceeds backtracking guard of {max_cells} cells")
    n = len(tiles)
    N, E, S, W = (list(map(int, x)) for x in (tiles.N, tiles.E, tiles.S, tiles.W))
    fixed = _boundary_array(boundary, width, height, n)

    by_wn: dict = {}
    by_w: dict = {}
    by_n: dict = {}
    for t in range(n):
        by_wn.setdefault((W[t], N[t]), []).append(t)
        by_w.setdefault(W[t], []).append(t)
        by_n.setdefault(N[t], []).append(t)
    all_tiles = list(range(n))

    def ok_fixed_neighbours(r, c, t):
        if c + 1 < width and fixed[r, c + 1] >= 0 and E[t] != W[fixed[r, c + 1]]:
            return False
        if r + 1 < height and fixed[r + 1, c] >= 0 and S[t] != N[fixed[r + 1, c]]:
            return False
        return True

    grid = np.full((height, width), -1, dtype=np.int64)
    total = width * height

    def candidates(i):
        r, c = divmod(i, width)
        left = E[grid[r, c - 1]] if c > 0 else None
        up = S[grid[r - 1, c]] if r > 0 else None
        if fixed[r, c] >= 0:
            t = int(fixed[r, c])
            pool = [t] if (left is None or W[t] == left) and (up is None or N[t] == up) else []
        elif left is not None and up is not None:
            pool = by_wn.get((left, up), [])
        elif left is not None:
            pool = by_w.get(left, [])
        elif up is not None:
            pool = by_n.get(up, [])
        else:
            pool = all_tiles
        out = [t for t in pool if ok_fixed_neighbours(r, c, t)]
        if periodic:
            if c == width - 1:
                first = grid[r, 0] if width > 1 else None
                out = [t for t in out if E[t] == W[t if first is None else first]]
            if r == height - 1:
                first = grid[0, c] if height > 1 else None
                out = [t for t in out if S[t] == N[t if first is None else first]]
        return out

    stack = [candidates(0)]
    pos = [0]
    i = 0
    while True:
        cands = stack[i]
        if pos[i] < len(cands):
            r, c = divmod(i, width)
            grid[r, c] = cands[pos[i]]
            pos[i] += 1
            if i + 1 == total:
                return Grid.from_array(grid)
            i += 1
            if len(stack) <= i:
                stack.append(None)
                pos.append(0)
            stack[i] = candidates(i)
            pos[i] = 0
        else:
            r, c = divmod(i, width)
            grid[r, c] = -1
            i -= 1
            if i < 0:
                return None


def detect_period(grid: Grid, max_period: int):
    """Smallest horizontal and vertical shift ``p <= max_period`` leaving the
    overlap unchanged; ``None`` per axis if there is none."""
    if max_period < 1 or max_period >= min(grid.width, grid.height):
        raise DomainError("need 1 <= max_period < min(width, height)")
    a = grid.as_array()
    hp = next((p for p in range(1, max_period + 1) if np.array_equal(a[:, p:], a[:, :-p])), None)
    vp = next((p for p in range(1, max_period + 1) if np.array_equal(a[p:, :], a[:-p, :])), None)
    return hp, vp


# ---------------------------------------------------------------- defect repair

def repair_window(grid: Grid, tiles: TileSet, cell, tile: int, radius: int) -> Grid:
    """Re-solve the cells within Chebyshev ``radius`` of ``cell`` with
    ``cell`` forced to ``tile`` and everything outside the window held fixed.

    The result minimises the mismatch count first and the number of changed
    cells second.  Solved exactly as a 0/1 integer program (HiGHS via
    :func:`scipy.optimize.milp`).
    """
    from scipy.optimize import Bounds, LinearConstraint, milp
    import scipy.sparse as sp

    _check_indices(grid, tiles)
    a = grid.as_array()
    H, Wd = a.shape
    r0, c0 = cell
    if not (0 <= r0 < H and 0 <= c0 < Wd):
        raise DomainError(f"cell {cell} outside grid")
    if not 0 <= tile < len(tiles):
        raise MalformedInputError(f"unknown tile {tile}")
    lab = np.stack([tiles.N, tiles.E, tiles.S, tiles.W], axis=1)
    nt = len(tiles)
    free = [(r, c) for r in range(max(0, r0 - radius), min(H, r0 + radius + 1))
            for c in range(max(0, c0 - radius), min(Wd, c0 + radius + 1)) if (r, c) != (r0, c0)]
    fidx = {p: i for i, p in enumerate(free)}
    target = a.copy()
    target[r0, c0] = tile

    # (p, q, side of p, side of q): east/west and south/north contacts
    touched = set(free) | {(r0, c0)}
    edges = set()
    for (r, c) in touched:
        for dr, dc, sa, sb in ((0, 1, 1, 3), (1, 0, 2, 0)):
            for p, q in (((r, c), (r + dr, c + dc)), ((r - dr, c - dc), (r, c))):
                if 0 <= p[0] < H and 0 <= p[1] < Wd and 0 <= q[0] < H and 0 <= q[1] < Wd:
                    edges.add((p, q, sa, sb))
    edges = sorted(edges)

    nx = len(free) * nt
    rows, cols, vals, lo = [], [], [], []
    n_rows = 0
    n_y = 0
    for p, q, sa, sb in edges:
        if p not in fidx and q not in fidx:
            continue
        e = nx + n_y
        n_y += 1
        for l in np.union1d(lab[:, sa], lab[:, sb]):
            # y_e >= [p shows l on side sa] - [q shows l on side sb]
            rhs = 0.0
            rows.append(n_rows); cols.append(e); vals.append(1.0)
            if p in fidx:
                for t in np.nonzero(lab[:, sa] == l)[0]:
                    rows.append(n_rows); cols.append(fidx[p] * nt + t); vals.append(-1.0)
            else:
                rhs += float(lab[target[p], sa] == l)
            if q in fidx:
                for t in np.nonzero(lab[:, sb] == l)[0]:
                    rows.append(n_rows); cols.append(fidx[q] * nt + t); vals.append(1.0)
            else:
                rhs -= float(lab[target[q], sb] == l)
            lo.append(rhs)
            n_rows += 1
    for k in range(len(free)):
        for t in range(nt):
            rows.append(n_rows); cols.append(k * nt + t); vals.append(1.0)
        lo.append(1.0)
        n_rows += 1
    hi = [np.inf] * (n_rows - len(free)) + [1.0] * len(free)
    n_var = nx + n_y
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n_rows, n_var))
    cost = np.zeros(n_var)
    for k, p in enumerate(free):
        cost[k * nt:(k + 1) * nt] = 1.0
        cost[k * nt + a[p]] = 0.0
    cost[nx:] = len(free) + 1.0
    integrality = np.zeros(n_var)
    integrality[:nx] = 1
    res = milp(cost, constraints=LinearConstraint(A, np.array(lo), np.array(hi)),
               integrality=integrality, bounds=Bounds(0, 1))
    if res.x is None:
        raise RuntimeError(f"integer program failed: {res.message}")
    choice = res.x[:nx].reshape(len(free), nt).argmax(axis=1)
    for k, p in enumerate(free):
        target[p] = choice[k]
    return Grid.from_array(target)


# ---------------------------------------------------------------- formats

def _data_lines(fh):
    for ln in fh:
        ln = ln.split("#", 1)[0].strip()
        if ln:
            yield ln


def write_tileset(tiles: TileSet, fh):
    fh.write(f"wang {len(tiles)} {tiles.n_markings}\n")
    for t in tiles.tiles:
        fh.write(f"{t.north} {t.east} {t.south} {t.west}\n")


def read_tileset(fh) -> TileSet:
    lines = list(_data_lines(fh))
    if not lines:
        raise MalformedInputError("empty tileset file")
    head = lines[0].split()
    try:
        if len(head) != 3 or head[0] != "wang":
            raise ValueError
        n, m = int(head[1]), int(head[2])
        tiles = [tuple(int(x) for x in ln.split()) for ln in lines[1:]]
    except ValueError as exc:
        raise MalformedInputError("malformed tileset file") from exc
    if len(tiles) != n or any(len(t) != 4 for t in tiles):
        raise MalformedInputError(f"expected {n} tiles of 4 markings")
    try:
        return TileSet(tuple(tiles), m)
    except DomainError as exc:
        raise MalformedInputError(str(exc)) from exc


def write_grid(grid: Grid, fh):
    fh.write(f"grid {grid.width} {grid.height}\n")
    for row in grid.as_array():
        fh.write(" ".join(str(int(x)) for x in row) + "\n")


def read_grid(fh) -> Grid:
    lines = list(_data_lines(fh))
    if not lines:
        raise MalformedInputError("empty grid file")
    head = lines[0].split()
    try:
        if len(head) != 3 or head[0] != "grid":
            raise ValueError
        w, h = int(head[1]), int(head[2])
        cells = [int(x) for ln in lines[1:] for x in ln.split()]
    except ValueError as exc:
        raise MalformedInputError("malformed grid file") from exc
    if w < 1 or h < 1 or len(cells) != w * h:
        raise MalformedInputError(f"grid {w}x{h} needs {w * h} cells, got {len(cells)}")
    if min(cells) < 0:
        raise MalformedInputError("negative tile index in grid")
    return Grid(w, h, np.array(cells))


def default_palette(n: int) -> np.ndarray:
    """Deterministic colours, one per tile index (golden-angle hues)."""
    out = np.empty((n, 3), dtype=np.uint8)
    for i in range(n):
        h = (i * 0.6180339887498949) % 1.0
        s = 0.45 + 0.4 * ((i * 7) % 5) / 4
        v = 0.55 + 0.4 * ((i * 3) % 4) / 3
        out[i] = np.round(np.array(colorsys.hsv_to_rgb(h, s, v)) * 255)
    return out


def ppm_bytes(grid: Grid, palette: Optional[np.ndarray] = None, scale: int = 1) -> bytes:
    """Binary PPM (P6) with one pixel block per cell."""
    a = grid.as_array()
    if palette is None:
        palette = default_palette(int(a.max()) + 1)
    if a.max() >= len(palette):
        raise MalformedInputError("palette shorter than tile range")
    img = palette[a]
    if scale > 1:
        img = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
    head = f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    return head + img.astype(np.uint8).tobytes()


def read_ppm(data: bytes):
    """Parse a P6 image produced by :func:`ppm_bytes`; returns an (h, w, 3) array."""
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P6":
        raise MalformedInputError("not a binary PPM")
    w, h = map(int, parts[1].split())
    body = np.frombuffer(parts[3], dtype=np.uint8)
    if body.size != w * h * 3:
        raise MalformedInputError("PPM payload has the wrong size")
    return body.reshape(h, w, 3)
