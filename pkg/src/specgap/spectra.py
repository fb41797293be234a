"""Translation-invariant local Hamiltonians, lattice assembly and low spectra.

Sites of an ``L x W`` lattice are numbered row-major, ``s = r * W + c``, and
site 0 is the most significant tensor factor.  Row 0 is the top (north) row,
which matches the grid convention of :mod:`specgap.tiling`.  ``h_row`` acts on
horizontal pairs (left site first), ``h_col`` on vertical pairs (upper site
first), ``h_1`` on every site.  Boundaries are open.
"""

from __future__ import annotations

import csv
import heapq
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, MalformedInputError, ResourceGuardError, ValidationError
from .lanczos import lanczos_lowest

DENSE_GUARD = 4096
SPARSE_GUARD = 1 << 24
HERM_TOL = 1e-12
DEGENERACY_TOL = 1e-8


def _as_matrix(a, shape, name):
    a = np.asarray(a)
    if a.shape != shape:
        raise DomainError(f"{name} has shape {a.shape}, expected {shape}")
    if np.iscomplexobj(a):
        if np.all(a.imag == 0):
            a = a.real
        else:
            return a.astype(np.complex128)
    return a.astype(np.float64)


def _hermitize(a, name):
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if dev > HERM_TOL:
        raise DomainError(f"{name} is not Hermitian (deviation {dev:.3g})")
    # exact Hermitian representative; moves entries by at most HERM_TOL / 2
    return (a + a.conj().T) / 2


@dataclass(frozen=True, eq=False)
class LocalHamiltonian:
    """Nearest-neighbour interaction ``{d, h_row, h_col, h_1}``.

    The two-site matrices are indexed by ``(a_left * d + a_right)`` for
    ``h_row`` and ``(a_up * d + a_down)`` for ``h_col``.
    """

    d: int
    h_row: np.ndarray
    h_col: np.ndarray
    h_1: np.ndarray

    def __post_init__(self):
        d = int(self.d)
        if d < 1:
            raise DomainError("local dimension must be positive")
        object.__setattr__(self, "d", d)
        for name, shape in (("h_row", (d * d, d * d)), ("h_col", (d * d, d * d)), ("h_1", (d, d))):
            m = _as_matrix(getattr(self, name), shape, name)
            object.__setattr__(self, name, _hermitize(m, name))

    @classmethod
    def zeros(cls, d):
        return cls(d, np.zeros((d * d, d * d)), np.zeros((d * d, d * d)), np.zeros((d, d)))

    @classmethod
    def chain(cls, h_row, h_1=None):
        """Chain interaction; ``h_col`` is set equal to ``h_row``."""
        h_row = np.asarray(h_row)
        d = math.isqrt(h_row.shape[0])
        if h_1 is None:
            h_1 = np.zeros((d, d))
        return cls(d, h_row, h_row, h_1)

    @property
    def is_complex(self):
        return any(np.iscomplexobj(m) for m in (self.h_row, self.h_col, self.h_1))

    @property
    def is_diagonal(self):
        return all(np.count_nonzero(m - np.diag(np.diag(m))) == 0
                   for m in (self.h_row, self.h_col, self.h_1))

    def norms(self):
        """Spectral norms of ``(h_row, h_col, h_1)``."""
        return tuple(float(np.linalg.norm(m, 2)) if m.size else 0.0
                     for m in (self.h_row, self.h_col, self.h_1))

    def is_normalised(self, tol=1e-12):
        return max(self.norms()) <= 1.0 + tol

    def __add__(self, other):
        if not isinstance(other, LocalHamiltonian) or other.d != self.d:
            return NotImplemented
        return LocalHamiltonian(self.d, self.h_row + other.h_row,
                                self.h_col + other.h_col, self.h_1 + other.h_1)

    def __mul__(self, a):
        return LocalHamiltonian(self.d, a * self.h_row, a * self.h_col, a * self.h_1)

    __rmul__ = __mul__


class SparseHermitian:
    """Hermitian operator stored as a CSR matrix."""

    def __init__(self, matrix, check=True):
        m = sp.csr_matrix(matrix)
        if m.shape[0] != m.shape[1]:
            raise DomainError(f"operator must be square, got {m.shape}")
        m.sum_duplicates()
        m.eliminate_zeros()
        if np.iscomplexobj(m.data) and not np.any(m.data.imag):
            m = m.real.tocsr()
        self.matrix = m
        if check and not self.is_hermitian(1e-10):
            raise DomainError("operator is not Hermitian")

    @classmethod
    def from_entries(cls, dim, entries):
        """Build from ``(row, col, value)`` triples with Hermitian closure.

        Duplicate coordinates are summed.  An entry ``(i, j, v)`` with
        ``i != j`` also places ``conj(v)`` at ``(j, i)``; supply each
        off-diagonal pair once.
        """
        rows, cols, vals = [], [], []
        for i, j, v in entries:
            i, j = int(i), int(j)
            if not (0 <= i < dim and 0 <= j < dim):
                raise MalformedInputError(f"entry ({i}, {j}) outside dimension {dim}")
            if i == j:
                if abs(np.imag(v)) > HERM_TOL:
                    raise DomainError(f"diagonal entry ({i}, {i}) is not real")
                rows.append(i); cols.append(i); vals.append(np.real(v))
            else:
                rows += [i, j]; cols += [j, i]; vals += [v, np.conj(v)]
        data = np.asarray(vals, dtype=np.complex128)
        if not np.any(data.imag):
            data = data.real.copy()
        m = sp.coo_matrix((data, (rows, cols)), shape=(dim, dim))
        return cls(m.tocsr())

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def nnz(self):
        return self.matrix.nnz

    @property
    def dtype(self):
        return self.matrix.dtype

    def is_hermitian(self, tol=0.0):
        diff = self.matrix - self.matrix.conj().T
        if diff.nnz == 0:
            return True
        return float(np.max(np.abs(diff.data))) <= tol

    def is_diagonal(self):
        m = self.matrix.tocoo()
        return bool(np.all(m.row == m.col))

    def to_dense(self):
        if self.dim > DENSE_GUARD:
            raise ResourceGuardError(f"dense conversion of dimension {self.dim} exceeds {DENSE_GUARD}")
        return self.matrix.toarray()

    def upper_entries(self):
        """Upper-triangle entries sorted by (row, col)."""
        u = sp.triu(self.matrix).tocoo()
        order = np.lexsort((u.col, u.row))
        return u.row[order], u.col[order], u.data[order]

    def __matmul__(self, x):
        return self.matrix @ x

    def __add__(self, other):
        return SparseHermitian(self.matrix + other.matrix, check=False)

    def __mul__(self, a):
        return SparseHermitian(self.matrix * a, check=False)

    __rmul__ = __mul__


def write_sparseherm(H: SparseHermitian, fh):
    """Write the ``sparseherm`` text format (upper triangle only)."""
    r, c, v = H.upper_entries()
    fh.write(f"sparseherm {H.dim} {len(v)}\n")
    for i, j, x in zip(r, c, v):
        x = complex(x)
        fh.write(f"{i} {j} {x.real!r} {x.imag!r}\n")


def read_sparseherm(fh, max_dim=SPARSE_GUARD) -> SparseHermitian:
    lines = [ln for ln in (s.strip() for s in fh) if ln and not ln.startswith("#")]
    if not lines:
        raise MalformedInputError("empty operator file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "sparseherm":
        raise MalformedInputError(f"bad header {lines[0]!r}")
    try:
        dim, nnz = int(head[1]), int(head[2])
    except ValueError as exc:
        raise MalformedInputError(f"bad header {lines[0]!r}") from exc
    if dim > max_dim:
        raise ResourceGuardError(f"operator dimension {dim} exceeds guard {max_dim}")
    if len(lines) - 1 != nnz:
        raise MalformedInputError(f"header announces {nnz} entries, found {len(lines) - 1}")
    entries = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 4:
            raise MalformedInputError(f"bad entry line {ln!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
            v = complex(float(parts[2]), float(parts[3]))
        except ValueError as exc:
            raise MalformedInputError(f"bad entry line {ln!r}") from exc
        if j < i:
            raise MalformedInputError(f"entry ({i}, {j}) below the diagonal")
        entries.append((i, j, v))
    return SparseHermitian.from_entries(dim, entries)


# ---------------------------------------------------------------- assembly

def _check_guard(d, n_sites):
    dim = d ** n_sites
    if dim > SPARSE_GUARD:
        raise ResourceGuardError(f"dimension {d}^{n_sites} = {dim} exceeds sparse guard {SPARSE_GUARD}")
    return dim


def _other_offsets(d, n_sites, exclude):
    off = np.zeros(1, dtype=np.int64)
    for s in range(n_sites):
        if s in exclude:
            continue
        w = d ** (n_sites - 1 - s)
        off = (off[:, None] + np.arange(d, dtype=np.int64) * w).ravel()
    return off


def _site_terms(local: LocalHamiltonian, L, W):
    bonds = []
    for r in range(L):
        for c in range(W):
            s = r * W + c
            if c + 1 < W:
                bonds.append((s, s + 1, local.h_row))
            if r + 1 < L:
                bonds.append((s, s + W, local.h_col))
    return bonds


def _assemble_diagonal(local, L, W):
    d, n = local.d, L * W
    dim = d ** n
    idx = np.arange(dim, dtype=np.int64)
    digits = [(idx // d ** (n - 1 - s)) % d for s in range(n)]
    diag = np.zeros(dim)
    h1 = np.real(np.diag(local.h_1))
    if np.any(h1):
        for s in range(n):
            diag += h1[digits[s]]
    for i, j, h in _site_terms(local, L, W):
        hd = np.real(np.diag(h))
        if np.any(hd):
            diag += hd[digits[i] * d + digits[j]]
    return SparseHermitian(sp.diags(diag, format="csr"), check=False)


def _assemble_general(local, L, W):
    d, n = local.d, L * W
    dim = d ** n
    dtype = np.complex128 if local.is_complex else np.float64
    rows, cols, vals = [], [], []
    if np.any(local.h_1):
        for s in range(n):
            base = _other_offsets(d, n, {s})
            w = d ** (n - 1 - s)
            a, b = np.nonzero(local.h_1)
            for x, y in zip(a, b):
                rows.append(base + x * w)
                cols.append(base + y * w)
                vals.append(np.full(base.size, local.h_1[x, y], dtype=dtype))
    for i, j, h in _site_terms(local, L, W):
        a, b = np.nonzero(h)
        if a.size == 0:
            continue
        base = _other_offsets(d, n, {i, j})
        wi, wj = d ** (n - 1 - i), d ** (n - 1 - j)
        for x, y in zip(a, b):
            rows.append(base + (x // d) * wi + (x % d) * wj)
            cols.append(base + (y // d) * wi + (y % d) * wj)
            vals.append(np.full(base.size, h[x, y], dtype=dtype))
    if not vals:
        return SparseHermitian(sp.csr_matrix((dim, dim), dtype=dtype), check=False)
    m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dim, dim)).tocsr()
    return SparseHermitian(m, check=False)


def assemble_lattice2d(local: LocalHamiltonian, L: int, W: int) -> SparseHermitian:
    """Open-boundary operator on an ``L`` (rows) by ``W`` (columns) lattice."""
    if L < 1 or W < 1:
        raise DomainError("lattice sides must be positive")
    _check_guard(local.d, L * W)
    if local.is_diagonal:
        return _assemble_diagonal(local, L, W)
    return _assemble_general(local, L, W)


def assemble_chain(local: LocalHamiltonian, L: int) -> SparseHermitian:
    """Open chain of ``L`` sites using ``h_row`` and ``h_1``."""
    return assemble_lattice2d(local, 1, L)


def basis_index(config: Sequence[int], d: int) -> int:
    """Index of the product basis state with site values ``config``."""
    idx = 0
    for a in config:
        if not 0 <= a < d:
            raise DomainError(f"site value {a} outside local dimension {d}")
        idx = idx * d + int(a)
    return idx


def product_state_energy(H: SparseHermitian, config: Sequence[int], d: int) -> float:
    i = basis_index(config, d)
    return float(np.real(H.matrix[i, i]))


# ---------------------------------------------------------------- spectra

@dataclass
class SpectrumResult:
    """Lowest eigenvalues of a finite operator, plus size metadata.

    ``gap`` counts multiplicity, so a degenerate ground level has zero gap.
    ``distinct_gap`` is the distance to the next distinct level (``None`` if
    all computed levels coincide within :data:`DEGENERACY_TOL`).
    """

    eigenvalues: np.ndarray
    L: int | None = None
    dims: int | None = None
    gamma: float | None = None
    method: str = ""
    residuals: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.eigenvalues = np.sort(np.asarray(self.eigenvalues, dtype=float))

    @property
    def lambda0(self):
        return float(self.eigenvalues[0])

    @property
    def gap(self):
        if len(self.eigenvalues) < 2:
            return None
        return max(0.0, float(self.eigenvalues[1] - self.eigenvalues[0]))

    @property
    def ground_degeneracy(self):
        return int(np.sum(self.eigenvalues - self.eigenvalues[0] <= DEGENERACY_TOL))

    @property
    def distinct_gap(self):
        above = self.eigenvalues[self.eigenvalues - self.eigenvalues[0] > DEGENERACY_TOL]
        return float(above[0] - self.eigenvalues[0]) if above.size else None

    @property
    def density(self):
        if self.L is None or self.dims is None:
            return None
        return self.lambda0 / self.L ** self.dims

    def with_size(self, L, dims):
        return SpectrumResult(self.eigenvalues, L=L, dims=dims, gamma=self.gamma,
                              method=self.method, residuals=self.residuals)


def spectral_gap(result: SpectrumResult) -> float:
    """``lambda_1 - lambda_0`` with multiplicity."""
    if len(result.eigenvalues) < 2:
        raise DomainError("spectral gap needs at least two eigenvalues")
    return result.gap


def dense_eigs(H: SparseHermitian, k: int) -> np.ndarray:
    return np.linalg.eigvalsh(H.to_dense())[:k]


def low_eigs(H: SparseHermitian, k: int = 2, tol: float = 1e-9, method: str = "auto",
             seed: int = 0) -> SpectrumResult:
    """The ``k`` smallest eigenvalues of ``H``.

    ``method`` is ``"dense"`` (LAPACK via numpy), ``"lanczos"`` (our own
    iteration) or ``"auto"``: exact selection for diagonal operators, dense up
    to 1024 dimensions, Lanczos above, with a dense retry up to
    :data:`DENSE_GUARD` if Lanczos fails to converge.
    """
    n = H.dim
    if k < 1 or k > n:
        raise DomainError(f"need 1 <= k <= dim ({n}), got {k}")
    if method not in ("auto", "dense", "lanczos"):
        raise ValidationError(f"unknown method {method!r}")
    if method == "dense":
        return SpectrumResult(dense_eigs(H, k), method="dense")
    if method == "auto":
        if H.is_diagonal():
            diag = np.real(H.matrix.diagonal())
            part = np.partition(diag, k - 1)[:k] if k < n else diag
            return SpectrumResult(np.sort(part), method="diagonal")
        if n <= 1024:
            return SpectrumResult(dense_eigs(H, k), method="dense")
    if n > SPARSE_GUARD:
        raise ResourceGuardError(f"dimension {n} exceeds guard {SPARSE_GUARD}")
    dtype = np.complex128 if np.iscomplexobj(H.matrix.data) else np.float64
    res_tol = min(1e-10, tol / 10)
    try:
        vals, _, res = lanczos_lowest(lambda x: H.matrix @ x, n, k, tol=res_tol,
                                      seed=seed, dtype=dtype)
    except Exception:
        if method == "auto" and n <= DENSE_GUARD:
            return SpectrumResult(dense_eigs(H, k), method="dense")
        raise
    return SpectrumResult(vals, method="lanczos", residuals=res)


LocalSpec = Union[LocalHamiltonian, Callable[[int], LocalHamiltonian]]


def _resolve(local: LocalSpec, L):
    return local(L) if callable(local) else local


def lattice_spectrum(local: LocalSpec, L: int, dims: int = 1, k: int = 2,
                     method: str = "auto", tol: float = 1e-9) -> SpectrumResult:
    """Spectrum of a chain (``dims=1``) or an ``L x L`` lattice (``dims=2``)."""
    loc = _resolve(local, L)
    if dims == 1:
        H = assemble_chain(loc, L)
    elif dims == 2:
        H = assemble_lattice2d(loc, L, L)
    else:
        raise DomainError("dims must be 1 or 2")
    k = min(k, H.dim)
    return low_eigs(H, k, tol=tol, method=method).with_size(L, dims)


def energy_density(local: LocalSpec, L_list: Sequence[int], dims: int = 2,
                   method: str = "auto"):
    """Table of ``(L, lambda0 / L**dims)``."""
    out = []
    for L in L_list:
        r = lattice_spectrum(local, L, dims=dims, k=1, method=method)
        out.append((L, r.density))
    return out


def write_spectrum_csv(results: Sequence[SpectrumResult], fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["L", "lambda0", "lambda1", "gap", "density"])
    for r in results:
        lam1 = r.eigenvalues[1] if len(r.eigenvalues) > 1 else ""
        w.writerow([r.L if r.L is not None else "", repr(r.lambda0),
                    repr(float(lam1)) if lam1 != "" else "",
                    repr(r.gap) if r.gap is not None else "",
                    repr(r.density) if r.density is not None else ""])


def spectrum_csv(results: Sequence[SpectrumResult]) -> str:
    buf = io.StringIO()
    write_spectrum_csv(results, buf)
    return buf.getvalue()


# ---------------------------------------------------------------- XY reference

def xy_bond() -> np.ndarray:
    """Two-site hopping term ``(XX + YY) / 2`` on qubits."""
    h = np.zeros((4, 4))
    h[1, 2] = h[2, 1] = 1.0
    return h


def xy_single_particle_energies(L: int) -> np.ndarray:
    m = np.arange(1, L + 1)
    return 2.0 * np.cos(np.pi * m / (L + 1))


def _smallest_subset_sums(a: np.ndarray, k: int):
    # k smallest sums over subsets of non-negative a (empty set included)
    a = np.sort(a)
    out = [0.0]
    if len(a) == 0:
        return out[:k]
    heap = [(a[0], 0)]
    while heap and len(out) < k:
        s, i = heapq.heappop(heap)
        out.append(s)
        if i + 1 < len(a):
            heapq.heappush(heap, (s + a[i + 1], i + 1))
            heapq.heappush(heap, (s - a[i] + a[i + 1], i + 1))
    return out


def xy_free_fermion_levels(L: int, k: int) -> np.ndarray:
    """Lowest ``k`` levels of the open XY chain (unshifted), with multiplicity."""
    eps = xy_single_particle_energies(L)
    e0 = float(np.sum(eps[eps < 0]))
    return e0 + np.asarray(_smallest_subset_sums(np.abs(eps), min(k, 2 ** L)))


def xy_chain_exact(L: int, k: int = 4):
    """Critical XY chain of ``L`` sites with ground energy shifted to zero.

    Returns the exact low spectrum from the Jordan-Wigner free-fermion
    solution and the matching local term.  The shift ``-E0(L) / (L - 1)`` per
    bond depends on ``L``.
    """
    if L < 2:
        raise DomainError("XY chain needs L >= 2")
    levels = xy_free_fermion_levels(L, k)
    shift = -levels[0] / (L - 1)
    local = LocalHamiltonian.chain(xy_bond() + shift * np.eye(4))
    spec = SpectrumResult(levels - levels[0], L=L, dims=1, method="free-fermion")
    return spec, local
