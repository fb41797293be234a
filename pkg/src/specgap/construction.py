"""Spectral combination of a gapless reference with a second Hamiltonian.

Each site of the combined model has the local space ``|0> (+) H_u (x) H_d``.
Basis index 0 is ``|0>`` and index ``1 + a * d_d + b`` is ``|a>_u |b>_d``.
A bond between a ``|0>`` site and a non-``|0>`` site costs 1; on bonds where
both sites are outside ``|0>`` the two components interact through ``h_u``
and ``h_d``.  The lattice spectrum then splits into ``{0}``, the sums
``spec H_u + spec H_d`` and a remainder that sits at or above 1 whenever
``h_u`` and ``h_d`` are positive semi-definite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, ResourceGuardError, ValidationError
from .machines import phi_of_n
from .spectra import (DENSE_GUARD, LocalHamiltonian, LocalSpec,
                      assemble_lattice2d, lattice_spectrum, xy_chain_exact)

SPECTRUM_TOL = 1e-8


def _blocker(d: int) -> np.ndarray:
    """``|0><0| (x) (1 - |0><0|)`` on two ``d``-level sites (ordered)."""
    p0 = np.zeros((d, d))
    p0[0, 0] = 1.0
    return np.kron(p0, np.eye(d) - p0)


def _swap_sites(h: np.ndarray, d: int) -> np.ndarray:
    t = h.reshape(d, d, d, d).transpose(1, 0, 3, 2)
    return t.reshape(d * d, d * d)


def _embed_pair(h_u2: np.ndarray, h_d2: np.ndarray, du: int, dd: int) -> np.ndarray:
    """``h_u (x) 1_d + 1_u (x) h_d`` on two product sites, embedded at offset 1."""
    hu = h_u2.reshape(du, du, du, du)  # a_i a_j, a'_i a'_j
    hd = h_d2.reshape(dd, dd, dd, dd)
    eye_u, eye_d = np.eye(du), np.eye(dd)
    # indices: (a_i, b_i, a_j, b_j), (a'_i, b'_i, a'_j, b'_j)
    t = (np.einsum("ikpr,jq,ls->ijklpqrs", hu, eye_d, eye_d)
         + np.einsum("ip,kr,jlqs->ijklpqrs", eye_u, eye_u, hd))
    m = du * dd
    t = t.reshape(m * m, m * m)
    d = 1 + m
    out = np.zeros((d * d, d * d), dtype=t.dtype)
    idx = ((1 + np.arange(m))[:, None] * d + (1 + np.arange(m))[None, :]).ravel()
    out[np.ix_(idx, idx)] = t
    return out


def _embed_site(h_u1: np.ndarray, h_d1: np.ndarray) -> np.ndarray:
    du, dd = h_u1.shape[0], h_d1.shape[0]
    m = du * dd
    out = np.zeros((1 + m, 1 + m), dtype=np.result_type(h_u1, h_d1))
    out[1:, 1:] = np.kron(h_u1, np.eye(dd)) + np.kron(np.eye(du), h_d1)
    return out


@dataclass(frozen=True, eq=False)
class CombinedLocalTerm:
    """Combined interaction plus its ingredients.

    ``local`` symmetrises the blocking term over the two orientations of a
    bond.  ``h_ordered`` keeps the single ordered blocking term
    ``|0><0|_i (x) (1 - |0><0|)_j`` for the row bond, which is the literal
    form for an ordered pair ``(i, j)``.
    """

    h_u: LocalHamiltonian
    h_d: LocalHamiltonian
    local: LocalHamiltonian
    h_ordered: np.ndarray = field(repr=False)

    @property
    def d(self):
        return self.local.d

    @property
    def d_u(self):
        return self.h_u.d

    @property
    def d_d(self):
        return self.h_d.d


def _as_local(h) -> LocalHamiltonian:
    if isinstance(h, LocalHamiltonian):
        return h
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1] or math.isqrt(h.shape[0]) ** 2 != h.shape[0]:
        raise DomainError("two-site term must be a square d^2 x d^2 matrix")
    return LocalHamiltonian.chain(h)


def combine_interaction(h_u, h_d) -> CombinedLocalTerm:
    """Combine two interactions into one on ``1 + d_u * d_d`` levels per site.

    ``h_u`` and ``h_d`` are :class:`LocalHamiltonian` objects or bare
    two-site matrices (taken as chain terms).  Non-Hermitian input raises
    :class:`DomainError`.
    """
    hu, hd = _as_local(h_u), _as_local(h_d)
    du, dd = hu.d, hd.d
    d = 1 + du * dd
    blk = _blocker(d)
    sym = blk + _swap_sites(blk, d)
    row = sym + _embed_pair(hu.h_row, hd.h_row, du, dd)
    col = sym + _embed_pair(hu.h_col, hd.h_col, du, dd)
    one = _embed_site(hu.h_1, hd.h_1)
    local = LocalHamiltonian(d, row, col, one)
    ordered = blk + _embed_pair(hu.h_row, hd.h_row, du, dd)
    return CombinedLocalTerm(hu, hd, local, ordered)


# ---------------------------------------------------------------- spectrum identity

def _match_multiset(target: np.ndarray, pool: np.ndarray, tol: float):
    """Greedy sorted matching of ``target`` inside ``pool``.

    Returns ``(ok, worst deviation, unmatched pool mask)``.
    """
    target = np.sort(target)
    pool = np.sort(pool)
    used = np.zeros(pool.size, dtype=bool)
    worst = 0.0
    j = 0
    ok = True
    for x in target:
        while j < pool.size and pool[j] < x - tol:
            j += 1
        if j >= pool.size or pool[j] > x + tol:
            ok = False
            worst = math.inf
            continue
        worst = max(worst, abs(pool[j] - x))
        used[j] = True
        j += 1
    return ok, worst, ~used


@dataclass
class SpectrumIdentityReport:
    L: int
    W: int
    dim: int
    included: bool
    max_deviation: float
    min_residual: Optional[float]
    n_residual: int
    tol: float = SPECTRUM_TOL

    @property
    def residual_ok(self):
        return self.min_residual is None or self.min_residual >= 1 - self.tol

    @property
    def ok(self):
        return self.included and self.residual_ok


def verify_spectrum_identity(h_u, h_d, L: int, W: int, tol: float = SPECTRUM_TOL) -> SpectrumIdentityReport:
    """Check ``{0} + (spec H_u + spec H_d)`` inside ``spec H`` and ``rest >= 1``.

    The three lattice spectra are computed independently by dense
    diagonalisation on an ``L x W`` lattice.
    """
    comb = combine_interaction(h_u, h_d)
    n = L * W
    dim = comb.d ** n
    if dim > DENSE_GUARD or comb.d_u ** n * comb.d_d ** n > DENSE_GUARD ** 2:
        raise ResourceGuardError(f"combined dimension {dim} exceeds dense guard {DENSE_GUARD}")
    spec = np.linalg.eigvalsh(assemble_lattice2d(comb.local, L, W).to_dense())
    su = np.linalg.eigvalsh(assemble_lattice2d(comb.h_u, L, W).to_dense())
    sd = np.linalg.eigvalsh(assemble_lattice2d(comb.h_d, L, W).to_dense())
    target = np.concatenate([[0.0], np.add.outer(su, sd).ravel()])
    ok, worst, rest = _match_multiset(target, spec, tol)
    residual = spec[rest]
    return SpectrumIdentityReport(L, W, dim, ok, worst,
                                  float(residual.min()) if residual.size else None,
                                  int(residual.size), tol)


def random_psd_local(d: int, rng: np.random.Generator, complex_: bool = True,
                     scale: float = 1.0) -> LocalHamiltonian:
    """Random local term with PSD row, column and on-site matrices."""
    def psd(n):
        a = rng.standard_normal((n, n))
        if complex_:
            a = a + 1j * rng.standard_normal((n, n))
        m = a @ a.conj().T
        return scale * m / np.linalg.norm(m, 2)
    return LocalHamiltonian(d, psd(d * d), psd(d * d), 0.5 * psd(d))


# ---------------------------------------------------------------- interaction schema

def _frac(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(x).limit_denominator(1 << 40)
    return Fraction(x)


def exp_i_pi(angle: Fraction) -> complex:
    """``exp(i pi angle)`` for a rational angle, exact on multiples of 1/4."""
    a = _frac(angle) % 2
    table = {Fraction(0): 1, Fraction(1, 2): 1j, Fraction(1): -1, Fraction(3, 2): -1j}
    if a in table:
        return complex(table[a])
    if a.denominator == 4:
        s = math.sqrt(0.5)
        k = a.numerator
        return complex(s * (1 if k in (1, 7) else -1), s * (1 if k in (1, 3) else -1))
    t = math.pi * a.numerator / a.denominator
    return complex(math.cos(t), math.sin(t))


def in_ring(x: float, beta: Fraction, tol: float = 1e-9, max_coeff: int = 1 << 12):
    """Write real ``x`` as ``a + b beta + c beta / sqrt 2`` with integers.

    Returns ``(a, b, c)`` or ``None``.  The ring part ``Z + beta Z`` equals
    ``(1/q) Z`` for ``beta = p/q`` in lowest terms, so only ``c`` is
    searched; it is unique because ``sqrt 2`` is irrational.
    """
    beta = _frac(beta)
    p, q = beta.numerator, beta.denominator
    step = float(beta) / math.sqrt(2)
    c0 = round(x / step)
    for c in sorted(range(-max_coeff, max_coeff + 1), key=lambda c: abs(c - c0))[:64]:
        rem = (x - c * step) * q
        k = round(rem)
        if abs(rem - k) <= tol * max(1, q):
            # k/q = a + b p/q  <=>  k = a q + b p; gcd(p, q) = 1 so a solution exists
            g, s, t = _egcd(q, p)
            return (k * s, k * t, c)
    return None


def _egcd(a, b):
    if b == 0:
        return a, 1, 0
    g, x, y = _egcd(b, a % b)
    return g, y, x - (a // b) * y


def _is_integer_matrix(m, tol=0.0):
    m = np.asarray(m)
    return bool(np.all(np.abs(m.real - np.round(m.real)) <= tol)
                and np.all(np.abs(np.imag(m) - np.round(np.imag(m))) <= tol))


@dataclass
class Theorem1Params:
    """Inputs of the interaction schema.

    ``A`` is the constant column term, ``B`` and ``C`` the integer matrices
    multiplying the two phases, ``D`` the row term, and
    ``h_1 = alpha * Pi``.  Two-site matrices are ``d^2 x d^2``.
    """

    n: int
    beta: Fraction
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    alpha: float
    Pi: np.ndarray
    convention: str = "digits"

    @property
    def d(self):
        return int(np.asarray(self.Pi).shape[0])

    def phases(self) -> Tuple[Fraction, Fraction]:
        """Exact angles in units of pi: ``phi(n)`` and ``2^-|phi(n)|``."""
        enc = phi_of_n(self.n, self.convention)
        return enc.phi, Fraction(1, 2 ** enc.length)


def _check(cond, clause):
    if not cond:
        raise ValidationError(clause)


def validate_theorem1(params: Theorem1Params) -> None:
    """Raise :class:`ValidationError` naming the first violated clause."""
    beta = _frac(params.beta)
    _check(beta > 0, "beta must be a positive rational")
    d = params.d
    A, B, C, D, Pi = (np.asarray(m) for m in (params.A, params.B, params.C, params.D, params.Pi))
    _check(Pi.shape == (d, d), "Pi must be square")
    for name, m in (("A", A), ("B", B), ("C", C), ("D", D)):
        _check(m.shape == (d * d, d * d), f"{name} must be d^2 x d^2 with d = {d}")
    _check(np.array_equal(A, A.conj().T), "A must be Hermitian")
    for z in A.ravel():
        for part, x in (("real", z.real), ("imaginary", np.imag(z))):
            _check(in_ring(float(x), beta) is not None,
                   f"A entry {z} ({part} part) is not in Z + beta Z + (beta/sqrt2) Z")
    _check(_is_integer_matrix(B), "B must be an integer matrix")
    _check(_is_integer_matrix(C), "C must be an integer matrix")
    _check(np.array_equal(D, D.conj().T), "D must be Hermitian")
    allowed = (0.0, 1.0, float(beta))
    _check(all(any(z == a for a in allowed) for z in D.ravel()),
           "D entries must lie in {0, 1, beta}")
    _check(np.isreal(params.alpha) and float(params.alpha) <= float(beta) + 1e-15,
           "alpha must be real and at most beta")
    _check(np.array_equal(Pi, Pi.conj().T) and np.allclose(Pi @ Pi, Pi, atol=1e-12, rtol=0),
           "Pi must be a projector")


def theorem1_interactions(params: Theorem1Params, check_norm: bool = True) -> LocalHamiltonian:
    """Assemble ``h_1 = alpha Pi``, ``h_row = D`` and the phase-dependent ``h_col``.

    ``h_col = A + beta (e^{i pi phi} B + h.c. + e^{i pi 2^-|phi|} C + h.c.)``.
    Norms above 1 raise :class:`ValidationError`.
    """
    validate_theorem1(params)
    beta = float(_frac(params.beta))
    phi, small = params.phases()
    pb, pc = exp_i_pi(phi), exp_i_pi(small)
    B = np.asarray(params.B, dtype=complex)
    C = np.asarray(params.C, dtype=complex)
    h_col = np.asarray(params.A, dtype=complex) + beta * (pb * B + np.conj(pb) * B.conj().T
                                                          + pc * C + np.conj(pc) * C.conj().T)
    d = params.d
    local = LocalHamiltonian(d, np.asarray(params.D), h_col,
                             float(params.alpha) * np.asarray(params.Pi))
    if check_norm:
        for name, v in zip(("h_row", "h_col", "h_1"), local.norms()):
            _check(v <= 1 + 1e-12, f"local interaction strength: ||{name}|| = {v:.6g} exceeds 1")
    return local


def theorem1_report(params: Theorem1Params) -> dict:
    local = theorem1_interactions(params, check_norm=False)
    phi, small = params.phases()
    nr, nc, n1 = local.norms()
    return {"n": params.n, "beta": str(_frac(params.beta)), "phi": str(phi),
            "angle_B": f"pi*{phi}", "angle_C": f"pi*{small}",
            "norm_h_row": nr, "norm_h_col": nc, "norm_h_1": n1,
            "norm_ok": max(nr, nc, n1) <= 1 + 1e-12}


# ---------------------------------------------------------------- layered toy

@dataclass
class LayerCoupling:
    """Toy coupling between the tile layer and the quantum layer.

    On an ``active`` tile the ``e`` level costs 1 and the quantum sector
    feels ``onsite[tile]``; on any other tile the quantum sector costs 1.
    """

    active: frozenset = frozenset()
    onsite: Dict[int, np.ndarray] = field(default_factory=dict)


def layered_hamiltonian(tile_h: LocalHamiltonian, quantum_h: LocalHamiltonian,
                        coupling: Optional[LayerCoupling] = None,
                        guard_lattice: Tuple[int, int] = (2, 2)) -> LocalHamiltonian:
    """Site space ``H_c (x) (H_e (+) H_q)`` with a one-dimensional ``H_e``.

    Index ``c * (1 + d_q) + s`` with ``s = 0`` the ``e`` level and
    ``s = 1 + j`` the quantum level ``j``.  Tile penalties act on ``c``; the
    quantum two-site terms act only where both sites are in the quantum
    sector.  ``guard_lattice`` is the lattice the caller intends to
    diagonalise densely.
    """
    coupling = coupling or LayerCoupling()
    dc, dq = tile_h.d, quantum_h.d
    s = 1 + dq
    d = dc * s
    n_sites = guard_lattice[0] * guard_lattice[1]
    if d ** n_sites > DENSE_GUARD:
        raise ResourceGuardError(f"layered dimension {d}^{n_sites} exceeds dense guard {DENSE_GUARD}")
    Pq = np.zeros((s, s))
    Pq[1:, 1:] = np.eye(dq)
    Pe = np.zeros((s, s))
    Pe[0, 0] = 1.0

    def lift_pair(hc, hq):
        # tile part: hc (x) 1_s (x) 1_s reordered to (c_i s_i c_j s_j)
        t = np.einsum("ikpr,jq,ls->ijklpqrs", hc.reshape(dc, dc, dc, dc), np.eye(s), np.eye(s))
        q = np.zeros((s, s, s, s), dtype=np.result_type(hq, float))
        q[1:, 1:, 1:, 1:] = hq.reshape(dq, dq, dq, dq)
        t = t + np.einsum("ip,kr,jlqs->ijklpqrs", np.eye(dc), np.eye(dc), q)
        return t.reshape(d * d, d * d)

    h_row = lift_pair(tile_h.h_row, quantum_h.h_row)
    h_col = lift_pair(tile_h.h_col, quantum_h.h_col)
    h_1 = np.kron(tile_h.h_1, np.eye(s)).astype(complex if quantum_h.is_complex else float)
    for c in range(dc):
        blk = np.zeros((s, s), dtype=h_1.dtype)
        if c in coupling.active:
            blk += Pe
            extra = coupling.onsite.get(c)
            if extra is not None:
                blk[1:, 1:] += np.asarray(extra)
        else:
            blk += Pq
        blk[1:, 1:] += quantum_h.h_1
        h_1[c * s:(c + 1) * s, c * s:(c + 1) * s] += blk
    return LocalHamiltonian(d, h_row, h_col, h_1)


def tile_sector(local_d: int, quantum_d: int, tiles: Sequence[int]) -> np.ndarray:
    """Basis indices of the lattice states whose tile layer reads ``tiles``."""
    s = 1 + quantum_d
    idx = np.zeros(1, dtype=np.int64)
    for c in tiles:
        idx = (idx[:, None] * local_d + (c * s + np.arange(s))[None, :]).ravel()
    return idx


@dataclass(frozen=True)
class HeadChain:
    """Translation-invariant history chain carrying a cyclic counter.

    Site states: ``0`` (unvisited), ``1`` (visited) and ``*_s`` (head with
    counter ``s = 0..m``).  Legal strings read ``1...1 *_s 0...0``; the
    head steps right and increments the counter mod ``m + 1``.  On a
    segment of ``n`` sites the head ends in counter state ``(n - 1) mod (m+1)``.
    """

    m: int

    @property
    def d(self):
        return 3 + self.m

    def head(self, s):
        return 2 + s

    @property
    def top(self):
        return self.head(self.m)

    def local(self) -> LocalHamiltonian:
        d = self.d
        heads = [self.head(s) for s in range(self.m + 1)]
        h = np.zeros((d * d, d * d))
        forbidden = [(0, 1), (1, 0)] + [(0, x) for x in heads] + [(x, 1) for x in heads] \
            + [(x, y) for x in heads for y in heads]
        for a, b in forbidden:
            h[a * d + b, a * d + b] += 1.0
        for s in range(self.m + 1):
            u = np.zeros(d * d)
            u[self.head(s) * d + 0] = 1.0
            u[1 * d + self.head((s + 1) % (self.m + 1))] = -1.0
            h += 0.5 * np.outer(u, u)
        return LocalHamiltonian(d, h, np.zeros_like(h), np.zeros((d, d)))

    def left_end(self) -> np.ndarray:
        """On-site penalty for the first site: no ``0`` and no ``*_s`` with ``s != 0``."""
        p = np.zeros((self.d, self.d))
        p[0, 0] = 1.0
        for s in range(1, self.m + 1):
            p[self.head(s), self.head(s)] = 1.0
        return p

    def right_end(self, halting: bool = False) -> np.ndarray:
        p = np.zeros((self.d, self.d))
        p[1, 1] = 1.0
        if halting:
            p[self.top, self.top] = 1.0
        return p

    def history_state(self, n: int) -> np.ndarray:
        """Uniform superposition of the ``n`` legal configurations reachable from ``*_0 0...0``."""
        d = self.d
        v = np.zeros(d ** n)
        for t in range(n):
            cfg = [1] * t + [self.head(t % (self.m + 1))] + [0] * (n - 1 - t)
            idx = 0
            for x in cfg:
                idx = idx * d + x
            v[idx] = 1.0
        return v / math.sqrt(n)

    def halts(self, n: int) -> bool:
        return (n - 1) % (self.m + 1) == self.m


def segment_tileset():
    """Three 1-D tiles: left end, middle, right end (open west/east boundary marking 0)."""
    from .tiling import TileSet, WangTile
    # markings: 0 outside a segment, 1 inside; north/south unconstrained (2)
    tiles = (WangTile(2, 1, 2, 0), WangTile(2, 1, 2, 1), WangTile(2, 0, 2, 1))
    return TileSet(tiles, 3)


LEFT, MIDDLE, RIGHT = 0, 1, 2


def segment_coupling(chain: HeadChain, halting: bool = False) -> LayerCoupling:
    return LayerCoupling(frozenset({LEFT, MIDDLE, RIGHT}),
                         {LEFT: chain.left_end(), RIGHT: chain.right_end(halting)})


# ---------------------------------------------------------------- verdicts

VERDICTS = ("gapped-trend", "gapless-trend", "undetermined")


@dataclass
class GapVerdict:
    verdict: str
    gamma_estimate: Optional[float]
    table: List[Tuple[int, float, float, float]]
    degeneracies: List[int] = field(default_factory=list)
    exponent: Optional[float] = None

    def to_json(self) -> str:
        return json.dumps({"verdict": self.verdict, "gamma_estimate": self.gamma_estimate,
                           "exponent": self.exponent,
                           "table": [{"L": L, "lambda0": l0, "gap": g, "density": rho}
                                     for L, l0, g, rho in self.table]}, indent=2)


def classify_gaps(L_list: Sequence[int], gaps: Sequence[float], degeneracies: Sequence[int],
                  rtol: float = 1e-3, floor: float = 1e-6):
    """Verdict, gamma estimate and log-log slope from finite-size gap data.

    Gapped trend: unique ground state everywhere and the two largest sizes
    agree within ``rtol`` on a gap above ``floor``.  Gapless trend: gaps
    strictly decrease with ``L`` and the log-log slope is at most -1/2.
    Anything else is undetermined.
    """
    L = np.asarray(L_list, dtype=float)
    g = np.asarray(gaps, dtype=float)
    if len(g) < 2:
        return "undetermined", None, None
    slope = None
    if np.all(g > 0):
        slope = float(np.polyfit(np.log(L), np.log(g), 1)[0])
    unique = all(k == 1 for k in degeneracies)
    a, b = g[-2], g[-1]
    if unique and min(a, b) > floor and abs(b - a) <= rtol * max(a, b):
        return "gapped-trend", float(min(a, b)), slope
    if np.all(np.diff(g) < 0) and slope is not None and slope <= -0.5:
        return "gapless-trend", 0.0, slope
    return "undetermined", None, slope


def gap_verdict_scan(local: LocalSpec, L_list: Sequence[int], dims: int = 1, k: int = 3,
                     method: str = "auto", rtol: float = 1e-3) -> GapVerdict:
    """Gap and density table over ``L_list`` plus a finite-size trend verdict.

    ``local`` is a :class:`LocalHamiltonian` or a factory ``L -> LocalHamiltonian``.
    """
    table, degs = [], []
    for L in L_list:
        r = lattice_spectrum(local, L, dims=dims, k=k, method=method)
        table.append((int(L), r.lambda0, r.gap, r.density))
        degs.append(r.ground_degeneracy)
    verdict, gamma, slope = classify_gaps([t[0] for t in table], [t[2] for t in table], degs, rtol)
    return GapVerdict(verdict, gamma, table, degs, slope)


# ---------------------------------------------------------------- dichotomy toys

def xy_reference(L: int) -> LocalHamiltonian:
    """Critical XY bond shifted so the ``L``-site chain has ground energy 0."""
    return xy_chain_exact(L, k=1)[1]


def scalar_term(e: float) -> LocalHamiltonian:
    """One-level chain with two-site energy ``e`` per bond."""
    return LocalHamiltonian.chain(np.array([[float(e)]]))


def dichotomy_toy(e_u: float) -> Callable[[int], LocalHamiltonian]:
    """Factory ``L -> combined chain term`` with ``h_u = e_u`` and the XY reference.

    Negative ``e_u`` gives ``lambda0(H_u) < 0`` (gapless pattern); ``e_u >= 1``
    makes the all-``|0>`` state the unique ground state with gap 1.
    """
    def factory(L: int) -> LocalHamiltonian:
        return combine_interaction(scalar_term(e_u), xy_reference(L)).local
    return factory
