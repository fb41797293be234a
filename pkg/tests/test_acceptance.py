"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected into a section at the end of the pytest run.
Run ``python3 tests/test_acceptance.py`` to execute the suite without pytest
output capture.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import ACCEPTANCE_LINES
from specgap.construction import (Theorem1Params, combine_interaction, dichotomy_toy, exp_i_pi,
                                  gap_verdict_scan, in_ring, random_psd_local, scalar_term,
                                  theorem1_interactions, verify_spectrum_identity)
from specgap.errors import ValidationError
from specgap.history_state import add_halting_penalty, build_history_hamiltonian, compile_run, ground_energy
from specgap.lanczos import lanczos_lowest
from specgap.machines import binary_digits, library, phi_of_n
from specgap.phase_estimation import qpe_distribution
from specgap.robinson import generate_robinson, robinson_tileset, square_census
from specgap.spectra import (DENSE_GUARD, SparseHermitian, assemble_chain, assemble_lattice2d,
                             lattice_spectrum, product_state_energy, xy_chain_exact)
from specgap.tiling import (Grid, TileSet, defect_energy, detect_period, repair_window,
                            solve_tiling, tiling_hamiltonian, verify_tiling)


def report(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def random_tileset(rng, n_tiles, n_markings):
    codes = rng.choice(n_markings ** 4, size=n_tiles, replace=False)
    return TileSet(tuple(tuple(int(x) for x in np.unravel_index(k, (n_markings,) * 4)) for k in codes),
                   n_markings)


# ---------------------------------------------------------------- 1

def test_criterion_1_spectrum_identity():
    rng = np.random.default_rng(2024)
    t0 = time.time()
    bad, worst, lowest_rest = 0, 0.0, math.inf
    for i in range(50):
        shape = (1, 2) if i % 2 == 0 else (2, 2)
        du, dd = (int(x) for x in rng.integers(1, 3, 2))
        rep = verify_spectrum_identity(random_psd_local(du, rng), random_psd_local(dd, rng),
                                       *shape, tol=1e-8)
        bad += not rep.ok
        worst = max(worst, rep.max_deviation)
        if rep.min_residual is not None:
            lowest_rest = min(lowest_rest, rep.min_residual)
    dt = time.time() - t0
    report(1, bad == 0 and worst <= 1e-8 and lowest_rest >= 1 - 1e-8 and dt < 60,
           f"50 pairs, failures {bad}, max deviation {worst:.1e}, "
           f"min residual {lowest_rest:.6f}, {dt:.1f} s")


# ---------------------------------------------------------------- 2

L_SCAN = [4, 6, 8, 10, 12]


@pytest.mark.slow
def test_criterion_2_dichotomy():
    lam_u = lattice_spectrum(scalar_term(-0.3), 4, k=1).lambda0
    gapless = gap_verdict_scan(dichotomy_toy(-0.3), L_SCAN)
    scaled = [L * g for L, _, g, _ in gapless.table]
    theta = max(scaled) / min(scaled) < 1.5 and min(scaled) > 1.0
    lam_u2 = lattice_spectrum(scalar_term(1.0), 4, k=1).lambda0
    gapped = gap_verdict_scan(dichotomy_toy(1.0), L_SCAN)
    gaps = [g for _, _, g, _ in gapped.table]
    ok = (lam_u < 0 and gapless.verdict == "gapless-trend" and theta
          and lam_u2 >= 1 and gapped.verdict == "gapped-trend"
          and gapped.gamma_estimate >= 1 - 1e-8 and min(gaps) >= 1 - 1e-8
          and all(k == 1 for k in gapped.degeneracies))
    report(2, ok, f"lambda0(H_u) < 0 -> {gapless.verdict}, L*gap in [{min(scaled):.3f}, "
                  f"{max(scaled):.3f}]; lambda0(H_u) >= 1 -> {gapped.verdict}, "
                  f"gamma {gapped.gamma_estimate:.12f}, degeneracies {gapped.degeneracies}")


# ---------------------------------------------------------------- 3

def test_criterion_3_qpe_exactness():
    t0 = time.time()
    worst = 1.0
    wrong = []
    for n in range(1, 65):
        enc = phi_of_n(n)
        dist = qpe_distribution(enc.phi, enc.length)
        p = dist.probabilities.get(binary_digits(n), 0.0)
        worst = min(worst, p)
        if p < 1 - 1e-9:
            wrong.append(n)
    dt = time.time() - t0
    report(3, not wrong and dt < 30,
           f"n = 1..64, min probability on binary_digits(n) {worst:.15f}, {dt:.1f} s")


# ---------------------------------------------------------------- 4

def test_criterion_4_history_dichotomy():
    T_list = range(4, 13)
    problems = []
    n_halt = n_run = 0
    ratios = []
    for name, tm in sorted(library().items()):
        for T in T_list:
            comp = compile_run(tm, [], T)
            h = add_halting_penalty(build_history_hamiltonian(comp.circuit, "ones", "unary"),
                                    comp.flag_qubit)
            lam = ground_energy(h, k=1).lambda0
            if comp.halted:
                n_halt += 1
                ratios.append(T * lam)
                if not (0 < lam <= 1 / T and 0.1 <= T * lam <= 10):
                    problems.append((name, T, lam))
            else:
                n_run += 1
                if abs(lam) > 1e-10:
                    problems.append((name, T, lam))
    report(4, not problems and n_halt > 0 and n_run > 0,
           f"{n_halt} halting and {n_run} non-halting traces, T = 4..12, "
           f"T*lambda0 in [{min(ratios):.4f}, {max(ratios):.4f}], violations {problems}")


# ---------------------------------------------------------------- 5

def test_criterion_5_tiling_energetics():
    rng = np.random.default_rng(5)
    energy_bad = 0
    witness_bad = 0
    for i in range(100):
        n_tiles = int(rng.integers(2, 7))
        tiles = random_tileset(rng, n_tiles, int(rng.integers(2, 4)))
        h, w = (int(x) for x in rng.integers(1, 4, 2))
        grid = Grid.from_array(rng.integers(0, n_tiles, (h, w)))
        H = assemble_lattice2d(tiling_hamiltonian(tiles), h, w)
        e = product_state_energy(H, grid.as_array().ravel(), n_tiles)
        energy_bad += e != verify_tiling(grid, tiles).count
        lam0 = np.linalg.eigvalsh(assemble_lattice2d(tiling_hamiltonian(tiles), 2, 2).to_dense())[0]
        witness = solve_tiling(tiles, 2, 2)
        witness_bad += (abs(lam0) < 1e-12) != (witness is not None)
    report(5, energy_bad == 0 and witness_bad == 0,
           f"100 random grids up to 3x3: energy mismatches {energy_bad}, "
           f"2x2 ground-energy/witness disagreements {witness_bad}")


# ---------------------------------------------------------------- 6

def test_criterion_6_robinson_structure():
    tiles = robinson_tileset()
    sizes = [4, 8, 16, 32, 64]
    invalid = [s for s in sizes if verify_tiling(generate_robinson(s), tiles).count]
    a = generate_robinson(64).as_array()
    windows = 0
    for r0 in range(0, 64, 8):
        for c0 in range(0, 64, 8):
            win = a[r0:r0 + 8, c0:c0 + 8]
            ring = {(r, c): int(win[r, c]) for r in range(8) for c in range(8)
                    if r in (0, 7) or c in (0, 7)}
            sol = solve_tiling(tiles, 8, 8, boundary=ring)
            windows += sol is not None and verify_tiling(sol, tiles).count == 0
    ladder = square_census(generate_robinson(256)).ladder()
    ratio4 = len(ladder) >= 3 and all(b == 4 * x for x, b in zip(ladder, ladder[1:]))
    periodic = [s for s in (16, 32, 64) if detect_period(generate_robinson(s), s // 4) != (None, None)]
    report(6, not invalid and windows == 64 and ratio4 and not periodic,
           f"patches {sizes} valid, {windows}/64 windows re-solved, "
           f"square ladder {ladder}, periodic sizes {periodic}")


# ---------------------------------------------------------------- 7

def test_criterion_7_defect_locality():
    tiles = robinson_tileset()
    g = generate_robinson(32)
    a = g.as_array()
    rng = np.random.default_rng(7)
    radii = (1, 2, 3)
    max_spread, max_energy, unstable = 0, 0, 0
    n_sites = 24
    for _ in range(n_sites):
        r, c = (int(x) for x in rng.integers(0, 32, 2))
        t = int(rng.integers(0, len(tiles) - 1))
        t += t >= a[r, c]
        results = []
        for R in radii:
            out = repair_window(g, tiles, (r, c), t, R).as_array()
            changed = np.argwhere(out != a)
            spread = int(np.max(np.abs(changed - [r, c]))) if len(changed) else 0
            results.append((out.tobytes(), spread, defect_energy(Grid.from_array(out), tiles)))
        unstable += len({x[0] for x in results}) != 1
        max_spread = max(max_spread, max(x[1] for x in results))
        max_energy = max(max_energy, max(x[2] for x in results))
    bound = min(radii)
    report(7, unstable == 0 and max_spread <= bound and max_energy <= 4,
           f"{n_sites} corruptions of a 32x32 patch, re-solved changes within "
           f"Chebyshev distance {max_spread} (window radii {radii}), results identical "
           f"across radii: {unstable == 0}, max defect energy {max_energy}")


# ---------------------------------------------------------------- 8

def test_criterion_8_schema():
    beta = Fraction(1, 4)
    s2 = float(beta) / math.sqrt(2)
    A = np.zeros((4, 4), dtype=complex)
    A[0, 0], A[3, 3] = 0.25, s2
    A[1, 2], A[2, 1] = 0.25 + 0.25j, 0.25 - 0.25j
    B = np.zeros((4, 4))
    B[0, 1] = 1
    C = np.zeros((4, 4))
    C[2, 3] = 1
    D = np.diag([1.0, 0.25, 0.0, 0.0])
    Pi = np.diag([1.0, 0.0])
    failures = []
    for n in range(1, 65):
        p = Theorem1Params(n, beta, A, B, C, D, 0.25, Pi)
        loc = theorem1_interactions(p)
        phi, small = p.phases()
        enc = phi_of_n(n)
        if (phi, small) != (enc.phi, Fraction(1, 2 ** enc.length)):
            failures.append((n, "angles"))
        for m in (loc.h_row, loc.h_col, loc.h_1):
            if not np.array_equal(m, m.conj().T):
                failures.append((n, "hermiticity"))
        if loc.h_col[0, 1] != 0.25 * exp_i_pi(phi) or loc.h_col[2, 3] != 0.25 * exp_i_pi(small):
            failures.append((n, "phase entries"))
        if max(loc.norms()) > 1 + 1e-12:
            failures.append((n, "norm"))
        for z in np.asarray(p.A).ravel():
            if in_ring(z.real, beta) is None or in_ring(z.imag, beta) is None:
                failures.append((n, "A domain"))
    rejected = 0
    bad_cases = [dict(A=np.full((4, 4), 0.1)), dict(B=B * 0.5), dict(D=np.diag([0.5, 0, 0, 0])),
                 dict(alpha=0.5), dict(Pi=np.diag([0.5, 0.0])), dict(D=np.ones((4, 4)))]
    for kw in bad_cases:
        args = dict(n=6, beta=beta, A=A, B=B, C=C, D=D, alpha=0.25, Pi=Pi)
        args.update(kw)
        try:
            theorem1_interactions(Theorem1Params(**args))
        except ValidationError:
            rejected += 1
    exact = (exp_i_pi(Fraction(3, 4)) == complex(-math.sqrt(0.5), math.sqrt(0.5)))
    report(8, not failures and rejected == len(bad_cases) and exact,
           f"n = 1..64 assembled, violations {failures[:3]}, "
           f"{rejected}/{len(bad_cases)} inadmissible inputs rejected")


# ---------------------------------------------------------------- 9

def corpus():
    rng = np.random.default_rng(9)
    out = []
    for L in (6, 8, 10, 12):
        out.append((f"xy L={L}", assemble_chain(xy_chain_exact(L)[1], L)))
    out.append(("dichotomy toy L=6", assemble_chain(dichotomy_toy(-0.3)(6), 6)))
    out.append(("dichotomy toy L=7", assemble_chain(dichotomy_toy(1.0)(7), 7)))
    comb = combine_interaction(random_psd_local(2, rng), random_psd_local(2, rng))
    out.append(("combined random 1x4", assemble_lattice2d(comb.local, 1, 4)))
    for name in ("busy_beaver_2", "never_halt"):
        c = compile_run(library()[name], [], 10)
        h = add_halting_penalty(build_history_hamiltonian(c.circuit, "ones", "unary"), c.flag_qubit)
        out.append((f"history {name} T=10", h.operator))
    tiles = random_tileset(rng, 8, 2)
    out.append(("tiling 8 tiles 2x2", assemble_lattice2d(tiling_hamiltonian(tiles), 2, 2)))
    for n, dens in ((600, 0.01), (2000, 0.002), (4096, 0.001)):
        M = sp.random(n, n, density=dens, random_state=rng, format="csr")
        M = M + 1j * sp.random(n, n, density=dens, random_state=rng, format="csr")
        out.append((f"random hermitian n={n}", SparseHermitian((M + M.conj().T) / 2)))
    return out


@pytest.mark.slow
def test_criterion_9_eigensolver_oracles():
    worst = 0.0
    names = []
    for name, H in corpus():
        assert H.dim <= DENSE_GUARD
        k = 4
        ref = np.linalg.eigvalsh(H.to_dense())[:k]
        dtype = np.complex128 if np.iscomplexobj(H.matrix.data) else np.float64
        vals, _, _ = lanczos_lowest(lambda x: H.matrix @ x, H.dim, k, tol=1e-11, dtype=dtype)
        dev = float(np.max(np.abs(vals - ref)))
        worst = max(worst, dev)
        names.append(f"{name} ({H.dim})")
    xy_worst = 0.0
    for L in range(2, 13):
        H = assemble_chain(xy_chain_exact(L)[1], L)
        ev = np.linalg.eigvalsh(H.to_dense())
        spec = xy_chain_exact(L)[0]
        xy_worst = max(xy_worst, abs((ev[1] - ev[0]) - spec.gap))
        if L % 2 == 0:
            closed = 2 * math.sin(math.pi / (2 * (L + 1)))
            xy_worst = max(xy_worst, abs((ev[1] - ev[0]) - closed))
    report(9, worst <= 1e-9 and xy_worst <= 1e-9,
           f"{len(names)} corpus instances, max Lanczos-dense deviation {worst:.1e}; "
           f"XY gap vs free fermions L = 2..12, max deviation {xy_worst:.1e}")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s"]))
