"""Feynman-Kitaev history-state Hamiltonians with a unary clock.

A circuit with ``T - 1`` gates defines ``T`` time steps.  Time ``t`` is the
clock string ``1^t 0^(T-1-t)`` on ``T - 1`` clock qubits.  Two clock
representations are available:

* ``"full"``: every clock string is present and non-unary strings are
  penalised by the clock part (dimension ``2^(T-1) * 2^q``);
* ``"unary"``: only the ``T`` legal strings are kept (dimension ``T * 2^q``).

The legal subspace is invariant under all parts and illegal strings cost at
least 1, so both representations have the same spectrum below 1.  The clock
register is the more significant tensor factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, ResourceGuardError
from .machines import TuringMachine, run_tm
from .phase_estimation import (I_GATE, X_GATE, Circuit, Gate, QuantumState, one_qubit,
                               run_circuit)
from .spectra import DENSE_GUARD, SparseHermitian, SpectrumResult, low_eigs

HISTORY_GUARD = 1 << 20

P0 = np.array([[1, 0], [0, 0]], dtype=complex)
P1 = np.array([[0, 0], [0, 1]], dtype=complex)
RAISE = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|
LOWER = RAISE.T.copy()


def _kron_factors(factors: Dict[int, np.ndarray], n: int) -> sp.csr_matrix:
    """Tensor product over ``n`` qubits with identities where unspecified."""
    out = sp.identity(1, dtype=complex, format="csr")
    run = 0
    for i in range(n):
        if i in factors:
            if run:
                out = sp.kron(out, sp.identity(2 ** run, format="csr"), format="csr")
                run = 0
            out = sp.kron(out, sp.csr_matrix(factors[i]), format="csr")
        else:
            run += 1
    if run:
        out = sp.kron(out, sp.identity(2 ** run, format="csr"), format="csr")
    return out


def gate_operator(g: Gate, q: int) -> sp.csr_matrix:
    """Sparse ``2^q x 2^q`` matrix of a single gate."""
    if g.kind == "1q":
        return _kron_factors({g.qubits[0]: g.matrix}, q)
    if g.kind == "cu":
        c, t = g.qubits
        return _kron_factors({c: P0}, q) + _kron_factors({c: P1, t: g.matrix}, q)
    a, b = g.qubits
    out = sp.csr_matrix((2 ** q, 2 ** q), dtype=complex)
    for x in range(2):
        for y in range(2):
            ex = np.zeros((2, 2), dtype=complex)
            ex[x, y] = 1
            out = out + _kron_factors({a: ex, b: ex.T}, q)
    return out


@dataclass
class ComputationTrace:
    states: List[np.ndarray]

    def __len__(self):
        return len(self.states)


def initial_state(q: int, init) -> np.ndarray:
    if init in ("ones", None, "none"):
        bits = "1" * q
    elif isinstance(init, str):
        bits = init
    else:
        return np.asarray(init.amplitudes if isinstance(init, QuantumState) else init, dtype=complex)
    if len(bits) != q or any(b not in "01" for b in bits):
        raise DomainError(f"initial bit string must have {q} bits")
    return QuantumState.basis(bits).amplitudes


def computation_trace(circuit: Circuit, init="ones") -> ComputationTrace:
    """Work-register states ``psi_0 .. psi_{T-1}``; ``init='none'`` starts from ones."""
    q = circuit.n_qubits
    psi = QuantumState(initial_state(q, init), q)
    states = [psi.amplitudes.copy()]
    for g in circuit.gates:
        psi = run_circuit(Circuit(q, (g,)), psi)
        states.append(psi.amplitudes.copy())
    return ComputationTrace(states)


@dataclass
class HistoryHamiltonian:
    T: int
    n_work: int
    clock_rep: str
    init: str
    parts: Dict[str, SparseHermitian]
    flag_qubit: Optional[int] = None

    @property
    def work_dim(self):
        return 2 ** self.n_work

    @property
    def dim(self):
        return next(iter(self.parts.values())).dim

    @property
    def operator(self) -> SparseHermitian:
        m = None
        for p in self.parts.values():
            m = p.matrix if m is None else m + p.matrix
        return SparseHermitian(m, check=False)

    def clock_index(self, t: int) -> int:
        """Index of the clock basis state for time ``t``."""
        if self.clock_rep == "unary":
            return t
        C = self.T - 1
        return int("1" * t + "0" * (C - t), 2) if C else 0


def _clock_dim(T, rep):
    return T if rep == "unary" else 2 ** (T - 1)


def _unary_proj(T, a, b):
    m = sp.lil_matrix((T, T), dtype=complex)
    m[a, b] = 1
    return m.tocsr()


def build_history_hamiltonian(circuit: Circuit, init_constraint: str = "ones",
                              clock: str = "full", max_dim: int = HISTORY_GUARD) -> HistoryHamiltonian:
    """History-state Hamiltonian split into clock, init and propagation parts.

    ``init_constraint="ones"`` penalises any work qubit in ``|0>`` at time 0.
    Propagation uses the three-qubit clock stencil per gate and carries the
    usual factor 1/2.
    """
    if init_constraint not in ("ones", "none"):
        raise DomainError("init_constraint must be 'ones' or 'none'")
    if clock not in ("full", "unary"):
        raise DomainError("clock must be 'full' or 'unary'")
    q = circuit.n_qubits
    T = len(circuit) + 1
    C = T - 1
    wdim = 2 ** q
    dim = _clock_dim(T, clock) * wdim
    if dim > max_dim:
        raise ResourceGuardError(f"history Hamiltonian dimension {dim} exceeds guard {max_dim}")
    Iw = sp.identity(wdim, dtype=complex, format="csr")

    # clock penalty
    if clock == "full" and C >= 2:
        clock_op = sum(_kron_factors({i: P0, i + 1: P1}, C) for i in range(C - 1))
        clock_part = sp.kron(clock_op, Iw, format="csr")
    else:
        clock_part = sp.csr_matrix((dim, dim), dtype=complex)

    # initialisation: work qubits must read 1 at time 0
    if init_constraint == "ones":
        zeros = sum(_kron_factors({w: P0}, q) for w in range(q))
        if clock == "unary":
            t0 = _unary_proj(T, 0, 0)
        elif C >= 1:
            t0 = _kron_factors({0: P0}, C)
        else:
            t0 = sp.identity(1, dtype=complex, format="csr")
        init_part = sp.kron(t0, zeros, format="csr")
    else:
        init_part = sp.csr_matrix((dim, dim), dtype=complex)

    # propagation
    prop = sp.csr_matrix((dim, dim), dtype=complex)
    for t, g in enumerate(circuit.gates, start=1):
        U = gate_operator(g, q)
        if clock == "unary":
            before, after = _unary_proj(T, t - 1, t - 1), _unary_proj(T, t, t)
            fwd = _unary_proj(T, t, t - 1)
        else:
            # clock qubit index t-1 flips; neighbours t-2 (must be 1) and t (must be 0)
            ctx = {}
            if t >= 2:
                ctx[t - 2] = P1
            if t <= C - 1:
                ctx[t] = P0
            before = _kron_factors({**ctx, t - 1: P0}, C)
            after = _kron_factors({**ctx, t - 1: P1}, C)
            fwd = _kron_factors({**ctx, t - 1: RAISE}, C)
        term = sp.kron(before + after, Iw) - sp.kron(fwd, U) - sp.kron(fwd.conj().T, U.conj().T)
        prop = prop + 0.5 * term
    parts = {
        "clock": SparseHermitian(clock_part, check=False),
        "init": SparseHermitian(init_part, check=False),
        "propagation": SparseHermitian(prop.tocsr(), check=False),
    }
    return HistoryHamiltonian(T, q, clock, init_constraint, parts)


def add_halting_penalty(h: HistoryHamiltonian, halt_flag_qubit: int) -> HistoryHamiltonian:
    """Add ``|1><1|`` on the flag qubit at the final clock time."""
    if not 0 <= halt_flag_qubit < h.n_work:
        raise DomainError(f"flag qubit {halt_flag_qubit} outside the work register")
    T, C = h.T, h.T - 1
    if h.clock_rep == "unary":
        last = _unary_proj(T, T - 1, T - 1)
    elif C >= 1:
        last = _kron_factors({C - 1: P1}, C)
    else:
        last = sp.identity(1, dtype=complex, format="csr")
    pen = sp.kron(last, _kron_factors({halt_flag_qubit: P1}, h.n_work), format="csr")
    parts = dict(h.parts)
    parts["penalty"] = SparseHermitian(pen, check=False)
    return replace(h, parts=parts, flag_qubit=halt_flag_qubit)


def history_vector(circuit: Circuit, init="ones", clock: str = "full") -> np.ndarray:
    """``(1/sqrt T) sum_t |t>|psi_t>`` as a plain vector in the chosen representation."""
    trace = computation_trace(circuit, init)
    T = len(trace)
    q = circuit.n_qubits
    wdim = 2 ** q
    cdim = _clock_dim(T, clock)
    v = np.zeros(cdim * wdim, dtype=complex)
    C = T - 1
    for t, psi in enumerate(trace.states):
        ci = t if clock == "unary" else (int("1" * t + "0" * (C - t), 2) if C else 0)
        v[ci * wdim:(ci + 1) * wdim] = psi
    return v / math.sqrt(T)


def history_state_vector(circuit: Circuit, init="ones") -> QuantumState:
    """History state on the full clock register (clock qubits first)."""
    T = len(circuit) + 1
    v = history_vector(circuit, init, "full")
    return QuantumState(v, T - 1 + circuit.n_qubits)


def ground_energy(h: HistoryHamiltonian, k: int = 2, method: str = "auto") -> SpectrumResult:
    H = h.operator
    if method == "dense" and H.dim > DENSE_GUARD:
        raise ResourceGuardError(f"dense verification limited to {DENSE_GUARD} dimensions")
    return low_eigs(H, min(k, H.dim), method=method)


def pad_circuit(circuit: Circuit, T: int) -> Circuit:
    """Append identity gates until the circuit has ``T - 1`` gates."""
    extra = T - 1 - len(circuit)
    if extra < 0:
        raise DomainError(f"circuit already has {len(circuit)} gates, more than T - 1 = {T - 1}")
    return Circuit(circuit.n_qubits, circuit.gates + tuple(one_qubit(0, I_GATE) for _ in range(extra)))


def ground_energy_vs_T(family: Callable[[int], Tuple[Circuit, Optional[int]]], T_list: Sequence[int],
                       init: str = "ones", clock: str = "unary", method: str = "auto"):
    """``[(T, lambda0)]`` for ``family(T) -> (circuit with T-1 gates, flag qubit or None)``."""
    out = []
    for T in T_list:
        circuit, flag = family(T)
        if len(circuit) != T - 1:
            raise DomainError(f"family returned {len(circuit)} gates for T = {T}")
        h = build_history_hamiltonian(circuit, init, clock)
        if flag is not None:
            h = add_halting_penalty(h, flag)
        out.append((T, ground_energy(h, k=1, method=method).lambda0))
    return out


# ---------------------------------------------------------------- machines -> circuits

@dataclass
class CompiledRun:
    """Circuit replaying a bounded machine run on a binary register.

    Qubit 0 is the halting flag.  The remaining qubits hold the bits of the
    machine configuration (state, head position, tape window) that change
    during the replayed prefix, stored relative to the initial configuration
    so that the initial configuration is the all-ones string.  The first gate
    clears the flag; the flag is set again right after the step that enters
    a halting state.
    """

    circuit: Circuit
    flag_qubit: int
    halted: bool
    steps: int
    machine: str = ""
    bit_names: List[str] = field(default_factory=list)


def _config_bits(cfg, lo, width, n_state_bits, n_head_bits, n_sym_bits):
    tape = dict(cfg.tape)
    bits = [(cfg.state >> (n_state_bits - 1 - i)) & 1 for i in range(n_state_bits)]
    pos = cfg.head - lo
    bits += [(pos >> (n_head_bits - 1 - i)) & 1 for i in range(n_head_bits)]
    for x in range(lo, lo + width):
        s = tape.get(x, 0)
        bits += [(s >> (n_sym_bits - 1 - i)) & 1 for i in range(n_sym_bits)]
    return bits


def compile_run(tm: TuringMachine, tape_input: Sequence[int], T: int) -> CompiledRun:
    """Replay as many whole steps of ``tm`` as fit into ``T - 1`` gates.

    Each step becomes one ``X`` gate per configuration bit it changes; the
    circuit is padded with identities to exactly ``T - 1`` gates.
    """
    budget = T - 1
    if budget < 1:
        raise DomainError("need T >= 2 to make room for the flag reset")
    run = run_tm(tm, tape_input, budget, record=True)
    trace = run.trace
    lo, width = run.offset, len(run.tape)
    nb = lambda n: (n - 1).bit_length() if n > 1 else 0  # noqa: E731
    ns, nh, na = nb(tm.states), nb(width), nb(tm.alphabet)
    enc = [_config_bits(c, lo, width, ns, nh, na) for c in trace]
    names = ([f"state{i}" for i in range(ns)] + [f"head{i}" for i in range(nh)]
             + [f"cell{x}.{i}" for x in range(lo, lo + width) for i in range(na)])

    # per step: positions of flipped bits, and whether the step reaches a halting state
    steps = []
    for i in range(1, len(enc)):
        flips = [j for j in range(len(enc[i])) if enc[i][j] != enc[i - 1][j]]
        steps.append((flips, trace[i].state in tm.halting))
    used = sorted({j for flips, _ in steps for j in flips})

    # decide how many steps fit before allocating the register
    n_gates, n_steps = 1, 0
    halted = trace[0].state in tm.halting
    if halted:
        n_gates += 1
    for flips, halts in steps:
        need = len(flips) + (1 if halts else 0)
        if n_gates + need > budget:
            break
        n_gates += need
        n_steps += 1
        if halts:
            halted = True
            break
    if n_gates > budget:
        raise DomainError(f"T = {T} leaves no room for the flag gates")
    used = sorted({j for flips, _ in steps[:n_steps] for j in flips})
    qubit_of = {j: 1 + k for k, j in enumerate(used)}
    q = 1 + len(used)
    gates = [one_qubit(0, X_GATE)]
    if trace[0].state in tm.halting:
        gates.append(one_qubit(0, X_GATE))
    for flips, halts in steps[:n_steps]:
        gates += [one_qubit(qubit_of[j], X_GATE) for j in flips]
        if halts:
            gates.append(one_qubit(0, X_GATE))
    circuit = pad_circuit(Circuit(q, tuple(gates)), T)
    return CompiledRun(circuit, 0, halted, n_steps, tm.name, ["flag"] + [names[j] for j in used])


def decode_register(compiled: CompiledRun, psi: np.ndarray) -> Dict[str, int]:
    """Bits of a computational basis state, inverted back to absolute values
    relative to the initial configuration (1 = unchanged)."""
    q = compiled.circuit.n_qubits
    idx = int(np.argmax(np.abs(psi)))
    bits = format(idx, f"0{q}b")
    return {name: int(b) for name, b in zip(compiled.bit_names, bits)}
