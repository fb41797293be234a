"""State-vector circuit simulation and exact phase estimation.

Qubit 0 is the most significant bit of a basis index, and measured bit
strings list qubits in the order requested (most significant first).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, MalformedInputError, ResourceGuardError
from .machines import RunResult, TuringMachine, digits_to_symbols, phi_of_n, run_tm

MAX_QPE_BITS = 20
UNITARY_TOL = 1e-12

H_GATE = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
X_GATE = np.array([[0, 1], [1, 0]], dtype=complex)
I_GATE = np.eye(2, dtype=complex)


def phase_gate(angle: float) -> np.ndarray:
    return np.array([[1, 0], [0, np.exp(1j * angle)]], dtype=complex)


def _check_unitary(m, what):
    m = np.asarray(m, dtype=complex)
    if m.shape != (2, 2):
        raise DomainError(f"{what}: gate matrix must be 2x2")
    if np.max(np.abs(m.conj().T @ m - I_GATE)) > UNITARY_TOL:
        raise DomainError(f"{what}: gate matrix is not unitary")
    return m


@dataclass(frozen=True, eq=False)
class Gate:
    """``kind`` is ``"1q"``, ``"cu"`` (one control) or ``"swap"``."""

    kind: str
    qubits: Tuple[int, ...]
    matrix: Optional[np.ndarray] = None

    def inverse(self):
        if self.kind == "swap":
            return self
        return Gate(self.kind, self.qubits, self.matrix.conj().T)


@dataclass(frozen=True, eq=False)
class Circuit:
    n_qubits: int
    gates: Tuple[Gate, ...] = ()

    def __post_init__(self):
        if self.n_qubits < 1:
            raise DomainError("circuit needs at least one qubit")
        gates = tuple(self.gates)
        for i, g in enumerate(gates):
            arity = {"1q": 1, "cu": 2, "swap": 2}.get(g.kind)
            if arity is None:
                raise DomainError(f"gate {i}: unknown kind {g.kind!r}")
            if len(g.qubits) != arity or len(set(g.qubits)) != arity:
                raise DomainError(f"gate {i}: needs {arity} distinct qubits")
            if any(not 0 <= q < self.n_qubits for q in g.qubits):
                raise DomainError(f"gate {i}: qubit out of range")
            if g.kind != "swap":
                object.__setattr__(g, "matrix", _check_unitary(g.matrix, f"gate {i}"))
        object.__setattr__(self, "gates", gates)

    def __len__(self):
        return len(self.gates)

    def inverse(self):
        return Circuit(self.n_qubits, tuple(g.inverse() for g in reversed(self.gates)))

    def __add__(self, other):
        if other.n_qubits != self.n_qubits:
            raise DomainError("circuits act on different registers")
        return Circuit(self.n_qubits, self.gates + other.gates)


def one_qubit(q, m):
    return Gate("1q", (q,), np.asarray(m, dtype=complex))


def controlled(c, t, m):
    return Gate("cu", (c, t), np.asarray(m, dtype=complex))


def swap(a, b):
    return Gate("swap", (a, b))


class QuantumState:
    """Dense state of ``n_qubits`` qubits."""

    def __init__(self, amplitudes, n_qubits=None, check=True):
        a = np.asarray(amplitudes, dtype=complex).ravel()
        q = int(round(math.log2(a.size))) if n_qubits is None else n_qubits
        if a.size != 2 ** q:
            raise DomainError(f"{a.size} amplitudes do not match {q} qubits")
        if check and abs(np.vdot(a, a).real - 1.0) > 1e-10:
            raise DomainError("state is not normalised")
        self.amplitudes = a
        self.n_qubits = q

    @classmethod
    def basis(cls, bits: str):
        a = np.zeros(2 ** len(bits), dtype=complex)
        a[int(bits, 2) if bits else 0] = 1.0
        return cls(a, len(bits))

    @classmethod
    def zeros(cls, n_qubits):
        return cls.basis("0" * n_qubits)

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))


def _apply(psi, gate: Gate, q):
    if gate.kind == "swap":
        return np.swapaxes(psi, *gate.qubits)
    if gate.kind == "1q":
        (t,) = gate.qubits
        return np.moveaxis(np.tensordot(gate.matrix, psi, axes=([1], [t])), 0, t)
    c, t = gate.qubits
    psi = psi.copy()
    sel = [slice(None)] * q
    sel[c] = 1
    sel = tuple(sel)
    sub = psi[sel]
    tt = t - 1 if t > c else t
    psi[sel] = np.moveaxis(np.tensordot(gate.matrix, sub, axes=([1], [tt])), 0, tt)
    return psi


def run_circuit(circuit: Circuit, initial: QuantumState) -> QuantumState:
    """Apply the gates of ``circuit`` in order."""
    if initial.n_qubits != circuit.n_qubits:
        raise DomainError(f"state has {initial.n_qubits} qubits, circuit {circuit.n_qubits}")
    q = circuit.n_qubits
    psi = initial.amplitudes.reshape((2,) * q)
    for g in circuit.gates:
        psi = _apply(psi, g, q)
    return QuantumState(np.ascontiguousarray(psi).ravel(), q, check=False)


@dataclass
class OutcomeDistribution:
    probabilities: Dict[str, float]

    def support(self, threshold=1e-12):
        return {k: v for k, v in self.probabilities.items() if v > threshold}

    def mode(self):
        return max(sorted(self.probabilities), key=lambda k: self.probabilities[k])

    def to_csv(self, threshold=1e-12) -> str:
        rows = ["bitstring,probability"]
        for k, v in sorted(self.support(threshold).items()):
            rows.append(f"{k},{round(v, 12)!r}")
        return "\n".join(rows) + "\n"


def outcome_distribution(state: QuantumState, measured: Optional[Sequence[int]] = None) -> OutcomeDistribution:
    """Born-rule marginal over ``measured`` qubits (default: all, in order)."""
    q = state.n_qubits
    measured = list(range(q)) if measured is None else list(measured)
    if len(set(measured)) != len(measured) or any(not 0 <= m < q for m in measured):
        raise DomainError("measured qubits must be distinct and in range")
    p = (np.abs(state.amplitudes) ** 2).reshape((2,) * q)
    rest = tuple(i for i in range(q) if i not in measured)
    if rest:
        p = p.sum(axis=rest)
    kept = [i for i in range(q) if i in measured]
    p = np.transpose(p, [kept.index(m) for m in measured]).ravel()
    k = len(measured)
    return OutcomeDistribution({format(i, f"0{k}b") if k else "": float(p[i]) for i in range(p.size)})


# ---------------------------------------------------------------- QPE

def qft_gates(qubits: Sequence[int]) -> List[Gate]:
    """Quantum Fourier transform on ``qubits`` (first listed = most significant)."""
    qs = list(qubits)
    r = len(qs)
    gates = []
    for j in range(r):
        gates.append(one_qubit(qs[j], H_GATE))
        for m in range(j + 1, r):
            gates.append(controlled(qs[m], qs[j], phase_gate(math.pi / 2 ** (m - j))))
    for i in range(r // 2):
        gates.append(swap(qs[i], qs[r - 1 - i]))
    return gates


def inverse_qft_gates(qubits: Sequence[int]) -> List[Gate]:
    return [g.inverse() for g in reversed(qft_gates(qubits))]


def _as_fraction(phi) -> Fraction:
    f = Fraction(phi) if not isinstance(phi, float) else Fraction(phi).limit_denominator(1 << 60)
    return f - math.floor(f)


def build_qpe_circuit(phi, r: int) -> Circuit:
    """Phase estimation of ``U = diag(1, exp(2 pi i phi))`` with ``r`` bits.

    Qubits ``0..r-1`` form the counting register, qubit ``r`` holds the
    eigenstate ``|1>``; run from ``|0...0>``.
    """
    if r < 1:
        raise DomainError("need at least one precision bit")
    if r > MAX_QPE_BITS:
        raise ResourceGuardError(f"{r} precision bits exceed the guard of {MAX_QPE_BITS}")
    f = _as_fraction(phi)
    target = r
    gates = [one_qubit(target, X_GATE)]
    gates += [one_qubit(j, H_GATE) for j in range(r)]
    for j in range(r):
        power = 2 ** (r - 1 - j)
        frac = f * power
        frac -= math.floor(frac)
        gates.append(controlled(j, target, phase_gate(2 * math.pi * float(frac))))
    gates += inverse_qft_gates(range(r))
    return Circuit(r + 1, tuple(gates))


def qpe_distribution(phi, r: int) -> OutcomeDistribution:
    c = build_qpe_circuit(phi, r)
    out = run_circuit(c, QuantumState.zeros(r + 1))
    return outcome_distribution(out, list(range(r)))


def qpe_digits(n: int, r: int) -> str:
    """Most likely ``r``-bit QPE outcome for the phase encoding ``n``.

    For ``r >= |n|`` the outcome is certain and starts with the binary digits
    of ``n``, followed by zeros.
    """
    enc = phi_of_n(n, "digits")
    return qpe_distribution(enc.phi, r).mode()


def dovetail_run(n: int, r: int, tm: TuringMachine, max_steps: int) -> RunResult:
    """Extract the digits of ``n`` by phase estimation and run ``tm`` on them.

    The first ``|n|`` outcome bits are written with ``'0' -> 1``, ``'1' -> 2``.
    """
    enc = phi_of_n(n, "digits")
    if r < enc.length:
        raise DomainError(f"r = {r} is below |phi| = {enc.length}; extraction is not exact")
    bits = qpe_digits(n, r)[: enc.length]
    return run_tm(tm, digits_to_symbols(bits), max_steps)


# ---------------------------------------------------------------- text format

def _fmt(m):
    # adding 0.0 folds -0.0 into 0.0 so the text form is canonical
    return " ".join(f"{float(z.real) + 0.0!r} {float(z.imag) + 0.0!r}" for z in np.asarray(m).ravel())


def format_circuit(c: Circuit) -> str:
    lines = [f"circuit {c.n_qubits}"]
    for g in c.gates:
        if g.kind == "swap":
            lines.append(f"swap {g.qubits[0]} {g.qubits[1]}")
        elif g.kind == "cu":
            lines.append(f"cu {g.qubits[0]} {g.qubits[1]} {_fmt(g.matrix)}")
        elif np.array_equal(g.matrix, H_GATE):
            lines.append(f"h {g.qubits[0]}")
        elif np.array_equal(g.matrix, X_GATE):
            lines.append(f"x {g.qubits[0]}")
        else:
            lines.append(f"u {g.qubits[0]} {_fmt(g.matrix)}")
    return "\n".join(lines) + "\n"


def parse_circuit(text: str) -> Circuit:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("circuit"):
        raise MalformedInputError("circuit file must start with 'circuit <qubits>'")
    try:
        q = int(lines[0].split()[1])
        gates = []
        for ln in lines[1:]:
            p = ln.split()
            op = p[0]
            if op in ("h", "x") and len(p) == 2:
                gates.append(one_qubit(int(p[1]), H_GATE if op == "h" else X_GATE))
            elif op == "swap" and len(p) == 3:
                gates.append(swap(int(p[1]), int(p[2])))
            elif op in ("u", "cu"):
                nq = 1 if op == "u" else 2
                vals = [float(x) for x in p[1 + nq:]]
                if len(vals) != 8:
                    raise ValueError
                m = np.empty(4, dtype=complex)
                m.real, m.imag = vals[0::2], vals[1::2]
                m = m.reshape(2, 2)
                qs = tuple(int(x) for x in p[1:1 + nq])
                gates.append(Gate("1q" if op == "u" else "cu", qs, m))
            else:
                raise ValueError
    except (ValueError, IndexError) as exc:
        raise MalformedInputError("malformed circuit line") from exc
    try:
        return Circuit(q, tuple(gates))
    except DomainError as exc:
        raise MalformedInputError(str(exc)) from exc
