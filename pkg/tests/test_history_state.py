import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import path_laplacian_lambda0
from specgap.errors import DomainError, ResourceGuardError
from specgap.history_state import (add_halting_penalty, build_history_hamiltonian, compile_run,
                                   computation_trace, gate_operator, ground_energy,
                                   ground_energy_vs_T, history_state_vector, history_vector,
                                   pad_circuit)
from specgap.machines import busy_beaver_2, halt_now, library, never_halt, run_tm
from specgap.phase_estimation import (H_GATE, I_GATE, X_GATE, Circuit, controlled, one_qubit,
                                      phase_gate, swap)

GATES = [H_GATE, X_GATE, phase_gate(0.7), np.array([[0, -1j], [1j, 0]])]


@st.composite
def circuits(draw, max_q=2, max_len=4):
    q = draw(st.integers(1, max_q))
    gates = []
    for _ in range(draw(st.integers(0, max_len))):
        kind = draw(st.sampled_from(["1q", "cu", "swap"] if q > 1 else ["1q"]))
        m = GATES[draw(st.integers(0, len(GATES) - 1))]
        if kind == "1q":
            gates.append(one_qubit(draw(st.integers(0, q - 1)), m))
        else:
            a, b = draw(st.permutations(range(q)))[:2]
            gates.append(controlled(a, b, m) if kind == "cu" else swap(a, b))
    return Circuit(q, tuple(gates))


def dense(h):
    return h.operator.to_dense()


def identity_circuit(q=1, n=1):
    return Circuit(q, tuple(one_qubit(0, I_GATE) for _ in range(n)))


def test_gate_operator_matches_kron():
    g = controlled(0, 1, X_GATE)
    cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    assert np.array_equal(gate_operator(g, 2).toarray(), cnot)
    sw = gate_operator(swap(0, 1), 2).toarray()
    assert np.array_equal(sw, np.eye(4)[[0, 2, 1, 3]])


def test_identity_no_init_ground_space_is_work_dimension():
    h = build_history_hamiltonian(identity_circuit(q=2), "none", "full")
    ev = np.linalg.eigvalsh(dense(h))
    assert np.sum(np.abs(ev) < 1e-10) == 4


def test_identity_with_init_has_two_term_history_state():
    h = build_history_hamiltonian(identity_circuit(), "ones", "full")
    ev, V = np.linalg.eigh(dense(h))
    assert abs(ev[0]) < 1e-12 and ev[1] > 1e-3
    expect = np.zeros(4)
    expect[0b01] = expect[0b11] = 1 / math.sqrt(2)  # clock bit, then work bit
    assert abs(abs(np.vdot(V[:, 0], expect)) - 1) < 1e-12


def test_history_state_vector_examples():
    v = history_state_vector(Circuit(2, ()), "ones")
    assert v.n_qubits == 2 and v.amplitudes[0b11] == 1
    v = history_state_vector(Circuit(1, (one_qubit(0, X_GATE),)))
    expect = np.zeros(4)
    expect[0b01] = expect[0b10] = 1 / math.sqrt(2)  # |t=0>|1>, |t=1>|0>
    assert np.allclose(v.amplitudes, expect)


@given(circuits())
def test_history_state_is_zero_energy_and_normalised(c):
    for clock in ("full", "unary"):
        h = build_history_hamiltonian(c, "ones", clock)
        v = history_vector(c, "ones", clock)
        assert abs(np.linalg.norm(v) - 1) < 1e-12
        for name, part in h.parts.items():
            assert np.linalg.norm(part.matrix @ v) < 1e-10, name


@given(circuits(max_q=2, max_len=3))
def test_parts_are_psd_and_ground_state_unique(c):
    h = build_history_hamiltonian(c, "ones", "full")
    for part in h.parts.values():
        assert np.linalg.eigvalsh(part.to_dense())[0] >= -1e-10
    ev = np.linalg.eigvalsh(dense(h))
    assert abs(ev[0]) < 1e-10 and ev[1] > 1e-6


@given(circuits(max_q=2, max_len=3))
def test_full_and_unary_clocks_share_low_spectrum(c):
    full = np.linalg.eigvalsh(dense(build_history_hamiltonian(c, "ones", "full")))
    unary = np.linalg.eigvalsh(dense(build_history_hamiltonian(c, "ones", "unary")))
    assert np.allclose(full[full < 1 - 1e-9], unary[unary < 1 - 1e-9], atol=1e-10)


def test_clock_penalty_on_illegal_strings():
    c = identity_circuit(n=3)
    h = build_history_hamiltonian(c, "none", "full")
    diag = h.parts["clock"].matrix.diagonal().real.reshape(2 ** 3, 2)[:, 0]
    for s in range(8):
        bits = format(s, "03b")
        legal = "01" not in bits
        assert (diag[s] == 0) == legal and (legal or diag[s] >= 1)


def test_trace_follows_gates():
    c = Circuit(2, (one_qubit(0, X_GATE), controlled(1, 0, X_GATE)))
    tr = computation_trace(c)
    assert len(tr) == 3
    assert np.argmax(np.abs(tr.states[1])) == 0b01
    assert np.argmax(np.abs(tr.states[2])) == 0b11


def test_penalty_on_non_halting_trace():
    c = Circuit(1, (one_qubit(0, X_GATE),))  # flag 1 -> 0, never set again
    h = add_halting_penalty(build_history_hamiltonian(c, "ones", "full"), 0)
    assert abs(ground_energy(h, method="dense").lambda0) < 1e-10


def test_penalty_on_halting_trace_T2():
    h = add_halting_penalty(build_history_hamiltonian(identity_circuit(), "ones", "full"), 0)
    lam = ground_energy(h, method="dense").lambda0
    assert 0 < lam <= 0.5
    assert math.isclose(lam, path_laplacian_lambda0(2), abs_tol=1e-12)


def test_halting_energy_decreases_with_T():
    vals = []
    for T in range(2, 9):
        c = pad_circuit(Circuit(1, ()), T)
        h = add_halting_penalty(build_history_hamiltonian(c, "ones", "full"), 0)
        vals.append(ground_energy(h, method="dense").lambda0)
        assert math.isclose(vals[-1], path_laplacian_lambda0(T), abs_tol=1e-10)
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_penalty_flag_out_of_range():
    h = build_history_hamiltonian(identity_circuit(), "ones")
    with pytest.raises(DomainError):
        add_halting_penalty(h, 3)


def test_guard_and_argument_checks():
    with pytest.raises(ResourceGuardError):
        build_history_hamiltonian(identity_circuit(q=1, n=25), "ones", "full")
    with pytest.raises(DomainError):
        build_history_hamiltonian(identity_circuit(), "sometimes")
    with pytest.raises(DomainError):
        pad_circuit(identity_circuit(n=5), 3)
    big = build_history_hamiltonian(identity_circuit(q=9, n=9), "ones", "unary")
    with pytest.raises(ResourceGuardError):
        ground_energy(big, method="dense")


@pytest.mark.parametrize("name", sorted(library()))
@pytest.mark.parametrize("T", [4, 7, 12])
def test_compiled_runs_follow_the_machine(name, T):
    tm = library()[name]
    comp = compile_run(tm, [], T)
    assert len(comp.circuit) == T - 1
    ref = run_tm(tm, [], comp.steps)
    assert comp.halted == ref.halted
    final = computation_trace(comp.circuit).states[-1]
    idx = int(np.argmax(np.abs(final)))
    assert abs(final[idx]) == pytest.approx(1.0)
    flag = (idx >> (comp.circuit.n_qubits - 1)) & 1
    assert flag == int(comp.halted)


def test_compiled_energy_dichotomy():
    for tm, halts in ((halt_now(), True), (never_halt(), False)):
        comp = compile_run(tm, [], 6)
        assert comp.halted == halts
        h = add_halting_penalty(build_history_hamiltonian(comp.circuit, "ones", "unary"), comp.flag_qubit)
        lam = ground_energy(h, method="dense").lambda0
        assert (lam > 1e-6) == halts and (halts or abs(lam) < 1e-10)


def test_ground_energy_vs_T_tables():
    def family(T):
        c = compile_run(busy_beaver_2(), [], T)
        return c.circuit, c.flag_qubit
    assert all(abs(lam) < 1e-10 for _, lam in ground_energy_vs_T(family, [4, 6]))

    def halting(T):
        return pad_circuit(Circuit(1, ()), T), 0
    table = ground_energy_vs_T(halting, [4, 6, 8, 10, 12])
    lams = [lam for _, lam in table]
    assert all(lam > 0 for lam in lams) and all(b < a for a, b in zip(lams, lams[1:]))
    assert all(0.1 <= T * lam <= 10 for T, lam in table)

    with pytest.raises(DomainError):
        ground_energy_vs_T(lambda T: (Circuit(1, ()), 0), [3])
