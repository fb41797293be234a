import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import fejer_distribution
from specgap.errors import DomainError, MalformedInputError, ResourceGuardError
from specgap.machines import binary_digits, even_parity, phi_of_n, unary_increment
from specgap.phase_estimation import (H_GATE, X_GATE, Circuit, QuantumState, build_qpe_circuit,
                                      controlled, dovetail_run, format_circuit, inverse_qft_gates,
                                      one_qubit, outcome_distribution, parse_circuit,
                                      phase_gate, qft_gates, qpe_digits, qpe_distribution,
                                      run_circuit, swap)


def dft_matrix(r):
    N = 2 ** r
    j = np.arange(N)
    return np.exp(2j * np.pi * np.outer(j, j) / N) / math.sqrt(N)


def circuit_matrix(c):
    q = c.n_qubits
    cols = []
    for i in range(2 ** q):
        cols.append(run_circuit(c, QuantumState.basis(format(i, f"0{q}b"))).amplitudes)
    return np.array(cols).T


@pytest.mark.parametrize("r", [1, 2, 3, 4])
def test_qft_matches_dft(r):
    U = circuit_matrix(Circuit(r, tuple(qft_gates(range(r)))))
    assert np.allclose(U, dft_matrix(r), atol=1e-12)


def test_inverse_qft_is_inverse():
    c = Circuit(3, tuple(qft_gates(range(3)) + inverse_qft_gates(range(3))))
    assert np.allclose(circuit_matrix(c), np.eye(8), atol=1e-12)


def test_single_gates_and_order_convention():
    # qubit 0 is the most significant bit
    out = run_circuit(Circuit(2, (one_qubit(0, X_GATE),)), QuantumState.zeros(2))
    assert outcome_distribution(out).support() == {"10": 1.0}
    bell = Circuit(2, (one_qubit(0, H_GATE), controlled(0, 1, X_GATE)))
    d = outcome_distribution(run_circuit(bell, QuantumState.zeros(2)))
    assert d.support().keys() == {"00", "11"}
    assert math.isclose(d.probabilities["11"], 0.5)
    sw = run_circuit(Circuit(2, (swap(0, 1),)), QuantumState.basis("10"))
    assert outcome_distribution(sw).mode() == "01"


def test_marginal_order_follows_request():
    s = QuantumState.basis("110")
    assert outcome_distribution(s, [2, 0]).support() == {"01": 1.0}


def test_state_validation():
    with pytest.raises(DomainError):
        QuantumState(np.ones(3))
    with pytest.raises(DomainError):
        QuantumState(np.ones(4))
    with pytest.raises(DomainError):
        Circuit(1, (one_qubit(0, np.ones((2, 2))),))
    with pytest.raises(DomainError):
        Circuit(1, (one_qubit(1, X_GATE),))


def test_qpe_half_and_example():
    assert qpe_distribution(Fraction(1, 2), 1).support() == {"1": pytest.approx(1.0, abs=1e-12)}
    assert qpe_digits(6, 3) == "110"
    assert qpe_digits(6, 5) == "11000"


@pytest.mark.parametrize("phi, r", [(Fraction(1, 3), 3), (Fraction(2, 7), 4), (Fraction(5, 8), 3),
                                    (Fraction(1, 10), 5), (Fraction(11, 13), 2)])
def test_qpe_matches_fejer_kernel(phi, r):
    dist = qpe_distribution(phi, r)
    ref = fejer_distribution(phi, r)
    got = np.array([dist.probabilities[format(k, f"0{r}b")] for k in range(2 ** r)])
    assert np.allclose(got, ref, atol=1e-12)


def test_qpe_one_third():
    d = qpe_distribution(Fraction(1, 3), 3)
    assert d.mode() == "011"
    assert math.isclose(d.probabilities["011"], 0.6884, abs_tol=1e-3)


@given(st.integers(1, 200), st.integers(0, 3))
def test_exact_extraction_with_extra_bits(n, extra):
    enc = phi_of_n(n)
    r = enc.length + extra
    support = qpe_distribution(enc.phi, r).support(1e-9)
    assert support.keys() == {binary_digits(n) + "0" * extra}


def test_qpe_guard():
    with pytest.raises(ResourceGuardError):
        build_qpe_circuit(Fraction(1, 2), 21)
    with pytest.raises(DomainError):
        build_qpe_circuit(Fraction(1, 2), 0)


def test_qpe_phase_is_exact_mod_one():
    c = build_qpe_circuit(Fraction(7, 4), 2)
    d = build_qpe_circuit(Fraction(3, 4), 2)
    assert all(np.array_equal(a.matrix, b.matrix) for a, b in zip(c.gates, d.gates) if a.kind != "swap")


def test_csv_output():
    assert qpe_distribution(Fraction(3, 4), 3).to_csv() == "bitstring,probability\n110,1.0\n"


def test_dovetail():
    r = dovetail_run(6, 3, even_parity(), 100)
    assert r.halted  # '110' has two ones
    r = dovetail_run(4, 3, even_parity(), 100)
    assert not r.halted
    with pytest.raises(DomainError):
        dovetail_run(6, 2, unary_increment(), 10)


def test_circuit_text_round_trip():
    c = build_qpe_circuit(Fraction(3, 8), 4)
    text = format_circuit(c)
    back = parse_circuit(text)
    assert len(back) == len(c) == 21
    assert format_circuit(back) == text
    assert np.allclose(circuit_matrix(back), circuit_matrix(c), atol=0)


def test_circuit_parse_errors():
    with pytest.raises(MalformedInputError):
        parse_circuit("circuit 1\nfoo 0\n")
    with pytest.raises(MalformedInputError):
        parse_circuit("circuit 1\nx 3\n")
    with pytest.raises(MalformedInputError):
        parse_circuit("")


def test_inverse_circuit_undoes():
    c = Circuit(2, (one_qubit(0, H_GATE), controlled(0, 1, phase_gate(0.3)), swap(0, 1)))
    s = QuantumState(np.array([0.5, 0.5j, -0.5, 0.5]))
    back = run_circuit(c.inverse(), run_circuit(c, s))
    assert np.allclose(back.amplitudes, s.amplitudes, atol=1e-14)
