from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from conftest import naive_tm
from specgap.errors import DomainError, MalformedInputError
from specgap.machines import (BLANK, L, R, TuringMachine, binary_digits, busy_beaver_2,
                              busy_beaver_3, busy_beaver_4, digits_to_symbols, even_parity,
                              format_tm, halt_now, library, never_halt, ones, parse_tm,
                              phi_of_n, read_binary_output, run_tm, unary_increment,
                              unary_to_binary)


def test_halt_now():
    r = run_tm(halt_now(), [], 10)
    assert r.halted and r.steps_used == 0


def test_never_halt_uses_budget():
    r = run_tm(never_halt(), [], 25)
    assert not r.halted and r.steps_used == 25


def test_unary_increment():
    r = run_tm(unary_increment(), ones(3), 100)
    assert r.halted and r.tape == [1, 1, 1, 1]


@pytest.mark.parametrize("machine, steps, marks", [
    (busy_beaver_2, 6, 4), (busy_beaver_3, 14, 6), (busy_beaver_4, 107, 13)])
def test_busy_beavers(machine, steps, marks):
    r = run_tm(machine(), [], 10_000)
    assert r.halted and r.steps_used == steps and sum(r.tape) == marks


@pytest.mark.parametrize("n", range(0, 20))
def test_unary_to_binary(n):
    r = run_tm(unary_to_binary(), ones(n), 5000)
    assert r.halted and read_binary_output(r) == n


@given(st.text(alphabet="01", max_size=8))
def test_even_parity(bits):
    r = run_tm(even_parity(), digits_to_symbols(bits), 50)
    assert r.halted == (bits.count("1") % 2 == 0)


@pytest.mark.parametrize("name", sorted(library()))
@pytest.mark.parametrize("budget", [0, 1, 5, 40])
def test_library_matches_naive_simulator(name, budget):
    tm = library()[name]
    tape = ones(3) if tm.alphabet > 1 else []
    r = run_tm(tm, tape, budget)
    halted, steps, state, cells = naive_tm(tm.transition, tm.halting, tm.initial, tape, budget)
    assert (r.halted, r.steps_used, r.state) == (halted, steps, state)
    got = {r.offset + i: a for i, a in enumerate(r.tape) if a != BLANK}
    assert got == cells
    assert not r.halted or r.steps_used <= budget


def test_trace_records_every_configuration():
    r = run_tm(busy_beaver_2(), [], 100, record=True)
    assert len(r.trace) == r.steps_used + 1
    assert r.trace[-1].state in busy_beaver_2().halting


def test_negative_budget_and_bad_symbols():
    with pytest.raises(DomainError):
        run_tm(halt_now(), [], -1)
    with pytest.raises(MalformedInputError):
        run_tm(busy_beaver_2(), [5], 3)


def test_machine_validation():
    with pytest.raises(MalformedInputError):
        TuringMachine(2, 2, {(0, 0): (1, 0, R)}, 0, frozenset({1}))  # (0, 1) missing
    with pytest.raises(MalformedInputError):
        TuringMachine(1, 2, {(0, 0): (0, 0, R), (0, 1): (0, 0, L)}, 0, frozenset({0}))
    with pytest.raises(MalformedInputError):
        TuringMachine(1, 1, {(0, 0): (0, 0, 3)}, 0)


@pytest.mark.parametrize("name", sorted(library()))
def test_text_format_round_trip(name):
    tm = library()[name]
    back = parse_tm(format_tm(tm))
    assert back.transition == tm.transition and back.halting == tm.halting
    assert (back.states, back.alphabet, back.initial) == (tm.states, tm.alphabet, tm.initial)


def test_parse_rejects_garbage():
    with pytest.raises(MalformedInputError):
        parse_tm("tm 1 1\n0 0 => 0 0 R\n")
    with pytest.raises(MalformedInputError):
        parse_tm("")


def test_binary_digits():
    assert binary_digits(1) == "1"
    assert binary_digits(6) == "110"
    with pytest.raises(DomainError):
        binary_digits(0)


@given(st.integers(1, 10 ** 9))
def test_binary_digits_round_trip(n):
    d = binary_digits(n)
    assert int(d, 2) == n and d[0] == "1"


def test_phi_examples():
    e = phi_of_n(6)
    assert e.phi == Fraction(3, 4) and e.length == 3 and e.digits == "110"
    assert e.expansion() == "0.110"
    assert phi_of_n(6, "digits-after-point").phi == Fraction(3, 4)
    f = phi_of_n(6, "formula")
    assert f.phi == Fraction(3, 2) and f.expansion() == "1.10"
    assert phi_of_n(1).phi == Fraction(1, 2)


@given(st.integers(1, 10 ** 6))
def test_phi_digits_property(n):
    e = phi_of_n(n)
    assert e.phi == Fraction(n, 2 ** e.length) and e.length == n.bit_length()
    assert e.fractional_digits() == binary_digits(n)
    assert phi_of_n(n, "formula").phi == 2 * e.phi


def test_phi_rejects_bad_input():
    with pytest.raises(DomainError):
        phi_of_n(0)
    with pytest.raises(DomainError):
        phi_of_n(3, "other")


def test_digits_to_symbols():
    assert digits_to_symbols("101") == [2, 1, 2]
    with pytest.raises(MalformedInputError):
        digits_to_symbols("12")
