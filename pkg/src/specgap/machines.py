"""Deterministic Turing machines, bounded runs and the phase encoding of n."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import DomainError, MalformedInputError

BLANK = 0
L, R = -1, +1


@dataclass(frozen=True)
class TuringMachine:
    """Single-tape machine; states ``0..states-1``, symbols ``0..alphabet-1``.

    Symbol 0 is the blank.  ``transition[(q, a)] = (q', a', move)`` with
    ``move`` in ``{-1, +1}``.
    """

    states: int
    alphabet: int
    transition: Dict[Tuple[int, int], Tuple[int, int, int]]
    initial: int = 0
    halting: frozenset = frozenset()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "halting", frozenset(self.halting))
        if self.states < 1 or self.alphabet < 1:
            raise MalformedInputError("machine needs at least one state and one symbol")
        if not 0 <= self.initial < self.states:
            raise MalformedInputError("initial state out of range")
        for q in self.halting:
            if not 0 <= q < self.states:
                raise MalformedInputError(f"halting state {q} out of range")
        for (q, a), (q2, a2, mv) in self.transition.items():
            if not (0 <= q < self.states and 0 <= q2 < self.states):
                raise MalformedInputError(f"transition ({q}, {a}) uses an unknown state")
            if not (0 <= a < self.alphabet and 0 <= a2 < self.alphabet):
                raise MalformedInputError(f"transition ({q}, {a}) uses an unknown symbol")
            if mv not in (L, R):
                raise MalformedInputError(f"transition ({q}, {a}) has move {mv}")
            if q in self.halting:
                raise MalformedInputError(f"halting state {q} has an outgoing transition")
        for q in range(self.states):
            if q in self.halting:
                continue
            for a in range(self.alphabet):
                if (q, a) not in self.transition:
                    raise MalformedInputError(f"transition missing for state {q}, symbol {a}")


@dataclass(frozen=True)
class Configuration:
    state: int
    head: int
    tape: Tuple[Tuple[int, int], ...]  # sorted (position, symbol) for non-blank cells


@dataclass
class RunResult:
    halted: bool
    steps_used: int
    tape: List[int]
    head: int  # head position relative to the start of ``tape``
    state: int
    offset: int  # absolute position of ``tape[0]``
    trace: Optional[List[Configuration]] = field(default=None, repr=False)

    def tape_string(self):
        return "".join(str(s) for s in self.tape)


def run_tm(tm: TuringMachine, tape_input: Sequence[int], max_steps: int,
           record: bool = False) -> RunResult:
    """Run for at most ``max_steps`` steps on a two-way blank-filled tape.

    The input occupies positions ``0..len-1`` with the head on position 0.
    The reported window spans the input and every cell the head visited.
    With ``record=True`` the configuration before each step and the final
    one are returned in ``trace``.
    """
    if max_steps < 0:
        raise DomainError("max_steps must be non-negative")
    tape: Dict[int, int] = {}
    for i, a in enumerate(tape_input):
        a = int(a)
        if not 0 <= a < tm.alphabet:
            raise MalformedInputError(f"input symbol {a} outside alphabet of size {tm.alphabet}")
        if a != BLANK:
            tape[i] = a
    lo, hi = 0, max(len(tape_input) - 1, 0)
    q, head, steps = tm.initial, 0, 0
    trace = [] if record else None

    def snapshot():
        return Configuration(q, head, tuple(sorted(tape.items())))

    while q not in tm.halting and steps < max_steps:
        if record:
            trace.append(snapshot())
        a = tape.get(head, BLANK)
        q, a2, mv = tm.transition[(q, a)]
        if a2 == BLANK:
            tape.pop(head, None)
        else:
            tape[head] = a2
        head += mv
        lo, hi = min(lo, head), max(hi, head)
        steps += 1
    if record:
        trace.append(snapshot())
    window = [tape.get(i, BLANK) for i in range(lo, hi + 1)]
    return RunResult(q in tm.halting, steps, window, head - lo, q, lo, trace)


# ---------------------------------------------------------------- text format

def format_tm(tm: TuringMachine) -> str:
    lines = [f"tm {tm.states} {tm.alphabet}"]
    for (q, a), (q2, a2, mv) in sorted(tm.transition.items()):
        lines.append(f"{q} {a} -> {q2} {a2} {'L' if mv == L else 'R'}")
    lines.append(f"initial {tm.initial}")
    for h in sorted(tm.halting):
        lines.append(f"halt {h}")
    return "\n".join(lines) + "\n"


def parse_tm(text: str) -> TuringMachine:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise MalformedInputError("empty machine description")
    head = lines[0].split()
    try:
        if len(head) != 3 or head[0] != "tm":
            raise ValueError
        states, alphabet = int(head[1]), int(head[2])
        trans, initial, halting = {}, 0, set()
        for ln in lines[1:]:
            parts = ln.split()
            if parts[0] == "initial" and len(parts) == 2:
                initial = int(parts[1])
            elif parts[0] == "halt" and len(parts) == 2:
                halting.add(int(parts[1]))
            elif len(parts) == 6 and parts[2] == "->" and parts[5] in ("L", "R"):
                key = (int(parts[0]), int(parts[1]))
                if key in trans:
                    raise MalformedInputError(f"duplicate transition {key}")
                trans[key] = (int(parts[3]), int(parts[4]), L if parts[5] == "L" else R)
            else:
                raise ValueError
    except ValueError as exc:
        raise MalformedInputError(f"malformed machine line in {text[:40]!r}") from exc
    return TuringMachine(states, alphabet, trans, initial, frozenset(halting))


# ---------------------------------------------------------------- library

def _fill(states, alphabet, rules, halting):
    # unspecified (state, symbol) pairs keep the symbol and move right
    trans = dict(rules)
    for q in range(states):
        if q in halting:
            continue
        for a in range(alphabet):
            trans.setdefault((q, a), (q, a, R))
    return trans


def halt_now() -> TuringMachine:
    return TuringMachine(1, 2, {}, 0, frozenset({0}), "halt_now")


def never_halt() -> TuringMachine:
    """Walks right forever."""
    return TuringMachine(2, 2, _fill(2, 2, {}, {1}), 0, frozenset({1}), "never_halt")


def unary_increment() -> TuringMachine:
    """Skips the block of 1s and appends one more."""
    rules = {(0, 1): (0, 1, R), (0, 0): (1, 1, L)}
    return TuringMachine(2, 2, rules, 0, frozenset({1}), "unary_increment")


def binary_counter() -> TuringMachine:
    """Counts upward forever on digits ``1 = '0'``, ``2 = '1'`` (never halts)."""
    go, carry, halt = 0, 1, 2
    rules = {
        (go, 1): (go, 1, R), (go, 2): (go, 2, R), (go, 0): (carry, 0, L),
        (carry, 2): (carry, 1, L), (carry, 1): (go, 2, R), (carry, 0): (go, 2, R),
    }
    return TuringMachine(3, 3, rules, go, frozenset({halt}), "binary_counter")


def even_parity() -> TuringMachine:
    """Halts iff the input has an even number of ``'1'`` digits.

    Digits are symbols ``1 = '0'`` and ``2 = '1'``; on odd parity the machine
    walks right forever.
    """
    even, odd, halt, loop = 0, 1, 2, 3
    rules = {
        (even, 1): (even, 1, R), (even, 2): (odd, 2, R), (even, 0): (halt, 0, R),
        (odd, 1): (odd, 1, R), (odd, 2): (even, 2, R), (odd, 0): (loop, 0, R),
    }
    return TuringMachine(4, 3, _fill(4, 3, rules, {halt}), even, frozenset({halt}), "even_parity")


def _busy_beaver(table: str, name: str) -> TuringMachine:
    # table: one entry per (state, symbol) as "<write><move><next>", next "H" = halt
    entries = table.split()
    n = len(entries) // 2
    halt = n
    rules = {}
    for i, e in enumerate(entries):
        q, a = divmod(i, 2)
        nxt = halt if e[2] == "H" else ord(e[2]) - ord("A")
        rules[(q, a)] = (nxt, int(e[0]), L if e[1] == "L" else R)
    return TuringMachine(n + 1, 2, rules, 0, frozenset({halt}), name)


def busy_beaver_2() -> TuringMachine:
    return _busy_beaver("1RB 1LB 1LA 1RH", "busy_beaver_2")


def busy_beaver_3() -> TuringMachine:
    return _busy_beaver("1RB 1RH 0RC 1RB 1LC 1LA", "busy_beaver_3")


def busy_beaver_4() -> TuringMachine:
    return _busy_beaver("1RB 1LB 1LA 0LC 1RH 1LD 1RD 0RA", "busy_beaver_4")


def unary_to_binary() -> TuringMachine:
    """Converts ``1^N`` into the binary numeral of ``N`` left of the input.

    Symbols: 1 unary mark, 2 binary '0', 3 binary '1', 4 used mark.  The
    numeral ends (least significant digit) two cells left of the input and is
    separated from it by one blank.
    """
    seek, back, inc, ret, halt = 0, 1, 2, 3, 4
    rules = {
        (seek, 4): (seek, 4, R), (seek, 1): (back, 4, L), (seek, 0): (halt, 0, R),
        (back, 4): (back, 4, L), (back, 1): (back, 1, L), (back, 0): (inc, 0, L),
        (inc, 3): (inc, 2, L), (inc, 2): (ret, 3, R), (inc, 0): (ret, 3, R),
        (ret, 2): (ret, 2, R), (ret, 3): (ret, 3, R), (ret, 0): (seek, 0, R),
    }
    return TuringMachine(5, 5, _fill(5, 5, rules, {halt}), seek, frozenset({halt}), "unary_to_binary")


def read_binary_output(result: RunResult) -> int:
    """Decode the numeral written by :func:`unary_to_binary`."""
    digits = "".join({2: "0", 3: "1"}[s] for s in result.tape if s in (2, 3))
    return int(digits, 2) if digits else 0


def library() -> Dict[str, TuringMachine]:
    machines = [halt_now(), never_halt(), unary_increment(), binary_counter(), even_parity(),
                busy_beaver_2(), busy_beaver_3(), busy_beaver_4(), unary_to_binary()]
    return {m.name: m for m in machines}


def ones(n: int) -> List[int]:
    return [1] * n


def digits_to_symbols(bits: str) -> List[int]:
    """Binary digits as tape symbols ``'0' -> 1``, ``'1' -> 2`` (blank stays 0)."""
    if any(b not in "01" for b in bits):
        raise MalformedInputError(f"not a bit string: {bits!r}")
    return [int(b) + 1 for b in bits]


# ---------------------------------------------------------------- phase encoding

def binary_digits(n: int) -> str:
    """Most-significant-bit-first binary expansion without leading zeros."""
    if not isinstance(n, int) or n < 1:
        raise DomainError("binary_digits needs a positive integer")
    return format(n, "b")


@dataclass(frozen=True)
class PhiEncoding:
    n: int
    phi: Fraction
    digits: str
    length: int
    convention: str

    def expansion(self) -> str:
        """Binary expansion of ``phi`` with exactly ``length`` significant digits."""
        if self.convention == "formula":
            return self.digits[0] + "." + self.digits[1:]
        return "0." + self.digits

    def fractional_digits(self, r: Optional[int] = None) -> str:
        """First ``r`` (default ``length``) binary digits of ``phi mod 1``."""
        r = self.length if r is None else r
        f = self.phi - (self.phi.numerator // self.phi.denominator)
        out = []
        for _ in range(r):
            f *= 2
            bit = int(f >= 1)
            out.append(str(bit))
            f -= bit
        return "".join(out)


CONVENTIONS = ("digits", "formula")


def phi_of_n(n: int, convention: str = "digits") -> PhiEncoding:
    """Rational phase encoding the binary digits of ``n``.

    ``"digits"`` (default) gives ``n / 2**|n|``, whose binary fraction is
    ``0.`` followed by the digits of ``n``.  ``"formula"`` gives
    ``n / 2**(|n| - 1)``, which places the binary point after the leading 1.
    """
    if convention == "digits-after-point":
        convention = "digits"
    if convention not in CONVENTIONS:
        raise DomainError(f"unknown convention {convention!r}")
    if not isinstance(n, int) or n < 1:
        raise DomainError("phi_of_n needs a positive integer")
    bits = binary_digits(n)
    k = len(bits)
    phi = Fraction(n, 2 ** k) if convention == "digits" else Fraction(n, 2 ** (k - 1))
    return PhiEncoding(n, phi, bits, k, convention)
