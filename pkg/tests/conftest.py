import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def kron_lattice(local, L, W):
    """Dense lattice operator from explicit Kronecker products (independent of
    the library's index arithmetic)."""
    d, n = local.d, L * W
    dim = d ** n
    H = np.zeros((dim, dim), dtype=complex)

    def embed(op, sites):
        # op acts on the listed sites, in order; permute a full kron into place
        k = len(sites)
        rest = [s for s in range(n) if s not in sites]
        full = np.kron(op, np.eye(d ** (n - k)))
        order = list(sites) + rest
        t = full.reshape([d] * (2 * n))
        inv = np.argsort(order)
        t = t.transpose(list(inv) + [n + i for i in inv])
        return t.reshape(dim, dim)

    for r in range(L):
        for c in range(W):
            s = r * W + c
            H += embed(local.h_1, [s])
            if c + 1 < W:
                H += embed(local.h_row, [s, s + 1])
            if r + 1 < L:
                H += embed(local.h_col, [s, s + W])
    return H


def naive_tm(transition, halting, initial, tape_input, max_steps):
    """Plain dictionary simulation; returns (halted, steps, state, tape dict)."""
    tape = {i: a for i, a in enumerate(tape_input) if a != 0}
    q, head, steps = initial, 0, 0
    while q not in halting and steps < max_steps:
        q, a, mv = transition[(q, tape.get(head, 0))]
        if a:
            tape[head] = a
        else:
            tape.pop(head, None)
        head += mv
        steps += 1
    return q in halting, steps, q, tape


def fejer_distribution(phi, r):
    """Closed-form QPE outcome probabilities indexed by the integer outcome."""
    N = 2 ** r
    k = np.arange(N)
    j = np.arange(N)
    amp = np.exp(2j * np.pi * np.outer(float(phi) - k / N, j)).sum(axis=1) / N
    return np.abs(amp) ** 2


def path_laplacian_lambda0(T):
    """Lowest eigenvalue of (1/2) path Laplacian on T nodes plus 1 on the last node."""
    A = np.zeros((T, T))
    for t in range(T - 1):
        A[t, t] += 0.5
        A[t + 1, t + 1] += 0.5
        A[t, t + 1] -= 0.5
        A[t + 1, t] -= 0.5
    A[-1, -1] += 1.0
    return float(np.linalg.eigvalsh(A)[0])


def all_grids(n_tiles, h, w):
    for cells in itertools.product(range(n_tiles), repeat=h * w):
        yield np.array(cells).reshape(h, w)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
