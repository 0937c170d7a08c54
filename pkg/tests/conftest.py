import sys

import numpy as np
import pytest

# Full 2^N space oracle. Local basis: index 0 = down, 1 = up. Site 1 is the
# last kron factor, so the full-space index equals the configuration integer.
SZ = np.diag([-0.5, 0.5])
SP = np.array([[0.0, 0.0], [1.0, 0.0]])
SM = SP.T
SX = (SP + SM) / 2
SY = (SP - SM) / 2j
ID = np.eye(2)


def site_op(op, site, n):
    """``op`` on 1-based ``site`` of an ``n``-site chain."""
    out = np.ones((1, 1))
    for s in range(n, 0, -1):
        out = np.kron(out, op if s == site else ID)
    return out


def full_xxz(n, J=1.0, Delta=1.0):
    H = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for i in range(1, n + 1):
        j = i % n + 1
        H += J * (site_op(SX, i, n) @ site_op(SX, j, n)
                  + site_op(SY, i, n) @ site_op(SY, j, n)
                  + Delta * site_op(SZ, i, n) @ site_op(SZ, j, n))
    return H


def full_loss(gammas):
    n = len(gammas)
    G = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for i, g in enumerate(gammas, start=1):
        G += g * (site_op(SZ, i, n) + 0.5 * np.eye(2 ** n))
    return G


def full_hatano_nelson(n, fields, g, J=1.0, Delta=1.0):
    H = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for i in range(1, n + 1):
        j = i % n + 1
        H += J * (0.5 * (np.exp(g) * site_op(SP, i, n) @ site_op(SM, j, n)
                         + np.exp(-g) * site_op(SM, i, n) @ site_op(SP, j, n))
                  + Delta * site_op(SZ, i, n) @ site_op(SZ, j, n))
        H += fields[i - 1] * site_op(SZ, i, n)
    return H


def project(full, states):
    return full[np.ix_(states, states)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
