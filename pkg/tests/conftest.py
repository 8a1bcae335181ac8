import logging

import pytest

from signedpsd import oracle
from signedpsd.metpoly import is_degenerate

logging.getLogger("signedpsd").setLevel(logging.ERROR)


@pytest.fixture(scope="session")
def catalog():
    """Every catalog weighting as (graph index, graph, x, odd-K4 free)."""
    free = {}
    out = []
    for gi, g, x in oracle.catalog_instances():
        if gi not in free:
            free[gi] = oracle.odd_k4_free(g)
        out.append((gi, g, x, free[gi]))
    return out


@pytest.fixture(scope="session")
def catalog_free(catalog):
    return [(gi, g, x) for gi, g, x, ok in catalog if ok]


@pytest.fixture(scope="session")
def catalog_solved(catalog_free):
    """Solve results for all odd-K4 free catalog instances."""
    from signedpsd.complete import solve
    return [(gi, g, x, solve(g, x=x)) for gi, g, x in catalog_free]


def nondegenerate(g, x):
    return not any(is_degenerate(e.odd, x[e.id]) for e in g.edges)


ACCEPTANCE_LINES = []


def report(number, name, ok, detail, elapsed):
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail} [{elapsed:.1f}s]"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
