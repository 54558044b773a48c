import sys
from pathlib import Path

import numpy as np
import pytest

from ratingnet.graph import build_graph
from ratingnet.ingest import EdgeList

sys.path.insert(0, str(Path(__file__).parent))

# G0: users u1,u2,u3 -> 0,1,2; businesses b1,b2 -> 0,1
G0_TRIPLES = [(0, 0, 5), (1, 0, 3), (0, 1, 4), (2, 1, 2)]
U1, U2, U3 = 0, 1, 2
B1, B2 = 0, 1


def edges_from_triples(triples, stamps=None):
    u, b, s = zip(*triples) if triples else ((), (), ())
    stamps = list(range(1, len(triples) + 1)) if stamps is None else stamps
    return EdgeList(u, b, s, stamps)


def random_triples(rng, n_users, n_businesses, n_edges):
    """Distinct random (user, business, stars) triples."""
    n_edges = min(n_edges, n_users * n_businesses)
    cells = rng.choice(n_users * n_businesses, n_edges, replace=False)
    stars = rng.integers(1, 6, n_edges)
    return [(int(c // n_businesses), int(c % n_businesses), int(s)) for c, s in zip(cells, stars)]


@pytest.fixture
def g0():
    return build_graph(edges_from_triples(G0_TRIPLES))


@pytest.fixture
def single_edge():
    return build_graph(edges_from_triples([(0, 0, 4)]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---- acceptance report -------------------------------------------------------------

ACCEPTANCE: dict = {}


def record_acceptance(number, ok, detail):
    """Remember one criterion's verdict; printed once at the end of the session."""
    status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    ACCEPTANCE[number] = f"criterion {number}: {status}  {detail}"
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
