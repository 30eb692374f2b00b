from __future__ import annotations

import numpy as np
import pytest

from asymde.ensemble import BipartiteGraph

# The small (2,3) example graph, 0-based. Variable 3 meets check 1 twice, so
# under the odd-edge rule it drops out of the parity-check matrix entirely.
FIG1_EDGES = [(0, 0), (0, 3), (1, 0), (1, 2), (2, 0), (2, 2), (3, 1), (3, 1), (4, 2), (4, 3), (5, 1), (5, 3)]
FIG1_MATRIX = np.array(
    [
        [1, 1, 1, 0, 0, 0],
        [0, 0, 0, 0, 0, 1],
        [0, 1, 1, 0, 1, 0],
        [1, 0, 0, 0, 1, 1],
    ],
    dtype=np.uint8,
)


@pytest.fixture
def fig1_graph() -> BipartiteGraph:
    return BipartiteGraph.from_edges(6, 4, FIG1_EDGES)


@pytest.fixture
def fig1_matrix() -> np.ndarray:
    return FIG1_MATRIX.copy()


def brute_rank(a: np.ndarray) -> int:
    """GF(2) rank via the size of the row span."""
    a = np.asarray(a, dtype=np.uint8)
    span = {bytes(np.zeros(a.shape[1], np.uint8))}
    for row in a:
        span |= {bytes(np.frombuffer(s, np.uint8) ^ row) for s in span}
    return int(np.log2(len(span)))


def brute_codewords(a: np.ndarray) -> set:
    a = np.asarray(a, dtype=np.uint8)
    n = a.shape[1]
    out = set()
    for k in range(1 << n):
        x = ((k >> np.arange(n)) & 1).astype(np.uint8)
        if not ((a.astype(int) @ x) % 2).any():
            out.add(x.tobytes())
    return out


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
