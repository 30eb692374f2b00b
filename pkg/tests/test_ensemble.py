from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from asymde.ensemble import (
    BUILTIN_CODES,
    BipartiteGraph,
    DegreeDistribution,
    InfeasibleDegrees,
    builtin_code,
    exact_design_rate,
    format_degree_file,
    node_degrees,
    parity_matrix,
    parse_degree_text,
    resolve_code,
    sample_graph,
    sample_semiregular,
)


def test_regular_scalars():
    d = DegreeDistribution.regular(3, 6)
    assert d.lambda2 == 0.0
    assert d.rho_prime_1 == 5.0
    assert d.design_rate == 0.5
    assert d.stability_bound() == float("inf")


@pytest.mark.parametrize("dv,dc", [(3, 6), (4, 8), (3, 4), (2, 3), (5, 7)])
def test_regular_rate_exact(dv, dc):
    assert exact_design_rate(DegreeDistribution.regular(dv, dc)) == 1 - Fraction(dv, dc)


def test_12a_scalars():
    d = builtin_code("12A")
    assert abs(d.stability_bound() - 0.6060) < 1e-3
    assert abs(d.design_rate - 0.5) < 5e-3


def test_builtin_codes_load():
    for name in BUILTIN_CODES:
        d = builtin_code(name)
        assert abs(sum(d.lam.values()) - 1) < 1e-12
        assert abs(sum(d.rho.values()) - 1) < 1e-12
        if name.startswith("12"):
            assert d.max_dv <= 12 and d.max_dc <= 9
    assert builtin_code("12C").lambda2 == 0.0


def test_degree_file_roundtrip():
    d = builtin_code("12B")
    e = parse_degree_text(format_degree_file(d))
    for k in d.lam:
        assert abs(d.lam[k] - e.lam[k]) < 1e-11
    for k in d.rho:
        assert abs(d.rho[k] - e.rho[k]) < 1e-11


@pytest.mark.parametrize(
    "text",
    [
        "lambda 3 0.5\nrho 6 1.0\n",  # lambda does not sum to one
        "lambda 3 1.0\n",  # no rho
        "lambda x 1.0\nrho 6 1\n",
        "lam 3 1.0\nrho 6 1\n",
        "lambda 3 1.5\nrho 6 1\n",
    ],
)
def test_degree_file_rejects(text):
    with pytest.raises(ValueError):
        parse_degree_text(text)


def test_resolve_code(tmp_path):
    assert resolve_code("36") == DegreeDistribution.regular(3, 6)
    assert resolve_code("36.deg") == DegreeDistribution.regular(3, 6)
    assert resolve_code("4,8") == DegreeDistribution.regular(4, 8)
    p = tmp_path / "mine.deg"
    p.write_text("lambda 3 1\nrho 6 1\n")
    assert resolve_code(str(p)).name == "mine"
    with pytest.raises(FileNotFoundError):
        resolve_code("nope")


def test_invalid_distributions():
    with pytest.raises(ValueError):
        DegreeDistribution({1: 1.0}, {3: 1.0})
    with pytest.raises(ValueError):
        DegreeDistribution({3: 0.6}, {6: 1.0})
    DegreeDistribution({1: 1.0}, {3: 1.0}, allow_degree_one=True)


def test_graph_shapes():
    g = sample_graph(DegreeDistribution.regular(2, 3), 6, seed=0)
    assert (g.n, g.m, g.num_edges) == (6, 4, 12)
    g = sample_graph(DegreeDistribution.regular(3, 6), 10, seed=1)
    assert (g.m, g.num_edges) == (5, 30)
    assert np.all(np.bincount(g.edge_var) == 3)
    assert np.all(np.bincount(g.edge_chk) == 6)


def test_regular_infeasible():
    with pytest.raises(InfeasibleDegrees):
        sample_graph(DegreeDistribution.regular(3, 6), 7, seed=0)


def test_same_seed_same_graph():
    d = builtin_code("12A")
    a, b = sample_graph(d, 500, seed=[4, 2]), sample_graph(d, 500, seed=[4, 2])
    np.testing.assert_array_equal(a.perm, b.perm)
    c = sample_graph(d, 500, seed=[4, 3])
    assert not np.array_equal(a.perm, c.perm)


@pytest.mark.parametrize("name", ["12A", "12B", "12C"])
@pytest.mark.parametrize("n", [1000, 10000])
def test_irregular_realization(name, n):
    d = builtin_code(name)
    vd, cd = node_degrees(d, n)
    assert vd.size == n and vd.sum() == cd.sum()
    E = vd.sum()
    # realized edge fractions track lambda and rho
    for k, frac in d.lam.items():
        assert abs((vd[vd == k].sum() / E) - frac) < 0.01
    for k, frac in d.rho.items():
        assert abs((cd[cd == k].sum() / E) - frac) < 0.01


def test_fig1_pairing_gives_printed_matrix(fig1_graph, fig1_matrix):
    np.testing.assert_array_equal(parity_matrix(fig1_graph).to_dense(), fig1_matrix)


def test_odd_rule():
    g = BipartiteGraph.from_edges(2, 1, [(0, 0), (0, 0), (1, 0)])
    np.testing.assert_array_equal(parity_matrix(g).to_dense(), [[0, 1]])
    g = BipartiteGraph.from_edges(2, 1, [(0, 0), (0, 0), (0, 0), (1, 0)])
    np.testing.assert_array_equal(parity_matrix(g).to_dense(), [[1, 1]])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_row_weight_bound(seed):
    g = sample_graph(DegreeDistribution.regular(3, 6), 12, seed=seed)
    w = parity_matrix(g).row_weights()
    cd = np.bincount(g.edge_chk, minlength=g.m)
    assert np.all(w <= cd)
    for j in range(g.m):
        nb = g.chk_neighbors(j)
        simple = len(set(nb.tolist())) == len(nb)
        assert (w[j] == cd[j]) == simple


def test_socket_uniformity():
    # which variable socket feeds check socket 0: uniform over all 18 sockets
    d = DegreeDistribution.regular(3, 6)
    counts = np.zeros(18)
    for s in range(3600):
        g = sample_graph(d, 6, seed=[9, s])
        counts[g.perm[0]] += 1
    assert stats.chisquare(counts).pvalue > 1e-3


def test_semiregular():
    g = sample_semiregular(3, 6, 120, 6, seed=0)
    cd = np.bincount(g.edge_chk)
    assert np.sum(cd == 5) == 6 and np.all((cd == 5) | (cd == 6))
    assert g.num_edges == 360
