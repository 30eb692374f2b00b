from __future__ import annotations

import itertools
import json
import math

import numpy as np
import pytest

from asymde.bpsim import TIE, LengthMismatch, SimConfig, bp_decode, encode, run_sim
from asymde.channels import BEC, BSC, ERASURE, ZChannel
from asymde.ensemble import DegreeDistribution, parity_matrix, sample_graph
from asymde.gf2 import null_space_basis

R36 = DegreeDistribution.regular(3, 6)


def test_encode_basics(fig1_graph):
    A = parity_matrix(fig1_graph)
    basis = null_space_basis(A)
    assert not encode(basis, np.zeros(basis.size)).any()
    for k in range(basis.size):
        e = np.zeros(basis.size, np.uint8)
        e[k] = 1
        np.testing.assert_array_equal(encode(basis, e), basis.to_dense()[k])
    for msg in itertools.product((0, 1), repeat=basis.size):
        assert not A.syndrome(encode(basis, msg)).any()
    with pytest.raises(LengthMismatch):
        encode(basis, np.zeros(basis.size + 1))


def test_noiseless_bsc_decodes_at_first_iteration():
    g = sample_graph(R36, 600, seed=1)
    basis = null_space_basis(parity_matrix(g))
    x = encode(basis, np.random.default_rng(0).integers(0, 2, basis.size))
    hard = bp_decode(g, BSC(0.0), x.astype(float), 5)
    np.testing.assert_array_equal(hard[0], x)


def test_all_erased():
    g = sample_graph(R36, 60, seed=2)
    hard = bp_decode(g, BEC(1.0), np.full(60, ERASURE), 5)
    assert np.all(hard == TIE)


def test_length_mismatch():
    g = sample_graph(R36, 60, seed=2)
    with pytest.raises(LengthMismatch):
        bp_decode(g, BSC(0.1), np.zeros(59), 5)


@pytest.mark.parametrize("seed", range(6))
def test_one_iteration_matches_tree_map(fig1_graph, seed):
    """Variable 0 after one iteration: bitwise MAP over its depth-one tree."""
    ch = BSC(0.2)
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, 6).astype(float)
    hard, post = bp_decode(fig1_graph, ch, y, 1, return_llr=True, early_stop=False)
    # tree variables 0,1,2,4,5 with checks x0+x1+x2 = 0 and x0+x4+x5 = 0
    lik = {0: {0.0: 0.8, 1.0: 0.2}, 1: {0.0: 0.2, 1.0: 0.8}}
    num = {0: 0.0, 1: 0.0}
    for x in itertools.product((0, 1), repeat=6):
        if (x[0] ^ x[1] ^ x[2]) or (x[0] ^ x[4] ^ x[5]) or x[3]:
            continue
        w = math.prod(lik[x[i]][y[i]] for i in (0, 1, 2, 4, 5))
        num[x[0]] += w
    ref = math.log(num[0] / num[1])
    assert post[0] == pytest.approx(ref, abs=1e-9)
    assert hard[0, 0] == (0 if ref > 0 else 1 if ref < 0 else TIE)


def test_early_stop_keeps_decisions():
    g = sample_graph(R36, 1000, seed=3)
    basis = null_space_basis(parity_matrix(g))
    rng = np.random.default_rng(4)
    x = encode(basis, rng.integers(0, 2, basis.size))
    y = ZChannel(0.12).sample(x, rng)
    a = bp_decode(g, ZChannel(0.12), y, 30)
    b = bp_decode(g, ZChannel(0.12), y, 30, early_stop=False)
    np.testing.assert_array_equal(a[-1], x)
    np.testing.assert_array_equal(a[-1], b[-1])


def test_sim_noiseless():
    r = run_sim(SimConfig(R36, 300, BSC(0.0), 5, 5, master_seed=1))
    assert r.ber == 0.0 and r.bler == 0.0 and r.bits_total == 1500


def test_sim_json_schema():
    r = run_sim(SimConfig(R36, 120, ZChannel(0.1), 3, 5))
    obj = json.loads(r.to_json())
    for key in ("config", "ber", "bler", "bit_errors", "block_errors", "wall_time"):
        assert key in obj
    assert obj["config"]["n"] == 120


def test_z_channel_asymmetry():
    r = run_sim(SimConfig(R36, 2000, ZChannel(0.26), 20, 20, master_seed=5))
    assert r.ber_given1 > r.ber_given0


def test_parallel_reproducible():
    cfg = dict(code=R36, n=600, channel=ZChannel(0.24), num_codewords=16, bp_iters=15, master_seed=9)
    a = run_sim(SimConfig(**cfg, workers=1))
    b = run_sim(SimConfig(**cfg, workers=2))
    assert a.bit_errors == b.bit_errors and a.block_errors == b.block_errors
    assert a.ber_per_iter == pytest.approx(b.ber_per_iter, abs=0)


def test_bad_config():
    with pytest.raises(ValueError):
        SimConfig(R36, 60, BSC(0.1), 0)
