"""Finite-length Monte Carlo with sum-product belief propagation.

One graph is drawn per configuration and reused for every codeword. Each
trial draws its own generator from ``(master_seed, trial)``, so results do
not depend on how trials are split across workers.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from asymde.channels import ChannelModel
from asymde.ensemble import BipartiteGraph, DegreeDistribution, parity_matrix, sample_graph
from asymde.gf2 import GF2Basis, null_space_basis, pack_bits, unpack_bits

LLR_CLAMP = 30.0
TANH_CLAMP = 1.0 - 1e-12
TIE = 2  # hard-decision code for an exactly zero posterior LLR

_GRAPH_STREAM = 0
_TRIAL_STREAM = 1


class LengthMismatch(ValueError):
    pass


class EncoderFailure(RuntimeError):
    """The sampled parity-check matrix has full column rank (no nonzero codewords)."""


def encode(basis: GF2Basis, message) -> np.ndarray:
    """XOR of the basis rows selected by ``message``."""
    message = np.asarray(message, dtype=np.uint8).ravel()
    if message.size != basis.size:
        raise LengthMismatch(f"message has {message.size} bits, basis has {basis.size} rows")
    rows = basis.rows[message.astype(bool)]
    if rows.shape[0] == 0:
        return np.zeros(basis.cols, np.uint8)
    return unpack_bits(np.bitwise_xor.reduce(rows, axis=0), basis.cols)[0]


@dataclass(frozen=True, eq=False)
class _DecoderGraph:
    """Edge orderings the kernel needs, built once per graph."""

    edge_var: np.ndarray
    var_ptr: np.ndarray  # edges are already grouped by variable
    chk_order: np.ndarray
    chk_ptr: np.ndarray

    @classmethod
    def build(cls, g: BipartiteGraph) -> "_DecoderGraph":
        var_ptr = np.concatenate([[0], np.cumsum(g.var_degrees)]).astype(np.int64)
        chk_order = np.argsort(g.edge_chk, kind="stable").astype(np.int64)
        chk_ptr = np.concatenate([[0], np.cumsum(np.bincount(g.edge_chk, minlength=g.m))]).astype(np.int64)
        return cls(np.ascontiguousarray(g.edge_var), var_ptr, chk_order, chk_ptr)


_DG_CACHE: dict[int, _DecoderGraph] = {}


def _decoder_graph(g: BipartiteGraph) -> _DecoderGraph:
    dg = _DG_CACHE.get(id(g))
    if dg is None or dg.edge_var.size != g.num_edges:
        dg = _DecoderGraph.build(g)
        _DG_CACHE.clear()
        _DG_CACHE[id(g)] = dg
    return dg


@numba.njit(cache=True)
def _satisfied(h, edge_var, chk_order, chk_ptr):
    """All checks even under ``h``; a tie never satisfies a check. Repeated edges cancel."""
    for c in range(chk_ptr.shape[0] - 1):
        par = 0
        for k in range(chk_ptr[c], chk_ptr[c + 1]):
            b = h[edge_var[chk_order[k]]]
            if b == 2:
                return False
            par ^= b
        if par:
            return False
    return True


@numba.njit(cache=True)
def _bp_kernel(m0, edge_var, var_ptr, chk_order, chk_ptr, iters, tclamp, stop):
    n = m0.shape[0]
    E = var_ptr[n]
    m = chk_ptr.shape[0] - 1
    c2v = np.zeros(E)
    v2c = np.empty(E)
    t = np.empty(E)
    hard = np.empty((iters, n), np.int8)
    post = np.empty(n)
    for it in range(iters):
        # variable nodes: extrinsic sums
        for v in range(n):
            s = m0[v]
            for e in range(var_ptr[v], var_ptr[v + 1]):
                s += c2v[e]
            for e in range(var_ptr[v], var_ptr[v + 1]):
                v2c[e] = s - c2v[e]
        # check nodes: tanh rule with prefix/suffix products (no division)
        for e in range(E):
            t[e] = math.tanh(0.5 * v2c[e])
        for c in range(m):
            a, b = chk_ptr[c], chk_ptr[c + 1]
            acc = 1.0
            for k in range(a, b):
                e = chk_order[k]
                c2v[e] = acc
                acc *= t[e]
            acc = 1.0
            for k in range(b - 1, a - 1, -1):
                e = chk_order[k]
                p = c2v[e] * acc
                acc *= t[e]
                if p > tclamp:
                    p = tclamp
                elif p < -tclamp:
                    p = -tclamp
                c2v[e] = 2.0 * math.atanh(p)
        for v in range(n):
            s = m0[v]
            for e in range(var_ptr[v], var_ptr[v + 1]):
                s += c2v[e]
            post[v] = s
            if s > 0:
                hard[it, v] = 0
            elif s < 0:
                hard[it, v] = 1
            else:
                hard[it, v] = 2
        if stop and _satisfied(hard[it], edge_var, chk_order, chk_ptr):
            # syndrome stop: report the codeword found for the remaining rows
            for k in range(it + 1, iters):
                hard[k, :] = hard[it, :]
            break
    return hard, post


def bp_decode(g: BipartiteGraph, ch: ChannelModel, y, iters: int = 40, *, return_llr: bool = False,
              early_stop: bool = True):
    """Flooding sum-product decoding.

    Returns an ``(iters, n)`` int8 array of hard decisions after each
    iteration (0, 1, or :data:`TIE`); with ``return_llr`` also the
    posterior LLRs of the last iteration run. With ``early_stop`` decoding
    halts once the hard decisions satisfy every check, and later rows repeat
    that decision.
    """
    y = np.asarray(y)
    if y.shape != (g.n,):
        raise LengthMismatch(f"received vector has shape {y.shape}, graph has n={g.n}")
    m0 = np.clip(np.asarray(ch.llr(y), dtype=float), -LLR_CLAMP, LLR_CLAMP)
    dg = _decoder_graph(g)
    hard, post = _bp_kernel(m0, dg.edge_var, dg.var_ptr, dg.chk_order, dg.chk_ptr, int(iters), TANH_CLAMP,
                            bool(early_stop))
    return (hard, post) if return_llr else hard


# ---------------------------------------------------------------------------
# simulation


@dataclass
class SimConfig:
    code: DegreeDistribution
    n: int
    channel: ChannelModel
    num_codewords: int
    bp_iters: int = 40
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.bp_iters < 1:
            raise ValueError("bp_iters must be >= 1")
        if self.num_codewords < 1:
            raise ValueError("num_codewords must be >= 1")

    def echo(self) -> dict:
        return {"code": str(self.code), "lambda": self.code.lam, "rho": self.code.rho, "n": self.n,
                "channel": self.channel.spec(), "num_codewords": self.num_codewords,
                "bp_iters": self.bp_iters, "master_seed": self.master_seed}


@dataclass
class SimResult:
    ber: float
    bler: float
    bit_errors: float
    block_errors: int
    bits_total: int
    ber_given0: float = math.nan
    ber_given1: float = math.nan
    ber_per_iter: list = field(default_factory=list)
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(type(o))


@dataclass
class _Tally:
    bit_err: float = 0.0
    blk_err: int = 0
    err0: float = 0.0
    err1: float = 0.0
    ones: int = 0
    bits: int = 0
    per_iter: np.ndarray = None

    def merge(self, o: "_Tally") -> "_Tally":
        pi = o.per_iter if self.per_iter is None else self.per_iter + o.per_iter
        return _Tally(self.bit_err + o.bit_err, self.blk_err + o.blk_err, self.err0 + o.err0,
                      self.err1 + o.err1, self.ones + o.ones, self.bits + o.bits, pi)


def _prepare(cfg: SimConfig):
    g = sample_graph(cfg.code, cfg.n, seed=[cfg.master_seed, _GRAPH_STREAM])
    basis = null_space_basis(parity_matrix(g))
    if basis.size == 0:
        raise EncoderFailure("parity-check matrix has a trivial null space")
    return g, basis


def _run_trials(cfg: SimConfig, g: BipartiteGraph, basis: GF2Basis, trials) -> _Tally:
    tally = _Tally(per_iter=np.zeros(cfg.bp_iters))
    for t in trials:
        rng = np.random.default_rng([cfg.master_seed, _TRIAL_STREAM, int(t)])
        msg = rng.integers(0, 2, basis.size, dtype=np.uint8)
        x = encode(basis, msg)
        y = cfg.channel.sample(x, rng)
        hard = bp_decode(g, cfg.channel, y, cfg.bp_iters)
        # half-error accounting for ties, per iteration
        wrong = (hard != x[None, :]) & (hard != TIE)
        ties = hard == TIE
        tally.per_iter += wrong.sum(axis=1) + 0.5 * ties.sum(axis=1)
        final = hard[-1].astype(np.int64)
        tie = final == TIE
        e_bits = (final != x) & ~tie
        tally.bit_err += e_bits.sum() + 0.5 * tie.sum()
        tally.err0 += (e_bits & (x == 0)).sum() + 0.5 * (tie & (x == 0)).sum()
        tally.err1 += (e_bits & (x == 1)).sum() + 0.5 * (tie & (x == 1)).sum()
        tally.ones += int(x.sum())
        tally.bits += x.size
        # random tie-break decides the block outcome
        final[tie] = rng.integers(0, 2, int(tie.sum()))
        tally.blk_err += int(np.any(final != x))
    return tally


_WORKER_STATE: dict = {}


def _worker_init(cfg: SimConfig):
    _WORKER_STATE["cfg"] = cfg
    _WORKER_STATE["gb"] = _prepare(cfg)


def _worker_run(trials) -> _Tally:
    cfg = _WORKER_STATE["cfg"]
    g, basis = _WORKER_STATE["gb"]
    return _run_trials(cfg, g, basis, trials)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("ASYMDE_THREADS", "1")))
    except ValueError:
        return 1


def run_sim(cfg: SimConfig) -> SimResult:
    t0 = time.perf_counter()
    trials = np.arange(cfg.num_codewords)
    workers = max(1, min(cfg.workers, cfg.num_codewords))
    if workers == 1:
        g, basis = _prepare(cfg)
        tally = _run_trials(cfg, g, basis, trials)
    else:
        chunks = np.array_split(trials, workers * 4)
        with ProcessPoolExecutor(workers, initializer=_worker_init, initargs=(cfg,)) as ex:
            parts = list(ex.map(_worker_run, chunks))
        tally = _Tally()
        for p in parts:  # fixed chunk order: sums are reproducible
            tally = tally.merge(p)
    bits = tally.bits
    zeros = bits - tally.ones
    return SimResult(
        ber=tally.bit_err / bits,
        bler=tally.blk_err / cfg.num_codewords,
        bit_errors=float(tally.bit_err),
        block_errors=int(tally.blk_err),
        bits_total=int(bits),
        ber_given0=tally.err0 / zeros if zeros else math.nan,
        ber_given1=tally.err1 / tally.ones if tally.ones else math.nan,
        ber_per_iter=[float(v) / bits for v in tally.per_iter],
        wall_time=time.perf_counter() - t0,
        config=cfg.echo(),
    )
