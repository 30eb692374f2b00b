"""Small-scale audits of the ensemble assumptions behind codeword-averaged DE.

Two questions are answered empirically here:

* does the projection of a code onto a supporting tree hit every
  tree-satisfying string equally often (perfect projection), and
* how large is ``E[2^{m_r}]``, where ``m_r`` is the rank deficiency of a
  random parity-check matrix.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np

from asymde.ensemble import BipartiteGraph, DegreeDistribution, parity_matrix, sample_graph, sample_semiregular
from asymde.gf2 import GF2Matrix, enumerate_codewords, null_space_basis, rank


class NotAnEdge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SupportTree:
    """Nodes whose message dependence reaches edge (i, j) within ``l`` iterations.

    Variable and check ids are 0-based. ``constraints`` has one row per member
    check, restricted to member variables under the odd-edge rule.
    """

    i: int
    j: int
    l: int
    variables: np.ndarray
    checks: np.ndarray
    constraints: np.ndarray  # (len(checks), len(variables)) uint8
    cycle_free: bool

    def satisfying_strings(self) -> np.ndarray:
        """All 0/1 strings on ``variables`` meeting the local constraints."""
        if self.checks.size == 0:
            k = self.variables.size
            return ((np.arange(1 << k)[:, None] >> np.arange(k)) & 1).astype(np.uint8)
        return enumerate_codewords(GF2Matrix.from_dense(self.constraints), cap=1 << 24)

    def local_dimension(self) -> int:
        if self.checks.size == 0:
            return int(self.variables.size)
        return int(self.variables.size - rank(GF2Matrix.from_dense(self.constraints)))


def _bfs(adj: list[list[int]], src: int) -> np.ndarray:
    dist = np.full(len(adj), -1, np.int64)
    dist[src] = 0
    q = deque([src])
    while q:
        u = q.popleft()
        for w in adj[u]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                q.append(w)
    return dist


def _adjacency(g: BipartiteGraph) -> list[list[int]]:
    """Simple-graph adjacency; checks are numbered after the variables."""
    adj: list[set] = [set() for _ in range(g.n + g.m)]
    for v, c in zip(g.edge_var.tolist(), g.edge_chk.tolist()):
        adj[v].add(g.n + c)
        adj[g.n + c].add(v)
    return [sorted(s) for s in adj]


def _unrolls_cleanly(g: BipartiteGraph, i: int, j: int, depth: int, member: np.ndarray) -> bool:
    """Expand the computation tree of edge (i, j) to ``depth`` and look for repeats.

    Fails on a second edge between i and j, on any node reached twice, and
    on any node that is not strictly farther from j than from i (a cycle
    closing through j).
    """
    ev, ec = g.edge_var, g.edge_chk
    if int(np.sum((ev == i) & (ec == j))) != 1:
        return False
    seen = {i}
    frontier = [(i, -1)]  # (node id, edge id used to reach it)
    for _ in range(depth):
        nxt = []
        for u, via in frontier:
            if u < g.n:
                es = np.flatnonzero(ev == u)
                ends = g.n + ec[es]
            else:
                es = np.flatnonzero(ec == u - g.n)
                ends = ev[es]
            for e, w in zip(es.tolist(), ends.tolist()):
                if e == via or (u == i and w == g.n + j):
                    continue
                if w in seen or not member[w]:
                    return False
                seen.add(w)
                nxt.append((w, e))
        frontier = nxt
    return True


def build_support_tree(g: BipartiteGraph, i: int, j: int, l: int) -> SupportTree:
    """Nodes v with ``d(v,i) = d(v,j) - 1`` and ``d(v,i) <= 2(l-1)``.

    Only checks whose whole neighbourhood lies in the tree contribute a
    constraint; on a cycle-free neighbourhood that is every member check.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    if not g.has_edge(i, j):
        raise NotAnEdge(f"variable {i} and check {j} are not adjacent")
    adj = _adjacency(g)
    di = _bfs(adj, i)
    dj = _bfs(adj, g.n + j)
    member = (di >= 0) & (di == dj - 1) & (di <= 2 * (l - 1))
    nodes = np.flatnonzero(member)
    variables = nodes[nodes < g.n]
    checks = nodes[nodes >= g.n] - g.n
    closed = np.array([bool(np.all(member[g.chk_neighbors(int(c))])) for c in checks], dtype=bool)
    checks = checks[closed] if checks.size else checks

    vpos = {int(v): t for t, v in enumerate(variables)}
    cons = np.zeros((checks.size, variables.size), np.uint8)
    for t, c in enumerate(checks.tolist()):
        for v, k in Counter(g.chk_neighbors(c).tolist()).items():
            cons[t, vpos[v]] = k & 1
    cycle_free = _unrolls_cleanly(g, i, j, 2 * (l - 1), member)
    return SupportTree(i, j, l, variables, checks, cons, cycle_free)


@dataclass
class ProjectionAudit:
    is_perfect: bool
    projection_histogram: dict
    subset_of_tree_strings: bool
    uniform_on_support: bool
    num_codewords: int
    num_tree_strings: int


def _key(bits) -> str:
    return "".join(str(int(b)) for b in bits)


def perfect_projection_audit(A: GF2Matrix, tree: SupportTree, cap: int = 1 << 20) -> ProjectionAudit:
    """Enumerate the code, project onto the tree variables and compare with uniform."""
    words = enumerate_codewords(A, cap)
    proj = words[:, tree.variables]
    hist = Counter(_key(r) for r in proj)
    allowed = {_key(r) for r in tree.satisfying_strings()}
    subset = set(hist) <= allowed
    uniform = len(set(hist.values())) == 1
    perfect = subset and set(hist) == allowed and uniform
    return ProjectionAudit(perfect, dict(sorted(hist.items())), subset, uniform, len(words), len(allowed))


def projection_is_perfect(A: GF2Matrix, tree: SupportTree) -> bool:
    """Rank form of the audit, usable when the code is too large to enumerate.

    The projection of a linear code is a linear map, so every string in its
    image is hit equally often. It is perfect exactly when the image has the
    dimension of the space of tree-satisfying strings.
    """
    basis = null_space_basis(A).to_dense()
    if basis.shape[0] == 0:
        img = 0
    else:
        img = rank(GF2Matrix.from_dense(basis[:, tree.variables]))
    return img == tree.local_dimension()


@dataclass
class ProjectionFrequency:
    n: int
    trials: int
    perfect: int
    cycle_free: int

    @property
    def frequency(self) -> float:
        return self.perfect / self.trials


def perfect_projection_frequency(d: DegreeDistribution, n_list, l: int, trials: int, seed: int) -> list[ProjectionFrequency]:
    """Fraction of (graph, random edge) draws whose supporting tree projects perfectly."""
    out = []
    for n in n_list:
        perfect = cf = 0
        for t in range(trials):
            rng = np.random.default_rng([seed, n, t])
            g = sample_graph(d, n, seed=[seed, n, t, 0])
            e = int(rng.integers(g.num_edges))
            tree = build_support_tree(g, int(g.edge_var[e]), int(g.edge_chk[e]), l)
            cf += tree.cycle_free
            perfect += projection_is_perfect(parity_matrix(g), tree)
        out.append(ProjectionFrequency(n, trials, perfect, cf))
    return out


@dataclass
class E2mrEstimate:
    n: int
    mean: float
    stderr: float
    trials: int
    mr_counts: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.mean / self.n


def rank_deficiency(A: GF2Matrix) -> int:
    return A.rows - rank(A)


def estimate_E2mr(dv: int, dc: int, n_list, m_prime: int = 0, trials: int = 2000, seed: int = 0,
                  sampler=None) -> list[E2mrEstimate]:
    """Monte Carlo mean of ``2^(m - rank A)`` over the semi-regular ensemble."""
    if trials < 100:
        raise ValueError("trials must be >= 100")
    out = []
    for n in n_list:
        vals = np.empty(trials)
        hist: Counter = Counter()
        for t in range(trials):
            if sampler is not None:
                A = sampler(n, t)
            else:
                A = parity_matrix(sample_semiregular(dv, dc, n, m_prime, seed=[seed, n, t]))
            mr = rank_deficiency(A)
            hist[mr] += 1
            vals[t] = 2.0 ** mr
        out.append(E2mrEstimate(n, float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(trials)), trials,
                                dict(sorted(hist.items()))))
    return out


def appendix_bound(dv: int) -> float:
    """Asymptotic bound ``sqrt(dv) * e^(1/6)`` on ``E[2^{m_r}] / n``."""
    return math.sqrt(dv) * math.exp(1.0 / 6.0)
