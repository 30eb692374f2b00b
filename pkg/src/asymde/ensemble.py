"""Degree distributions and socket-permutation graph sampling.

Degree maps are keyed by node degree ``k`` and hold the edge fraction
``lambda_k`` (coefficient of ``x^(k-1)``), the usual edge-perspective
convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from asymde.gf2 import GF2Matrix, pack_bits

SUM_TOL = 1e-9
FILE_SUM_TOL = 1e-6


class InfeasibleDegrees(ValueError):
    """No integral node-degree assignment realizes the requested ensemble."""


def _clean(coeffs: dict) -> dict[int, float]:
    out = {}
    for k, v in coeffs.items():
        k, v = int(k), float(v)
        if v != 0.0:
            out[k] = out.get(k, 0.0) + v
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class DegreeDistribution:
    lam: dict
    rho: dict
    name: str = field(default="", compare=False)
    allow_degree_one: bool = field(default=False, compare=False)

    def __post_init__(self):
        lam, rho = _clean(self.lam), _clean(self.rho)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "rho", rho)
        for side, coeffs in (("lambda", lam), ("rho", rho)):
            if not coeffs:
                raise ValueError(f"{side} is empty")
            bad = [v for v in coeffs.values() if not 0.0 <= v <= 1.0]
            if bad:
                raise ValueError(f"{side} has fractions outside [0,1]: {bad}")
            s = sum(coeffs.values())
            if abs(s - 1.0) > SUM_TOL:
                raise ValueError(f"{side} fractions sum to {s!r}, not 1")
        if min(lam) < 1 or (min(lam) < 2 and not self.allow_degree_one):
            raise ValueError(f"variable degree {min(lam)} not allowed")
        if min(rho) < 2:
            raise ValueError(f"check degree {min(rho)} not allowed")

    # constructors ---------------------------------------------------------
    @classmethod
    def regular(cls, dv: int, dc: int) -> "DegreeDistribution":
        return cls({dv: 1.0}, {dc: 1.0}, name=f"({dv},{dc})")

    @classmethod
    def normalized(cls, lam: dict, rho: dict, **kw) -> "DegreeDistribution":
        """Rescale both maps to sum to one (for coefficient lists printed to a few digits)."""
        lam, rho = _clean(lam), _clean(rho)
        sl, sr = sum(lam.values()), sum(rho.values())
        return cls({k: v / sl for k, v in lam.items()}, {k: v / sr for k, v in rho.items()}, **kw)

    # polynomials ----------------------------------------------------------
    def lam_poly(self, x):
        return sum(c * np.power(x, k - 1) for k, c in self.lam.items())

    def rho_poly(self, x):
        return sum(c * np.power(x, k - 1) for k, c in self.rho.items())

    @property
    def lambda2(self) -> float:
        return self.lam.get(2, 0.0)

    @property
    def rho_prime_1(self) -> float:
        return sum(c * (k - 1) for k, c in self.rho.items())

    @property
    def int_lambda(self) -> float:
        return sum(c / k for k, c in self.lam.items())

    @property
    def int_rho(self) -> float:
        return sum(c / k for k, c in self.rho.items())

    @property
    def design_rate(self) -> float:
        return 1.0 - self.int_rho / self.int_lambda

    @property
    def max_dv(self) -> int:
        return max(self.lam)

    @property
    def max_dc(self) -> int:
        return max(self.rho)

    def stability_bound(self) -> float:
        """``1 / (lambda2 * rho'(1))``; ``inf`` when there are no degree-2 variables."""
        p = self.lambda2 * self.rho_prime_1
        return math.inf if p == 0 else 1.0 / p

    def with_check_shift(self, delta: int) -> "DegreeDistribution":
        """Multiply rho by ``x**delta`` (every check degree grows by ``delta``)."""
        return DegreeDistribution(self.lam, {k + delta: c for k, c in self.rho.items()},
                                  name=f"{self.name}+{delta}" if self.name else "",
                                  allow_degree_one=self.allow_degree_one)

    def __str__(self):
        return self.name or format_degree_file(self).replace("\n", "; ").strip("; ")


def derived_scalars(d: DegreeDistribution) -> dict:
    return {
        "lambda2": d.lambda2,
        "rho_prime_1": d.rho_prime_1,
        "int_lambda": d.int_lambda,
        "int_rho": d.int_rho,
        "design_rate": d.design_rate,
    }


def exact_design_rate(d: DegreeDistribution) -> Fraction:
    """Design rate in rational arithmetic on the decimal coefficients."""
    il = sum(Fraction(repr(c)) / k for k, c in d.lam.items())
    ir = sum(Fraction(repr(c)) / k for k, c in d.rho.items())
    return 1 - ir / il


# ---------------------------------------------------------------------------
# degree files


def parse_degree_text(text: str, name: str = "") -> DegreeDistribution:
    """Parse ``lambda k frac`` / ``rho k frac`` lines; ``#`` starts a comment.

    Sums must be within 1e-6 of one; they are then renormalized exactly.
    """
    lam: dict[int, float] = {}
    rho: dict[int, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] not in ("lambda", "rho"):
            raise ValueError(f"line {lineno}: expected 'lambda|rho <degree> <fraction>', got {raw!r}")
        try:
            k, v = int(parts[1]), float(parts[2])
        except ValueError:
            raise ValueError(f"line {lineno}: bad number in {raw!r}") from None
        if k < 1 or not 0.0 <= v <= 1.0:
            raise ValueError(f"line {lineno}: degree must be >= 1 and fraction in [0,1]")
        side = lam if parts[0] == "lambda" else rho
        side[k] = side.get(k, 0.0) + v
    for side, coeffs in (("lambda", lam), ("rho", rho)):
        if not coeffs:
            raise ValueError(f"no {side} terms")
        s = math.fsum(coeffs.values())
        # small slack for the decimal representation of the printed digits
        if abs(s - 1.0) > FILE_SUM_TOL + 1e-12:
            raise ValueError(f"{side} fractions sum to {s:.9g}; must be 1 within {FILE_SUM_TOL:g}")
    return DegreeDistribution.normalized(lam, rho, name=name)


def load_degree_file(path) -> DegreeDistribution:
    path = Path(path)
    return parse_degree_text(path.read_text(), name=path.stem)


def format_degree_file(d: DegreeDistribution) -> str:
    lines = [f"lambda {k} {v:.12g}" for k, v in d.lam.items()]
    lines += [f"rho {k} {v:.12g}" for k, v in d.rho.items()]
    return "\n".join(lines) + "\n"


BUILTIN_CODES = ("36", "48", "34", "12A", "12B", "12C")


def builtin_code(name: str) -> DegreeDistribution:
    """Degree distributions shipped with the package (see ``asymde/data``)."""
    fname = f"{name}.deg"
    ref = resources.files("asymde.data").joinpath(fname)
    if not ref.is_file():
        raise KeyError(f"unknown builtin code {name!r}; have {', '.join(BUILTIN_CODES)}")
    return parse_degree_text(ref.read_text(), name=name)


def resolve_code(spec: str) -> DegreeDistribution:
    """A path to a degree file, a builtin name, or ``dv,dc`` for a regular code."""
    p = Path(spec)
    if p.is_file():
        return load_degree_file(p)
    stem = p.name.removesuffix(".deg")
    if stem in BUILTIN_CODES:
        return builtin_code(stem)
    if "," in spec:
        try:
            dv, dc = (int(t) for t in spec.split(","))
        except ValueError:
            pass
        else:
            return DegreeDistribution.regular(dv, dc)
    raise FileNotFoundError(f"no degree file or builtin code named {spec!r}")


# ---------------------------------------------------------------------------
# graphs


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """Socket-level multigraph.

    Variable sockets are numbered node by node; edge ``e`` joins variable
    socket ``e`` to check socket ``perm[e]``.
    """

    var_degrees: np.ndarray
    chk_degrees: np.ndarray
    perm: np.ndarray
    seed: object = None

    def __post_init__(self):
        vd = np.asarray(self.var_degrees, dtype=np.int64)
        cd = np.asarray(self.chk_degrees, dtype=np.int64)
        perm = np.asarray(self.perm, dtype=np.int64)
        if vd.sum() != cd.sum():
            raise ValueError(f"socket counts differ: {vd.sum()} variable vs {cd.sum()} check")
        if perm.shape != (vd.sum(),) or not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ValueError("perm is not a bijection on sockets")
        for a, nm in ((vd, "var_degrees"), (cd, "chk_degrees"), (perm, "perm")):
            a.setflags(write=False)
            object.__setattr__(self, nm, a)
        ev = np.repeat(np.arange(vd.size), vd)
        ec = np.repeat(np.arange(cd.size), cd)[perm]
        ev.setflags(write=False)
        ec.setflags(write=False)
        object.__setattr__(self, "edge_var", ev)
        object.__setattr__(self, "edge_chk", ec)

    @classmethod
    def from_edges(cls, n: int, m: int, edges, seed=None) -> "BipartiteGraph":
        """Build from an ordered list of ``(variable, check)`` pairs (0-based)."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        order = np.argsort(edges[:, 0], kind="stable")
        edges = edges[order]
        vd = np.bincount(edges[:, 0], minlength=n)
        cd = np.bincount(edges[:, 1], minlength=m)
        # check sockets handed out in order of appearance
        start = np.concatenate([[0], np.cumsum(cd)[:-1]])
        fill = np.zeros(m, np.int64)
        perm = np.empty(len(edges), np.int64)
        for e, c in enumerate(edges[:, 1]):
            perm[e] = start[c] + fill[c]
            fill[c] += 1
        return cls(vd, cd, perm, seed)

    @property
    def n(self) -> int:
        return int(self.var_degrees.size)

    @property
    def m(self) -> int:
        return int(self.chk_degrees.size)

    @property
    def num_edges(self) -> int:
        return int(self.perm.size)

    def edges(self) -> np.ndarray:
        return np.stack([self.edge_var, self.edge_chk], axis=1)

    def var_neighbors(self, i: int) -> np.ndarray:
        return self.edge_chk[self.edge_var == i]

    def chk_neighbors(self, j: int) -> np.ndarray:
        return self.edge_var[self.edge_chk == j]

    def has_edge(self, i: int, j: int) -> bool:
        return bool(np.any((self.edge_var == i) & (self.edge_chk == j)))


def _largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    ideal = w / w.sum() * total
    base = np.floor(ideal).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        # ties broken by position so the result is deterministic
        order = np.lexsort((np.arange(w.size), -(ideal - base)))
        base[order[:short]] += 1
    return base


def _fill_residual(degrees: list[int], residual: int, available) -> list[int] | None:
    """Fewest node additions/removals whose degrees net to ``residual``.

    Breadth-first search over socket totals with moves ``+k`` (add a check of
    degree k) and ``-k`` (drop one). Returns the signed count change per
    degree, or None when no combination exists within the available nodes.
    """
    if residual == 0:
        return [0] * len(degrees)
    if residual % math.gcd(*degrees):
        return None
    span = abs(residual) + max(degrees) ** 2
    prev = {0: None}
    frontier = [0]
    while frontier and residual not in prev:
        nxt = []
        for s in frontier:
            for t, k in enumerate(degrees):
                for sign in ((1, -1) if available[t] > 0 else (1,)):
                    u = s + sign * k
                    if abs(u) <= span and u not in prev:
                        prev[u] = (s, t, sign)
                        nxt.append(u)
        frontier = nxt
    if residual not in prev:
        return None
    change = [0] * len(degrees)
    u = residual
    while prev[u] is not None:
        s, t, sign = prev[u]
        change[t] += sign
        u = s
    if any(c < 0 and -c > a for c, a in zip(change, available)):
        return None
    return change


def node_degrees(d: DegreeDistribution, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Integral variable and check degree sequences for blocklength ``n``.

    Variable counts come from largest-remainder rounding of the node-perspective
    fractions. Check counts are floored and the leftover sockets are covered by
    the fewest check additions or removals over the degrees present.
    """
    if n < max(d.max_dv, 1):
        raise InfeasibleDegrees(f"n={n} is below the maximum variable degree {d.max_dv}")
    vdeg = np.array(list(d.lam), dtype=np.int64)
    vcount = _largest_remainder(np.array([d.lam[k] / k for k in d.lam]), n)
    E = int(np.dot(vdeg, vcount))
    cdeg = list(d.rho)
    ideal = np.array([E * d.rho[k] / k for k in cdeg])
    ccount = np.floor(ideal + 1e-9).astype(np.int64)
    residual = E - int(np.dot(cdeg, ccount))
    extra = _fill_residual(cdeg, residual, ccount)
    if extra is None:
        raise InfeasibleDegrees(f"{E} sockets cannot be covered by check degrees {cdeg}")
    ccount = ccount + np.array(extra, dtype=np.int64)
    return np.repeat(vdeg, vcount), np.repeat(np.array(cdeg, dtype=np.int64), ccount)


def sample_from_degrees(var_degrees, chk_degrees, seed) -> BipartiteGraph:
    var_degrees = np.asarray(var_degrees, dtype=np.int64)
    chk_degrees = np.asarray(chk_degrees, dtype=np.int64)
    E = int(var_degrees.sum())
    if E != int(chk_degrees.sum()):
        raise InfeasibleDegrees("variable and check socket counts differ")
    rng = np.random.default_rng(seed)
    return BipartiteGraph(var_degrees, chk_degrees, rng.permutation(E), seed)


def sample_graph(d: DegreeDistribution, n: int, seed) -> BipartiteGraph:
    vd, cd = node_degrees(d, n)
    return sample_from_degrees(vd, cd, seed)


def sample_semiregular(dv: int, dc: int, n: int, m_prime: int, seed) -> BipartiteGraph:
    """``m_prime`` checks of degree ``dc-1`` and the rest of degree ``dc``."""
    rest = n * dv - m_prime * (dc - 1)
    if rest < 0 or rest % dc:
        raise InfeasibleDegrees(f"n*dv - m'(dc-1) = {rest} is not a nonnegative multiple of {dc}")
    cd = np.array([dc - 1] * m_prime + [dc] * (rest // dc), dtype=np.int64)
    return sample_from_degrees(np.full(n, dv, np.int64), cd, seed)


def parity_matrix(g: BipartiteGraph) -> GF2Matrix:
    """Check j and variable i are connected in A iff they share an odd number of edges."""
    key = g.edge_chk * g.n + g.edge_var
    uniq, counts = np.unique(key, return_counts=True)
    odd = uniq[counts % 2 == 1]
    dense = np.zeros((g.m, g.n), np.uint8)
    dense[odd // g.n, odd % g.n] = 1
    return GF2Matrix(g.m, g.n, pack_bits(dense))
