"""Quantized LLR densities and the operators density evolution is built from.

Densities live on a symmetric uniform lattice ``{k * step : |k| <= bins/2}``
plus two explicit atoms at -inf and +inf. Masses may be signed: the
half-difference of a density pair is not a probability measure, and every
operator here is linear so that is harmless.

Two rounding rules are available for values that fall between lattice points.
``GridSpec.rounding`` governs the operators (check-node outputs, out-of-range
sums); ``GridSpec.init_rounding`` governs the one-off quantization of channel
LLR laws.

``"nearest"`` (operator default)
    Round to the nearest lattice point, ties toward zero, and saturate into
    the end points.

``"pair"`` (channel default)
    Split the mass between the two neighbouring lattice points so that both
    the total mass and the moment ``E[exp(-m)]`` are preserved. Values above
    the top point are split between the top point and +inf under the same
    rule; values below the bottom point are clamped to it. With this rule a
    density pair satisfying ``p1(x) = exp(x) * p0(-x)`` keeps that property
    exactly, so with ``rounding="pair"`` as well ``CBP(0) == CBP(1)`` holds to
    machine precision on evolved pairs.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable

import numpy as np
from scipy import sparse

if TYPE_CHECKING:  # pragma: no cover
    from asymde.ensemble import DegreeDistribution

ROUNDING_RULES = ("pair", "nearest")


class GridMismatch(ValueError):
    """Operands of a density operator live on different grids."""


class ChernoffOverflow(ArithmeticError):
    """The -inf atom carries positive mass, so exp(-m/2) integrates to +inf."""


@dataclass(frozen=True)
class GridSpec:
    llr_min: float = -15.0
    llr_max: float = 15.0
    bins: int = 256
    rounding: str = "nearest"
    init_rounding: str = "pair"

    def __post_init__(self):
        if not (self.llr_min < 0 < self.llr_max):
            raise ValueError("grid must satisfy llr_min < 0 < llr_max")
        if self.bins < 8:
            raise ValueError("grid needs at least 8 bins")
        if self.bins % 2:
            raise ValueError("bins must be even so that 0 is a lattice point")
        if not math.isclose(self.llr_min, -self.llr_max, rel_tol=1e-12):
            raise ValueError("grid must be symmetric about 0 (llr_min == -llr_max)")
        for rule in (self.rounding, self.init_rounding):
            if rule not in ROUNDING_RULES:
                raise ValueError(f"unknown rounding rule {rule!r}")

    @classmethod
    def parse(cls, text: str, rounding: str = "nearest", init_rounding: str = "pair") -> "GridSpec":
        """Parse ``bins:min:max`` (e.g. ``256:-15:15``)."""
        try:
            bins, lo, hi = text.split(":")
            return cls(float(lo), float(hi), int(bins), rounding, init_rounding)
        except ValueError as exc:
            raise ValueError(f"bad grid spec {text!r}: expected bins:min:max ({exc})") from None

    @property
    def step(self) -> float:
        return (self.llr_max - self.llr_min) / self.bins

    @property
    def size(self) -> int:
        """Number of finite lattice points (``bins + 1``)."""
        return self.bins + 1

    @property
    def zero(self) -> int:
        """Index of the lattice point at LLR 0."""
        return self.bins // 2

    @property
    def points(self) -> np.ndarray:
        return _points(self)

    def __str__(self):
        return f"{self.bins}:{self.llr_min:g}:{self.llr_max:g}"


@functools.lru_cache(maxsize=None)
def _points(grid: GridSpec) -> np.ndarray:
    pts = (np.arange(grid.size) - grid.zero) * grid.step
    pts.setflags(write=False)
    return pts


def quantize(grid: GridSpec, values, weights, rule: str | None = None) -> tuple[np.ndarray, float, float]:
    """Distribute point masses ``weights`` located at ``values`` onto ``grid``.

    Returns ``(mass, neg_inf, pos_inf)``. Infinite values go to the atoms.
    ``rule`` defaults to the grid's operator rounding.
    """
    values = np.asarray(values, dtype=float).ravel()
    weights = np.broadcast_to(np.asarray(weights, dtype=float), values.shape).ravel()
    mass = np.zeros(grid.size)
    neg = float(weights[values == -np.inf].sum())
    pos = float(weights[values == np.inf].sum())
    fin = np.isfinite(values)
    v, w = values[fin], weights[fin]
    if v.size == 0:
        return mass, neg, pos
    idx, wts, to_pos = _split(grid, v, rule)
    np.add.at(mass, idx[0], w * wts[0])
    np.add.at(mass, idx[1], w * wts[1])
    pos += float(np.sum(w * to_pos))
    return mass, neg, pos


def _split(grid: GridSpec, v: np.ndarray, rule: str | None = None):
    """Rounding kernel shared by every operator.

    Returns index pairs, weight pairs and the fraction sent to +inf for each
    finite value in ``v``.
    """
    h = grid.step
    top = grid.bins
    if (rule or grid.rounding) == "nearest":
        s = v / h
        k = np.sign(s) * np.ceil(np.abs(s) - 0.5)
        k = np.clip(k, -grid.zero, grid.zero).astype(np.int64) + grid.zero
        return (k, k), (np.ones_like(v), np.zeros_like(v)), np.zeros_like(v)

    t = (v - grid.llr_min) / h
    lo = np.floor(t).astype(np.int64)
    lo = np.clip(lo, 0, top - 1)
    hi = lo + 1
    x_lo = grid.llr_min + lo * h
    # weight on the upper neighbour keeps mass and E[exp(-m)] fixed
    # out-of-range values are overwritten below; clamp so expm1 stays finite
    w_hi = np.expm1(-(np.clip(v, grid.llr_min, grid.llr_max) - x_lo)) / np.expm1(-h)
    w_hi = np.clip(w_hi, 0.0, 1.0)
    w_lo = 1.0 - w_hi
    to_pos = np.zeros_like(v)

    under = v <= grid.llr_min
    w_lo[under], w_hi[under] = 1.0, 0.0

    over = v >= grid.llr_max
    if np.any(over):
        keep = np.exp(grid.llr_max - v[over])
        lo[over], hi[over] = top, top
        w_lo[over], w_hi[over] = keep, 0.0
        to_pos[over] = 1.0 - keep
    return (lo, hi), (w_lo, w_hi), to_pos


@dataclass(frozen=True, eq=False)
class QuantizedDensity:
    """Signed measure on a :class:`GridSpec` lattice with atoms at +-inf."""

    grid: GridSpec
    mass: np.ndarray
    neg_inf: float = 0.0
    pos_inf: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if m.shape != (self.grid.size,):
            raise ValueError(f"mass has shape {m.shape}, grid needs ({self.grid.size},)")
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)
        object.__setattr__(self, "neg_inf", float(self.neg_inf))
        object.__setattr__(self, "pos_inf", float(self.pos_inf))

    # construction -------------------------------------------------------
    @classmethod
    def zeros(cls, grid: GridSpec) -> "QuantizedDensity":
        return cls(grid, np.zeros(grid.size))

    @classmethod
    def delta(cls, grid: GridSpec, value: float) -> "QuantizedDensity":
        """Point mass at ``value`` (rounded onto the grid if needed)."""
        return cls.from_points(grid, [value], [1.0])

    @classmethod
    def from_points(cls, grid: GridSpec, values, weights, rule: str | None = None) -> "QuantizedDensity":
        mass, neg, pos = quantize(grid, values, weights, rule)
        return cls(grid, mass, neg, pos)

    # linear structure ---------------------------------------------------
    def _check(self, other: "QuantizedDensity"):
        if self.grid != other.grid:
            raise GridMismatch(f"{self.grid} vs {other.grid}")

    def __add__(self, other: "QuantizedDensity") -> "QuantizedDensity":
        self._check(other)
        return QuantizedDensity(self.grid, self.mass + other.mass,
                                self.neg_inf + other.neg_inf, self.pos_inf + other.pos_inf)

    def __sub__(self, other: "QuantizedDensity") -> "QuantizedDensity":
        self._check(other)
        return QuantizedDensity(self.grid, self.mass - other.mass,
                                self.neg_inf - other.neg_inf, self.pos_inf - other.pos_inf)

    def __mul__(self, c: float) -> "QuantizedDensity":
        return QuantizedDensity(self.grid, self.mass * c, self.neg_inf * c, self.pos_inf * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    # summaries ----------------------------------------------------------
    @property
    def finite_mass(self) -> float:
        return float(self.mass.sum())

    def total(self) -> float:
        return self.finite_mass + self.neg_inf + self.pos_inf

    def is_zero(self) -> bool:
        return self.neg_inf == 0.0 and self.pos_inf == 0.0 and not self.mass.any()

    def mass_below_zero(self) -> float:
        """Mass on m < 0, with the atom at m = 0 counted half."""
        z = self.grid.zero
        return float(self.mass[:z].sum() + 0.5 * self.mass[z] + self.neg_inf)

    def expect(self, fn) -> float:
        """Integral of ``fn`` over the finite part (atoms excluded)."""
        return float(np.dot(fn(self.grid.points), self.mass))

    def allclose(self, other: "QuantizedDensity", atol: float = 1e-12) -> bool:
        self._check(other)
        return (np.allclose(self.mass, other.mass, rtol=0, atol=atol)
                and abs(self.neg_inf - other.neg_inf) <= atol
                and abs(self.pos_inf - other.pos_inf) <= atol)

    def equals(self, other: "QuantizedDensity") -> bool:
        """Bit-exact equality."""
        return (self.grid == other.grid and np.array_equal(self.mass, other.mass)
                and self.neg_inf == other.neg_inf and self.pos_inf == other.pos_inf)

    def total_variation(self, other: "QuantizedDensity") -> float:
        self._check(other)
        return 0.5 * float(np.abs(self.mass - other.mass).sum()
                           + abs(self.neg_inf - other.neg_inf)
                           + abs(self.pos_inf - other.pos_inf))

    def to_csv(self, path_or_file) -> None:
        """Dump ``(llr, mass)`` rows; atoms are written as ``-inf``/``inf``."""
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(["llr", "mass"])
            w.writerow(["-inf", repr(self.neg_inf)])
            for x, m in zip(self.grid.points, self.mass):
                w.writerow([repr(float(x)), repr(float(m))])
            w.writerow(["inf", repr(self.pos_inf)])
        finally:
            if own:
                fh.close()


@dataclass(frozen=True)
class DensityPair:
    """Conditional message laws given bit 0 and bit 1, aligned parity.

    ``p1`` stores the law of ``-m`` given that bit 1 was sent, so both members
    put their "correct" mass on the positive axis.
    """

    p0: QuantizedDensity
    p1: QuantizedDensity
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.p0.grid != self.p1.grid:
            raise GridMismatch("pair members on different grids")

    @property
    def grid(self) -> GridSpec:
        return self.p0.grid

    def average(self) -> QuantizedDensity:
        return 0.5 * (self.p0 + self.p1)

    def is_symmetric(self, atol: float = 0.0) -> bool:
        return self.p0.allclose(self.p1, atol) if atol else self.p0.equals(self.p1)


# ---------------------------------------------------------------------------
# operators


def reflect(p: QuantizedDensity) -> QuantizedDensity:
    """Law of ``-m``."""
    return QuantizedDensity(p.grid, p.mass[::-1].copy(), p.pos_inf, p.neg_inf)


def convolve(p: QuantizedDensity, q: QuantizedDensity) -> QuantizedDensity:
    """Law of ``m_p + m_q`` (variable-node update), out-of-range sums saturated.

    ``inf + finite = inf``; ``(-inf) + (+inf)`` lands on the 0 point.
    """
    p._check(q)
    g = p.grid
    n, z = g.size, g.zero
    full = np.convolve(p.mass, q.mass)
    mass = full[z:z + n].copy()
    mass[0] += full[:z].sum()
    pos = 0.0
    over = full[z + n:]
    if over.size:
        if g.rounding == "pair":
            v = (np.arange(z + n, 2 * n - 1) - 2 * z) * g.step
            keep = np.exp(g.llr_max - v)
            mass[-1] += float(np.dot(over, keep))
            pos += float(np.dot(over, 1.0 - keep))
        else:
            mass[-1] += over.sum()
    pf, qf = p.finite_mass, q.finite_mass
    pos += p.pos_inf * (qf + q.pos_inf) + q.pos_inf * pf
    neg = p.neg_inf * (qf + q.neg_inf) + q.neg_inf * pf
    mass[z] += p.pos_inf * q.neg_inf + p.neg_inf * q.pos_inf
    return QuantizedDensity(g, mass, neg, pos)


def boxplus(a, b):
    """Exact scalar check-node map ``2 atanh(tanh(a/2) tanh(b/2))``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        r = np.logaddexp(0.0, a + b) - np.logaddexp(a, b)
        # infinities: +inf is the identity, -inf negates, 0 annihilates
        r = np.where(np.isinf(a) & ~np.isinf(b), np.sign(a) * b, r)
        r = np.where(np.isinf(b) & ~np.isinf(a), np.sign(b) * a, r)
        r = np.where(np.isinf(a) & np.isinf(b), np.sign(a) * np.sign(b) * np.inf, r)
        r = np.where((a == 0) | (b == 0), 0.0, r)
    return r if r.ndim else float(r)


@functools.lru_cache(maxsize=8)
def _check_table(grid: GridSpec) -> sparse.csr_matrix:
    """Sparse map from the flattened outer product of two finite mass vectors
    to the quantized law of ``boxplus(a, b)``."""
    x = grid.points
    n = grid.size
    r = boxplus(x[:, None], x[None, :]).ravel()
    (lo, hi), (w_lo, w_hi), _ = _split(grid, r)
    cols = np.arange(n * n)
    rows = np.concatenate([lo, hi])
    data = np.concatenate([w_lo, w_hi])
    mat = sparse.csr_matrix((data, (rows, np.concatenate([cols, cols]))), shape=(n, n * n))
    mat.sum_duplicates()
    return mat


def check_combine(p: QuantizedDensity, q: QuantizedDensity) -> QuantizedDensity:
    """Bilinear check-node combination of two (possibly signed) densities."""
    p._check(q)
    g = p.grid
    table = _check_table(g)
    mass = table @ np.outer(p.mass, q.mass).ravel()
    # +inf acts as identity, -inf as reflection
    mass += p.pos_inf * q.mass + p.neg_inf * q.mass[::-1]
    mass += q.pos_inf * p.mass + q.neg_inf * p.mass[::-1]
    pos = p.pos_inf * q.pos_inf + p.neg_inf * q.neg_inf
    neg = p.pos_inf * q.neg_inf + p.neg_inf * q.pos_inf
    return QuantizedDensity(g, mass, neg, pos)


def _identity_for(grid: GridSpec, op) -> QuantizedDensity:
    if op is convolve:
        return QuantizedDensity.delta(grid, 0.0)
    return QuantizedDensity(grid, np.zeros(grid.size), 0.0, 1.0)


def _poly_apply(coeffs: dict, d: QuantizedDensity, op) -> QuantizedDensity:
    """``sum_k c_k d^{op (k-1)}`` with powers computed once each."""
    out = QuantizedDensity.zeros(d.grid)
    if d.is_zero():
        # 0 is absorbing for both operators except at power 0
        c = coeffs.get(1, 0.0)
        return out + c * _identity_for(d.grid, op) if c else out
    power = _identity_for(d.grid, op)
    for k in range(1, max(coeffs) + 1):
        if k > 1:
            power = d if k == 2 else op(power, d)
        c = coeffs.get(k, 0.0)
        if c:
            out = out + c * power
    return out


def lambda_apply(dist: "DegreeDistribution", q: QuantizedDensity) -> QuantizedDensity:
    """Variable-side polynomial ``sum_k lambda_k q^{(x)(k-1)}``."""
    return _poly_apply(dist.lam, q, convolve)


def rho_apply(dist: "DegreeDistribution", s: QuantizedDensity) -> QuantizedDensity:
    """Check-side polynomial ``sum_k rho_k s^{[+](k-1)}``."""
    return _poly_apply(dist.rho, s, check_combine)


def rho_apply_pair(dist: "DegreeDistribution", pair: DensityPair) -> DensityPair:
    """Check-node half of the codeword-averaged update.

    Works on the half-sum and half-difference of the pair, applies the check
    polynomial to each and recombines with a sign depending on the bit.
    """
    plus = 0.5 * (pair.p0 + pair.p1)
    minus = 0.5 * (pair.p0 - pair.p1)
    a = rho_apply(dist, plus)
    b = rho_apply(dist, minus)
    return DensityPair(a + b, a - b)


def error_prob(pair: DensityPair) -> float:
    """Codeword-averaged probability that a message has the wrong sign."""
    return 0.5 * (pair.p0.mass_below_zero() + pair.p1.mass_below_zero())


def chernoff_single(p: QuantizedDensity) -> float:
    if p.neg_inf > 0:
        raise ChernoffOverflow("positive mass at -inf")
    return p.expect(lambda x: np.exp(-0.5 * x))


def chernoff(pair: DensityPair) -> float:
    """Averaged Chernoff (Bhattacharyya) functional of an aligned pair."""
    return 0.5 * (chernoff_single(pair.p0) + chernoff_single(pair.p1))


def symmetric_pair_defect(pair: DensityPair, funcs: Iterable = ()) -> float:
    """Largest violation of ``int h dP0 = int exp(-m) h(-m) dP1`` over test functions.

    With no functions given, uses bin indicators plus ``exp(-m/2)``.
    """
    x = pair.grid.points
    p0, p1 = pair.p0.mass, pair.p1.mass
    # bin indicators: p0(x) vs exp(x) * p1(-x), scaled back by exp(-max(x,0))
    rhs = np.exp(x) * p1[::-1]
    worst = float(np.max(np.abs(p0 - rhs) * np.exp(-np.maximum(x, 0.0))))
    funcs = list(funcs) or [lambda m: np.exp(-0.5 * m)]
    for h in funcs:
        lhs = float(np.dot(h(x), p0))
        r = float(np.dot(np.exp(-x) * h(-x), p1))
        worst = max(worst, abs(lhs - r))
    return worst
