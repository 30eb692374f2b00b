"""Density-evolution drivers.

The linear-ensemble recursion tracks an aligned-parity pair of densities,
one per transmitted bit, averaged over codewords. The coset recursion tracks
a single density for the symmetrized channel. Convergence is declared when
the averaged Chernoff functional falls below the stability radius ``eps*``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from asymde.channels import ChannelFamily, ChannelModel
from asymde.density import (
    DensityPair,
    GridSpec,
    QuantizedDensity,
    chernoff,
    chernoff_single,
    convolve,
    error_prob,
    lambda_apply,
    rho_apply,
    rho_apply_pair,
)
from asymde.ensemble import DegreeDistribution

CONVERGED = "ConvergedToStability"
MAX_ITER = "MaxIterations"
HARD_FLOOR = 1e-10


class NoBracket(ValueError):
    """Both ends of the search interval give the same decodability verdict."""


@dataclass
class IterRecord:
    l: int
    p_e: float
    cbp: float


@dataclass
class DETrace:
    records: list = field(default_factory=list)
    verdict: str = MAX_ITER
    iterations_used: int = 0
    epsilon_star: float | None = None
    final: object = None  # last density (pair or single), for dumps

    @property
    def p_e(self) -> np.ndarray:
        return np.array([r.p_e for r in self.records])

    @property
    def cbp(self) -> np.ndarray:
        return np.array([r.cbp for r in self.records])

    @property
    def converged(self) -> bool:
        return self.verdict == CONVERGED

    def to_csv(self, fh) -> None:
        fh.write("l,p_e,cbp\n")
        for r in self.records:
            fh.write(f"{r.l},{r.p_e:.12g},{r.cbp:.12g}\n")


@dataclass(frozen=True)
class StabilityReport:
    r: float
    lambda2_rho1_r: float
    epsilon_star: float | None
    epsilon_star_lower_bound: float | None
    sufficient_ok: bool
    necessary_violated: bool
    trivially_stable: bool = False


# ---------------------------------------------------------------------------
# one iteration


def _renorm(p: QuantizedDensity) -> QuantizedDensity:
    # total mass T maps to about T**((dv-1)(dc-1)) per iteration, so rounding
    # drift away from 1 grows geometrically unless it is removed each time
    t = p.total()
    return p if t == 1.0 or t <= 0.0 else p * (1.0 / t)


def cw_avg_de_step(pair: DensityPair, init: DensityPair, d: DegreeDistribution) -> DensityPair:
    q = rho_apply_pair(d, pair)
    return DensityPair(_renorm(convolve(init.p0, lambda_apply(d, q.p0))),
                       _renorm(convolve(init.p1, lambda_apply(d, q.p1))))


def coset_de_step(P: QuantizedDensity, init_avg: QuantizedDensity, d: DegreeDistribution) -> QuantizedDensity:
    return _renorm(convolve(init_avg, lambda_apply(d, rho_apply(d, P))))


# ---------------------------------------------------------------------------
# stability


def stability(d: DegreeDistribution, r: float, tol: float = 1e-10) -> StabilityReport:
    """Stability radius of ``d`` on a channel with Bhattacharyya parameter ``r``.

    ``epsilon_star`` is the smallest root in (0, r] of ``r*lambda(rho'(1) e) = e``.
    """
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r={r} outside [0, 1]")
    rp = d.rho_prime_1
    l2 = d.lambda2
    prod = l2 * rp * r
    if r == 0.0:
        return StabilityReport(0.0, 0.0, None, None, True, False, trivially_stable=True)

    g = lambda e: r * d.lam_poly(rp * e) - e  # noqa: E731
    # g(0+) < 0 iff lambda2 rho' r < 1; scan for the first sign change above 0
    grid = np.linspace(0.0, r, 4097)[1:]
    vals = g(grid)
    eps_star = None
    idx = np.flatnonzero(vals >= 0)
    if idx.size and prod < 1.0:
        k = idx[0]
        lo = grid[k - 1] if k else 0.0
        hi = grid[k]
        if k == 0:
            # root below the first scan point: refine on (0, grid[0]]
            lo = grid[0] * 1e-12
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if g(mid) >= 0:
                hi = mid
            else:
                lo = mid
        eps_star = hi
    denom = d.lam_poly(rp) * r - prod
    lower = (1.0 - prod) / denom if denom > 0 else None
    return StabilityReport(
        r=r,
        lambda2_rho1_r=prod,
        epsilon_star=eps_star,
        epsilon_star_lower_bound=lower,
        sufficient_ok=prod < 1.0,
        necessary_violated=prod > 1.0,
    )


# ---------------------------------------------------------------------------
# drivers


def _stop_level(rep: StabilityReport) -> float | None:
    """Chernoff level below which the run counts as converged, None if never.

    With ``lambda2 rho'(1) r < 1`` and no root in (0, r], the iterative
    Chernoff bound contracts from the start, so every level counts.
    """
    if rep.trivially_stable:
        return math.inf
    if rep.necessary_violated:
        return None
    if rep.epsilon_star is not None:
        return rep.epsilon_star
    if rep.sufficient_ok:
        return math.inf
    return HARD_FLOOR


def run_de(ch: ChannelModel, d: DegreeDistribution, grid: GridSpec | None = None, max_iter: int = 100,
           *, stop_early: bool = True, keep_final: bool = False, fixed_point_tol: float = 0.0) -> DETrace:
    """Iterate the codeword-averaged recursion from the channel's initial pair.

    ``records[0]`` describes the channel messages; record ``l`` the messages
    after ``l`` iterations. With ``fixed_point_tol > 0`` the run also stops
    (as MaxIterations) once successive pairs differ by less than that in sup
    norm, which is only safe for verdict-only callers.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    grid = grid or GridSpec()
    init = ch.initial_density_pair(grid)
    rep = stability(d, ch.bhattacharyya())
    level = _stop_level(rep)
    trace = DETrace(epsilon_star=rep.epsilon_star)
    trace.records.append(IterRecord(0, error_prob(init), _safe_chernoff(init)))
    if level == math.inf:
        trace.verdict = CONVERGED
        trace.final = init
        return trace
    pair = init
    for l in range(1, max_iter + 1):
        new = cw_avg_de_step(pair, init, d)
        rec = IterRecord(l, error_prob(new), _safe_chernoff(new))
        trace.records.append(rec)
        trace.iterations_used = l
        if fixed_point_tol and _sup_diff(new, pair) < fixed_point_tol:
            pair = new
            break
        pair = new
        if level is not None and rec.cbp < level:
            trace.verdict = CONVERGED
            if stop_early:
                break
    if keep_final:
        trace.final = pair
    return trace


def run_coset_de(ch: ChannelModel, d: DegreeDistribution, grid: GridSpec | None = None, max_iter: int = 100,
                 *, stop_early: bool = True, fixed_point_tol: float = 0.0) -> DETrace:
    """Same stopping rule as :func:`run_de` on the symmetrized channel."""
    grid = grid or GridSpec()
    init = ch.initial_density_pair(grid)
    init_avg = init.average()
    rep = stability(d, ch.bhattacharyya())
    level = _stop_level(rep)
    trace = DETrace(epsilon_star=rep.epsilon_star)
    P = init_avg
    trace.records.append(IterRecord(0, P.mass_below_zero(), _safe_single(P)))
    for l in range(1, max_iter + 1):
        new = coset_de_step(P, init_avg, d)
        rec = IterRecord(l, new.mass_below_zero(), _safe_single(new))
        trace.records.append(rec)
        trace.iterations_used = l
        done = fixed_point_tol and float(np.max(np.abs(new.mass - P.mass))) < fixed_point_tol
        P = new
        if done:
            break
        if level is not None and rec.cbp < level:
            trace.verdict = CONVERGED
            if stop_early:
                break
    trace.final = P
    return trace


def _safe_chernoff(pair: DensityPair) -> float:
    try:
        return chernoff(pair)
    except ArithmeticError:
        return math.inf


def _safe_single(p: QuantizedDensity) -> float:
    try:
        return chernoff_single(p)
    except ArithmeticError:
        return math.inf


def _sup_diff(a: DensityPair, b: DensityPair) -> float:
    return float(max(np.max(np.abs(a.p0.mass - b.p0.mass)), np.max(np.abs(a.p1.mass - b.p1.mass))))


def decodable(ch: ChannelModel, d: DegreeDistribution, grid: GridSpec | None = None, max_iter: int = 100,
              coset: bool = False) -> bool:
    rep = stability(d, ch.bhattacharyya())
    if rep.necessary_violated:
        return False
    runner = run_coset_de if coset else run_de
    return runner(ch, d, grid, max_iter, fixed_point_tol=1e-13).converged


def threshold_search(fam: ChannelFamily, d: DegreeDistribution, grid: GridSpec | None = None,
                     max_iter: int = 100, precision: float = 1e-4, *, coset: bool = False,
                     lo: float | None = None, hi: float | None = None) -> float:
    """Largest decodable family parameter, by bisection to ``precision``.

    Returns the midpoint of the final bracket, so it is within ``precision / 2``
    of the last decodable/undecodable boundary found.
    """
    lo = fam.lo if lo is None else lo
    hi = fam.hi if hi is None else hi
    ok = lambda t: decodable(fam(t), d, grid, max_iter, coset)  # noqa: E731
    if not ok(lo):
        raise NoBracket(f"{fam.name}: not decodable even at {fam.param}={lo}")
    if ok(hi):
        raise NoBracket(f"{fam.name}: still decodable at {fam.param}={hi}")
    while hi - lo > precision:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def q_distance(pair: DensityPair, d: DegreeDistribution) -> float:
    """Total-variation distance between the two check-to-variable densities."""
    q = rho_apply_pair(d, pair)
    return q.p0.total_variation(q.p1)


@dataclass
class TypicalityResult:
    linear_threshold: float
    coset_threshold: float
    probe: float | None = None
    linear_trace: DETrace | None = None
    coset_trace: DETrace | None = None
    q_distance: list = field(default_factory=list)


def typicality_compare(d: DegreeDistribution, fam: ChannelFamily, grid: GridSpec | None = None,
                       max_iter: int = 100, precision: float = 1e-4, probe: float | None = None,
                       probe_iters: int | None = None) -> TypicalityResult:
    lin = threshold_search(fam, d, grid, max_iter, precision)
    cos = threshold_search(fam, d, grid, max_iter, precision, coset=True)
    res = TypicalityResult(lin, cos, probe)
    if probe is not None:
        res.linear_trace, res.q_distance = probe_traces(fam(probe), d, grid, probe_iters or max_iter)
        res.coset_trace = run_coset_de(fam(probe), d, grid, probe_iters or max_iter, stop_early=False)
    return res


def probe_traces(ch: ChannelModel, d: DegreeDistribution, grid: GridSpec | None, iters: int):
    """Full linear trace without early stopping plus per-iteration Q distances."""
    grid = grid or GridSpec()
    init = ch.initial_density_pair(grid)
    rep = stability(d, ch.bhattacharyya())
    level = _stop_level(rep)
    trace = DETrace(epsilon_star=rep.epsilon_star)
    trace.records.append(IterRecord(0, error_prob(init), _safe_chernoff(init)))
    dists = []
    pair = init
    for l in range(1, iters + 1):
        q = rho_apply_pair(d, pair)
        dists.append(q.p0.total_variation(q.p1))
        pair = DensityPair(_renorm(convolve(init.p0, lambda_apply(d, q.p0))),
                           _renorm(convolve(init.p1, lambda_apply(d, q.p1))))
        rec = IterRecord(l, error_prob(pair), _safe_chernoff(pair))
        trace.records.append(rec)
        trace.iterations_used = l
        if level is not None and rec.cbp < level and trace.verdict != CONVERGED:
            trace.verdict = CONVERGED
    trace.final = pair
    return trace, dists
