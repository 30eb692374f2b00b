"""Degree-distribution search by projected stochastic hill-climbing.

Each evaluation is one density-evolution run at the current target parameter
``t = best + step``. Candidates are ranked by a score (decoded runs by how
fast they reach the stability region, failed runs by the error probability
they stall at), so the climb has a signal even when nothing decodes yet.
``best`` only moves once the incumbent decodes at ``t``, so it stays a
certified lower bound on the incumbent's threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from asymde.channels import ChannelFamily
from asymde.de import run_de, stability, threshold_search
from asymde.density import GridSpec
from asymde.ensemble import DegreeDistribution

RATE_TOL = 1e-6


class Infeasible(ValueError):
    pass


@dataclass(frozen=True)
class OptConstraints:
    max_dv: int = 12
    max_dc: int = 9
    target_rate: float = 0.5
    forbid_lambda2: bool = False
    grid: GridSpec = field(default_factory=GridSpec)
    max_iter: int = 100
    evaluations: int = 500
    coarse_precision: float = 1e-2
    final_precision: float = 1e-4

    def __post_init__(self):
        if self.max_dv < 3 or self.max_dc < 3:
            raise ValueError("max_dv and max_dc must be >= 3")
        if not 0.0 < self.target_rate < 1.0:
            raise ValueError("target_rate must lie in (0, 1)")

    @property
    def lam_degrees(self) -> list[int]:
        return list(range(3 if self.forbid_lambda2 else 2, self.max_dv + 1))

    @property
    def rho_degrees(self) -> list[int]:
        return list(range(3, self.max_dc + 1))


@dataclass
class EvalRecord:
    index: int
    param: float
    decodable: bool
    best_param: float
    lam: dict
    rho: dict


@dataclass
class OptResult:
    best: DegreeDistribution
    threshold: float
    eval_log: list
    coarse_threshold: float


def satisfies(d: DegreeDistribution, c: OptConstraints) -> bool:
    """Coefficient-sum, rate and degree-cap check used on every logged candidate."""
    if max(d.lam) > c.max_dv or max(d.rho) > c.max_dc:
        return False
    if c.forbid_lambda2 and d.lambda2 > 0:
        return False
    if abs(sum(d.lam.values()) - 1) > 1e-9 or abs(sum(d.rho.values()) - 1) > 1e-9:
        return False
    return abs(d.design_rate - c.target_rate) <= RATE_TOL


def _project(lam: np.ndarray, rho: np.ndarray, c: OptConstraints):
    """Rescale low- and high-degree halves of lambda to meet the rate exactly.

    Returns the new coefficient vectors, or None when no nonnegative
    rescaling reaches the target.
    """
    ld = np.array(c.lam_degrees, float)
    rd = np.array(c.rho_degrees, float)
    lam = np.clip(lam, 0, None)
    rho = np.clip(rho, 0, None)
    if lam.sum() <= 0 or rho.sum() <= 0:
        return None
    lam, rho = lam / lam.sum(), rho / rho.sum()
    want = float(np.dot(rho, 1 / rd)) / (1.0 - c.target_rate)  # required int lambda
    # split by the edge-weighted mean degree
    pivot = float(np.dot(lam, ld))
    lo_part = np.where(ld <= pivot, lam, 0.0)
    hi_part = np.where(ld > pivot, lam, 0.0)
    if lo_part.sum() == 0 or hi_part.sum() == 0:
        if abs(float(np.dot(lam, 1 / ld)) - want) <= 1e-12:
            return lam, rho
        return None
    lo_part, hi_part = lo_part / lo_part.sum(), hi_part / hi_part.sum()
    i_lo, i_hi = float(np.dot(lo_part, 1 / ld)), float(np.dot(hi_part, 1 / ld))
    a = (want - i_hi) / (i_lo - i_hi)
    if not 0.0 <= a <= 1.0:
        return None
    return a * lo_part + (1 - a) * hi_part, rho


def _as_dist(lam, rho, c: OptConstraints, tiny: float = 1e-12) -> DegreeDistribution:
    lam = np.where(lam < tiny, 0.0, lam)
    rho = np.where(rho < tiny, 0.0, rho)
    lam_d = {k: float(v) for k, v in zip(c.lam_degrees, lam) if v > 0}
    rho_d = {k: float(v) for k, v in zip(c.rho_degrees, rho) if v > 0}
    # fold rounding residue into the largest term
    for dct in (lam_d, rho_d):
        top = max(dct, key=dct.get)
        dct[top] += 1.0 - math.fsum(dct.values())
    return DegreeDistribution(lam_d, rho_d)


def _lambda_move(lam, rho, c: OptConstraints, rng, scale):
    """Shift mass among three variable degrees keeping sum and int lambda fixed.

    A two-term exchange on the lambda side always changes int lambda, and the
    rate projection would undo it whenever lambda has a single degree.
    """
    ld = c.lam_degrees
    if len(ld) < 3:
        return None
    i, j, k = sorted(rng.choice(len(ld), 3, replace=False))
    di, dj, dk = ld[i], ld[j], ld[k]
    alpha = (1 / dj - 1 / dk) / (1 / di - 1 / dk)
    # move s into degree dj, taken from di and dk in ratio alpha : 1-alpha
    if rng.integers(2):
        cap = min(lam[i] / alpha, lam[k] / (1 - alpha))
        s = rng.uniform(0, scale) * cap
    else:
        s = -rng.uniform(0, scale) * lam[j]
    if s == 0.0:
        return None
    out = lam.copy()
    out[j] += s
    out[i] -= s * alpha
    out[k] -= s * (1 - alpha)
    return np.clip(out, 0, None), rho


def _rho_move(lam, rho, c: OptConstraints, rng, scale):
    """Exchange mass between two check degrees, then re-project lambda for the rate."""
    vec = rho.copy()
    a, b = rng.choice(vec.size, 2, replace=False)
    if vec[a] <= 0:
        return None
    amt = rng.uniform(0, scale) * vec[a]
    vec[a] -= amt
    vec[b] += amt
    return _project(lam, vec, c)


def _start(c: OptConstraints):
    """A feasible near-regular starting point: one variable degree, two adjacent check degrees."""
    for k in sorted(c.lam_degrees, key=lambda k: (k != 3, k)):
        want = (1.0 - c.target_rate) / k  # int rho needed
        for a in c.rho_degrees:
            b = a + 1
            if abs(1 / a - want) < 1e-12:
                lam = np.array([1.0 if d == k else 0.0 for d in c.lam_degrees])
                rho = np.array([1.0 if d == a else 0.0 for d in c.rho_degrees])
                return lam, rho
            if b in c.rho_degrees and 1 / b <= want <= 1 / a:
                t = (want - 1 / b) / (1 / a - 1 / b)
                lam = np.array([1.0 if d == k else 0.0 for d in c.lam_degrees])
                rho = np.array([t if d == a else (1 - t if d == b else 0.0) for d in c.rho_degrees])
                return lam, rho
    raise Infeasible(f"no near-regular ensemble with rate {c.target_rate} under dv<={c.max_dv}, dc<={c.max_dc}")


def optimize_degrees(fam: ChannelFamily, c: OptConstraints, seed: int = 0, start: DegreeDistribution | None = None,
                     step: float = 2e-3, verbose=None) -> OptResult:
    rng = np.random.default_rng(seed)
    if start is not None:
        lam = np.array([start.lam.get(k, 0.0) for k in c.lam_degrees])
        rho = np.array([start.rho.get(k, 0.0) for k in c.rho_degrees])
        proj = _project(lam, rho, c)
        if proj is None:
            raise Infeasible("start distribution cannot be projected onto the constraints")
        lam, rho = proj
    else:
        lam, rho = _start(c)
    cur = _as_dist(lam, rho, c)
    if not satisfies(cur, c):
        raise Infeasible("starting point violates the constraints")
    log: list[EvalRecord] = []

    # coarse bisection for the incumbent; each DE run counts as an evaluation
    lo, hi = fam.lo, fam.hi
    budget = c.evaluations

    def score(d, t):
        ch = fam(t)
        if stability(d, ch.bhattacharyya()).necessary_violated:
            return (0, -math.inf)
        tr = run_de(ch, d, c.grid, c.max_iter, fixed_point_tol=1e-13)
        if tr.converged:
            return (1, -tr.iterations_used)
        return (0, -math.log(max(float(tr.p_e[-1]), 1e-300)))

    def log_eval(d, t, sc):
        log.append(EvalRecord(len(log), t, bool(sc[0]), best, dict(d.lam), dict(d.rho)))
        if verbose:
            verbose(log[-1])

    best = lo
    while hi - lo > c.coarse_precision and len(log) < budget:
        mid = 0.5 * (lo + hi)
        sc = score(cur, mid)
        if sc[0]:
            lo = best = mid
        else:
            hi = mid
        log_eval(cur, mid, sc)
    coarse = best

    best_d = cur  # the distribution that certified ``best``
    cur_score = (1, 0)  # the incumbent decodes at ``best``
    scale = 0.05
    attempts = 0
    # infeasible proposals are not evaluations; cap them so a degenerate box terminates
    while len(log) < budget and attempts < 50 * budget:
        attempts += 1
        if cur_score[0]:
            # incumbent certified at best: raise the target and rescore it there
            t = best + step
            cur_score = score(cur, t)
            if cur_score[0]:
                best, best_d = t, cur
            log_eval(cur, t, cur_score)
            continue
        if rng.integers(2) == 0:
            proj = _lambda_move(lam, rho, c, rng, scale)
        else:
            proj = _rho_move(lam, rho, c, rng, scale)
        if proj is None:
            continue
        cand = _as_dist(*proj, c)
        if not satisfies(cand, c):
            continue
        sc = score(cand, t)
        if sc > cur_score:
            lam, rho, cur, cur_score = proj[0], proj[1], cand, sc
            if sc[0]:
                best, best_d = t, cand
            scale = min(0.3, scale * 1.5)
        else:
            scale = max(0.005, scale * 0.97)
        log_eval(cand, t, sc)

    cur = best_d
    final = threshold_search(fam, cur, c.grid, c.max_iter, c.final_precision, lo=best)
    cur = DegreeDistribution(cur.lam, cur.rho, name=f"opt-{fam.name}-seed{seed}")
    return OptResult(cur, final, log, coarse)
