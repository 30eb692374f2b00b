"""Binary-input memoryless channels.

Bit 0 maps to the positive signal for the Gaussian channels. Discrete output
alphabets are encoded as floats: 0.0, 1.0 and :data:`ERASURE` for the BEC.
"""

from __future__ import annotations

import math
from dataclasses import MISSING, dataclass, field, fields, replace
from typing import Callable, ClassVar

import numpy as np
from scipy import integrate
from scipy.special import log_ndtr

from asymde.density import DensityPair, GridSpec, QuantizedDensity

ERASURE = 2.0
# y-cells per unit of noise standard deviation for continuous channels;
# roughly 10x finer than the LLR grid in the region that matters
CELLS_PER_SIGMA = 400
TAIL_SIGMAS = 14.0


class UnsupportedOutput(ValueError):
    """Channel output outside the support of the model."""


class ChannelSpecError(ValueError):
    pass


def _check_prob(name, v):
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name}={v} must lie in [0, 1]")


class ChannelModel:
    """Base class; concrete models are frozen dataclasses."""

    kind: ClassVar[str] = ""
    symmetric: ClassVar[bool] = False

    # discrete channels: list of (y, P(y|0), P(y|1))
    def outputs(self) -> list[tuple[float, float, float]]:
        raise NotImplementedError

    def sample(self, x, rng) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        ys, p0, p1 = (np.array(t, dtype=float) for t in zip(*self.outputs()))
        cdf0, cdf1 = np.cumsum(p0), np.cumsum(p1)
        u = rng.random(x.shape)
        idx = np.where(x == 0, np.searchsorted(cdf0, u, side="right"),
                       np.searchsorted(cdf1, u, side="right"))
        return ys[np.minimum(idx, len(ys) - 1)]

    def llr(self, y):
        y = np.asarray(y, dtype=float)
        out = np.full(y.shape, np.nan)
        for v, a, b in self.outputs():
            out[y == v] = _log_ratio(a, b)
        if np.isnan(out).any():
            raise UnsupportedOutput(f"{self.kind}: output outside {[o[0] for o in self.outputs()]}")
        return out if out.ndim else float(out)

    def bhattacharyya(self) -> float:
        return float(sum(math.sqrt(a * b) for _, a, b in self.outputs()))

    def initial_density_pair(self, grid: GridSpec) -> DensityPair:
        outs = self.outputs()
        m = np.array([_log_ratio(a, b) for _, a, b in outs])
        w0 = np.array([a for _, a, _ in outs])
        w1 = np.array([b for _, _, b in outs])
        rule = grid.init_rounding
        return DensityPair(QuantizedDensity.from_points(grid, m, w0, rule),
                           QuantizedDensity.from_points(grid, -m, w1, rule),
                           meta={"channel": self.spec()})

    def spec(self) -> str:
        args = ",".join(f"{f.name}={getattr(self, f.name):g}" for f in fields(self))
        return f"{self.kind}:{args}"

    def __str__(self):
        return self.spec()


def _log_ratio(a: float, b: float) -> float:
    if a == 0 and b == 0:
        return 0.0
    if b == 0:
        return math.inf
    if a == 0:
        return -math.inf
    return math.log(a) - math.log(b)


@dataclass(frozen=True)
class BEC(ChannelModel):
    eps: float
    kind: ClassVar[str] = "bec"
    symmetric: ClassVar[bool] = True

    def __post_init__(self):
        _check_prob("eps", self.eps)

    def outputs(self):
        e = self.eps
        return [(0.0, 1 - e, 0.0), (1.0, 0.0, 1 - e), (ERASURE, e, e)]

    def bhattacharyya(self):
        return float(self.eps)


@dataclass(frozen=True)
class BSC(ChannelModel):
    eps: float
    kind: ClassVar[str] = "bsc"
    symmetric: ClassVar[bool] = True

    def __post_init__(self):
        _check_prob("eps", self.eps)

    def outputs(self):
        e = self.eps
        return [(0.0, 1 - e, e), (1.0, e, 1 - e)]

    def bhattacharyya(self):
        return 2.0 * math.sqrt(self.eps * (1 - self.eps))


@dataclass(frozen=True)
class BASC(ChannelModel):
    """``eps0 = P(y=1 | x=0)``, ``eps1 = P(y=0 | x=1)``."""

    eps0: float
    eps1: float
    kind: ClassVar[str] = "basc"

    def __post_init__(self):
        _check_prob("eps0", self.eps0)
        _check_prob("eps1", self.eps1)
        if self.eps0 + self.eps1 > 1:
            raise ValueError("BASC needs eps0 + eps1 <= 1 (relabel the outputs otherwise)")

    def outputs(self):
        e0, e1 = self.eps0, self.eps1
        return [(0.0, 1 - e0, e1), (1.0, e0, 1 - e1)]

    def bhattacharyya(self):
        e0, e1 = self.eps0, self.eps1
        return math.sqrt(e1 * (1 - e0)) + math.sqrt(e0 * (1 - e1))


@dataclass(frozen=True)
class ZChannel(ChannelModel):
    """BASC with a small floor on ``eps0``; ``eps0_floor=0`` gives the pure z-channel."""

    eps1: float
    eps0_floor: float = 1e-5
    kind: ClassVar[str] = "z"

    def __post_init__(self):
        BASC(self.eps0_floor, self.eps1)  # validates

    @property
    def eps0(self) -> float:
        return self.eps0_floor

    def as_basc(self) -> BASC:
        return BASC(self.eps0_floor, self.eps1)

    def outputs(self):
        return self.as_basc().outputs()

    def bhattacharyya(self):
        return self.as_basc().bhattacharyya()


def _log_cell(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """log(Phi(b) - Phi(a)) for standardized bounds a < b, accurate in both tails."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    lh, ll = log_ndtr(hi), log_ndtr(lo)
    with np.errstate(divide="ignore"):
        return lh + np.log1p(-np.exp(ll - lh))


class _Gaussian(ChannelModel):
    """Mixtures of unit-weight Gaussians with common ``sigma``."""

    sigma: float

    def means(self, x: int) -> tuple[float, ...]:
        raise NotImplementedError

    def _validate(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma={self.sigma} must be positive")

    def sample(self, x, rng):
        x = np.asarray(x, dtype=np.int64)
        mu0, mu1 = np.array(self.means(0)), np.array(self.means(1))
        pick = rng.integers(0, len(mu0), size=x.shape)
        mu = np.where(x == 0, mu0[pick % len(mu0)], mu1[pick % len(mu1)])
        return mu + self.sigma * rng.standard_normal(x.shape)

    def _log_pdf(self, y, x):
        y = np.asarray(y, float)
        s = self.sigma
        terms = [-0.5 * ((y - mu) / s) ** 2 for mu in self.means(x)]
        return np.logaddexp.reduce(terms, axis=0) - math.log(len(terms)) - math.log(s * math.sqrt(2 * math.pi))

    def llr(self, y):
        y = np.asarray(y, float)
        if not np.all(np.isfinite(y)):
            raise UnsupportedOutput(f"{self.kind}: outputs must be finite reals")
        out = self._log_pdf(y, 0) - self._log_pdf(y, 1)
        return out if out.ndim else float(out)

    def _log_cells(self, edges: np.ndarray, x: int) -> np.ndarray:
        s = self.sigma
        terms = [_log_cell((edges[:-1] - mu) / s, (edges[1:] - mu) / s) for mu in self.means(x)]
        return np.logaddexp.reduce(terms, axis=0) - math.log(len(terms))

    def output_cells(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Partition of the real line into cells; log cell probabilities under each bit.

        The two outer cells extend to +-inf so both mass vectors sum to one.
        """
        s = self.sigma
        mus = self.means(0) + self.means(1)
        L = max(abs(m) for m in mus) + TAIL_SIGMAS * s
        n = int(math.ceil(2 * L / s * CELLS_PER_SIGMA / 2)) * 2
        edges = np.linspace(-L, L, n + 1)
        edges[0], edges[-1] = -np.inf, np.inf
        return edges, self._log_cells(edges, 0), self._log_cells(edges, 1)

    def initial_density_pair(self, grid: GridSpec) -> DensityPair:
        # the LLR of each output cell is the log ratio of its two cell masses,
        # so the pair is that of an exactly specified discrete channel
        _, l0, l1 = self.output_cells()
        m = l0 - l1
        rule = grid.init_rounding
        return DensityPair(QuantizedDensity.from_points(grid, m, np.exp(l0), rule),
                           QuantizedDensity.from_points(grid, -m, np.exp(l1), rule),
                           meta={"channel": self.spec()})

    def bhattacharyya(self):
        f = lambda y: math.exp(0.5 * (float(self._log_pdf(y, 0)) + float(self._log_pdf(y, 1))))
        val, _ = integrate.quad(f, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
        return float(val)


@dataclass(frozen=True)
class BiAWGNC(_Gaussian):
    sigma: float
    kind: ClassVar[str] = "biawgnc"
    symmetric: ClassVar[bool] = True

    def __post_init__(self):
        self._validate()

    def means(self, x):
        return (1.0,) if x == 0 else (-1.0,)

    def llr(self, y):
        y = np.asarray(y, float)
        if not np.all(np.isfinite(y)):
            raise UnsupportedOutput("biawgnc: outputs must be finite reals")
        out = 2.0 * y / self.sigma ** 2
        return out if out.ndim else float(out)

    def bhattacharyya(self):
        return math.exp(-1.0 / (2.0 * self.sigma ** 2))


_A = 3.0 / math.sqrt(5.0)
_B = 1.0 / math.sqrt(5.0)


@dataclass(frozen=True)
class CompositeBiAWGNC(_Gaussian):
    """Gray-mapped 4-PAM bit channel: bit 0 at +-3/sqrt5, bit 1 at +-1/sqrt5, equal weights."""

    sigma: float
    kind: ClassVar[str] = "cbiawgnc"

    def __post_init__(self):
        self._validate()

    def means(self, x):
        return (_A, -_A) if x == 0 else (_B, -_B)


# ---------------------------------------------------------------------------
# spec strings and families

_KINDS: dict[str, type] = {c.kind: c for c in (BEC, BSC, BASC, ZChannel, BiAWGNC, CompositeBiAWGNC)}


def parse_channel(text: str) -> ChannelModel:
    """Parse ``kind:key=value,...`` (e.g. ``z:eps1=0.23``)."""
    kind, _, rest = text.strip().partition(":")
    kind = kind.lower()
    if kind not in _KINDS:
        raise ChannelSpecError(f"unknown channel kind {kind!r}; expected one of {sorted(_KINDS)}")
    cls = _KINDS[kind]
    allowed = {f.name for f in fields(cls) if f.init}
    kw = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        key = key.strip()
        if not eq:
            raise ChannelSpecError(f"field {key!r}: expected key=value")
        if key not in allowed:
            raise ChannelSpecError(f"field {key!r} not valid for {kind} (allowed: {sorted(allowed)})")
        try:
            kw[key] = float(val)
        except ValueError:
            raise ChannelSpecError(f"field {key!r}: cannot parse {val!r} as a number") from None
    missing = [f.name for f in fields(cls) if f.init and f.default is MISSING and f.name not in kw]
    if missing:
        raise ChannelSpecError(f"field {missing[0]!r} missing for {kind}")
    try:
        return cls(**kw)
    except ValueError as exc:
        raise ChannelSpecError(str(exc)) from None


@dataclass(frozen=True)
class ChannelFamily:
    """A channel template with one swept parameter; larger values are noisier."""

    name: str
    param: str
    build: Callable[[float], ChannelModel] = field(compare=False, repr=False)
    lo: float = 1e-3
    hi: float = 0.5

    def __call__(self, t: float) -> ChannelModel:
        return self.build(t)

    def with_bracket(self, lo: float | None = None, hi: float | None = None) -> "ChannelFamily":
        return replace(self, lo=self.lo if lo is None else lo, hi=self.hi if hi is None else hi)


def channel_family(name: str, **fixed) -> ChannelFamily:
    """Families swept during threshold search.

    ``bec``/``bsc`` sweep ``eps``, ``z`` and ``basc`` sweep ``eps1`` (``basc``
    takes a fixed ``eps0``), ``biawgnc``/``cbiawgnc`` sweep ``sigma``.
    """
    name = name.lower()
    if name == "bec":
        return ChannelFamily("bec", "eps", lambda t: BEC(t))
    if name == "bsc":
        return ChannelFamily("bsc", "eps", lambda t: BSC(t))
    if name == "z":
        floor = fixed.get("eps0_floor", 1e-5)
        return ChannelFamily("z", "eps1", lambda t: ZChannel(eps1=t, eps0_floor=floor))
    if name == "basc":
        e0 = fixed.get("eps0", 1e-2)
        return ChannelFamily("basc", "eps1", lambda t: BASC(e0, t), 1e-3, min(0.5, 1 - e0 - 1e-9))
    if name == "biawgnc":
        return ChannelFamily("biawgnc", "sigma", lambda t: BiAWGNC(t), 0.3, 2.0)
    if name == "cbiawgnc":
        return ChannelFamily("cbiawgnc", "sigma", lambda t: CompositeBiAWGNC(t), 0.1, 2.0)
    raise ChannelSpecError(f"unknown family {name!r}; expected bec, bsc, z, basc, biawgnc or cbiawgnc")


def parse_family(text: str) -> ChannelFamily:
    """``z``, ``basc:eps0=0.01``, ``z:eps0_floor=0``."""
    name, _, rest = text.partition(":")
    kw = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        try:
            kw[key.strip()] = float(val)
        except ValueError:
            raise ChannelSpecError(f"field {key.strip()!r}: cannot parse {val!r}") from None
    return channel_family(name, **kw)
