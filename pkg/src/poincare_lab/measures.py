"""Probability measures, samplers, exact moment oracles and hypothesis probes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special, stats
from scipy.interpolate import PchipInterpolator

from .errors import CapabilityError, EnvelopeError, SizeError

CDF_TABLE_SIZE = 2 ** 14
TAIL_MASS = 1e-12
MAX_QUADRATURE_NODES = 10 ** 7


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for (seed, stream); streams are independent."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(stream),))))


# --------------------------------------------------------------------------
# 1-D densities on (0, inf) for orthant product measures.

@dataclass(frozen=True)
class PowerExp:
    """Density proportional to exp(-t^alpha) on (0, inf)."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def label(self) -> str:
        return f"PowerExp({self.alpha!r})"

    def log_density(self, t):
        return -np.power(t, self.alpha)

    def mass(self) -> float:
        return math.gamma(1.0 / self.alpha + 1.0)

    def moment(self, m: int) -> float:
        """Normalized moment E t^m = Gamma((m+1)/alpha) / Gamma(1/alpha)."""
        return math.exp(math.lgamma((m + 1) / self.alpha) - math.lgamma(1.0 / self.alpha))

    def icdf_table(self):
        # Gamma(1/alpha) in s = t^alpha gives an exact inverse CDF.
        a = 1.0 / self.alpha
        return lambda u: np.power(special.gammaincinv(a, u), a)


@dataclass(frozen=True)
class Density1D:
    """Custom unnormalized log-density on (0, inf); sampled by an inverse-CDF table."""

    log_density_fn: Callable
    name: str = "custom"

    @property
    def label(self) -> str:
        return f"Density1D({self.name})"

    def log_density(self, t):
        return np.asarray(self.log_density_fn(np.asarray(t, dtype=float)), dtype=float)

    def mass(self) -> float:
        nodes, w = half_line_rule(self, 400)
        return float(np.sum(w))

    def moment(self, m: int) -> float:
        nodes, w = half_line_rule(self, 400)
        return float(np.sum(w * nodes ** m) / np.sum(w))

    def icdf_table(self):
        return _tabulated_icdf(self)


def half_line_rule(density, nodes: int):
    """Gauss-Legendre on (0,1) mapped by t = u/(1-u); weights carry density and Jacobian."""
    u, wu = np.polynomial.legendre.leggauss(int(nodes))
    u = 0.5 * (u + 1.0)
    wu = 0.5 * wu
    t = u / (1.0 - u)
    jac = 1.0 / (1.0 - u) ** 2
    with np.errstate(over="ignore", under="ignore"):
        w = wu * jac * np.exp(density.log_density(t))
    return t, np.where(np.isfinite(w), w, 0.0)


def _tabulated_icdf(density):
    # Dense CDF on the u/(1-u) grid, tails cut at TAIL_MASS, PCHIP interpolation.
    u = np.linspace(0.0, 1.0, 4 * CDF_TABLE_SIZE + 1)[1:-1]
    t = u / (1.0 - u)
    with np.errstate(over="ignore", under="ignore"):
        f = np.exp(density.log_density(t)) / (1.0 - u) ** 2
    f = np.where(np.isfinite(f), f, 0.0)
    du = u[1] - u[0]
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * du)])
    cdf /= cdf[-1]
    lo = np.searchsorted(cdf, TAIL_MASS)
    hi = np.searchsorted(cdf, 1.0 - TAIL_MASS)
    idx = np.unique(np.linspace(lo, hi, CDF_TABLE_SIZE).astype(int))
    c, tt = cdf[idx], t[idx]
    c, keep = np.unique(c, return_index=True)
    tt = tt[keep]
    interp = PchipInterpolator(c, tt, extrapolate=False)
    return lambda q: interp(np.clip(q, c[0], c[-1]))


# --------------------------------------------------------------------------
# Measure families.

class Measure:
    kind = "abstract"
    dimension: int = 0
    exact = False

    def sample(self, seed: int, N: int, stream: int = 0) -> np.ndarray:
        if int(N) < 1:
            raise ValueError("N must be >= 1")
        return self._sample(rng_for(seed, stream), int(N))

    def _sample(self, rng, N):  # pragma: no cover - abstract
        raise NotImplementedError

    def contains(self, x) -> np.ndarray:
        raise NotImplementedError

    def descriptor(self) -> str:
        return self.kind

    def exact_moment(self, a) -> float:
        raise CapabilityError(f"{self.descriptor()} has no exact polynomial moment oracle")

    @property
    def capability(self) -> str:
        return "exact_polynomial" if self.exact else "none"


@dataclass(frozen=True)
class RegularSimplex(Measure):
    """Uniform measure on {p in R^{n+1}: p >= 0, sum p = 1}."""

    n: int
    kind = "RegularSimplex"
    exact = True

    @property
    def dimension(self):
        return self.n + 1

    def descriptor(self):
        return f"RegularSimplex({self.n})"

    def _sample(self, rng, N):
        e = rng.standard_exponential((N, self.n + 1))
        return e / np.sum(e, axis=1, keepdims=True)

    def contains(self, x, tol=1e-12):
        x = np.asarray(x)
        return np.all(x >= -tol, axis=-1) & (np.abs(np.sum(x, axis=-1) - 1.0) <= tol)

    def exact_moment(self, a):
        return float(simplex_moment_fraction(self.n, a))


@dataclass(frozen=True)
class CornerSimplex(Measure):
    """Uniform measure on the hull of 0, e_1, ..., e_n in R^n."""

    n: int
    kind = "CornerSimplex"
    exact = True

    @property
    def dimension(self):
        return self.n

    def descriptor(self):
        return f"CornerSimplex({self.n})"

    def _sample(self, rng, N):
        return RegularSimplex(self.n)._sample(rng, N)[:, 1:]

    def contains(self, x, tol=1e-12):
        x = np.asarray(x)
        return np.all(x >= -tol, axis=-1) & (np.sum(x, axis=-1) <= 1.0 + tol)

    def exact_moment(self, a):
        a = tuple(int(v) for v in a)
        return float(simplex_moment_fraction(self.n, (0,) + a))


def simplex_moment_fraction(n: int, a) -> Fraction:
    """E prod p_i^{a_i} under the uniform measure on the n-simplex: n! prod a_i! / (n + |a|)!."""
    a = [int(v) for v in a]
    if len(a) != n + 1 or any(v < 0 for v in a):
        raise ValueError("exponent must be a nonnegative (n+1)-index")
    num = math.factorial(n)
    for v in a:
        num *= math.factorial(v)
    return Fraction(num, math.factorial(n + sum(a)))


@dataclass(frozen=True)
class LpBall(Measure):
    """Uniform measure on B_p^n = {sum |x_i|^p <= 1}, 0 < p < 1 (p = 1 allowed)."""

    n: int
    p: float
    kind = "LpBall"

    def __post_init__(self):
        if not (0 < self.p <= 1):
            raise ValueError("p must lie in (0, 1]")

    @property
    def dimension(self):
        return self.n

    def descriptor(self):
        return f"LpBall({self.n},{self.p!r})"

    def _sample(self, rng, N):
        p = self.p
        G = rng.gamma(1.0 / p, 1.0, size=(N, self.n))
        signs = rng.choice([-1.0, 1.0], size=(N, self.n))
        Z = rng.standard_exponential(N)
        g = signs * np.power(G, 1.0 / p)
        return g / np.power(np.sum(G, axis=1) + Z, 1.0 / p)[:, None]

    def contains(self, x, tol=1e-12):
        return np.sum(np.abs(np.asarray(x)) ** self.p, axis=-1) <= 1.0 + tol

    def volume(self) -> float:
        p = self.p
        return (2.0 * math.gamma(1.0 / p + 1.0)) ** self.n / math.gamma(self.n / p + 1.0)

    def exact_second_moment(self) -> float:
        """E x_i^2 in closed form; used as an oracle in tests."""
        p, n = self.p, self.n
        return math.exp(math.lgamma(3 / p) + math.lgamma(n / p + 1) - math.lgamma(1 / p) - math.lgamma((n + 2) / p + 1))


def rejection_sample_lp(n: int, p: float, seed: int, N: int, stream: int = 0, return_rate: bool = False):
    """Independent oracle: uniform proposals on [-1,1]^n kept iff sum |x_i|^p <= 1."""
    if n > 4:
        raise ValueError("rejection oracle is limited to n <= 4")
    rng = rng_for(seed, stream)
    out, tried = [], 0
    got = 0
    while got < N:
        batch = max(1024, 2 * (N - got) * max(1, int(2 ** n / max(LpBall(n, p).volume(), 1e-12))))
        batch = min(batch, 4_000_000)
        prop = rng.uniform(-1.0, 1.0, size=(batch, n))
        ok = np.sum(np.abs(prop) ** p, axis=1) <= 1.0
        tried += batch
        acc = prop[ok]
        out.append(acc)
        got += len(acc)
    pts = np.concatenate(out)[:N]
    if return_rate:
        return pts, got / tried
    return pts


def rejection_acceptance_rate(n: int, p: float, seed: int, proposals: int) -> float:
    rng = rng_for(seed, 0)
    prop = rng.uniform(-1.0, 1.0, size=(int(proposals), n))
    return float(np.mean(np.sum(np.abs(prop) ** p, axis=1) <= 1.0))


@dataclass(frozen=True)
class OrthantProduct(Measure):
    """Product measure on (0, inf)^n with per-coordinate densities."""

    factors: tuple
    kind = "OrthantProduct"

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))

    @classmethod
    def iid(cls, factor, n: int) -> "OrthantProduct":
        return cls(tuple([factor] * int(n)))

    @property
    def dimension(self):
        return len(self.factors)

    @property
    def exact(self):
        return True

    def descriptor(self):
        return "OrthantProduct(" + ",".join(f.label for f in self.factors) + ")"

    def _sample(self, rng, N):
        u = rng.uniform(size=(N, self.dimension))
        cols = [f.icdf_table()(u[:, i]) for i, f in enumerate(self.factors)]
        return np.stack(cols, axis=1)

    def contains(self, x):
        return np.all(np.asarray(x) > 0, axis=-1)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        return sum(f.log_density(x[..., i]) for i, f in enumerate(self.factors))

    def exact_moment(self, a):
        return float(np.prod([f.moment(int(m)) for f, m in zip(self.factors, a)]))


@dataclass(frozen=True)
class Interval(Measure):
    a: float
    b: float
    kind = "Interval"
    exact = True

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("interval needs a < b")

    @property
    def dimension(self):
        return 1

    def descriptor(self):
        return f"Interval({self.a!r},{self.b!r})"

    def _sample(self, rng, N):
        return rng.uniform(self.a, self.b, size=(N, 1))

    def contains(self, x):
        x = np.asarray(x)[..., 0]
        return (x >= self.a) & (x <= self.b)

    def exact_moment(self, a):
        m = int(a[0]) if np.ndim(a) else int(a)
        return (self.b ** (m + 1) - self.a ** (m + 1)) / ((m + 1) * (self.b - self.a))


@dataclass(frozen=True)
class WeightedSimplex(Measure):
    """nu proportional to exp(-phi) on the regular simplex; phi takes (..., n+1) arrays."""

    n: int
    phi: Callable
    q: float = 0.0
    envelope_probes: int = 10_000
    kind = "WeightedSimplex"

    @property
    def dimension(self):
        return self.n + 1

    def descriptor(self):
        return f"WeightedSimplex({self.n},q={self.q!r})"

    def contains(self, x, tol=1e-12):
        return RegularSimplex(self.n).contains(x, tol)

    def envelope(self, seed: int) -> float:
        probes = RegularSimplex(self.n).sample(seed, self.envelope_probes, stream=1_000_001)
        return 1.1 * float(np.max(np.exp(-np.asarray(self.phi(probes), dtype=float))))

    def _sample(self, rng, N):
        return _weighted_rejection(RegularSimplex(self.n), lambda p: -np.asarray(self.phi(p), dtype=float),
                                   rng, N, self.envelope_probes)

    def sample(self, seed, N, stream=0):
        if int(N) < 1:
            raise ValueError("N must be >= 1")
        return _weighted_rejection(RegularSimplex(self.n), lambda p: -np.asarray(self.phi(p), dtype=float),
                                   rng_for(seed, stream), int(N), self.envelope_probes,
                                   env_rng=rng_for(seed, 1_000_001), acc_rng=rng_for(seed, stream + 500_000))


@dataclass(frozen=True)
class Reweighted(Measure):
    """Base measure tilted by exp(log_weight); sampled by rejection."""

    base: Measure
    log_weight: Callable
    label: str = "weight"
    envelope_probes: int = 10_000
    kind = "Reweighted"

    @property
    def dimension(self):
        return self.base.dimension

    def descriptor(self):
        return f"Reweighted({self.base.descriptor()},{self.label})"

    def contains(self, x):
        return self.base.contains(x)

    def sample(self, seed, N, stream=0):
        if int(N) < 1:
            raise ValueError("N must be >= 1")
        return _weighted_rejection(self.base, self.log_weight, rng_for(seed, stream), int(N),
                                   self.envelope_probes, env_rng=rng_for(seed, 1_000_001),
                                   acc_rng=rng_for(seed, stream + 500_000))


def _weighted_rejection(base: Measure, log_weight, rng, N, probes, env_rng=None, acc_rng=None):
    env_rng = env_rng or rng
    acc_rng = acc_rng or rng
    lw = np.asarray(log_weight(base._sample(env_rng, probes)), dtype=float)
    log_env = math.log(1.1) + float(np.max(lw))
    for _restart in range(20):
        out, got, tried = [], 0, 0
        violated = False
        while got < N:
            batch = max(4096, 2 * (N - got))
            prop = base._sample(rng, batch)
            w = np.asarray(log_weight(prop), dtype=float)
            if np.max(w) > log_env:
                log_env = float(np.max(w)) + math.log(1.1)
                violated = True
                break
            acc = np.log(acc_rng.uniform(size=batch)) < (w - log_env)
            tried += batch
            out.append(prop[acc])
            got += int(np.sum(acc))
            if tried >= 10 * batch and got / tried < 1e-4:
                raise EnvelopeError(f"acceptance rate {got / tried:.3g} below 1e-4 (log envelope {log_env:.4g})")
        if not violated:
            return np.concatenate(out)[:N]
    raise EnvelopeError("envelope kept being violated after 20 inflations")


@dataclass(frozen=True)
class BoxedSet(Measure):
    """Uniform measure on {x in box: indicator(x)}, sampled by rejection from the box."""

    lower: tuple
    upper: tuple
    indicator: Callable
    label: str = "set"
    min_acceptance: float = 1e-4
    kind = "BoxedSet"

    @property
    def dimension(self):
        return len(self.lower)

    def descriptor(self):
        return f"BoxedSet({self.label})"

    def contains(self, x):
        return np.asarray(self.indicator(np.asarray(x)), dtype=bool)

    def _sample(self, rng, N):
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        out, got, tried = [], 0, 0
        while got < N:
            batch = max(4096, 4 * (N - got))
            prop = rng.uniform(lo, hi, size=(batch, len(lo)))
            ok = self.contains(prop)
            tried += batch
            out.append(prop[ok])
            got += int(np.sum(ok))
            if got / tried < self.min_acceptance:
                raise EnvelopeError(f"bounding box acceptance {got / tried:.3g} below {self.min_acceptance}")
        return np.concatenate(out)[:N]


def corner_simplex_set(n: int) -> BoxedSet:
    return BoxedSet(tuple([0.0] * n), tuple([1.0] * n),
                    lambda x: np.all(x >= 0, axis=-1) & (np.sum(x, axis=-1) <= 1.0), f"corner_simplex({n})")


def unit_cube_set(n: int) -> BoxedSet:
    return BoxedSet(tuple([0.0] * n), tuple([1.0] * n), lambda x: np.all((x >= 0) & (x <= 1), axis=-1),
                    f"unit_cube({n})")


# --------------------------------------------------------------------------
# Moments.

@dataclass
class MomentEstimate:
    values: np.ndarray
    standard_errors: np.ndarray
    exact: bool


def exact_polynomial_moment(measure: Measure, a) -> float:
    if not measure.exact:
        raise CapabilityError(f"{measure.descriptor()} has no exact polynomial moment oracle")
    return measure.exact_moment(a)


def second_moments(measure: Measure, seed: int = 0, N: int = 100_000) -> MomentEstimate:
    """V_i = E x_i^2, exact when an oracle exists, else MC with standard errors."""
    d = measure.dimension
    if measure.exact:
        vals = []
        for i in range(d):
            a = [0] * d
            a[i] = 2
            vals.append(measure.exact_moment(a))
        return MomentEstimate(np.array(vals), np.zeros(d), True)
    x = measure.sample(seed, N, stream=7)
    sq = x ** 2
    return MomentEstimate(sq.mean(axis=0), sq.std(axis=0, ddof=1) / math.sqrt(N), False)


# --------------------------------------------------------------------------
# Quadrature.

@dataclass
class QuadratureGrid:
    nodes: np.ndarray
    weights: np.ndarray
    nodes_per_dim: int

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def normalized_weights(self):
        return self.weights / np.sum(self.weights)


def quadrature_grid(measure: OrthantProduct, nodes_per_dim: int) -> QuadratureGrid:
    d = measure.dimension
    if float(nodes_per_dim) ** d > MAX_QUADRATURE_NODES:
        raise SizeError(f"{nodes_per_dim}^{d} nodes exceeds the 1e7 limit")
    rules = [half_line_rule(f, nodes_per_dim) for f in measure.factors]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([w.ravel() for w in wgrids], axis=1), axis=1)
    return QuadratureGrid(nodes, weights, int(nodes_per_dim))


def box_quadrature(lower, upper, nodes_per_dim: int) -> QuadratureGrid:
    lo, hi = np.asarray(lower, float), np.asarray(upper, float)
    u, w = np.polynomial.legendre.leggauss(int(nodes_per_dim))
    axes = [0.5 * (h - l) * (u + 1) + l for l, h in zip(lo, hi)]
    waxes = [0.5 * (h - l) * w for l, h in zip(lo, hi)]
    g = np.meshgrid(*axes, indexing="ij")
    wg = np.meshgrid(*waxes, indexing="ij")
    return QuadratureGrid(np.stack([a.ravel() for a in g], 1),
                          np.prod(np.stack([a.ravel() for a in wg], 1), 1), int(nodes_per_dim))


# --------------------------------------------------------------------------
# Hypothesis probes.

@dataclass
class ProbeReport:
    name: str
    passed: bool
    trials: int
    violations: int = 0
    worst_violation: float = 0.0
    details: dict = field(default_factory=dict)

    def as_gate(self):
        return (self.name, self.passed)


def _positive_points(rng, trials, n, scale=3.0):
    return rng.uniform(0.0, scale, size=(trials, n)) ** 2 + 1e-6


def p_convexity_probe(phi: Callable, p: float, seed: int = 0, trials: int = 2000, n: int = 1,
                      exponents: Optional[Sequence[float]] = None, name: Optional[str] = None) -> ProbeReport:
    """Midpoint convexity of g(x) = phi(x^{1/p}) on random segments of R_+^n.

    ``exponents`` overrides 1/p per coordinate (g(x) = phi(x_1^{e_1}, ...)).
    phi may return +inf (set indicators); points where both ends are finite
    but the midpoint is not count as violations.
    """
    if not (0 < p <= 1) and exponents is None:
        raise ValueError("p must lie in (0, 1]")
    rng = rng_for(seed, 11)
    e = np.full(n, 1.0 / p) if exponents is None else np.asarray(exponents, dtype=float)
    u = _positive_points(rng, trials, n)
    v = _positive_points(rng, trials, n)
    lam = rng.uniform(0.0, 1.0, size=(trials, 1))
    m = lam * u + (1 - lam) * v

    def g(z):
        return np.asarray(phi(np.power(z, e)), dtype=float)

    gu, gv, gm = g(u), g(v), g(m)
    lam = lam[:, 0]
    with np.errstate(invalid="ignore"):
        rhs = lam * gu + (1 - lam) * gv
        scale = np.maximum(1.0, np.maximum(np.abs(gu), np.abs(gv)))
        finite_ends = np.isfinite(gu) & np.isfinite(gv)
        excess = np.where(finite_ends, gm - rhs, -np.inf)
        excess = np.where(finite_ends & ~np.isfinite(gm), np.inf, excess)
        bad = excess > 1e-9 * np.where(np.isfinite(scale), scale, 1.0)
    worst = float(np.max(np.where(bad, excess, 0.0))) if trials else 0.0
    return ProbeReport(name or f"{p!r}-convexity", not bool(np.any(bad)), trials, int(np.sum(bad)), worst)


def set_indicator_phi(indicator: Callable) -> Callable:
    """0 on the set, +inf outside."""
    return lambda x: np.where(np.asarray(indicator(x), dtype=bool), 0.0, np.inf)


@dataclass
class HomogeneityReport(ProbeReport):
    M: float = 0.0
    q: float = 0.0
    n: int = 0
    gate_passed: bool = True

    def gates(self):
        return [("homogeneity", self.passed), ("Mq<=n", self.gate_passed)]


def homogeneity_check(phi: Callable, q: float, n: int, seed: int = 0, trials: int = 1000,
                      sup_samples: int = 100_000) -> HomogeneityReport:
    """phi(lam x) = lam^q phi(x) on R_+^{n+1}; M = sup of phi over the n-simplex; gate M q <= n."""
    if q < 0:
        raise ValueError("q must be >= 0")
    rng = rng_for(seed, 13)
    x = rng.uniform(0.0, 2.0, size=(trials, n + 1)) + 1e-3
    lam = rng.uniform(0.5, 2.0, size=trials)
    a = np.asarray(phi(lam[:, None] * x), dtype=float)
    b = lam ** q * np.asarray(phi(x), dtype=float)
    rel = np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    bad = rel > 1e-8
    pts = RegularSimplex(n).sample(seed, sup_samples, stream=14)
    bary = np.full((1, n + 1), 1.0 / (n + 1))
    vertices = np.eye(n + 1)
    vals = np.concatenate([np.asarray(phi(pts), float), np.asarray(phi(bary), float),
                           np.asarray(phi(vertices), float)])
    M = float(np.max(vals))
    gate = M * q <= n + 1e-12
    return HomogeneityReport("homogeneity", not bool(np.any(bad)), trials, int(np.sum(bad)),
                             float(np.max(rel)) if trials else 0.0, M=M, q=q, n=n, gate_passed=bool(gate))


def unconditional_probe(fn: Callable, dim: int, seed: int = 0, trials: int = 500, name: str = "unconditional",
                        scale: float = 1.0) -> ProbeReport:
    """fn(x) == fn(s x) for random sign patterns s."""
    rng = rng_for(seed, 17)
    x = rng.uniform(-scale, scale, size=(trials, dim))
    s = rng.choice([-1.0, 1.0], size=(trials, dim))
    a, b = np.asarray(fn(x), float), np.asarray(fn(s * x), float)
    rel = np.abs(a - b) / np.maximum(1.0, np.abs(a))
    bad = rel > 1e-10
    return ProbeReport(name, not bool(np.any(bad)), trials, int(np.sum(bad)), float(np.max(rel)))


def increasing_probe(phi: Callable, n: int, seed: int = 0, trials: int = 1000) -> ProbeReport:
    """phi(x + t e_i) >= phi(x) on sampled coordinate-wise pairs in R_+^n."""
    rng = rng_for(seed, 19)
    x = _positive_points(rng, trials, n)
    i = rng.integers(0, n, size=trials)
    y = x.copy()
    y[np.arange(trials), i] += rng.uniform(0.0, 2.0, size=trials)
    a, b = np.asarray(phi(x), float), np.asarray(phi(y), float)
    with np.errstate(invalid="ignore"):
        bad = (b < a - 1e-12 * np.maximum(1.0, np.abs(a))) & ~(np.isinf(a) & np.isinf(b))
        worst = np.where(bad, a - b, 0.0)
    return ProbeReport("increasing", not bool(np.any(bad)), trials, int(np.sum(bad)),
                       float(np.max(worst)) if trials else 0.0)


def ks_two_sample(a, b) -> tuple:
    """(statistic, critical value at alpha = 0.01)."""
    res = stats.ks_2samp(np.ravel(a), np.ravel(b))
    na, nb = np.size(a), np.size(b)
    crit = 1.628 * math.sqrt((na + nb) / (na * nb))
    return float(res.statistic), crit
