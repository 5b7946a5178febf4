"""Test functions with exact gradients."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .measures import Measure, rng_for, second_moments

MAX_DEGREE = 6


def _monomials(n, degree):
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(n), total):
            a = [0] * n
            for i in combo:
                a[i] += 1
            yield tuple(a)


@dataclass(frozen=True)
class Polynomial:
    """Sparse polynomial {exponent tuple: coefficient}; coefficients may be Fractions."""

    n: int
    terms: dict

    def __post_init__(self):
        clean = {}
        for a, c in self.terms.items():
            a = tuple(int(v) for v in a)
            if len(a) != self.n:
                raise ValueError("exponent length must equal dimension")
            if c != 0:
                clean[a] = clean.get(a, 0) + c
        object.__setattr__(self, "terms", {a: c for a, c in clean.items() if c != 0})

    @classmethod
    def constant(cls, n, c):
        return cls(n, {(0,) * n: c})

    @classmethod
    def coordinate(cls, n, i):
        a = [0] * n
        a[i] = 1
        return cls(n, {tuple(a): 1})

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.n, other)
        t = dict(self.terms)
        for a, c in other.terms.items():
            t[a] = t.get(a, 0) + c
        return Polynomial(self.n, t)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, Polynomial) else -other)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial(self.n, {a: c * other for a, c in self.terms.items()})
        t = {}
        for (a, c), (b, d) in itertools.product(self.terms.items(), other.terms.items()):
            k = tuple(x + y for x, y in zip(a, b))
            t[k] = t.get(k, 0) + c * d
        return Polynomial(self.n, t)

    __rmul__ = __mul__

    def derivative(self, i: int) -> "Polynomial":
        t = {}
        for a, c in self.terms.items():
            if a[i] > 0:
                b = list(a)
                b[i] -= 1
                t[tuple(b)] = t.get(tuple(b), 0) + c * a[i]
        return Polynomial(self.n, t)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for a, c in self.terms.items():
            term = np.full(x.shape[:-1], float(c))
            for i, e in enumerate(a):
                if e:
                    term = term * x[..., i] ** e
            out = out + term
        return out

    def gradient(self, x):
        return np.stack([self.derivative(i)(x) for i in range(self.n)], axis=-1)

    def substitute_x0(self) -> "Polynomial":
        """Polynomial in (y_1..y_n) obtained by setting p_0 = 1 - sum y_j, p_j = y_j."""
        m = self.n - 1
        y0 = Polynomial.constant(m, 1)
        for j in range(m):
            y0 = y0 - Polynomial.coordinate(m, j)
        out = Polynomial(m, {})
        for a, c in self.terms.items():
            term = Polynomial.constant(m, c)
            for _ in range(a[0]):
                term = term * y0
            rest = {tuple(a[1:]): 1}
            out = out + term * Polynomial(m, rest)
        return out

    def lift_x0(self) -> "Polynomial":
        """Embed a polynomial in (y_1..y_n) as one in (p_0..p_n) not depending on p_0."""
        return Polynomial(self.n + 1, {(0,) + a: c for a, c in self.terms.items()})

    def integrate(self, moment) -> Fraction | float:
        """sum_a c_a * moment(a)."""
        return sum((c * moment(a) for a, c in self.terms.items()), 0)

    def to_json(self) -> str:
        items = [[list(a), str(c) if isinstance(c, Fraction) else float(c)] for a, c in sorted(self.terms.items())]
        return json.dumps({"n": self.n, "terms": items})

    @classmethod
    def from_json(cls, s: str) -> "Polynomial":
        d = json.loads(s)
        return cls(d["n"], {tuple(a): (Fraction(c) if isinstance(c, str) else c) for a, c in d["terms"]})


@dataclass(frozen=True)
class TestFunction:
    dimension: int
    kind: str
    value_fn: Callable
    gradient_fn: Callable
    polynomial: Optional[Polynomial] = None
    center_offset: float = 0
    center_se: float = 0.0
    centered_exactly: bool = False
    meta: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def value(self, x):
        return np.asarray(self.value_fn(np.asarray(x, dtype=float)), dtype=float) - float(self.center_offset)

    def gradient(self, x):
        return np.asarray(self.gradient_fn(np.asarray(x, dtype=float)), dtype=float)

    def __call__(self, x):
        return self.value(x)

    def shifted_polynomial(self) -> Optional[Polynomial]:
        if self.polynomial is None:
            return None
        return self.polynomial - self.center_offset


def from_polynomial(poly: Polynomial, kind: str = "Polynomial", **meta) -> TestFunction:
    return TestFunction(poly.n, kind, poly, poly.gradient, poly, meta=meta)


def polynomial_function(n: int, terms: dict) -> TestFunction:
    return from_polynomial(Polynomial(n, terms))


def coordinate(n: int, i: int) -> TestFunction:
    return from_polynomial(Polynomial.coordinate(n, i), "Coordinate", index=i)


def squared_norm(n: int) -> TestFunction:
    p = Polynomial(n, {})
    for i in range(n):
        p = p + Polynomial.coordinate(n, i) * Polynomial.coordinate(n, i)
    return from_polynomial(p, "SquaredNorm")


def thin_shell(n: int, c) -> TestFunction:
    """|x|^2 - c."""
    base = squared_norm(n)
    return replace(base, kind="ThinShell", polynomial=base.polynomial - c, value_fn=base.polynomial - c,
                   meta={"c": float(c)})


def sign_product(indices=(0,), dim: int = 1) -> TestFunction:
    """prod sgn(x_i) over indices; gradient is zero away from the kinks."""
    idx = tuple(indices)
    return TestFunction(dim, "SignProduct",
                        lambda x: np.prod(np.sign(x[..., list(idx)]), axis=-1),
                        lambda x: np.zeros(np.shape(x)), meta={"indices": list(idx)})


def custom(dim: int, value_fn, gradient_fn, name: str = "custom") -> TestFunction:
    return TestFunction(dim, "Custom", value_fn, gradient_fn, meta={"name": name})


def random_polynomial(n: int, degree: int, seed: int, stream: int = 0) -> TestFunction:
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"degree must lie in [0, {MAX_DEGREE}]")
    rng = rng_for(seed, stream)
    mons = list(_monomials(n, degree))
    coef = rng.uniform(-1.0, 1.0, size=len(mons))
    return from_polynomial(Polynomial(n, dict(zip(mons, coef.tolist()))), seed=seed, stream=stream, degree=degree)


def thin_shell_function(measure: Measure, seed: int = 0, N: int = 100_000) -> TestFunction:
    m = second_moments(measure, seed, N)
    f = thin_shell(measure.dimension, float(np.sum(m.values)))
    return replace(f, centered_exactly=m.exact, center_se=float(math.sqrt(np.sum(m.standard_errors ** 2))))


def center(f: TestFunction, measure: Measure, seed: int = 0, N: int = 100_000, samples=None) -> TestFunction:
    """Subtract the mean of f under measure: exact for polynomials when possible, else MC."""
    poly = f.shifted_polynomial()
    if poly is not None and measure.exact:
        if all(isinstance(c, (int, Fraction)) for c in poly.terms.values()) and hasattr(measure, "n") \
                and measure.kind in ("RegularSimplex", "CornerSimplex"):
            from .measures import simplex_moment_fraction
            if measure.kind == "RegularSimplex":
                mean = poly.integrate(lambda a: simplex_moment_fraction(measure.n, a))
            else:
                mean = poly.integrate(lambda a: simplex_moment_fraction(measure.n, (0,) + a))
            off = f.center_offset + mean
            return replace(f, center_offset=Fraction(off) if isinstance(off, (int, Fraction)) else off,
                           center_se=0.0, centered_exactly=True)
        mean = poly.integrate(measure.exact_moment)
        return replace(f, center_offset=f.center_offset + float(mean), center_se=0.0, centered_exactly=True)
    x = measure.sample(seed, N, stream=3) if samples is None else samples
    v = f.value(x)
    mean = float(np.mean(v))
    se = float(np.std(v, ddof=1) / math.sqrt(len(v)))
    return replace(f, center_offset=f.center_offset + mean, center_se=se, centered_exactly=False)


def eij_apply(f: TestFunction, p, i: int, j: int):
    """E^{ij} f(p) = d_i f(p) - d_j f(p) on R^{n+1} coordinates of the simplex."""
    g = f.gradient(p)
    return g[..., i] - g[..., j]


def eij_matrix(f: TestFunction, p):
    """All E^{ij} f at once, shape (..., n+1, n+1)."""
    g = f.gradient(p)
    return g[..., :, None] - g[..., None, :]
