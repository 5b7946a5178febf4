"""Convex potentials on R^n and their derivatives up to order three.

All evaluation routines broadcast over leading axes: ``x`` has shape
``(..., n)`` and the results have shapes ``(...)``, ``(..., n)``,
``(..., n, n)`` and ``(..., n, n, n)`` respectively.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import EvaluationDomainError

# Relative central-difference steps per derivative order; scaled by (1 + |x_i|).
GRADIENT_STEP = 1e-7
HESSIAN_STEP = 1e-5
THIRD_STEP = 1e-4

CLOSED_FORM = "closed_form"
FINITE_DIFFERENCE = "finite_difference"

_PERMUTATIONS = list(itertools.permutations(range(3)))


@dataclass(frozen=True)
class Potential:
    """A smooth convex function psi on R^n.

    ``value_fn`` is mandatory. Built-in potentials also carry closed-form
    gradient, Hessian and third-derivative callables; custom potentials may
    supply any subset of them. Callables must accept arrays of shape
    ``(..., n)``.

    In ``finite_difference`` mode every derivative of order k is obtained by
    central differences of the highest available lower-order callable
    (custom potentials keep using whatever callables they supplied).
    """

    dimension: int
    kind: str
    value_fn: Callable[[np.ndarray], np.ndarray]
    gradient_fn: Optional[Callable] = None
    hessian_fn: Optional[Callable] = None
    third_fn: Optional[Callable] = None
    derivative_mode: str = CLOSED_FORM
    fd_steps: tuple = (GRADIENT_STEP, HESSIAN_STEP, THIRD_STEP)

    def __post_init__(self):
        if int(self.dimension) < 1:
            raise ValueError("potential dimension must be >= 1")
        if self.derivative_mode not in (CLOSED_FORM, FINITE_DIFFERENCE):
            raise ValueError(f"unknown derivative mode {self.derivative_mode!r}")

    @property
    def n(self) -> int:
        return self.dimension

    @property
    def closed_form(self) -> bool:
        return self.derivative_mode == CLOSED_FORM and self.third_fn is not None

    def _own(self, fn) -> bool:
        # Custom potentials always use what the user supplied.
        return fn is not None and (self.derivative_mode == CLOSED_FORM or self.kind == "custom")

    def with_finite_differences(self, steps: Optional[tuple] = None) -> "Potential":
        return replace(self, derivative_mode=FINITE_DIFFERENCE,
                       fd_steps=tuple(steps) if steps else self.fd_steps)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dimension,):
            raise ValueError(f"expected trailing dimension {self.dimension}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise EvaluationDomainError("non-finite evaluation point")
        return x

    def value(self, x):
        x = self._check(x)
        return _finite(np.asarray(self.value_fn(x), dtype=float), "value")

    def gradient(self, x):
        x = self._check(x)
        if self._own(self.gradient_fn):
            g = self.gradient_fn(x)
        else:
            g = _fd_gradient(self.value_fn, x, self.fd_steps[0])
        return _finite(np.asarray(g, dtype=float), "gradient")

    def hessian(self, x):
        x = self._check(x)
        if self._own(self.hessian_fn):
            h = self.hessian_fn(x)
        elif self.gradient_fn is not None:
            h = _fd_jacobian(self.gradient_fn, x, self.fd_steps[1])
            h = 0.5 * (h + np.swapaxes(h, -1, -2))
        else:
            h = _fd_hessian_from_value(self.value_fn, x, self.fd_steps[1])
        return _finite(np.asarray(h, dtype=float), "hessian")

    def third(self, x):
        """Fully symmetric third-derivative tensor."""
        x = self._check(x)
        if self._own(self.third_fn):
            t = self.third_fn(x)
        elif self.hessian_fn is not None:
            t = _fd_jacobian(self.hessian_fn, x, self.fd_steps[2])
        else:
            t = _fd_third_from_value(self.value_fn, x, self.fd_steps[2])
        t = _finite(np.asarray(t, dtype=float), "third derivative")
        return symmetrize_third(t)[0]


@dataclass(frozen=True)
class DerivativeBundle:
    value: float | np.ndarray
    gradient: Optional[np.ndarray] = None
    hessian: Optional[np.ndarray] = None
    third: Optional[np.ndarray] = None


def _finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise EvaluationDomainError(f"{what} is not finite at the requested point")
    return arr


def _steps(x, rel):
    return rel * (1.0 + np.abs(x))


def _fd_gradient(fn, x, rel):
    h = _steps(x, rel)
    n = x.shape[-1]
    out = np.empty(x.shape)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        hi = h[..., i:i + 1]
        out[..., i] = (fn(x + hi * e) - fn(x - hi * e)) / (2.0 * h[..., i])
    return out


def _fd_jacobian(fn, x, rel):
    """Central differences of an array-valued callable along each coordinate.

    The differentiated index is placed first among the trailing axes, so for
    a Hessian callable the result is T[..., i, j, k] = d_i H_jk.
    """
    h = _steps(x, rel)
    n = x.shape[-1]
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        hi = h[..., i:i + 1]
        d = (np.asarray(fn(x + hi * e)) - np.asarray(fn(x - hi * e)))
        extra = d.ndim - (x.ndim - 1)
        cols.append(d / (2.0 * h[..., i]).reshape(h.shape[:-1] + (1,) * extra))
    return np.stack(cols, axis=x.ndim - 1)


def _fd_hessian_from_value(fn, x, rel):
    # sum_{s,t = +-1} s t f(x + s h_i e_i + t h_j e_j) / (4 h_i h_j); valid for i == j too.
    h = _steps(x, rel)
    n = x.shape[-1]
    out = np.empty(x.shape + (n,))
    for i in range(n):
        for j in range(i, n):
            acc = 0.0
            for s in (1.0, -1.0):
                for t in (1.0, -1.0):
                    d = np.zeros(x.shape)
                    d[..., i] += s * h[..., i]
                    d[..., j] += t * h[..., j]
                    acc = acc + s * t * fn(x + d)
            out[..., i, j] = out[..., j, i] = acc / (4.0 * h[..., i] * h[..., j])
    return out


def _fd_third_from_value(fn, x, rel):
    h = _steps(x, rel)
    n = x.shape[-1]
    out = np.empty(x.shape + (n, n))
    for i, j, k in itertools.combinations_with_replacement(range(n), 3):
        acc = 0.0
        for s, t, r in itertools.product((1.0, -1.0), repeat=3):
            d = np.zeros(x.shape)
            d[..., i] += s * h[..., i]
            d[..., j] += t * h[..., j]
            d[..., k] += r * h[..., k]
            acc = acc + s * t * r * fn(x + d)
        val = acc / (8.0 * h[..., i] * h[..., j] * h[..., k])
        for a, b, c in set(itertools.permutations((i, j, k))):
            out[..., a, b, c] = val
    return out


def symmetrize_third(raw):
    """Average a (..., n, n, n) tensor over the 6 permutations of its last three axes.

    Returns the symmetric tensor and the largest deviation of ``raw`` from it.
    """
    raw = np.asarray(raw, dtype=float)
    nd = raw.ndim
    lead = tuple(range(nd - 3))
    sym = sum(np.transpose(raw, lead + tuple(nd - 3 + p for p in perm)) for perm in _PERMUTATIONS) / 6.0
    score = float(np.max(np.abs(raw - sym))) if raw.size else 0.0
    return sym, score


# --------------------------------------------------------------------------
# psi(x) = log(1 + sum exp(x_i)), moment map onto the corner simplex.

def _simplex_value(x):
    m = np.maximum(0.0, np.max(x, axis=-1))
    s = np.exp(-m) + np.sum(np.exp(x - m[..., None]), axis=-1)
    return m + np.log(s)


def _simplex_weights(x):
    # v_i = exp(x_i - psi), computed with the same shift as the value.
    m = np.maximum(0.0, np.max(x, axis=-1, keepdims=True))
    e = np.exp(x - m)
    return e / (np.exp(-m) + np.sum(e, axis=-1, keepdims=True))


def _simplex_hessian(x):
    v = _simplex_weights(x)
    return _diag(v) - v[..., :, None] * v[..., None, :]


def _simplex_third(x):
    v = _simplex_weights(x)
    n = v.shape[-1]
    eye = np.eye(n)
    vi = v[..., :, None, None]
    vj = v[..., None, :, None]
    vk = v[..., None, None, :]
    delta3 = np.zeros((n, n, n))
    delta3[np.arange(n), np.arange(n), np.arange(n)] = 1.0
    return (2.0 * vi * vj * vk + vi * delta3
            - (vj * vk * eye[:, :, None] + vi * vj * eye[:, None, :] + vi * vk * eye[None, :, :]))


def _diag(v):
    n = v.shape[-1]
    return v[..., :, None] * np.eye(n)


def simplex_potential(n: int) -> Potential:
    if int(n) < 1:
        raise ValueError("simplex potential needs n >= 1")
    return Potential(int(n), "simplex", _simplex_value, _simplex_weights,
                     _simplex_hessian, _simplex_third)


def simplex_inverse_hessian(x):
    """Closed-form inverse Hessian of the simplex potential."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    total = 1.0 + np.sum(np.exp(x), axis=-1)
    return total[..., None, None] * (1.0 + np.exp(-x)[..., :, None] * np.eye(n))


def simplex_log_det_hessian(x):
    """log det of the simplex-potential Hessian, -(n+1) psi(x) + sum x_j."""
    x = np.asarray(x, dtype=float)
    return -(x.shape[-1] + 1) * _simplex_value(x) + np.sum(x, axis=-1)


# --------------------------------------------------------------------------
# psi(x) = sum exp(x_i), moment map onto the open orthant.

def _exp_value(x):
    return np.sum(np.exp(x), axis=-1)


def _exp_gradient(x):
    return np.exp(x)


def _exp_hessian(x):
    return _diag(np.exp(x))


def _exp_third(x):
    e = np.exp(x)
    n = e.shape[-1]
    out = np.zeros(e.shape + (n, n))
    idx = np.arange(n)
    out[..., idx, idx, idx] = e
    return out


def exponential_potential(n: int) -> Potential:
    if int(n) < 1:
        raise ValueError("exponential potential needs n >= 1")
    return Potential(int(n), "exponential", _exp_value, _exp_gradient, _exp_hessian, _exp_third)


def custom_potential(n: int, value_fn, gradient_fn=None, hessian_fn=None) -> Potential:
    """User potential; derivatives not supplied come from finite differences."""
    return Potential(int(n), "custom", value_fn, gradient_fn, hessian_fn, None,
                     derivative_mode=FINITE_DIFFERENCE)


def evaluate_bundle(pot: Potential, x, order: int = 3) -> DerivativeBundle:
    if order not in (0, 1, 2, 3):
        raise ValueError("order must be between 0 and 3")
    val = pot.value(x)
    grad = pot.gradient(x) if order >= 1 else None
    hess = pot.hessian(x) if order >= 2 else None
    third = pot.third(x) if order >= 3 else None
    return DerivativeBundle(val, grad, hess, third)
