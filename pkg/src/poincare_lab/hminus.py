"""Dual Sobolev norms on an interval and sphere pairing bounds.

The 1-D solve uses the flux form of (rho u')' = -f rho with zero flux at
both ends. In one dimension the flux is an explicit integral,
F(x) = -int_a^x f rho, so the tridiagonal finite-difference system is
solved by a cumulative sum and the squared norm is (1/Z) int F^2 / rho.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import NotCenteredError, RefinementError

DEFAULT_GRID = 4097
RICHARDSON_TOL = 1e-5
SPHERE_TOL = 1e-6
_FD_STEP = 1e-3

ArrayOrFn = Union[np.ndarray, Callable]


@dataclass
class IntervalProblem:
    a: float
    b: float
    density: ArrayOrFn
    f: ArrayOrFn
    G: int = DEFAULT_GRID

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("interval needs a < b")
        if int(self.G) < 3:
            raise ValueError("grid needs at least 3 points")

    def on_grid(self, G: int):
        x = np.linspace(self.a, self.b, G)
        return x, _eval(self.density, x, G, self.G), _eval(self.f, x, G, self.G)


def _eval(obj, x, G, native_G):
    if callable(obj):
        return np.asarray(obj(x), dtype=float) * np.ones_like(x)
    arr = np.asarray(obj, dtype=float)
    if len(arr) == G:
        return arr
    if len(arr) == native_G and (native_G - 1) % (G - 1) == 0:
        return arr[:: (native_G - 1) // (G - 1)]
    raise ValueError("tabulated data cannot be restricted to this grid")


@dataclass
class HMinusResult:
    norm: float
    norm_refined: float
    relative_change: float
    x: np.ndarray
    u: np.ndarray
    mean_removed: float


def _trapz_weights(G, h):
    w = np.full(G, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _solve(x, rho, f, center):
    if np.any(rho <= 0) or not np.all(np.isfinite(rho)):
        raise ValueError("density must be positive and finite on the grid")
    G = len(x)
    h = x[1] - x[0]
    w = _trapz_weights(G, h)
    Z = float(np.sum(w * rho))
    mean = float(np.sum(w * rho * f) / Z)
    scale = max(float(np.sum(w * rho * np.abs(f)) / Z), 1e-300)
    if abs(mean) > 1e-12 * max(scale, 1.0):
        if not center:
            raise NotCenteredError(f"f has mean {mean:.3e} under the density; pass center=True")
        f = f - mean
    else:
        mean = 0.0
    g = f * rho
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * h)])
    cum -= np.linspace(0.0, cum[-1], G)  # removes the O(h^2) trapezoid residue of the centering
    flux = -0.5 * (cum[1:] + cum[:-1])
    rho_mid = 0.5 * (rho[1:] + rho[:-1])
    du = flux / rho_mid
    norm2 = float(np.sum(flux * du) * h / Z)
    u = np.concatenate([[0.0], np.cumsum(du * h)])
    u -= np.sum(w * rho * u) / Z
    return math.sqrt(max(norm2, 0.0)), u, mean


def hminus_solve_1d(problem: IntervalProblem, center: bool = False, check: bool = True) -> HMinusResult:
    G = int(problem.G)
    x, rho, f = problem.on_grid(G)
    norm, u, mean = _solve(x, rho, f, center)
    if callable(problem.density) and callable(problem.f):
        G2 = 2 * G - 1
    elif (G - 1) % 2 == 0:
        G2 = (G + 1) // 2
    else:
        G2 = None
    if G2 is None:
        return HMinusResult(norm, norm, 0.0, x, u, mean)
    x2, rho2, f2 = problem.on_grid(G2)
    norm2, _, _ = _solve(x2, rho2, f2, True)
    rel = abs(norm2 - norm) / max(norm, norm2, 1e-300) if max(norm, norm2) > 0 else 0.0
    if check and rel > RICHARDSON_TOL:
        raise RefinementError(f"grid {G} vs {G2} differ by {rel:.2e} relative")
    fine = norm2 if G2 > G else norm
    return HMinusResult(fine, norm2 if G2 > G else norm, rel, x, u, mean)


def hminus_norm_1d(problem: IntervalProblem, center: bool = False) -> float:
    """||f||_{H^{-1}(nu)} for nu the normalized density on [a, b]."""
    return hminus_solve_1d(problem, center).norm


def dual_pairing_1d(problem: IntervalProblem, g: Callable, dg: Callable, G: Optional[int] = None):
    """(int f g dnu, int g'^2 dnu) by the trapezoid rule; a lower-bound witness for the sup."""
    G = int(G or problem.G)
    x, rho, f = problem.on_grid(G)
    w = _trapz_weights(G, x[1] - x[0])
    Z = np.sum(w * rho)
    f = f - np.sum(w * rho * f) / Z
    return float(np.sum(w * rho * f * g(x)) / Z), float(np.sum(w * rho * dg(x) ** 2) / Z)


def sgn_problem(R: float = 1.0, density: Optional[Callable] = None, G: int = DEFAULT_GRID) -> IntervalProblem:
    return IntervalProblem(-R, R, density or (lambda x: np.ones_like(x)), np.sign, G)


def second_moment_1d(problem: IntervalProblem) -> float:
    x, rho, _ = problem.on_grid(int(problem.G))
    w = _trapz_weights(len(x), x[1] - x[0])
    return float(np.sum(w * rho * x * x) / np.sum(w * rho))


def mixture_problem(p1: IntervalProblem, p2: IntervalProblem, f) -> tuple:
    """Problems for nu1, nu2 and nu = (nu1 + nu2)/2 on a shared grid, with f centered under both.

    The centering subtracts the minimum-norm combination of 1, x, x^2.
    """
    G = int(p1.G)
    x, r1, _ = p1.on_grid(G)
    _, r2, _ = p2.on_grid(G)
    w = _trapz_weights(G, x[1] - x[0])
    r1 = r1 / np.sum(w * r1)
    r2 = r2 / np.sum(w * r2)
    fv = np.asarray(f(x) if callable(f) else f, dtype=float)
    # Remove a low-degree polynomial so that f has zero mean under both densities.
    basis = np.stack([np.ones_like(x), x, x * x], axis=1)
    A = np.stack([(w * r1) @ basis, (w * r2) @ basis])
    rhs = np.array([np.sum(w * r1 * fv), np.sum(w * r2 * fv)])
    coef = np.linalg.lstsq(A, rhs, rcond=None)[0]
    if np.max(np.abs(A @ coef - rhs)) > 1e-12 * max(1.0, float(np.max(np.abs(rhs)))):
        raise ValueError("cannot center f under both densities with a quadratic correction")
    fv = fv - basis @ coef
    mk = lambda r: IntervalProblem(p1.a, p1.b, r, fv, G)
    return mk(r1), mk(r2), mk(0.5 * (r1 + r2))


# --------------------------------------------------------------------------
# Circle dual norm via FFT.

def circle_hminus_norm(values, R: float = 1.0) -> float:
    """H^{-1} norm on the circle of radius R (uniform probability) from equispaced samples."""
    v = np.asarray(values, dtype=float)
    c = np.fft.rfft(v) / len(v)
    m = np.arange(len(c))
    amp = np.abs(c[1:]) ** 2
    amp[:-1] *= 2.0
    if len(v) % 2 == 1:
        amp[-1] *= 2.0
    if abs(c[0]) > 1e-12 * max(1.0, float(np.max(np.abs(v)))):
        return math.inf
    return float(R * math.sqrt(np.sum(amp / m[1:] ** 2)))


def circle_coordinate_check(x_ell: float, M: int = 256):
    """k = 2, n = 1: the H^{-1}(sigma_x) norm of z -> z^1 on the circle of radius sqrt(x) and its bound."""
    R = math.sqrt(x_ell)
    t = 2 * math.pi * np.arange(M) / M
    norm = circle_hminus_norm(R * np.cos(t), R)
    return norm, x_ell / math.sqrt(2.0)


# --------------------------------------------------------------------------
# Sphere pairings.

def _d(fn, t, eta=_FD_STEP):
    # Fourth-order central difference.
    return (-fn(t + 2 * eta) + 8 * fn(t + eta) - 8 * fn(t - eta) + fn(t - 2 * eta)) / (12 * eta)


def _pairing(k: int, theta, h: Callable, order: int, R: float):
    """(lhs, bound, max |h| on the nodes)."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (k,) or abs(np.linalg.norm(theta) - 1) > 1e-12:
        raise ValueError("theta must be a unit vector in R^k")
    if k == 2:
        t = 2 * math.pi * np.arange(order) / order
        pt = lambda s: R * np.stack([np.cos(s), np.sin(s)], axis=-1)
        hv = np.asarray(h(pt(t)), dtype=float)
        lhs = float(np.mean((pt(t) @ theta) * hv))
        grad2 = (_d(lambda s: np.asarray(h(pt(s)), float), t) / R) ** 2
        energy = float(np.mean(grad2))
    elif k == 3:
        u, wu = np.polynomial.legendre.leggauss(order)
        ph = 2 * math.pi * np.arange(2 * order) / (2 * order)
        U, P = np.meshgrid(u, ph, indexing="ij")
        W = np.repeat(wu[:, None] / 2.0, 2 * order, axis=1) / (2 * order)
        th = np.arccos(U)

        def pt(a, b):
            return R * np.stack([np.sin(a) * np.cos(b), np.sin(a) * np.sin(b), np.cos(a)], axis=-1)
        hv = np.asarray(h(pt(th, P)), dtype=float)
        lhs = float(np.sum(W * (pt(th, P) @ theta) * hv))
        dth = _d(lambda s: np.asarray(h(pt(s, P)), float), th)
        dph = _d(lambda s: np.asarray(h(pt(th, s)), float), P)
        grad2 = (dth ** 2 + dph ** 2 / np.sin(th) ** 2) / R ** 2
        energy = float(np.sum(W * grad2))
    else:
        raise ValueError("sphere pairings are implemented for k in {2, 3}")
    bound = R * R / math.sqrt(k * (k - 1)) * math.sqrt(max(energy, 0.0))
    return lhs, bound, float(np.max(np.abs(hv)))


@dataclass
class PairingResult:
    lhs: float
    rhs_bound: float
    holds: bool
    order: int


def _checked_pairing(k, theta, h, order, R):
    l1, b1, _ = _pairing(k, theta, h, order, R)
    l2, b2, hmax = _pairing(k, theta, h, 2 * order, R)
    # Absolute floor at rounding level of R * max|h| (both sides carry those units).
    tol = SPHERE_TOL * max(abs(l2), abs(b2)) + 1e-12 * R * hmax
    if max(abs(l1 - l2), abs(b1 - b2)) > tol:
        raise RefinementError(f"sphere quadrature not converged at order {order}")
    return PairingResult(l2, b2, l2 <= b2 * (1 + SPHERE_TOL) + 1e-14, 2 * order)


def sphere_pairing_check(k: int, theta, h: Callable, order: int = 64) -> PairingResult:
    """Both sides of the unit-sphere eigenfunction bound, with an order-doubling check."""
    return _checked_pairing(k, theta, h, order, 1.0)


def scaled_pairing_check(k: int, R: float, theta, h: Callable, order: int = 64) -> PairingResult:
    """Radius-R version; checked against R times the unit-sphere result for h(R .)."""
    res = _checked_pairing(k, theta, h, order, float(R))
    unit = _checked_pairing(k, theta, lambda y: h(R * np.asarray(y)), order, 1.0)
    tol = 1e-8 * max(abs(res.lhs), abs(res.rhs_bound), 1e-12)
    if abs(res.lhs - R * unit.lhs) > tol or abs(res.rhs_bound - R * unit.rhs_bound) > tol:
        raise RefinementError("radius scaling law violated")
    return res
