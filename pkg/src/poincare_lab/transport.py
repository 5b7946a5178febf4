"""Moment map, transport density and the Q*/Q quadratic forms of a potential.

Conventions: ``Q*`` carries no 1/4 factor and ``Q`` carries the factor 4,
so that Q(U) = 4 w^T M^+ w with w = Hess(psi) U and M the Q* matrix.
Everything here is evaluated at points x of the R^n chart; points of the
convex body K enter through the inverse moment map.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConvergenceError, EvaluationDomainError, ModelViolationError
from .potentials import Potential

PINV_CUTOFF = 1e-10
SINGULAR_DELTA = 1e-7
NEWTON_MAX_ITER = 200
LOG_DENSITY_STEP_EXACT = 1e-5
LOG_DENSITY_STEP_FD = 1e-2


def moment_map(pot: Potential, x):
    return pot.gradient(x)


def check_moment_domain(pot: Potential, y) -> np.ndarray:
    """Reject points outside the open image of the moment map (built-ins only)."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise EvaluationDomainError("non-finite point of K")
    if pot.kind == "simplex":
        ok = np.all(y > 0, axis=-1) & (np.sum(y, axis=-1) < 1.0)
    elif pot.kind == "exponential":
        ok = np.all(y > 0, axis=-1)
    else:
        return y
    if not np.all(ok):
        raise EvaluationDomainError("point lies on the boundary of or outside the moment image")
    return y


def inverse_moment_map(pot: Potential, y, tol: float = 1e-10, max_iter: int = NEWTON_MAX_ITER):
    """Solve grad psi(x) = y by damped Newton on x -> psi(x) - <x, y>.

    Starts at x = 0 for every point; the step is halved until the objective
    (or, in the rounding-dominated regime, the residual) decreases.
    Accepts a single point or a batch of shape (N, n).
    """
    y = check_moment_domain(pot, y)
    single = y.ndim == 1
    Y = np.atleast_2d(y)
    X = np.zeros_like(Y)
    thresh = tol * (1.0 + np.max(np.abs(Y), axis=-1))

    def objective(x, yy):
        return pot.value(x) - np.sum(x * yy, axis=-1)

    active = np.ones(len(Y), dtype=bool)
    for _ in range(max_iter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        x, yy = X[idx], Y[idx]
        g = pot.gradient(x) - yy
        res = np.max(np.abs(g), axis=-1)
        H = pot.hessian(x)
        step = -np.linalg.solve(H, g[..., None])[..., 0]
        # Converged once the residual meets the tolerance and the Newton step is negligible.
        small = np.max(np.abs(step), axis=-1) <= 1e-13 * (1.0 + np.max(np.abs(x), axis=-1))
        done = (res <= thresh[idx]) & (small | (res == 0))
        active[idx[done]] = False
        if np.all(done):
            break
        keep = ~done
        idx, x, yy, g, H, step = idx[keep], x[keep], yy[keep], g[keep], H[keep], step[keep]
        within = res[keep] <= thresh[idx]
        f0 = objective(x, yy)
        gnorm = np.linalg.norm(g, axis=-1)
        t = np.ones(len(idx))
        pending = np.ones(len(idx), dtype=bool)
        for _ in range(60):
            p = np.nonzero(pending)[0]
            if p.size == 0:
                break
            trial = x[p] + t[p, None] * step[p]
            with np.errstate(over="ignore", invalid="ignore"):
                try:
                    f1 = objective(trial, yy[p])
                    g1 = np.linalg.norm(pot.gradient(trial) - yy[p], axis=-1)
                except EvaluationDomainError:
                    f1 = np.full(p.size, np.inf)
                    g1 = np.full(p.size, np.inf)
            decrease = np.sum(g[p] * step[p], axis=-1) * t[p]
            ok = np.isfinite(f1) & ((f1 <= f0[p] + 1e-4 * decrease) | (g1 < gnorm[p]))
            x[p[ok]] = trial[ok]
            pending[p[ok]] = False
            t[p[~ok]] *= 0.5
        # No further progress possible at rounding level: accept the current point.
        active[idx[pending & within]] = False
        X[idx] = x
    else:
        g = pot.gradient(X[active]) - Y[active]
        if np.any(np.max(np.abs(g), axis=-1) > thresh[active]):
            raise ConvergenceError(f"Newton did not converge in {max_iter} iterations")
    return X[0] if single else X


def transport_density(pot: Potential, x):
    """rho_psi(x) = det Hess psi(x)."""
    sign, logdet = np.linalg.slogdet(pot.hessian(x))
    if np.any(sign <= 0):
        raise ModelViolationError("Hessian determinant is not positive")
    return np.exp(logdet)


def _log_det(pot, x):
    sign, logdet = np.linalg.slogdet(pot.hessian(x))
    if np.any(sign <= 0):
        raise ModelViolationError("Hessian determinant is not positive")
    return logdet


def log_density_gradient(pot: Potential, x):
    """d_a log rho = sum_{l,m} psi^{lm} psi_{alm}."""
    Hinv = np.linalg.inv(pot.hessian(x))
    return np.einsum("...lm,...alm->...a", Hinv, pot.third(x))


def log_density_hessian(pot: Potential, x):
    """Hessian of log rho_psi by central differences.

    With exact third derivatives the analytic gradient of log rho is
    differenced once; otherwise log det is second-differenced with a
    coarse step, because the Hessian itself is already a difference quotient.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if pot.closed_form:
        h = LOG_DENSITY_STEP_EXACT * (1.0 + np.abs(x))
        cols = []
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            hi = h[..., i:i + 1]
            d = log_density_gradient(pot, x + hi * e) - log_density_gradient(pot, x - hi * e)
            cols.append(d / (2.0 * hi))
        L = np.stack(cols, axis=-1)
    else:
        h = LOG_DENSITY_STEP_FD * (1.0 + np.abs(x))
        L = np.empty(x.shape + (n,))
        for i in range(n):
            for j in range(i, n):
                acc = 0.0
                for s in (1.0, -1.0):
                    for t in (1.0, -1.0):
                        d = np.zeros(x.shape)
                        d[..., i] += s * h[..., i]
                        d[..., j] += t * h[..., j]
                        acc = acc + s * t * _log_det(pot, x + d)
                L[..., i, j] = L[..., j, i] = acc / (4.0 * h[..., i] * h[..., j])
    return 0.5 * (L + np.swapaxes(L, -1, -2))


def ricci_matrix(pot: Potential, x):
    """-1/2 Hess(log rho_psi)."""
    return -0.5 * log_density_hessian(pot, x)


@dataclass
class LogConcavityReport:
    max_eigenvalues: np.ndarray
    tolerance: float
    passed: bool

    @property
    def worst(self) -> float:
        return float(np.max(self.max_eigenvalues)) if self.max_eigenvalues.size else 0.0


def log_concavity_probe(pot: Potential, probe_points, tol: float = 1e-6) -> LogConcavityReport:
    pts = np.atleast_2d(np.asarray(probe_points, dtype=float))
    L = log_density_hessian(pot, pts)
    eig = np.linalg.eigvalsh(L)
    scale = np.maximum(1.0, np.max(np.abs(L), axis=(-1, -2)))
    top = eig[..., -1] / scale
    return LogConcavityReport(top, tol, bool(np.all(top <= tol)))


def _checked_inverse(H):
    cond = np.linalg.cond(H)
    if np.any(~np.isfinite(cond)) or np.any(cond > 1e14):
        raise ModelViolationError("Hessian is singular to working precision")
    return np.linalg.inv(H)


def christoffel_contraction(pot: Potential, x):
    """C[..., l, j, k] = sum_m psi^{lm} psi_{jkm}."""
    Hinv = _checked_inverse(pot.hessian(x))
    return np.einsum("...lm,...jkm->...ljk", Hinv, pot.third(x))


def qstar_from_christoffel(C):
    # M_ij = sum_{k,l} C^l_{jk} C^k_{il}
    M = np.einsum("...ljk,...kil->...ij", C, C)
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def qstar_matrix(pot: Potential, x):
    """Matrix M with Q*_{psi, grad psi(x)}(V) = V^T M V."""
    return qstar_from_christoffel(christoffel_contraction(pot, x))


def simplex_qstar_closed_form(x):
    """Closed form of the Q* matrix for psi = log(1 + sum e^{x_i})."""
    from .potentials import _simplex_weights
    v = _simplex_weights(np.asarray(x, dtype=float))
    n = v.shape[-1]
    vi = v[..., :, None]
    vj = v[..., None, :]
    return (n + 3) * vi * vj - vi - vj + np.eye(n) * (1.0 - 2.0 * vi)


@dataclass
class QFormField:
    """Precomputed spectral data of Q* at a batch of points of K.

    ``evaluate(U)`` returns Q(U) for direction arrays broadcastable to the
    batch, +inf where the Hessian-image of U leaves the retained eigenspace.
    """

    y: np.ndarray
    x: np.ndarray
    hessian: np.ndarray
    qstar: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    tau: float = PINV_CUTOFF

    @property
    def keep(self):
        lam_max = np.max(self.eigenvalues, axis=-1, keepdims=True)
        return self.eigenvalues > self.tau * lam_max

    @property
    def rank(self):
        return np.sum(self.keep, axis=-1)

    def evaluate(self, U):
        U = np.asarray(U, dtype=float)
        w = np.einsum("...ij,...j->...i", self.hessian, U)
        coef = np.einsum("...ia,...i->...a", self.eigenvectors, w)
        keep = self.keep
        lam = np.where(keep, self.eigenvalues, 1.0)
        finite_part = 4.0 * np.sum(np.where(keep, coef ** 2 / lam, 0.0), axis=-1)
        resid = np.sqrt(np.sum(np.where(keep, 0.0, coef ** 2), axis=-1))
        wnorm = np.linalg.norm(w, axis=-1)
        outside = resid > np.sqrt(self.tau) * wnorm
        return np.where(outside, np.inf, finite_part)

    def maximizer(self, U):
        """V* = M^+ w / sqrt(w^T M^+ w), attaining the supremum defining Q(U)."""
        U = np.asarray(U, dtype=float)
        w = np.einsum("...ij,...j->...i", self.hessian, U)
        coef = np.einsum("...ia,...i->...a", self.eigenvectors, w)
        keep = self.keep
        lam = np.where(keep, self.eigenvalues, 1.0)
        mw = np.einsum("...ia,...a->...i", self.eigenvectors, np.where(keep, coef / lam, 0.0))
        norm = np.sqrt(np.maximum(np.sum(mw * w, axis=-1), 0.0))
        return mw / np.where(norm > 0, norm, 1.0)[..., None]


def qform_field(pot: Potential, y, tau: float = PINV_CUTOFF, x=None) -> QFormField:
    y = np.asarray(y, dtype=float)
    if x is None:
        x = inverse_moment_map(pot, y)
    H = pot.hessian(x)
    M = qstar_matrix(pot, x)
    lam, vec = np.linalg.eigh(M)
    return QFormField(y, x, H, M, lam, vec, tau)


def q_form(pot: Potential, y, U, tau: float = PINV_CUTOFF):
    """Q_{psi,y}(U) in [0, +inf]."""
    fld = qform_field(pot, y, tau)
    out = fld.evaluate(U)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class QuadraticFormReport:
    base_point_in_K: np.ndarray
    preimage_x: np.ndarray
    qstar_matrix: np.ndarray
    eigenvalues: np.ndarray
    rank: int
    q_values: list = field(default_factory=list)


def quadratic_form_report(pot: Potential, y, directions=(), tau: float = PINV_CUTOFF) -> QuadraticFormReport:
    fld = qform_field(pot, np.asarray(y, dtype=float), tau)
    vals = [(np.asarray(U, dtype=float), float(fld.evaluate(U))) for U in directions]
    return QuadraticFormReport(fld.y, fld.x, fld.qstar, fld.eigenvalues[::-1].copy(),
                               int(fld.rank), vals)


def full_simplex_coords(y):
    """(y_0, y_1, ..., y_n) with y_0 = 1 - sum y_j."""
    y = np.asarray(y, dtype=float)
    return np.concatenate([1.0 - np.sum(y, axis=-1, keepdims=True), y], axis=-1)


def nudge_off_singular_set(y, delta: float = SINGULAR_DELTA):
    """Move points with some |1 - 2 y_k| < delta (k = 0..n) toward the barycenter.

    Returns the adjusted points and a boolean flag per point.
    """
    y = np.array(y, dtype=float, copy=True)
    full = full_simplex_coords(y)
    flag = np.min(np.abs(1.0 - 2.0 * full), axis=-1) < delta
    if np.any(flag):
        n = y.shape[-1]
        bary = np.full(n + 1, 1.0 / (n + 1))
        for _ in range(8):
            sel = np.nonzero(np.min(np.abs(1.0 - 2.0 * full_simplex_coords(y)), axis=-1) < delta)[0]
            if sel.size == 0:
                break
            full_sel = full_simplex_coords(y[sel])
            d = bary - full_sel
            d /= np.linalg.norm(d, axis=-1, keepdims=True)
            y[sel] = (full_sel + 10.0 * delta * d)[:, 1:]
    return y, flag


def simplex_q_form_batch(y, U, delta: float = SINGULAR_DELTA):
    """Closed-form Q on the corner simplex; returns (values, singular flags).

    Q/4 = sum_i a_i U_i^2 - (sum_i a_i U_i)^2 / sum_{k=0}^n a_k with
    a_k = y_k^2 / (1 - 2 y_k) and y_0 = 1 - sum y_j.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or np.any(np.sum(y, axis=-1) >= 1.0):
        raise EvaluationDomainError("point is not interior to the corner simplex")
    y, flag = nudge_off_singular_set(y, delta)
    U = np.asarray(U, dtype=float)
    full = full_simplex_coords(y)
    a = full ** 2 / (1.0 - 2.0 * full)
    s = np.sum(a, axis=-1)
    ai = a[..., 1:]
    quad = np.sum(ai * U ** 2, axis=-1)
    lin = np.sum(ai * U, axis=-1)
    val = 4.0 * (quad - lin ** 2 / s)
    scale = 4.0 * np.sum(np.abs(ai) * U ** 2, axis=-1)
    band = (val < 0) & (val >= -1e-9 * scale)
    val = np.where(band, 0.0, val)
    return val, flag


def simplex_q_form(y, U, delta: float = SINGULAR_DELTA) -> float:
    val, _ = simplex_q_form_batch(np.asarray(y, dtype=float)[None], np.asarray(U, dtype=float)[None], delta)
    return float(val[0])


def pairwise_simplex_weights(p, delta: float = SINGULAR_DELTA):
    """Weights of |E^{ij} f|^2 over unordered pairs i < j of a point of the regular simplex.

    w_ij = 4 a_i a_j / sum_k a_k with a_k = p_k^2 / (1 - 2 p_k). Returns
    (weights of shape (..., n+1, n+1), singular flags).
    """
    p = np.asarray(p, dtype=float)
    y, flag = nudge_off_singular_set(p[..., 1:], delta)
    full = full_simplex_coords(y)
    a = full ** 2 / (1.0 - 2.0 * full)
    s = np.sum(a, axis=-1)
    w = 4.0 * a[..., :, None] * a[..., None, :] / s[..., None, None]
    return w, flag


# --------------------------------------------------------------------------
# Bakry-Emery-Ricci condition (star).

@dataclass
class StarConditionReport:
    probe_points: np.ndarray
    min_eigenvalues: np.ndarray
    scales: np.ndarray
    min_eigenvalue_overall: float
    passed: bool


@dataclass(frozen=True)
class Weight:
    """A weight phi on the R^n chart, optionally with analytic derivatives."""

    value: Callable
    gradient: Optional[Callable] = None
    hessian: Optional[Callable] = None
    name: str = "custom"

    def grad(self, x):
        if self.gradient is not None:
            return np.asarray(self.gradient(x), dtype=float)
        from .potentials import _fd_gradient
        return _fd_gradient(self.value, np.asarray(x, dtype=float), 1e-6)

    def hess(self, x):
        if self.hessian is not None:
            return np.asarray(self.hessian(x), dtype=float)
        from .potentials import _fd_hessian_from_value
        return _fd_hessian_from_value(self.value, np.asarray(x, dtype=float), 1e-3)


def constant_weight(c: float = 0.0) -> Weight:
    return Weight(lambda x: np.full(np.shape(x)[:-1], float(c)),
                  lambda x: np.zeros(np.shape(x)),
                  lambda x: np.zeros(np.shape(x) + (np.shape(x)[-1],)),
                  name="const")


def exp_weight(a: float) -> Weight:
    """phi(x) = sum_i exp(a x_i)."""
    def hess(x):
        e = a * a * np.exp(a * np.asarray(x))
        return e[..., :, None] * np.eye(np.shape(x)[-1])
    return Weight(lambda x: np.sum(np.exp(a * np.asarray(x)), axis=-1),
                  lambda x: a * np.exp(a * np.asarray(x)), hess, name=f"exp({a}x)")


def star_condition_matrix(pot: Potential, phi, x):
    """phi_il - 1/2 sum_k C^k_il phi_k - 1/2 d_i d_l log rho_psi at x (R^n chart)."""
    if not isinstance(phi, Weight):
        phi = Weight(phi)
    x = np.asarray(x, dtype=float)
    C = christoffel_contraction(pot, x)
    L = log_density_hessian(pot, x)
    A = phi.hess(x) - 0.5 * np.einsum("...kil,...k->...il", C, phi.grad(x)) - 0.5 * L
    return 0.5 * (A + np.swapaxes(A, -1, -2)), (np.abs(phi.hess(x)), np.abs(L))


def star_condition_check(pot: Potential, phi, probe_points, rel_tol: float = 1e-8) -> StarConditionReport:
    """Batch checker: PSD up to rel_tol times the matrix scale at every probe."""
    if not isinstance(phi, Weight):
        phi = Weight(phi)
    pts = np.atleast_2d(np.asarray(probe_points, dtype=float))
    A, (hphi, hlog) = star_condition_matrix(pot, phi, pts)
    C = christoffel_contraction(pot, pts)
    cphi = np.abs(0.5 * np.einsum("...kil,...k->...il", C, phi.grad(pts)))
    scale = np.max(np.maximum(np.maximum(hphi, 0.5 * hlog), cphi), axis=(-1, -2))
    scale = np.where(scale > 0, scale, 1.0)
    # The metric Hess(psi) sets a floor on the scale, so rounding noise in a vanishing matrix passes.
    scale = np.maximum(scale, np.max(np.abs(pot.hessian(pts)), axis=(-1, -2)))
    mins = np.linalg.eigvalsh(A)[..., 0]
    ok = mins >= -rel_tol * scale
    return StarConditionReport(pts, mins, scale, float(np.min(mins)), bool(np.all(ok)))
