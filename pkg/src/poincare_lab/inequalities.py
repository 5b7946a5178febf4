"""Estimate both sides of each inequality, run hypothesis gates, issue verdicts.

Every evaluator takes a centered test function and a ``SampleSet`` (Monte
Carlo points, tensor quadrature with a coarser companion grid, or nothing
for the exact path) and returns a :class:`Verdict`.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from . import measures as ms
from . import testfuncs as tf
from .errors import CapabilityError
from .potentials import Potential
from .transport import (Weight, inverse_moment_map, log_concavity_probe, nudge_off_singular_set,
                        pairwise_simplex_weights, qform_field, simplex_q_form_batch, star_condition_check)

Z_THRESHOLD = 4.0
EXACT_SE_FLOOR = 1e-14
DEFAULT_N = 100_000
PASS, FAIL, INCONCLUSIVE = "PASS", "FAIL", "INCONCLUSIVE"


def thm11_constant(k: float) -> float:
    return k * k / (k - 1.0)


@dataclass
class Verdict:
    variant: str
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    margin: float
    z_margin: float
    status: str
    flagged_singular_fraction: float = 0.0
    gates: list = field(default_factory=list)
    estimator: dict = field(default_factory=dict)
    probe: dict = field(default_factory=dict)

    @property
    def gates_passed(self) -> bool:
        return all(ok for _, ok in self.gates)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "lhs_estimate": _jsonable(self.lhs), "lhs_se": _jsonable(self.lhs_se),
            "rhs_estimate": _jsonable(self.rhs), "rhs_se": _jsonable(self.rhs_se),
            "margin": _jsonable(self.margin), "z_margin": _jsonable(self.z_margin),
            "status": self.status,
            "flagged_singular_fraction": self.flagged_singular_fraction,
            "hypothesis_gates": [[n, bool(ok)] for n, ok in self.gates],
            "estimator": self.estimator,
            "probe": self.probe,
        }


def _jsonable(v):
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def make_verdict(variant, lhs, lhs_se, rhs, rhs_se, gates=(), estimator=None, flagged=0.0, probe=None) -> Verdict:
    lhs, rhs = float(lhs), float(rhs)
    if rhs == math.inf and math.isfinite(lhs):
        return Verdict(variant, lhs, lhs_se, rhs, rhs_se, math.inf, math.inf, PASS, flagged,
                       list(gates), estimator or {}, probe or {})
    margin = rhs - lhs
    se = math.hypot(lhs_se, rhs_se)
    if not all(math.isfinite(v) for v in (lhs, rhs, lhs_se, rhs_se)):
        return Verdict(variant, lhs, lhs_se, rhs, rhs_se, margin, math.nan, INCONCLUSIVE, flagged,
                       list(gates), estimator or {}, probe or {})
    if se > 0:
        z = margin / se
    else:
        z = 0.0 if margin == 0 else math.copysign(math.inf, margin)
    if z < -Z_THRESHOLD:
        status = FAIL
    elif margin >= -Z_THRESHOLD * se:
        status = PASS
    else:
        status = INCONCLUSIVE
    return Verdict(variant, lhs, lhs_se, rhs, rhs_se, margin, z, status, flagged,
                   list(gates), estimator or {}, probe or {})


# --------------------------------------------------------------------------
# Sample sets and reductions.

@dataclass
class SampleSet:
    """Points shared by all probes of a suite.

    mode 'mc': equally weighted samples; 'quadrature': weighted nodes plus a
    coarse companion grid used for the refinement error.
    """

    mode: str
    points: np.ndarray
    weights: Optional[np.ndarray] = None
    coarse: Optional["SampleSet"] = None
    info: dict = field(default_factory=dict)
    cache: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.points)


def mc_samples(measure: ms.Measure, N: int = DEFAULT_N, seed: int = 0, stream: int = 0) -> SampleSet:
    return SampleSet("mc", measure.sample(seed, N, stream),
                     info={"mode": "mc", "N": int(N), "seed": int(seed), "stream": int(stream)})


def default_quadrature_nodes(n: int) -> int:
    return {1: 200, 2: 200, 3: 100, 4: 30}.get(n, 0)


def quadrature_samples(measure: ms.OrthantProduct, nodes: Optional[int] = None) -> SampleSet:
    n = measure.dimension
    nodes = nodes or default_quadrature_nodes(n)
    if not nodes:
        raise CapabilityError("tensor quadrature is limited to n <= 4")
    fine = ms.quadrature_grid(measure, nodes)
    coarse = ms.quadrature_grid(measure, max(2, nodes // 2))
    c = SampleSet("quadrature", coarse.nodes, coarse.weights / coarse.mass)
    return SampleSet("quadrature", fine.nodes, fine.weights / fine.mass, coarse=c,
                     info={"mode": "quadrature", "nodes": int(nodes)})


def _reduce(ss: SampleSet, fvals, rvals, center_se: float = 0.0):
    """(lhs, lhs_se, rhs, rhs_se) from f values and RHS integrand values."""
    fvals = np.asarray(fvals, dtype=float)
    rvals = np.asarray(rvals, dtype=float)
    if ss.mode == "mc":
        N = len(fvals)
        dev = fvals - fvals.mean()
        lhs = float(np.sum(dev ** 2) / (N - 1))
        lhs_se = float(np.std(dev ** 2, ddof=1) / math.sqrt(N))
        if np.any(np.isinf(rvals)):
            rhs, rhs_se = math.inf, 0.0
        else:
            rhs = float(rvals.mean())
            rhs_se = float(rvals.std(ddof=1) / math.sqrt(N))
        return lhs, math.hypot(lhs_se, center_se ** 2), rhs, rhs_se
    w = ss.weights
    mean = float(np.sum(w * fvals))
    lhs = float(np.sum(w * (fvals - mean) ** 2))
    rhs = float(np.sum(w * rvals)) if not np.any(np.isinf(rvals)) else math.inf
    return lhs, 0.0, rhs, 0.0


def _reduce_with_refinement(ss: SampleSet, integrands: Callable, center_se: float = 0.0):
    fv, rv, flagged = integrands(ss)
    lhs, lse, rhs, rse = _reduce(ss, fv, rv, center_se)
    if ss.mode == "quadrature" and ss.coarse is not None:
        cfv, crv, _ = integrands(ss.coarse)
        clhs, _, crhs, _ = _reduce(ss.coarse, cfv, crv)
        scale = max(abs(lhs), abs(rhs), 1e-300)
        lse = max(abs(lhs - clhs), EXACT_SE_FLOOR * scale)
        rse = max(abs(rhs - crhs), EXACT_SE_FLOOR * scale) if math.isfinite(rhs) else 0.0
        lse = math.hypot(lse, center_se ** 2)
    return lhs, lse, rhs, rse, flagged


def _evaluate(variant, ss, integrands, f, gates, extra_probe=None):
    lhs, lse, rhs, rse, flagged = _reduce_with_refinement(ss, integrands, f.center_se)
    probe = {"kind": f.kind, "center_offset": float(f.center_offset), "center_se": f.center_se}
    if f.polynomial is not None:
        probe["polynomial"] = f.polynomial.to_json()
    probe.update(extra_probe or {})
    return make_verdict(variant, lhs, lse, rhs, rse, gates, dict(ss.info), flagged, probe)


# --------------------------------------------------------------------------
# Gates.

def orthant_phi(measure: ms.OrthantProduct) -> Callable:
    """phi = -log density (unnormalized) of a separable orthant measure."""
    return lambda x: -measure.log_density(x)


def gates_thm11(measure: ms.OrthantProduct, k: float, seed: int = 0):
    rep = ms.p_convexity_probe(orthant_phi(measure), 1.0 / k, seed=seed, n=measure.dimension,
                               name=f"1/{k:g}-convexity")
    return [rep.as_gate()]


def gates_thm61(measure: ms.OrthantProduct, ks: Sequence[float], seed: int = 0):
    ks = np.asarray(ks, dtype=float)
    rep = ms.p_convexity_probe(orthant_phi(measure), 1.0, seed=seed, n=measure.dimension, exponents=ks,
                               name="convexity of phi(x^k)")
    return [("k_i>1", bool(np.all(ks > 1))), rep.as_gate()]


def gates_cor12(setm: ms.BoxedSet, ell: float, seed: int = 0):
    phi = ms.set_indicator_phi(setm.indicator)
    rep = ms.p_convexity_probe(phi, 1.0 / ell, seed=seed, n=setm.dimension, name=f"1/{ell:g}-convex set")
    return [("ell>1", ell > 1), rep.as_gate()]


def lp_orthant_phi(p: float) -> Callable:
    return ms.set_indicator_phi(lambda x: np.sum(np.abs(x) ** p, axis=-1) <= 1.0)


def gates_thm13(measure, k: int, seed: int = 0):
    n = measure.dimension
    if isinstance(measure, ms.LpBall):
        phi = lp_orthant_phi(measure.p)
        member = lambda x: measure.contains(x).astype(float)
    else:
        phi = getattr(measure, "orthant_phi")
        member = lambda x: phi(np.abs(x))
    g = [ms.unconditional_probe(member, n, seed, name="unconditional measure", scale=1.0).as_gate(),
         ms.increasing_probe(phi, n, seed).as_gate(),
         ms.p_convexity_probe(phi, 1.0 / k, seed=seed, n=n, name=f"1/{k}-convexity").as_gate()]
    return g


def gates_thm45(phi, q, n, seed: int = 0):
    hom = ms.homogeneity_check(phi, q, n, seed)
    conv = ms.p_convexity_probe(phi, 0.5, seed=seed, n=n + 1, name="1/2-convexity")
    return [("homogeneity", hom.passed), conv.as_gate(), ("Mq<=n", hom.gate_passed)], hom


def gates_prop36(pot: Potential, phi: Weight, probes_x, seed: int = 0):
    star = star_condition_check(pot, phi, probes_x)
    lc = log_concavity_probe(pot, probes_x)
    return [("star-condition", star.passed), ("log-concave density", lc.passed)], star


# --------------------------------------------------------------------------
# Evaluators.

def _grad_sq_weighted(x, g, coef):
    return np.sum(coef * x ** 2 * g ** 2, axis=-1)


def evaluate_thm11(measure, f: tf.TestFunction, k: int, samples: Optional[SampleSet] = None,
                   gates=None, seed: int = 0) -> Verdict:
    if int(k) != k or k < 2:
        raise ValueError("k must be an integer >= 2")
    ss = samples or default_samples_orthant(measure, seed)
    gates = gates_thm11(measure, k, seed) if gates is None else gates
    c = thm11_constant(k)

    def integrands(s):
        x = s.points
        return f.value(x), _grad_sq_weighted(x, f.gradient(x), c), 0.0
    return _evaluate("Thm11", ss, integrands, f, gates, {"k": k})


def evaluate_thm61(measure, f: tf.TestFunction, ks, samples: Optional[SampleSet] = None,
                   gates=None, seed: int = 0) -> Verdict:
    ks = np.asarray(ks, dtype=float)
    if np.any(ks <= 1):
        raise ValueError("every k_i must exceed 1")
    ss = samples or default_samples_orthant(measure, seed)
    gates = gates_thm61(measure, ks, seed) if gates is None else gates
    c = ks * ks / (ks - 1.0)

    def integrands(s):
        x = s.points
        return f.value(x), _grad_sq_weighted(x, f.gradient(x), c), 0.0
    return _evaluate("Thm61", ss, integrands, f, gates, {"k": ks.tolist()})


def evaluate_cor12(setm: ms.BoxedSet, f: tf.TestFunction, ell: float, samples: Optional[SampleSet] = None,
                   gates=None, seed: int = 0, N: int = DEFAULT_N) -> Verdict:
    ss = samples or mc_samples(setm, N, seed)
    gates = gates_cor12(setm, ell, seed) if gates is None else gates
    c = thm11_constant(ell)

    def integrands(s):
        x = s.points
        return f.value(x), _grad_sq_weighted(x, f.gradient(x), c), 0.0
    return _evaluate("Cor12", ss, integrands, f, gates, {"ell": ell})


def evaluate_thm13(measure, f: tf.TestFunction, k: int, unconditional_f: bool = False,
                   samples: Optional[SampleSet] = None, gates=None, seed: int = 0, N: int = DEFAULT_N,
                   second: Optional[ms.MomentEstimate] = None) -> Verdict:
    ss = samples or mc_samples(measure, N, seed)
    gates = list(gates_thm13(measure, k, seed) if gates is None else gates)
    V = second or ss.cache.get("second_moments") or ms.second_moments(measure, seed, N)
    ss.cache["second_moments"] = V
    drop_v = False
    if unconditional_f:
        rep = ms.unconditional_probe(f.value, measure.dimension, seed, name="unconditional f")
        gates.append(rep.as_gate())
        drop_v = rep.passed
    c = thm11_constant(k)
    Vv = np.zeros_like(V.values) if drop_v else V.values

    def integrands(s):
        x = s.points
        g2 = f.gradient(x) ** 2
        return f.value(x), np.sum((c * x ** 2 + Vv) * g2, axis=-1), 0.0
    verdict = _evaluate("Thm13", ss, integrands, f, gates, {"k": k, "V_dropped": drop_v})
    if not drop_v and not V.exact:
        g2m = np.mean(f.gradient(ss.points) ** 2, axis=0)
        extra = float(np.sqrt(np.sum((V.standard_errors * g2m) ** 2)))
        verdict = make_verdict("Thm13", verdict.lhs, verdict.lhs_se, verdict.rhs,
                               math.hypot(verdict.rhs_se, extra), verdict.gates, verdict.estimator,
                               verdict.flagged_singular_fraction, verdict.probe)
    return verdict


def _pair_terms(f, p, weights):
    E = tf.eij_matrix(f, p)
    iu = np.triu_indices(p.shape[-1], k=1)
    return np.sum(weights[..., iu[0], iu[1]] * E[..., iu[0], iu[1]] ** 2, axis=-1)


def _thm43_weights(ss: SampleSet):
    if "thm43" not in ss.cache:
        ss.cache["thm43"] = pairwise_simplex_weights(ss.points)
    return ss.cache["thm43"]


def evaluate_thm43(f: tf.TestFunction, samples: SampleSet, variant: str = "Thm43", gates=()) -> Verdict:
    """f lives on R^{n+1} coordinates of the regular simplex."""
    def integrands(s):
        w, flag = _thm43_weights(s)
        p = s.points
        return f.value(p), _pair_terms(f, p, w), float(np.mean(flag))
    return _evaluate(variant, samples, integrands, f, list(gates))


def evaluate_cor42(g: tf.TestFunction, samples: SampleSet, gates=()) -> Verdict:
    """g lives on corner-simplex coordinates y_1..y_n."""
    def integrands(s):
        y = s.points
        q, flag = simplex_q_form_batch(y, g.gradient(y))
        return g.value(y), q, float(np.mean(flag))
    return _evaluate("Cor42", samples, integrands, g, list(gates))


def evaluate_cor44_mc(f: tf.TestFunction, samples: SampleSet) -> Verdict:
    n = samples.points.shape[-1] - 1

    def integrands(s):
        p = s.points
        w = p[..., :, None] * p[..., None, :] / (n + 1)
        return f.value(p), _pair_terms(f, p, w), 0.0
    return _evaluate("Cor44", samples, integrands, f, [])


def cor44_exact(f: tf.TestFunction, n: int):
    """Exact (LHS, RHS) of the projective-space bound for a polynomial f on the n-simplex."""
    poly = f.shifted_polynomial()
    if poly is None:
        raise CapabilityError("exact path needs a polynomial test function")
    if poly.n != n + 1:
        raise ValueError("polynomial must be written in the n+1 simplex coordinates")
    mom = lambda a: ms.simplex_moment_fraction(n, a)
    mean = poly.integrate(mom)
    lhs = (poly * poly).integrate(mom) - mean * mean
    rhs = 0
    d = [poly.derivative(i) for i in range(n + 1)]
    for i in range(n + 1):
        for j in range(i + 1, n + 1):
            e = d[i] - d[j]
            xixj = tf.Polynomial.coordinate(n + 1, i) * tf.Polynomial.coordinate(n + 1, j)
            rhs = rhs + (xixj * e * e).integrate(mom)
    return lhs, rhs * Fraction(1, n + 1)


def evaluate_cor44_exact(f: tf.TestFunction, n: int) -> Verdict:
    lhs, rhs = cor44_exact(f, n)
    lf, rf = float(lhs), float(rhs)
    scale = max(abs(lf), abs(rf))
    exact_fraction = isinstance(lhs, Fraction) and isinstance(rhs, Fraction)
    se = 0.0 if exact_fraction else EXACT_SE_FLOOR * scale
    probe = {"kind": f.kind, "center_offset": float(f.center_offset)}
    if f.polynomial is not None:
        probe["polynomial"] = f.polynomial.to_json()
    return make_verdict("Cor44", lf, se, rf, se, [], {"mode": "exact"}, 0.0, probe)


def evaluate_simplex(variant: str, f: tf.TestFunction, n: int, samples: Optional[SampleSet] = None,
                     seed: int = 0, N: int = DEFAULT_N, estimator: Optional[str] = None) -> Verdict:
    """Cor42 takes f in corner coordinates; Thm43 and Cor44 take f on the n+1 simplex coordinates."""
    if variant == "Cor44" and (estimator or "exact") == "exact":
        return evaluate_cor44_exact(f, n)
    if variant == "Cor42":
        return evaluate_cor42(f, samples or mc_samples(ms.CornerSimplex(n), N, seed))
    ss = samples or mc_samples(ms.RegularSimplex(n), N, seed)
    if variant == "Thm43":
        return evaluate_thm43(f, ss)
    if variant == "Cor44":
        return evaluate_cor44_mc(f, ss)
    raise ValueError(f"unknown simplex variant {variant!r}")


def evaluate_thm45(phi, q: float, n: int, f: tf.TestFunction, samples: Optional[SampleSet] = None,
                   gates=None, seed: int = 0, N: int = DEFAULT_N) -> Verdict:
    ss = samples or mc_samples(ms.WeightedSimplex(n, phi, q), N, seed)
    if gates is None:
        gates, _ = gates_thm45(phi, q, n, seed)
    return evaluate_thm43(f, ss, "Thm45", gates)


@dataclass
class PushforwardSetup:
    """nu = push-forward of exp(-phi) rho_psi dx under grad psi, realized on K."""

    potential: Potential
    phi: Weight
    measure: ms.Measure


def prop36_setup(pot: Potential, phi: Weight, base: Optional[ms.Measure] = None) -> PushforwardSetup:
    """Rejection measure on K with density exp(-phi(grad psi^*(y))) relative to Lebesgue.

    ``base`` is a proposal measure on K; by default the corner simplex for the
    simplex potential. For unbounded K a base with a density must be given.
    """
    if base is None:
        if pot.kind != "simplex":
            raise ValueError("a base measure on K is required for this potential")
        base = ms.CornerSimplex(pot.n)
    base_log = getattr(base, "log_density", None)

    def log_weight(y):
        x = inverse_moment_map(pot, y)
        lw = -np.asarray(phi.value(x), dtype=float)
        if base_log is not None:
            lw = lw - base_log(y)
        return lw
    return PushforwardSetup(pot, phi, ms.Reweighted(base, log_weight, f"exp(-{phi.name})"))


def _prop36_field(pot: Potential, ss: SampleSet):
    if "qfield" not in ss.cache:
        y = ss.points
        flag = np.zeros(len(y), dtype=bool)
        if pot.kind == "simplex":
            y, flag = nudge_off_singular_set(y)
        ss.cache["qfield"] = (qform_field(pot, y), flag)
    return ss.cache["qfield"]


def evaluate_prop36(setup: PushforwardSetup, f: tf.TestFunction, samples: Optional[SampleSet] = None,
                    gates=None, seed: int = 0, N: int = DEFAULT_N) -> Verdict:
    pot = setup.potential
    ss = samples or mc_samples(setup.measure, N, seed)
    if gates is None:
        probes = inverse_moment_map(pot, ss.points[:100])
        gates, _ = gates_prop36(pot, setup.phi, probes, seed)

    def integrands(s):
        fld, flag = _prop36_field(pot, s)
        q = fld.evaluate(f.gradient(s.points))
        return f.value(s.points), q, float(np.mean(flag | np.isinf(q)))
    return _evaluate("Prop36", ss, integrands, f, gates, {"potential": pot.kind, "phi": setup.phi.name})


def default_samples_orthant(measure, seed: int = 0, N: int = DEFAULT_N) -> SampleSet:
    if isinstance(measure, ms.OrthantProduct) and measure.dimension <= 4:
        return quadrature_samples(measure)
    return mc_samples(measure, N, seed)


# --------------------------------------------------------------------------
# Sharpness.

@dataclass
class SharpnessReport:
    variant: str
    n: int
    lhs: Fraction
    rhs: Fraction
    expected: Fraction
    relative_gap: float

    def to_dict(self):
        return {"variant": self.variant, "n": self.n, "lhs": float(self.lhs), "rhs": float(self.rhs),
                "lhs_exact": str(self.lhs), "rhs_exact": str(self.rhs), "expected": str(self.expected),
                "relative_gap": self.relative_gap}


def sharpness_probe(variant: str, n: int, i: int = 1) -> SharpnessReport:
    """Equality case f = x_i - 1/(n+1) of the projective-space bound, via exact moments."""
    if variant != "Cor44":
        raise ValueError("sharpness probe is defined for Cor44 only")
    f = tf.center(tf.coordinate(n + 1, i), ms.RegularSimplex(n))
    lhs, rhs = cor44_exact(f, n)
    gap = abs(lhs - rhs) / lhs
    return SharpnessReport(variant, n, lhs, rhs, Fraction(n, (n + 1) ** 2 * (n + 2)), float(gap))


# --------------------------------------------------------------------------
# Suites.

@dataclass
class SuiteResult:
    variant: str
    verdicts: list
    gates: list

    def counts(self):
        c = {PASS: 0, FAIL: 0, INCONCLUSIVE: 0}
        for v in self.verdicts:
            c[v.status] += 1
        return c


def suite_functions(dim: int, count: int, degree: int, seed: int, min_degree: int = 1):
    """Random polynomials with degrees cycling through min_degree..degree."""
    span = max(1, degree - min_degree + 1)
    return [tf.random_polynomial(dim, min_degree + (i % span), seed, stream=i) for i in range(count)]


def _map(fn, items, jobs):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _center_poly(f, measure, ss: SampleSet, seed):
    try:
        return tf.center(f, measure)
    except CapabilityError:
        return tf.center(f, measure, samples=ss.points)


def _center_quadrature(f, ss: SampleSet):
    mean = float(np.sum(ss.weights * f.value(ss.points)))
    return replace(f, center_offset=float(f.center_offset) + mean, centered_exactly=True)


def run_suite(variant: str, params: dict, count: int = 200, degree: int = 4, seed: int = 0,
              N: int = DEFAULT_N, estimator: Optional[str] = None, nodes: Optional[int] = None,
              jobs: int = 1, kind: str = "random_polynomial") -> SuiteResult:
    """Build measure, samples and gates once; evaluate ``count`` centered test functions.

    ``kind`` is 'random_polynomial', 'thin_shell' (|x|^2 minus its mean) or
    'coordinate' (x_1 minus its mean).
    """
    b = build_instance(variant, params, seed, N, estimator, nodes)
    if kind == "random_polynomial":
        fs = suite_functions(b["dim"], count, degree, seed + 1)
    elif kind == "thin_shell":
        fs = [tf.squared_norm(b["dim"])]
    elif kind == "coordinate":
        fs = [tf.coordinate(b["dim"], min(1, b["dim"] - 1))]
    else:
        raise ValueError(f"unknown suite kind {kind!r}")
    if b.get("centering") == "exact":
        fs = [tf.center(f, b["measure"]) for f in fs]
    elif b.get("centering") == "quadrature":
        fs = [_center_quadrature(f, b["samples"]) for f in fs]
    elif b.get("centering") == "mc":
        fs = [tf.center(f, b["measure"], samples=b["samples"].points) for f in fs]
    verdicts = _map(b["evaluate"], fs, jobs)
    return SuiteResult(variant, verdicts, b["gates"])


VARIANTS = ("Thm11", "Thm61", "Cor12", "Thm13", "Cor42", "Thm43", "Cor44", "Thm45", "Prop36")


def build_orthant(params: dict) -> ms.OrthantProduct:
    n = int(params.get("n", 1))
    alpha = params.get("alpha", 0.5)
    alphas = alpha if isinstance(alpha, (list, tuple)) else [alpha] * n
    return ms.OrthantProduct(tuple(ms.PowerExp(float(a)) for a in alphas))


def sqrt_sum_phi(c: float):
    return lambda x: c * np.sum(np.sqrt(np.maximum(x, 0.0)), axis=-1)


def thm45_weight(name: str, c: float = 1.0, q: Optional[float] = None):
    """Named weights on the orthant with their homogeneity degree (overridable by ``q``)."""
    if name == "sqrt_sum":
        return sqrt_sum_phi(c), 0.5 if q is None else float(q)
    if name == "sqrt_sum_squared":
        return (lambda x: c * np.sum(np.sqrt(np.maximum(x, 0.0)), axis=-1) ** 2), 1.0 if q is None else float(q)
    if name in ("zero", "const"):
        return (lambda x: np.zeros(np.shape(x)[:-1])), 0.0 if q is None else float(q)
    raise ValueError(f"unknown weight {name!r}")


def build_instance(variant: str, params: dict, seed: int = 0, N: int = DEFAULT_N,
                   estimator: Optional[str] = None, nodes: Optional[int] = None) -> dict:
    """Measure, shared samples, gates and a per-function evaluator for one configured variant."""
    params = dict(params or {})
    if variant in ("Thm11", "Thm61"):
        meas = build_orthant(params)
        mode = estimator or ("quadrature" if meas.dimension <= 4 else "mc")
        ss = quadrature_samples(meas, nodes) if mode == "quadrature" else mc_samples(meas, N, seed)
        if variant == "Thm11":
            k = int(params.get("k", 2))
            gates = gates_thm11(meas, k, seed)
            ev = lambda f: evaluate_thm11(meas, f, k, ss, gates, seed)
        else:
            ks = params.get("k", [1.5] * meas.dimension)
            ks = ks if isinstance(ks, (list, tuple)) else [ks] * meas.dimension
            gates = gates_thm61(meas, ks, seed)
            ev = lambda f: evaluate_thm61(meas, f, ks, ss, gates, seed)
        return dict(dim=meas.dimension, measure=meas, samples=ss, gates=gates, evaluate=ev,
                    centering="quadrature" if mode == "quadrature" else "mc")
    if variant == "Cor12":
        n = int(params.get("n", 3))
        ell = float(params.get("ell", 2))
        setm = ms.unit_cube_set(n) if params.get("set", "corner_simplex") == "unit_cube" else ms.corner_simplex_set(n)
        ss = mc_samples(setm, N, seed)
        gates = gates_cor12(setm, ell, seed)
        return dict(dim=n, measure=setm, samples=ss, gates=gates, centering="mc",
                    evaluate=lambda f: evaluate_cor12(setm, f, ell, ss, gates, seed))
    if variant == "Thm13":
        n, p = int(params.get("n", 3)), float(params.get("p", 0.5))
        meas = ms.LpBall(n, p)
        k = int(params.get("k", math.ceil(1.0 / p - 1e-12)))
        ss = mc_samples(meas, N, seed)
        gates = gates_thm13(meas, k, seed)
        V = ms.second_moments(meas, seed, N)
        unc = bool(params.get("unconditional_f", False))
        return dict(dim=n, measure=meas, samples=ss, gates=gates, centering="mc",
                    evaluate=lambda f: evaluate_thm13(meas, f, k, unc, ss, gates, seed, N, V))
    if variant in ("Cor42", "Thm43", "Cor44"):
        n = int(params.get("n", 3))
        if variant == "Cor42":
            meas = ms.CornerSimplex(n)
            ss = mc_samples(meas, N, seed)
            return dict(dim=n, measure=meas, samples=ss, gates=[], centering="exact",
                        evaluate=lambda f: evaluate_cor42(f, ss))
        meas = ms.RegularSimplex(n)
        if variant == "Cor44" and (estimator or "exact") == "exact":
            return dict(dim=n + 1, measure=meas, samples=None, gates=[], centering="exact",
                        evaluate=lambda f: evaluate_cor44_exact(f, n))
        ss = mc_samples(meas, N, seed)
        ev = (lambda f: evaluate_thm43(f, ss)) if variant == "Thm43" else (lambda f: evaluate_cor44_mc(f, ss))
        return dict(dim=n + 1, measure=meas, samples=ss, gates=[], centering="exact", evaluate=ev)
    if variant == "Thm45":
        n = int(params.get("n", 3))
        c = float(params.get("c", 1.0))
        phi, q = thm45_weight(params.get("phi", "sqrt_sum"), c, params.get("q"))
        meas = ms.WeightedSimplex(n, phi, q)
        ss = mc_samples(meas, N, seed)
        gates, _ = gates_thm45(phi, q, n, seed)
        return dict(dim=n + 1, measure=meas, samples=ss, gates=gates, centering="mc",
                    evaluate=lambda f: evaluate_thm45(phi, q, n, f, ss, gates, seed))
    if variant == "Prop36":
        setup, dim = build_prop36(params)
        ss = mc_samples(setup.measure, N, seed)
        probes = inverse_moment_map(setup.potential, ss.points[:100])
        gates, _ = gates_prop36(setup.potential, setup.phi, probes, seed)
        centering = "exact" if setup.potential.kind == "simplex" and params.get("phi", "const") == "const" else "mc"
        return dict(dim=dim, measure=setup.measure if centering == "mc" else ms.CornerSimplex(dim),
                    samples=ss, gates=gates, centering=centering,
                    evaluate=lambda f: evaluate_prop36(setup, f, ss, gates, seed))
    raise ValueError(f"unknown variant {variant!r}")


def build_prop36(params: dict):
    from .potentials import exponential_potential, simplex_potential
    from .transport import constant_weight, exp_weight
    kind = params.get("potential", "simplex")
    n = int(params.get("n", 2 if kind == "simplex" else 1))
    if kind == "simplex":
        return prop36_setup(simplex_potential(n), constant_weight()), n
    if kind == "exponential":
        # exp(-phi(log y)) = exp(-sum sqrt(y_i)): phi(x) = sum exp(x_i / 2)
        base = ms.OrthantProduct.iid(ms.PowerExp(0.5), n)
        return prop36_setup(exponential_potential(n), exp_weight(0.5), base), n
    raise ValueError(f"unknown potential {kind!r}")
