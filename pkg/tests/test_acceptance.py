"""Acceptance criteria 1-11, each printed as one PASS/FAIL line."""
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from poincare_lab import cli
from poincare_lab import hminus as hm
from poincare_lab import inequalities as ie
from poincare_lab import measures as ms
from poincare_lab import testfuncs as tf
from poincare_lab.potentials import (exponential_potential, simplex_inverse_hessian, simplex_log_det_hessian,
                                     simplex_potential)
from poincare_lab.transport import (constant_weight, exp_weight, q_form, qstar_matrix, simplex_q_form_batch,
                                    simplex_qstar_closed_form, star_condition_check)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SUITES = sorted(CONFIGS.glob("suite_*.json"))
SAMPLES = sorted(CONFIGS.glob("sample_lpball_*.json"))


def _line(capsys, number, ok, detail, elapsed, budget):
    status = "PASS" if ok else "FAIL"
    with capsys.disabled():
        print(f"\n[criterion {number:2d}] {status}  {detail}  ({elapsed:.2f} s, budget {budget:g} s)")


def _rel(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


def test_criterion_01_closed_forms(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = {"inverse": 0.0, "det": 0.0, "qstar": 0.0, "qform": 0.0}
    for n in range(2, 7):
        pot = simplex_potential(n)
        x = rng.uniform(-3, 3, (100, n))
        H = pot.hessian(x)
        for i in range(100):
            worst["inverse"] = max(worst["inverse"], _rel(np.linalg.inv(H[i]), simplex_inverse_hessian(x[i])))
            worst["qstar"] = max(worst["qstar"], _rel(qstar_matrix(pot, x[i]), simplex_qstar_closed_form(x[i])))
        det = np.linalg.det(H)
        worst["det"] = max(worst["det"], float(np.max(np.abs(det / np.exp(simplex_log_det_hessian(x)) - 1))))
        y = pot.gradient(x)
        U = rng.normal(size=(100, n))
        closed, _ = simplex_q_form_batch(y, U)
        generic = q_form(pot, y, U)
        worst["qform"] = max(worst["qform"], float(np.max(np.abs(generic - closed) / np.abs(closed))))
    elapsed = time.perf_counter() - t0
    ok = (worst["inverse"] <= 1e-8 and worst["det"] <= 1e-8 and worst["qstar"] <= 1e-8
          and worst["qform"] <= 1e-6 and elapsed < 10)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    _line(capsys, 1, ok, f"closed forms vs generic: {detail}", elapsed, 10)
    assert ok


def test_criterion_02_exponential_reduction(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    worst = 0.0
    for n in range(1, 7):
        y = rng.uniform(0.05, 5.0, (100, n))
        U = rng.normal(size=(100, n))
        got = q_form(exponential_potential(n), y, U)
        want = 4 * np.sum(y ** 2 * U ** 2, axis=1)
        worst = max(worst, float(np.max(np.abs(got - want) / want)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 5
    _line(capsys, 2, ok, f"q_form vs 4*sum y^2 U^2: max rel err {worst:.1e}", elapsed, 5)
    assert ok


def test_criterion_03_sharpness(capsys):
    t0 = time.perf_counter()
    # Brute-force MC oracle first, at n = 2.
    f = tf.center(tf.coordinate(3, 1), ms.RegularSimplex(2))
    mc = ie.evaluate_simplex("Cor44", f, 2, estimator="mc", N=100_000, seed=3)
    target = 2 / (9 * 4)
    z_l = abs(mc.lhs - target) / mc.lhs_se
    z_r = abs(mc.rhs - target) / mc.rhs_se
    gaps = {}
    for n in (2, 5, 10):
        r = ie.sharpness_probe("Cor44", n)
        expected = n / ((n + 1) ** 2 * (n + 2))
        gaps[n] = max(r.relative_gap, abs(float(r.lhs) - expected) / expected)
    elapsed = time.perf_counter() - t0
    ok = z_l <= 4 and z_r <= 4 and max(gaps.values()) <= 1e-12 and elapsed < 1
    detail = f"MC n=2 |z| lhs {z_l:.2f} rhs {z_r:.2f}; exact gaps " + ", ".join(f"n={n}: {g:.1e}" for n, g in gaps.items())
    _line(capsys, 3, ok, detail, elapsed, 1)
    assert ok


def test_criterion_04_hminus_sgn(capsys):
    t0 = time.perf_counter()
    errs, changes = [], []
    for R in (0.5, 1.0, 2.0):
        res = hm.hminus_solve_1d(hm.sgn_problem(R))
        errs.append(abs(res.norm - R / math.sqrt(3)) / (R / math.sqrt(3)))
        changes.append(res.relative_change)
    elapsed = time.perf_counter() - t0
    ok = max(errs) <= 1e-6 and max(changes) <= hm.RICHARDSON_TOL and elapsed < 1
    _line(capsys, 4, ok, f"||sgn|| vs R/sqrt(3): max rel err {max(errs):.1e}, Richardson change {max(changes):.1e}",
          elapsed, 1)
    assert ok


def test_criterion_05_sphere_equality(capsys):
    t0 = time.perf_counter()
    th2 = np.array([0.6, 0.8])
    th3 = np.array([2.0, -1.0, 2.0]) / 3.0
    r2 = hm.sphere_pairing_check(2, th2, lambda y: y @ th2)
    r3 = hm.sphere_pairing_check(3, th3, lambda y: y @ th3)
    e2 = max(abs(r2.lhs - 0.5), abs(r2.rhs_bound - 0.5))
    e3 = max(abs(r3.lhs - 1 / 3), abs(r3.rhs_bound - 1 / 3))
    elapsed = time.perf_counter() - t0
    ok = e2 <= 1e-8 and e3 <= 1e-6 and r2.holds and r3.holds and elapsed < 1
    _line(capsys, 5, ok, f"k=2 err {e2:.1e}, k=3 err {e3:.1e}", elapsed, 1)
    assert ok


def test_criterion_06_thm11_anchor(capsys):
    t0 = time.perf_counter()
    meas = ms.OrthantProduct.iid(ms.PowerExp(0.5), 1)
    f = tf.center(tf.coordinate(1, 0), meas)
    v = ie.evaluate_thm11(meas, f, 2)
    # int t^a e^{-sqrt t} dt = 2 Gamma(2a + 2), mass 2.
    m1, m2 = math.gamma(4), math.gamma(6)
    lhs_exact, rhs_exact = m2 - m1 ** 2, 4 * m2
    el = abs(v.lhs - lhs_exact) / lhs_exact
    er = abs(v.rhs - rhs_exact) / rhs_exact
    elapsed = time.perf_counter() - t0
    ok = el <= 1e-6 and er <= 1e-6 and v.status == "PASS" and elapsed < 1
    _line(capsys, 6, ok, f"LHS {v.lhs:.9g} (vs {lhs_exact:g}), RHS {v.rhs:.9g} (vs {rhs_exact:g})", elapsed, 1)
    assert ok


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    """Criteria 7 and 8 through the CLI; reused by criterion 11."""
    out = tmp_path_factory.mktemp("run1")
    t0 = time.perf_counter()
    codes = {c.stem: cli.main(["verify", "--config", str(c), "--out", str(out)]) for c in SUITES}
    t_suites = time.perf_counter() - t0
    t0 = time.perf_counter()
    codes.update({c.stem: cli.main(["sample", "--config", str(c), "--out", str(out)]) for c in SAMPLES})
    t_samples = time.perf_counter() - t0
    return out, codes, t_suites, t_samples


@pytest.mark.slow
def test_criterion_07_soundness_suites(capsys, first_run):
    out, codes, elapsed, _ = first_run
    per, ok = [], len(SUITES) == 10
    for c in SUITES:
        prefix = json.loads(c.read_text())["output"]["prefix"]
        rep = json.loads((out / f"{prefix}.json").read_text())
        s = rep["summary"]
        good = (codes[c.stem] == 0 and s["counts"]["FAIL"] == 0 and s["total"] >= 200
                and not s["gate_violations"])
        ok &= good
        per.append(f"{c.stem[len('suite_'):]}:{s['counts']['PASS']}/{s['total']}")
    ok &= elapsed < 600
    _line(capsys, 7, ok, "zero FAIL; " + " ".join(per), elapsed, 600)
    assert ok


def _read_samples(path):
    rows = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return np.array([[float(v) for v in ln.split(",")] for ln in rows[1:]])


@pytest.mark.slow
def test_criterion_08_sampler_validation(capsys, first_run):
    out, codes, _, t_samples = first_run
    t0 = time.perf_counter()
    worst, ok = 0.0, True
    for c in SAMPLES:
        cfg = json.loads(c.read_text())
        m = cfg["sample"]["measure"]
        x = _read_samples(out / f"{cfg['output']['prefix']}_samples.csv")
        oracle = ms.rejection_sample_lp(m["n"], m["p"], 99, len(x))
        ok &= codes[c.stem] == 0 and len(x) == 100_000
        for i in range(m["n"]):
            stat, crit = ms.ks_two_sample(x[:, i], oracle[:, i])
            worst = max(worst, stat / crit)
    N = 100_000
    rate = ms.rejection_acceptance_rate(2, 0.5, 7, N)
    z = abs(rate - 1 / 6) / math.sqrt((1 / 6) * (5 / 6) / N)
    elapsed = t_samples + time.perf_counter() - t0
    ok &= worst < 1 and z <= 3 and elapsed < 120
    _line(capsys, 8, ok, f"worst KS stat/critical {worst:.3f}; acceptance {rate:.5f} ({z:.2f} se from 1/6)",
          elapsed, 120)
    assert ok


def test_criterion_09_star_condition(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(109)
    good = star_condition_check(simplex_potential(3), constant_weight(), rng.uniform(-4, 4, (100, 3)))
    probes = np.linspace(-3, 3, 100)[:, None]
    bad = star_condition_check(exponential_potential(1), exp_weight(0.25), probes)
    expected = -np.exp(probes[:, 0] / 4) / 16
    match = float(np.max(np.abs(bad.min_eigenvalues - expected) / np.abs(expected)))
    elapsed = time.perf_counter() - t0
    ok = good.passed and not bad.passed and match <= 1e-6 and elapsed < 5
    _line(capsys, 9, ok, f"simplex/const PASS={good.passed} (min eig {good.min_eigenvalue_overall:.2e}); "
                         f"exp/e^(x/4) FAIL reported={not bad.passed} (min eig {bad.min_eigenvalue_overall:.3e})",
          elapsed, 5)
    assert ok


def test_criterion_10_hminus_suites(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(110)
    G = hm.DEFAULT_GRID
    x = np.linspace(-1, 1, G)
    worst_mix = -math.inf
    for trial in range(20):
        dens = []
        for _ in range(2):
            c = rng.normal(size=(2, 4))
            log = sum(c[0, i] * np.cos((i + 1) * x) + c[1, i] * np.sin((i + 1) * x) for i in range(4))
            dens.append(np.exp(0.5 * log))
        a = rng.normal(size=5)
        f = sum(a[i] * x ** (i + 1) for i in range(4)) + a[4] * np.sin(3 * x)
        p1, p2 = hm.IntervalProblem(-1, 1, dens[0], f, G), hm.IntervalProblem(-1, 1, dens[1], f, G)
        q1, q2, mix = hm.mixture_problem(p1, p2, f)
        n1, n2, nm = (hm.hminus_norm_1d(q) for q in (q1, q2, mix))
        worst_mix = max(worst_mix, nm ** 2 - 0.5 * n1 ** 2 - 0.5 * n2 ** 2)
    worst_ratio = 0.0
    for _ in range(10):
        b, c = rng.uniform(0.1, 4.0, 2)
        prob = hm.sgn_problem(1.0, lambda t, b=b, c=c: np.exp(-b * t ** 2 - c * np.abs(t)))
        worst_ratio = max(worst_ratio, hm.hminus_norm_1d(prob) / math.sqrt(hm.second_moment_1d(prob)))
    elapsed = time.perf_counter() - t0
    ok = worst_mix <= 1e-8 and worst_ratio <= 1 + 1e-6 and elapsed < 30
    _line(capsys, 10, ok, f"mixture max excess {worst_mix:.2e}; even decreasing max ratio {worst_ratio:.6f}",
          elapsed, 30)
    assert ok


@pytest.mark.slow
def test_criterion_11_determinism(capsys, first_run, tmp_path):
    out, _, _, _ = first_run
    t0 = time.perf_counter()
    for c in SUITES:
        cli.main(["verify", "--config", str(c), "--out", str(tmp_path)])
    for c in SAMPLES:
        cli.main(["sample", "--config", str(c), "--out", str(tmp_path)])
    files = sorted(p.name for p in out.iterdir() if not p.name.endswith("_timing.json"))
    same = [(out / name).read_bytes() == (tmp_path / name).read_bytes() for name in files]
    elapsed = time.perf_counter() - t0
    ok = len(files) == 2 * len(SUITES) + len(SAMPLES) and all(same)
    _line(capsys, 11, ok, f"{sum(same)}/{len(files)} report files byte-identical on rerun", elapsed, math.inf)
    assert ok
