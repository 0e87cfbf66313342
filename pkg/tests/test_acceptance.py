"""End-to-end acceptance checks, one test per numbered criterion.

Each test records a PASS/FAIL line in RESULTS; conftest prints them in the
terminal summary.  Runtime limits are asserted alongside the numeric checks.
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import interior_theta, random_pmf
from igeo.crlb import (Estimator, alpha_crlb_report, exponential_escort_efficiency,
                       indicator_estimator, to_escort_estimator)
from igeo.distributions import EscortMap, ParametricModel, escort, simplex_chart
from igeo.divergences import (CHI2_GENERATOR, KL_GENERATOR, DivergenceSpec, kl,
                              relative_alpha_entropy, renyi_divergence)
from igeo.eguchi import (alpha_metric_closed, duality_residual, eguchi_metric_fd,
                         fisher_metric)
from igeo.families import (FamilySpec, counterexample_report, exponential_escort_model,
                           escort_correspondence, log_partition, power_law_model)

RESULTS = {}
FIXTURE = Path(__file__).resolve().parent.parent / "configs" / "counterexample.json"


def record(n, ok, detail):
    RESULTS[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def random_order(rng, lo=0.3, hi=3.0):
    while True:
        a = rng.uniform(lo, hi)
        if abs(a - 1) > 1e-2:
            return a


def test_criterion_01_limit_reduction(rng):
    worst = 0.0
    with Timer() as tm:
        for _ in range(100):
            n = rng.integers(2, 7)
            p, q = random_pmf(rng, n), random_pmf(rng, n)
            k = kl(p, q)
            for a in (1 - 1e-3, 1 + 1e-3):
                worst = max(worst, abs(relative_alpha_entropy(p, q, a) - k) / (1 + k))
    ok = worst <= 1e-2 and tm.elapsed < 1
    record(1, ok, f"max |I_a - KL|/(1+KL) = {worst:.2e} (<= 1e-2), {tm.elapsed:.2f}s")
    assert worst <= 1e-2
    assert tm.elapsed < 1


def _escort_renyi_triples(rng):
    out = []
    for _ in range(100):
        n = rng.integers(2, 7)
        out.append((random_pmf(rng, n), random_pmf(rng, n), random_order(rng, 0.3, 3.0)))
    return out


@pytest.mark.xfail(strict=True, reason="the relative alpha-entropy carries a 1/alpha factor: "
                                       "I_a = D_{1/a}(escorts)/a, so the unscaled equality "
                                       "only holds at a = 1")
def test_criterion_02_escort_renyi_identity_as_stated(rng):
    triples = _escort_renyi_triples(rng)
    with Timer() as tm:
        dev = max(abs(relative_alpha_entropy(p, q, a)
                      - renyi_divergence(escort(p, a), escort(q, a), 1 / a))
                  for p, q, a in triples)
        scaled = max(abs(relative_alpha_entropy(p, q, a)
                         - renyi_divergence(escort(p, a), escort(q, a), 1 / a) / a)
                     for p, q, a in triples)
    record(2, False, f"as stated: max |I_a - D_1/a(escorts)| = {dev:.2e} (> 1e-10); "
                     f"with the 1/a factor: {scaled:.2e}, {tm.elapsed:.2f}s")
    assert tm.elapsed < 1
    assert dev <= 1e-10


def test_criterion_02_escort_renyi_identity_scaled(rng):
    triples = _escort_renyi_triples(rng)
    with Timer() as tm:
        scaled = max(abs(relative_alpha_entropy(p, q, a)
                         - renyi_divergence(escort(p, a), escort(q, a), 1 / a) / a)
                     for p, q, a in triples)
    assert scaled <= 1e-10
    assert tm.elapsed < 1


def _power_law_instance(rng):
    n = int(rng.integers(3, 6))
    spec = FamilySpec("power_law", random_order(rng, 0.4, 3.0), rng.dirichlet(np.ones(n) * 4),
                      0.2 * rng.standard_normal((2, n)))
    while True:
        t = 0.03 * rng.standard_normal(2)
        if spec.in_domain(t):
            return power_law_model(spec), t


def test_criterion_03_metric_oracle(rng):
    worst, count = 0.0, 0
    with Timer() as tm:
        for i in range(120):
            if i % 3 == 2:
                S, t = _power_law_instance(rng)
            else:
                M = int(rng.integers(1, 4))
                S, t = simplex_chart(M), interior_theta(rng, M)
            a = random_order(rng, 0.3, 5.0)
            fd = eguchi_metric_fd(DivergenceSpec.relative_alpha(a), S, t).g
            closed = alpha_metric_closed(S, t, a).g
            tol = max(1e-5, 1e-3 * np.max(np.abs(closed)))
            worst = max(worst, np.max(np.abs(fd - closed)) / tol)
            count += 1
        fisher_gap = 0.0
        for M in (1, 2, 3, 4):
            S, t = simplex_chart(M), interior_theta(rng, M)
            fisher_gap = max(fisher_gap, np.max(np.abs(alpha_metric_closed(S, t, 1.0).g
                                                       - fisher_metric(S, t).g)))
    ok = worst <= 1 and fisher_gap <= 1e-12 and tm.elapsed < 30
    record(3, ok, f"{count} instances, worst diff/tol = {worst:.1e}; alpha=1 vs Fisher "
                  f"{fisher_gap:.1e}, {tm.elapsed:.2f}s")
    assert worst <= 1
    assert fisher_gap <= 1e-12
    assert tm.elapsed < 30


def test_criterion_04_positive_definite(rng):
    lowest = np.inf
    with Timer() as tm:
        for _ in range(50):
            M = int(rng.integers(2, 5))  # alphabets of size 3..5
            t = interior_theta(rng, M, min_mass=1e-3)
            for a in (0.5, 1.0, 2.0, 5.0):
                lowest = min(lowest, alpha_metric_closed(simplex_chart(M), t, a).min_eigenvalue)
    ok = lowest > 0 and tm.elapsed < 10
    record(4, ok, f"smallest eigenvalue {lowest:.3e} over 200 metrics, {tm.elapsed:.2f}s")
    assert lowest > 0
    assert tm.elapsed < 10


def test_criterion_05_duality(rng):
    worst = 0.0
    with Timer() as tm:
        for D in (DivergenceSpec.kl(), DivergenceSpec.relative_alpha(0.5),
                  DivergenceSpec.relative_alpha(2.0)):
            for M in (1, 2):
                for _ in range(20):
                    r = duality_residual(D, simplex_chart(M), interior_theta(rng, M))
                    worst = max(worst, float(np.max(np.abs(r))))
    ok = worst <= 1e-3 and tm.elapsed < 60
    record(5, ok, f"max duality residual {worst:.2e} over 120 points, {tm.elapsed:.2f}s")
    assert worst <= 1e-3
    assert tm.elapsed < 60


def _line_submodel(rng, n):
    base = rng.dirichlet(np.ones(n) * 5)
    d = rng.standard_normal(n)
    d -= d.mean()
    d *= 0.5 * base.min() / np.max(np.abs(d))
    return ParametricModel(1, n, lambda t: base + t[0] * d, lambda t: bool(abs(t[0]) < 1.0),
                           jacobian_fn=lambda t: d[None, :], name="line"), d


def _noisy_estimator(rng, S, d, t):
    # locally unbiased under p plus score-orthogonal zero-mean noise
    p = S.eval(t)
    s = d / p
    noise = rng.standard_normal(p.size)
    noise -= noise @ p
    noise -= (noise * p @ s) / (s * p @ s) * s
    return Estimator((t[0] + s / (s * p @ s) + 0.2 * noise)[None, :], t)


def test_criterion_06_alpha_crlb(rng):
    lowest, worst_eq, n_full, n_sub = np.inf, 0.0, 0, 0
    with Timer() as tm:
        for _ in range(240):
            M = int(rng.integers(1, 5))
            S, t, a = simplex_chart(M), interior_theta(rng, M), rng.uniform(0.3, 5.0)
            rep = alpha_crlb_report(S, t, a, to_escort_estimator(indicator_estimator(t), S, t, a))
            lowest = min(lowest, rep.min_gap_eigenvalue)
            worst_eq = max(worst_eq, rep.gap_norm)
            n_full += 1
        for _ in range(60):
            S, d = _line_submodel(rng, int(rng.integers(3, 6)))
            t, a = np.array([rng.uniform(-0.5, 0.5)]), rng.uniform(0.3, 5.0)
            est = to_escort_estimator(_noisy_estimator(rng, S, d, t), S, t, a)
            lowest = min(lowest, alpha_crlb_report(S, t, a, est).min_gap_eigenvalue)
            n_sub += 1
    ok = lowest >= -1e-8 and worst_eq <= 1e-9 and tm.elapsed < 30
    record(6, ok, f"{n_full} simplex + {n_sub} submodel instances, min gap eig {lowest:.2e}; "
                  f"simplex gap norm <= {worst_eq:.1e}, {tm.elapsed:.2f}s")
    assert lowest >= -1e-8
    assert worst_eq <= 1e-9
    assert tm.elapsed < 30


def test_criterion_07_exponential_escort_chain(rng):
    worst_fd, worst_exact, n = 0.0, 0.0, 0
    with Timer() as tm:
        for a in (1.0, 0.5, 2.0, 3.0):
            for size in (3, 4):
                c, H = rng.standard_normal(size), rng.standard_normal((2, size))
                S = exponential_escort_model(c, H, a)
                F = EscortMap.identity() if a == 1 else EscortMap.alpha_escort(a)
                for _ in range(3):
                    rep = exponential_escort_efficiency(S, 0.5 * rng.standard_normal(2), F, c, H,
                                                        log_partition(c, H))
                    worst_fd = max(worst_fd, rep.potential_residual, rep.hessian_residual,
                                   rep.dual_residual)
                    worst_exact = max(worst_exact, rep.covariance_residual,
                                      rep.efficiency_residual)
                    n += 1
    ok = worst_fd <= 1e-5 and worst_exact <= 1e-10 and tm.elapsed < 10
    record(7, ok, f"{n} instances, FD checks <= {worst_fd:.1e}, exact checks <= "
                  f"{worst_exact:.1e}, {tm.elapsed:.2f}s")
    assert worst_fd <= 1e-5
    assert worst_exact <= 1e-10
    assert tm.elapsed < 10


def test_criterion_08_escort_correspondence(rng):
    worst = 0.0
    with Timer() as tm:
        for a, n in ((0.5, 3), (2.0, 4), (3.5, 5)):
            spec = FamilySpec("power_law", a, rng.dirichlet(np.ones(n) * 3),
                              0.2 * rng.standard_normal((2, n)))
            corr = escort_correspondence(spec)
            got = 0
            while got < 20:
                t = 0.1 * rng.standard_normal(2)
                if spec.in_domain(t):
                    worst = max(worst, corr.deviation(t))
                    got += 1
    ok = worst <= 1e-12 and tm.elapsed < 5
    record(8, ok, f"3 specs x 20 theta, max deviation {worst:.1e}, {tm.elapsed:.2f}s")
    assert worst <= 1e-12
    assert tm.elapsed < 5


def test_criterion_09_counterexample():
    cfg = json.loads(FIXTURE.read_text())
    fam = cfg["family"]
    theta = cfg["theta_grid"][0]

    def report(a):
        return counterexample_report(FamilySpec("power_law", a, fam["q"], fam["features"]), theta)

    with Timer() as tm:
        grid = {a: report(a) for a in cfg["alpha_list"]}
        near = {a: report(a) for a in (1 - 1e-3, 1 + 1e-3)}
    identity = max(r.identity_residual / r.identity_tolerance for r in grid.values())
    far = min(r.witness / np.max(np.abs(r.g)) for r in grid.values())
    close = max(r.witness / np.max(np.abs(r.g)) for r in near.values())
    ok = identity <= 1 and far > 1e-3 and close < 1e-4 and tm.elapsed < 10
    record(9, ok, f"identity residual/tol <= {identity:.2e}; witness/|g| >= {far:.3f} on "
                  f"{sorted(grid)}, {close:.1e} at 1+-1e-3, {tm.elapsed:.2f}s")
    assert identity <= 1
    assert far > 1e-3
    assert close < 1e-4
    assert tm.elapsed < 10


def test_criterion_10_f_independence(rng):
    worst_f, worst_bridge = 0.0, 0.0
    with Timer() as tm:
        for _ in range(20):
            M = int(rng.integers(1, 4))
            S, t, a = simplex_chart(M), interior_theta(rng, M), rng.uniform(0.5, 3.0)
            F = EscortMap.alpha_escort(a)
            # entries reach ~60, so an absolute 1e-5 needs the extrapolated stencil
            g1 = eguchi_metric_fd(DivergenceSpec.generalized(KL_GENERATOR, F), S, t,
                                  richardson=True).g
            g2 = eguchi_metric_fd(DivergenceSpec.generalized(CHI2_GENERATOR, F), S, t,
                                  richardson=True).g
            worst_f = max(worst_f, np.max(np.abs(g1 - g2)))
            bridge = a ** 2 * alpha_metric_closed(S, t, a).g
            worst_bridge = max(worst_bridge, np.max(np.abs(g1 - bridge)), np.max(np.abs(g2 - bridge)))
    ok = worst_f <= 1e-5 and worst_bridge <= 1e-5 and tm.elapsed < 30
    record(10, ok, f"max |G(kl) - G(chi2)| = {worst_f:.1e}, max |G - a^2 g_a| = "
                   f"{worst_bridge:.1e}, {tm.elapsed:.2f}s")
    assert worst_f <= 1e-5
    assert worst_bridge <= 1e-5
    assert tm.elapsed < 30
