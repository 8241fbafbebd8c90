"""Acceptance criteria; each test prints one PASS/FAIL line (run with ``-s``)."""
import math
import time

import numpy as np
from scipy import integrate as spi

from gbc_workbench import ak_pairs as akp
from gbc_workbench import characters as dc
from gbc_workbench import chern_weil as cw
from gbc_workbench.berezin import pfaffian
from gbc_workbench.bundles import builtin, monopole_section, s2_charts, section_zeros_two
from gbc_workbench.chains import Chain, band_cell, integrate, latitude_cell
from gbc_workbench.exterior import exterior_derivative
from gbc_workbench.suites import (
    _total_points, dirac_samples, euler_error_table, expected_euler_number, gbc_form_residual, q_property_cases,
    random_base_points, s2_fundamental, standard_cases, stokes_residual,
)


def report(n: int, ok: bool, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    assert ok, detail


def criterion_one_bundles():
    return [builtin("tangent_s2")] + [builtin("monopole", charge=m) for m in (1, 2, 3)]


def test_criterion_1_euler_normalization():
    t0 = time.perf_counter()
    errs = {}
    for B in criterion_one_bundles():
        errs[B.name] = abs(integrate(cw.euler_form(B), s2_fundamental(B), 32) - expected_euler_number(B))
    dt = time.perf_counter() - t0
    worst = max(errs.values())
    report(1, worst < 1e-6 and dt < 10, f"max |int chi - expected| = {worst:.2e} (< 1e-6), {dt:.1f} s (< 10 s)")


def test_criterion_2_thom_fiber_normalization():
    t0 = time.perf_counter()
    errs = []
    for B in (builtin("trivial", rank=2, base="S2"), builtin("monopole", charge=2)):
        for b in ([0.8, 0.3], [1.9, 4.0]):
            errs.append(abs(integrate(cw.thom_form(B), cw.fiber_disk_chain(B, "north", b, rho_max=6.0), 32) - 1))
    dt = time.perf_counter() - t0
    report(2, max(errs) < 1e-5 and dt < 5, f"max |fiber integral - 1| = {max(errs):.2e} (< 1e-5), {dt:.1f} s (< 5 s)")


def test_criterion_3_transgression_ode():
    t0 = time.perf_counter()
    B = builtin("monopole", charge=2)
    rng = np.random.default_rng(0)
    pts = _total_points(B, 100, rng)
    h = 1e-4
    worst = 0.0
    for t in (0.5, 1.0, 2.0):
        Up, Um, T = cw.thom_form(B, t + h), cw.thom_form(B, t - h), cw.mq_integrand(B, t)
        for ch, q in pts:
            r = (Up(ch, q) - Um(ch, q)) * (0.5 / h) + exterior_derivative(T, ch, q)
            worst = max(worst, r.norm())
    dt = time.perf_counter() - t0
    report(3, worst < 1e-4 and dt < 30, f"max ODE residual = {worst:.2e} (< 1e-4) at 100 points x 3 t, "
                                         f"{dt:.1f} s (< 30 s)")


def test_criterion_4_gbc_form_identity():
    t0 = time.perf_counter()
    B = builtin("monopole", charge=2)
    v = section_zeros_two(B)
    pts = random_base_points(B, 100, np.random.default_rng(1))
    worst = gbc_form_residual(B, v, pts)
    dt = time.perf_counter() - t0
    report(4, worst < 1e-5 and dt < 30, f"max pointwise residual = {worst:.2e} (< 1e-5) at 100 points, "
                                         f"{dt:.1f} s (< 30 s)")


def test_criterion_5_q_properties():
    t0 = time.perf_counter()
    cases = {c["name"]: c["value"] for c in q_property_cases(builtin("monopole", charge=2),
                                                              np.random.default_rng(2), 10)}
    dt = time.perf_counter() - t0
    fib, dq = cases["Q_fiber_integral"], cases["dQ_minus_chi"]
    report(5, fib < 1e-6 and dq < 1e-5 and dt < 20,
           f"|int Q - 1| = {fib:.2e} (< 1e-6), dQ - chi = {dq:.2e} (< 1e-5), {dt:.1f} s (< 20 s)")


def test_criterion_6_character_identity():
    t0 = time.perf_counter()
    sections = {1: lambda B: monopole_section(B, {0: 1.0, 1: 0.3}), 2: section_zeros_two,
                3: lambda B: monopole_section(B, {0: 1.0, 3: 0.5})}
    recs = []
    for m, make in sections.items():
        B = builtin("monopole", charge=m)
        recs += dc.verify_gbc_identity(B, make(B), standard_cases(B))
    dt = time.perf_counter() - t0
    res = max(r.residual for r in recs)
    spread = max(r.spread for r in recs)
    ndec = min(len(r.per_decomposition) for r in recs)
    ok = len(recs) >= 6 and ndec >= 2 and res < 1e-5 and spread < 1e-5 and dt < 120
    report(6, ok, f"{len(recs)} cases, mod residual = {res:.2e}, decomposition spread = {spread:.2e} (< 1e-5), "
                  f"{dt:.1f} s (< 120 s)")


def test_criterion_7_ak_pairs():
    C = s2_charts()
    samples = dirac_samples(20, 0)
    rep = akp.check_pair(akp.dirac_pair(), samples, 1e-5)
    eq = Chain.of(latitude_cell(C["sphere"], math.pi / 2))
    up = Chain.of(band_cell(C["sphere"], 0.0, math.pi / 2))
    south = Chain.of(band_cell(C["south"], math.pi / 2, math.pi))
    lem = akp.decomposition_independence(akp.dirac_pair(), eq, [(up, Chain(dim=1)), (-south, Chain(dim=1))])
    bad = akp.check_pair(akp.dirac_pair(1.7), samples, 1e-5)
    ok = (len(rep.residuals) == 20 and rep.max_residual < 1e-5 and lem < 1e-5 and bad.max_residual > 0.1)
    report(7, ok, f"{len(rep.residuals)} admissible chains, integrality = {rep.max_residual:.2e} (< 1e-5), "
                  f"decomposition independence = {lem:.2e} (< 1e-5), scaled control = {bad.max_residual:.3f} (> 0.1)")


def test_criterion_8_oracles():
    rng = np.random.default_rng(3)
    pf = 0.0
    for i in range(50):
        n = 2 * (1 + i % 5)
        A = rng.normal(size=(n, n))
        A = A - A.T
        det = np.linalg.det(A)
        pf = max(pf, abs(pfaffian(A) ** 2 - det) / abs(det))
    gm = 0.0
    for m in range(0, 9):
        for a in (0.5, 1.0, 2.5):
            for upper in (math.inf, 1.3, 4.0):
                ref = spi.quad(lambda r: r ** m * math.exp(-a * r * r / 2), 0, upper, epsabs=1e-14, epsrel=1e-13)[0]
                gm = max(gm, abs(cw.gaussian_moment(m, a, upper) - ref))
    st = stokes_residual(50, seed=4)
    ok = pf < 1e-9 and gm < 1e-10 and st < 1e-8
    report(8, ok, f"Pf^2 = det rel {pf:.2e} (< 1e-9), gaussian moments {gm:.2e} (< 1e-10), "
                  f"Stokes {st:.2e} (< 1e-8)")


def test_criterion_9_convergence():
    ratios = {}
    for B in criterion_one_bundles():
        e16, e32 = (r["residual"] for r in euler_error_table(B, [16, 32]))
        ratios[B.name] = e16 / e32 if e32 > 0 else math.inf
    worst = min(ratios.values())
    detail = ", ".join(f"{k}: {v:.2g}" for k, v in ratios.items())
    report(9, worst >= 1e2, f"error ratio 16 -> 32 (>= 1e2): {detail}")
