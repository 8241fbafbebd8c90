"""Named check suites.  Each returns a list of case dicts with at least
``name``, ``value``, ``tolerance`` and ``pass``."""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import integrate as sint

from . import ak_pairs as akp
from . import characters as dc
from . import chern_weil as cw
from .berezin import pfaffian
from .bundles import (
    BundleWithConnection, SectionField, builtin, constant_section, monopole_section, section_zeros_two,
    sphere_bundle, zero_section,
)
from .chains import (
    Chain, affine_cell, band_cell, bilinear_cell, boundary, integrate, latitude_cell, mod_distance, mod_reduce,
    polynomial_form,
)
from .exterior import FD_STEP, GradedElement, d_field, exterior_derivative

SUITES = ("algebra", "chern_weil_forms", "gbc_form", "gbc_character", "ak_pairs", "convergence")


@dataclass
class SuiteConfig:
    suite: str = "algebra"
    bundle: str = "monopole"
    section: str = "default"
    charge: int = 2
    quad_order: int = 16
    fd_step: float = FD_STEP
    tol_form: float = 1e-5
    tol_mod: float = 1e-5
    tol_int: float = 1e-5
    clearance: float = 1e-3
    jobs: int = 1
    out: Optional[str] = None
    seed: int = 0
    samples: int = 100
    orders: Sequence[int] = (8, 16, 32)

    def validate(self) -> None:
        if self.suite not in SUITES:
            raise ValueError(f"unknown suite {self.suite!r}; choose from {', '.join(SUITES)}")
        for name in ("tol_form", "tol_mod", "tol_int", "clearance", "fd_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.quad_order < 4:
            raise ValueError("quadrature order must be at least 4")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")
        if self.suite == "convergence" and len(self.orders) < 2:
            raise ValueError("a convergence study needs at least two orders")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["orders"] = list(self.orders)
        return d


def case(name: str, value: float, tol: float, ok: Optional[bool] = None, **extra) -> dict:
    value = float(value)
    passed = bool(value < tol) if ok is None else bool(ok)
    return {"name": name, "value": value, "tolerance": tol, "pass": passed, **extra}


# ---------------------------------------------------------------------------
# Fixture resolution and sampling
# ---------------------------------------------------------------------------


def resolve_bundle(cfg: SuiteConfig) -> BundleWithConnection:
    spec = cfg.bundle
    if spec.endswith((".yaml", ".yml")):
        from .fixtures import FixtureError, load

        doc = load(spec)
        if "bundle" not in doc:
            raise FixtureError(f"{spec} defines no bundle")
        return doc["bundle"]
    if spec in ("monopole", "tangent_s2"):
        return builtin(spec, charge=cfg.charge)
    if spec == "trivial" or spec.startswith("trivial:"):
        base = spec.split(":", 1)[1] if ":" in spec else "S2"
        return builtin("trivial", rank=2, base=base)
    from .fixtures import FixtureError

    raise FixtureError(f"unknown bundle {spec!r} (monopole, tangent_s2, trivial[:BASE] or a .yaml path)")


def resolve_section(cfg: SuiteConfig, B: BundleWithConnection) -> SectionField:
    spec = cfg.section
    if spec.endswith((".yaml", ".yml")):
        from .fixtures import FixtureError, load

        doc = load(spec)
        if "section" not in doc:
            raise FixtureError(f"{spec} defines no section")
        return doc["section"]
    if spec == "zero":
        return zero_section(B)
    if spec.startswith("constant"):
        vals = [float(s) for s in spec.split(":", 1)[1].split(",")] if ":" in spec else [1.0, 0.5]
        return constant_section(B, vals)
    if spec == "two_zero":
        return section_zeros_two(B)
    if spec == "default":
        m = B.meta.get("charge") if isinstance(B.meta, dict) else None
        if m:
            if m == 2:
                return section_zeros_two(B)
            return monopole_section(B, {0: 1.0, int(m): 0.5}, f"Y0+0.5Y{int(m)}")
        return constant_section(B, [1.0, 0.5])
    from .fixtures import FixtureError

    raise FixtureError(f"unknown section {spec!r}")


_SAFE = {"north": (0.15, 2.2), "south": (0.95, 3.0), "sphere": (0.15, 3.0)}


def random_base_points(B: BundleWithConnection, count: int, rng: np.random.Generator):
    """``(chart name, point)`` pairs, alternating over charts, kept away from
    chart edges and coordinate poles."""
    names = list(B.charts)
    out = []
    for i in range(count):
        name = names[i % len(names)]
        ch = B.chart(name)
        if B.base == "S2":
            lo, hi = _SAFE.get(name, (0.15, 3.0))
            out.append((name, np.array([rng.uniform(lo, hi), rng.uniform(0, 2 * math.pi)])))
        else:
            out.append((name, rng.uniform(0, 2 * math.pi, size=ch.dim)))
    return out


def lift_section_for(B: BundleWithConnection) -> SectionField:
    m = B.meta.get("charge") if isinstance(B.meta, dict) else None
    if m:
        return monopole_section(B, {0: 1.0}, "Y0")
    return constant_section(B, [1.0, 0.0])


def standard_cases(B: BundleWithConnection) -> List[dc.GbcCase]:
    """Two cycles with two decompositions each, for the built-in bases."""
    if B.base == "S2":
        return dc.monopole_cases(B, lift_section_for(B))
    if B.base == "T2":
        S = sphere_bundle(B)
        ch = B.chart("torus")
        s = lift_section_for(B)
        loop = Chain.of(affine_cell(ch, [0.0, 0.3], [[2 * math.pi, 0.0]], "meridian"))
        loop2 = Chain.of(affine_cell(ch, [0.0, 1.1], [[2 * math.pi, 0.0]], "meridian'"))
        annulus = Chain.of(affine_cell(ch, [0.0, 1.1], [[2 * math.pi, 0.0], [0.0, -0.8]], "annulus"))
        square = Chain.of(affine_cell(ch, [0.2, 0.4], [[1.5, 0.0], [0.0, 1.2]], "square"))
        z_sq = boundary(square)
        e1, e2 = Chain(dim=1), Chain(dim=2)
        return [
            dc.GbcCase("meridian", loop, [
                dc.SphereDecomposition(loop, dc.lift_by_section(loop, s, S), e2, "lift"),
                dc.SphereDecomposition(loop, dc.lift_by_section(loop2, s, S), -annulus, "lift+annulus")]),
            dc.GbcCase("square", z_sq, [
                dc.SphereDecomposition(z_sq, e1, square, "filler"),
                dc.SphereDecomposition(z_sq, dc.lift_by_section(z_sq, s, S), e2, "lift")]),
        ]
    raise ValueError(f"no standard cycles for base {B.base!r}")


def s2_fundamental(B: BundleWithConnection, split: float = math.pi / 2) -> Chain:
    """The sphere as the north cap plus the south cap, cut at ``split``."""
    return Chain.of(band_cell(B.chart("north"), 0.0, split), band_cell(B.chart("south"), split, math.pi))


def expected_euler_number(B: BundleWithConnection) -> float:
    if B.base != "S2":
        return 0.0
    if B.name == "tangent_s2":
        return 2.0
    return float(B.meta.get("charge", 0)) if isinstance(B.meta, dict) else 0.0


def _pmap(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def suite_algebra(cfg: SuiteConfig) -> List[dict]:
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(50):
        n = 2 * rng.integers(1, 4)
        A = rng.normal(size=(n, n))
        A = A - A.T
        det = np.linalg.det(A)
        worst = max(worst, abs(pfaffian(A) ** 2 - det) / max(abs(det), 1e-300))
    out = [case("pfaffian_squared_vs_det", worst, 1e-9)]
    worst = 0.0
    for m in range(0, 7):
        for a in (0.5, 1.0, 2.0):
            for upper in (0.3, 1.0, 2.5, math.inf):
                ref = sint.quad(lambda t: t ** m * math.exp(-a * t * t / 2), 0, upper, epsabs=1e-14, epsrel=1e-13)[0]
                worst = max(worst, abs(cw.gaussian_moment(m, a, upper) - ref))
    out.append(case("gaussian_moment_vs_quadrature", worst, 1e-10))
    out.append(case("stokes_random_forms", stokes_residual(50, cfg.seed, cfg.quad_order), 1e-8))
    return out


def stokes_residual(count: int, seed: int, order: int = 16) -> float:
    """``|int_c d alpha - int_{boundary c} alpha|`` for random polynomial
    1-forms on random quadrilaterals in the plane."""
    from .exterior import Chart

    rng = np.random.default_rng(seed)
    plane = Chart("plane", 2, (-5.0, -5.0), (5.0, 5.0))
    worst = 0.0
    for _ in range(count):
        alpha = polynomial_form(2, 1, rng, exact=False)
        corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float) + rng.uniform(-0.3, 0.3, (4, 2))
        c = Chain.of(bilinear_cell(plane, corners * rng.uniform(0.5, 2.0)))
        worst = max(worst, abs(integrate(d_field(alpha), c, order) - integrate(alpha, boundary(c), order)))
    return worst


def _euler_integral_cases(order: int, tol: float = 1e-6) -> List[dict]:
    out = []
    for B in [builtin("tangent_s2")] + [builtin("monopole", charge=m) for m in (1, 2, 3)]:
        val = integrate(cw.euler_form(B), s2_fundamental(B), order)
        exp = expected_euler_number(B)
        out.append(case(f"euler_integral[{B.name}]", abs(val - exp), tol, integral=val, expected=exp))
    return out


def _total_points(B, count, rng, box=3.0):
    return [(B.total_chart(c), np.concatenate([x, rng.uniform(-box, box, B.rank)]))
            for c, x in random_base_points(B, count, rng)]


def suite_chern_weil_forms(cfg: SuiteConfig) -> List[dict]:
    rng = np.random.default_rng(cfg.seed)
    out = _euler_integral_cases(max(cfg.quad_order, 32))
    B = resolve_bundle(cfg)
    h = cfg.fd_step
    # fiber normalization
    for F in (builtin("trivial", rank=2, base="S2"), B):
        val = integrate(cw.thom_form(F), cw.fiber_disk_chain(F, "north", [0.8, 0.3]), 32)
        out.append(case(f"thom_fiber_integral[{F.name}]", abs(val - 1), 1e-5, integral=val))
    # transgression ODE
    worst = 0.0
    pts = _total_points(B, max(cfg.samples // 10, 5), rng)
    for t in (0.5, 1.0, 2.0):
        dU_fd = lambda ch, q: (cw.thom_form(B, t + 1e-4)(ch, q) - cw.thom_form(B, t - 1e-4)(ch, q)) * 5e3
        for ch, q in pts:
            r = dU_fd(ch, q) + exterior_derivative(cw.mq_integrand(B, t), ch, q, h)
            worst = max(worst, r.norm())
    out.append(case("transgression_ode", worst, 1e-4))
    # finite transgression
    worst = 0.0
    chi = cw.euler_form(B)
    for t in (1.0, 3.0):
        TG = cw.transgression_finite(B, t)
        for ch, q in pts:
            base = B.chart(ch.name.split(":")[0])
            chi_e = GradedElement(ch.dim, 0)
            chi_e.c[: 1 << B.base_dim] = chi(base, q[:B.base_dim]).c
            r = chi_e - cw.thom_form(B, t)(ch, q) - exterior_derivative(TG, ch, q, h)
            worst = max(worst, r.norm())
    out.append(case("finite_transgression", worst, cfg.tol_form))
    out.extend(q_property_cases(B, rng, cfg.samples // 10 or 5, h))
    # closedness
    worst = 0.0
    for name, x in random_base_points(B, 10, rng):
        worst = max(worst, exterior_derivative(chi, B.chart(name), x, h).norm())
    for ch, q in pts:
        worst = max(worst, exterior_derivative(cw.thom_form(B), ch, q, h).norm())
    out.append(case("closedness", worst, cfg.tol_form))
    return out


def q_property_cases(B: BundleWithConnection, rng, count: int = 10, h: float = FD_STEP) -> List[dict]:
    S = sphere_bundle(B)
    Q = cw.transgression_infinite(B, S)
    out = []
    base, b = ("north", np.array([0.8, 0.3])) if B.base == "S2" else (next(iter(B.charts)), np.array([0.4, 0.7]))
    val = integrate(Q, cw.fiber_circle_chain(S, base, b), 32)
    out.append(case("Q_fiber_integral", abs(val - 1), 1e-6, integral=val))
    chi = cw.euler_form(B)
    worst = 0.0
    for name, x in random_base_points(B, count, rng):
        for label in ("a", "b"):
            cn = S.chart_over(name, label)
            q = np.concatenate([x, [rng.uniform(-math.pi, math.pi)]])
            chi_e = GradedElement(S.chart(cn).dim, 0)
            chi_e.c[: 1 << B.base_dim] = chi(B.chart(name), x).c
            worst = max(worst, (exterior_derivative(Q, S.chart(cn), q, h) - chi_e).norm())
    out.append(case("dQ_minus_chi", worst, 1e-5))
    return out


def gbc_form_residual(B: BundleWithConnection, v: SectionField, points, h: float = FD_STEP, jobs: int = 1) -> float:
    chi, vU, TG = cw.euler_form(B), cw.section_thom_form(B, v), cw.transgression_unit_interval(B, v)

    def one(item):
        name, x = item
        ch = B.chart(name)
        return (chi(ch, x) - vU(ch, x) - exterior_derivative(TG, ch, x, h)).norm()

    return max(_pmap(one, points, jobs), default=0.0)


def suite_gbc_form(cfg: SuiteConfig) -> List[dict]:
    B = resolve_bundle(cfg)
    v = resolve_section(cfg, B)
    rng = np.random.default_rng(cfg.seed)
    pts = random_base_points(B, cfg.samples, rng)
    val = gbc_form_residual(B, v, pts, cfg.fd_step, cfg.jobs)
    return [case(f"gbc_form_identity[{B.name},{v.name}]", val, cfg.tol_form, points=len(pts))]


def suite_gbc_character(cfg: SuiteConfig) -> List[dict]:
    B = resolve_bundle(cfg)
    v = resolve_section(cfg, B)
    recs = dc.verify_gbc_identity(B, v, standard_cases(B), cfg.tol_mod, cfg.quad_order, jobs=cfg.jobs)
    out = []
    for r in recs:
        d = r.as_dict()
        d.update(name=f"gbc_identity[{r.cycle_id}]", value=r.residual)
        out.append(d)
    return out


def dirac_samples(count: int, seed: int) -> List[Chain]:
    """Admissible 2-chains for the Dirac pair: random quadrilaterals away
    from the south pole and random caps around it."""
    from .bundles import s2_charts

    rng = np.random.default_rng(seed)
    C = s2_charts()
    out = []
    for i in range(count):
        if i % 4 == 3:
            d = rng.uniform(0.1, 1.2)
            out.append(Chain.of(band_cell(C["south"], math.pi - d, math.pi, rng.uniform(0, 2 * math.pi))))
        else:
            th = rng.uniform(0.2, 2.6)
            ph = rng.uniform(0, 2 * math.pi)
            corners = np.array([[th, ph], [th + 0.3, ph], [th + 0.3, ph + 0.5], [th, ph + 0.5]])
            corners = corners + rng.uniform(-0.08, 0.08, (4, 2))
            out.append(Chain.of(bilinear_cell(C["sphere"], corners)))
    return out


def suite_ak_pairs(cfg: SuiteConfig) -> List[dict]:
    from .bundles import s2_charts

    C = s2_charts()
    P = akp.dirac_pair(clearance=cfg.clearance)
    P.order = cfg.quad_order
    samples = dirac_samples(20, cfg.seed)
    rep = akp.check_pair(P, samples, cfg.tol_int)
    out = [case("dirac_integrality", rep.max_residual, cfg.tol_int, rep.passed and rep.skipped == 0,
                admissible=len(rep.residuals))]
    eq = Chain.of(latitude_cell(C["sphere"], math.pi / 2))
    up = Chain.of(band_cell(C["sphere"], 0.0, math.pi / 2))
    res = akp.decomposition_independence(P, eq, [(up, Chain(dim=1)), (Chain(dim=2), eq)])
    out.append(case("decomposition_independence_equator", res, cfg.tol_mod))
    bad = akp.dirac_pair(1.7, cfg.clearance)
    bad.order = cfg.quad_order
    rep_bad = akp.check_pair(bad, samples, cfg.tol_int)
    out.append(case("scaled_pair_control", rep_bad.max_residual, 0.1, rep_bad.max_residual > 0.1))
    return out


def euler_error_table(B: BundleWithConnection, orders: Sequence[int]) -> List[dict]:
    exp = expected_euler_number(B)
    chi = cw.euler_form(B)
    rows = []
    for n in orders:
        rows.append({"order": int(n), "residual": abs(integrate(chi, s2_fundamental(B), n) - exp)})
    return rows


def convergence_study(cfg: SuiteConfig, orders: Optional[Sequence[int]] = None) -> List[dict]:
    orders = list(orders or cfg.orders)
    if len(orders) < 2:
        raise ValueError("a convergence study needs at least two orders")
    B = resolve_bundle(cfg)
    return euler_error_table(B, sorted(orders))


def suite_convergence(cfg: SuiteConfig) -> List[dict]:
    rows = convergence_study(cfg)
    out = []
    for a, b in zip(rows, rows[1:]):
        ratio = a["residual"] / b["residual"] if b["residual"] > 0 else math.inf
        out.append(case(f"error_ratio[{a['order']}->{b['order']}]", ratio, 1e2, ratio >= 1e2,
                        residuals=[a["residual"], b["residual"]]))
    return out


SUITE_FUNCS: Dict[str, Callable[[SuiteConfig], List[dict]]] = {
    "algebra": suite_algebra,
    "chern_weil_forms": suite_chern_weil_forms,
    "gbc_form": suite_gbc_form,
    "gbc_character": suite_gbc_character,
    "ak_pairs": suite_ak_pairs,
    "convergence": suite_convergence,
}


def run(cfg: SuiteConfig) -> dict:
    cfg.validate()
    t0 = time.perf_counter()
    cases = SUITE_FUNCS[cfg.suite](cfg)
    report = {"suite": cfg.suite, "config": cfg.as_dict(), "cases": cases,
              "pass": all(c["pass"] for c in cases), "seconds": time.perf_counter() - t0}
    if cfg.suite == "convergence":
        report["table"] = convergence_study(cfg)
    return report
