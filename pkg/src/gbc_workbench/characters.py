"""Differential characters: i2, the Euler character and the pulled-back Thom
character evaluated through sphere-bundle decompositions, and the identity
relating them."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .bundles import (
    BundleWithConnection, SectionField, SphereBundle, fiber_angle, monopole_section, sphere_bundle,
)
from .chains import (
    DEFAULT_ORDER, Cell, Chain, ModValue, band_cell, boundary, chain_battery, integrate, latitude_cell,
    mod_distance, mod_reduce, test_form_battery, witness_residual,
)
from .chern_weil import (
    euler_form, section_thom_form, transgression_infinite, transgression_unit_interval,
)
from .exterior import DimensionError, EvaluationError, FormField, GradedElement, d_field, pullback_form

WITNESS_TOL = 1e-5
MOD_TOL = 1e-5
MIN_SECTION_NORM = 1e-6


class DecompositionError(ValueError):
    pass


class CycleError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Characters
# ---------------------------------------------------------------------------


@dataclass
class DifferentialCharacter:
    degree: int
    modulus: float
    curvature: FormField
    evaluator: Callable[..., ModValue]
    name: str = ""

    def __call__(self, z: Chain, *aux, **kw) -> ModValue:
        return self.evaluator(z, *aux, **kw)

    def axiom_residual(self, c: Chain, order: int = DEFAULT_ORDER, **kw) -> float:
        """Distance between the value on ``boundary c`` and ``int_c curvature``."""
        lhs = self(boundary(c), **kw)
        return mod_distance(lhs, mod_reduce(integrate(self.curvature, c, order), self.modulus))

    def periods(self, cycles: Sequence[Chain], order: int = DEFAULT_ORDER) -> List[ModValue]:
        """Reduced periods of the curvature (the data of its integral class)."""
        return [mod_reduce(integrate(self.curvature, z, order), self.modulus) for z in cycles]


def i2(omega: FormField, modulus: float = 1.0, order: int = DEFAULT_ORDER) -> DifferentialCharacter:
    """``z -> int_z omega`` mod ``modulus``; its curvature is ``d omega``."""
    deg = None if omega.degree is None else omega.degree + 1

    def ev(z: Chain, **kw) -> ModValue:
        return mod_reduce(integrate(omega, z, kw.get("order", order)), modulus)

    return DifferentialCharacter(deg, modulus, d_field(omega), ev, name=f"i2({omega.name})")


def closed_extras(base: str, degree: int) -> List[FormField]:
    """Closed non-exact forms on the built-in bases (volume and angle forms)."""
    if base == "S2" and degree == 2:
        return [FormField(2, 0, lambda ch, x: GradedElement(2, 0, {((0, 1), ()): math.sin(x[0])}), 2,
                          name="area")]
    if base == "T2" and degree == 1:
        return [FormField(2, 0, lambda ch, x, a=a: GradedElement.dx(2, 0, a), 1, name=f"dx{a}") for a in (0, 1)]
    if base == "T2" and degree == 2:
        return [FormField(2, 0, lambda ch, x: GradedElement(2, 0, {((0, 1), ()): 1.0}), 2, name="du^dv")]
    if base == "S1" and degree == 1:
        return [FormField(1, 0, lambda ch, x: GradedElement.dx(1, 0, 0), 1, name="dtheta")]
    return []


def battery_for(B: BundleWithConnection, degree: int, count: int = 8, seed: int = 0) -> List[FormField]:
    return test_form_battery(B.base_dim, degree, count, seed, closed_extras(B.base, degree))


# ---------------------------------------------------------------------------
# Decompositions through the sphere bundle
# ---------------------------------------------------------------------------


@dataclass
class SphereDecomposition:
    """``z = proj_*(y) + boundary(w)`` with ``y`` a cycle in SE."""

    z: Chain
    y: Chain
    w: Chain
    label: str = ""

    def projected(self, S: SphereBundle) -> Chain:
        if self.y.is_empty():
            return Chain(dim=self.z.dim)
        return self.y.pushforward({c: S.projection(c) for c in S.charts})

    def residual(self, S: SphereBundle, forms: Sequence[FormField], order: int = DEFAULT_ORDER) -> float:
        diff = self.projected(S) + boundary(self.w) - self.z
        return witness_residual(diff.simplify(), forms, order)

    def validate(self, S: SphereBundle, forms: Sequence[FormField], tol: float = WITNESS_TOL,
                 order: int = DEFAULT_ORDER) -> float:
        r = self.residual(S, forms, order)
        if r > tol:
            raise DecompositionError(f"decomposition {self.label!r} witness residual {r:.3g} > {tol:g}")
        return r


def _context(B, S, check, dec, order, battery):
    S = S if S is not None else sphere_bundle(B)
    if check:
        forms = battery if battery is not None else battery_for(B, dec.z.dim or 0)
        dec.validate(S, forms, order=order)
    return S


def euler_character_value(B: BundleWithConnection, dec: SphereDecomposition, S: Optional[SphereBundle] = None,
                          order: int = DEFAULT_ORDER, check: bool = True, battery=None) -> float:
    """Unreduced ``int_y Q + int_w chi``."""
    S = _context(B, S, check, dec, order, battery)
    return integrate(transgression_infinite(B, S), dec.y, order) + integrate(euler_form(B), dec.w, order)


def euler_character_eval(B: BundleWithConnection, dec: SphereDecomposition, modulus: float = 1.0,
                         **kw) -> ModValue:
    return mod_reduce(euler_character_value(B, dec, **kw), modulus)


def _se_difference(B: BundleWithConnection, v: SectionField, S: SphereBundle) -> FormField:
    """``Q - proj^* TG_v`` on the sphere-bundle charts."""
    Q = transgression_infinite(B, S)
    TG = transgression_unit_interval(B, v)
    pulled = {c: pullback_form(S.projection(c), TG) for c in S.charts if S.base_of[c] in TG.charts}
    return FormField(Q.p, 0, lambda ch, q: Q(ch, q) - pulled[ch.name](ch, q), Q.degree, pulled.keys(),
                     name="Q-proj*TG")


def thom_pullback_character_value(B: BundleWithConnection, v: SectionField, dec: SphereDecomposition,
                                  S: Optional[SphereBundle] = None, order: int = DEFAULT_ORDER,
                                  check: bool = True, battery=None) -> float:
    """Unreduced ``int_y (Q - proj^* TG_v) + int_w v^* U``."""
    S = _context(B, S, check, dec, order, battery)
    return integrate(_se_difference(B, v, S), dec.y, order) + integrate(section_thom_form(B, v), dec.w, order)


def thom_pullback_character_eval(B: BundleWithConnection, v: SectionField, dec: SphereDecomposition,
                                 modulus: float = 1.0, **kw) -> ModValue:
    return mod_reduce(thom_pullback_character_value(B, v, dec, **kw), modulus)


def check_cycle(z: Chain, forms: Sequence[FormField] = (), tol: float = WITNESS_TOL,
                order: int = DEFAULT_ORDER) -> float:
    """Zero for a chain whose boundary cancels; otherwise the battery residual
    of its boundary, raising when it exceeds ``tol``."""
    if z.is_empty() or z.dim == 0:
        return 0.0
    bd = boundary(z)
    if bd.is_empty():
        return 0.0
    r = witness_residual(bd, forms, order) if forms else math.inf
    if r > tol:
        raise CycleError(f"chain is not a cycle (boundary residual {r:.3g})")
    return r


def rhs_value(B: BundleWithConnection, v: SectionField, z: Chain, order: int = DEFAULT_ORDER,
              check: bool = True) -> float:
    if check:
        check_cycle(z, chain_battery(B.base_dim, (z.dim or 1) - 1), order=order)
    return integrate(transgression_unit_interval(B, v), z, order)


def rhs_eval(B: BundleWithConnection, v: SectionField, z: Chain, modulus: float = 1.0, **kw) -> ModValue:
    """``i2(TG_v)(z)``."""
    return mod_reduce(rhs_value(B, v, z, **kw), modulus)


def euler_character(B: BundleWithConnection, modulus: float = 1.0, order: int = DEFAULT_ORDER,
                    S: Optional[SphereBundle] = None) -> DifferentialCharacter:
    """The Euler character; evaluation needs a decomposition (or, for a
    boundary ``z = boundary c``, none: ``y = 0, w = c`` is used by
    :meth:`DifferentialCharacter.axiom_residual` through ``filler``)."""
    S = S if S is not None else sphere_bundle(B)

    def ev(z: Chain, dec: Optional[SphereDecomposition] = None, filler: Optional[Chain] = None, **kw):
        if dec is None:
            if filler is None:
                raise DecompositionError("the Euler character needs a decomposition of the cycle")
            dec = SphereDecomposition(z, Chain(dim=z.dim), filler, "boundary")
        return euler_character_eval(B, dec, modulus, S=S, order=kw.get("order", order))

    return DifferentialCharacter(2 * B.k, modulus, euler_form(B), ev, name=f"chi^({B.name})")


# ---------------------------------------------------------------------------
# Identity verifier
# ---------------------------------------------------------------------------


@dataclass
class GbcCase:
    cycle_id: str
    z: Chain
    decompositions: List[SphereDecomposition]


@dataclass
class CaseRecord:
    bundle: str
    section: str
    cycle_id: str
    lhs1: float
    lhs2: float
    rhs: float
    residual: float
    tolerance: float
    passed: bool
    spread: float = 0.0
    witness: float = 0.0
    per_decomposition: List[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"bundle": self.bundle, "section": self.section, "cycle_id": self.cycle_id, "lhs1": self.lhs1,
                "lhs2": self.lhs2, "rhs": self.rhs, "residual": self.residual, "tolerance": self.tolerance,
                "pass": self.passed, "decomposition_spread": self.spread, "witness": self.witness,
                "decompositions": self.per_decomposition}


def _run_case(B, v, case: GbcCase, S, tol, order, modulus) -> CaseRecord:
    rhs_raw = rhs_value(B, v, case.z, order)
    rhs = mod_reduce(rhs_raw, modulus)
    rows, worst, witness = [], 0.0, 0.0
    firsts = None
    l1s, l2s = [], []
    for dec in case.decompositions:
        witness = max(witness, dec.validate(S, battery_for(B, case.z.dim), order=order))
        a = mod_reduce(euler_character_value(B, dec, S, order, check=False), modulus)
        b = mod_reduce(thom_pullback_character_value(B, v, dec, S, order, check=False), modulus)
        res = mod_distance(a - b, rhs)
        worst = max(worst, res)
        l1s.append(a)
        l2s.append(b)
        rows.append({"label": dec.label, "lhs1": a.value, "lhs2": b.value, "residual": res})
        firsts = firsts or (a, b)
    spread = 0.0
    for vals in (l1s, l2s):
        for x in vals[1:]:
            spread = max(spread, mod_distance(vals[0], x))
    a, b = firsts
    ok = worst < tol and spread < tol
    return CaseRecord(B.name, v.name, case.cycle_id, a.value, b.value, rhs.value, worst, tol, ok, spread,
                      witness, rows)


def verify_gbc_identity(B: BundleWithConnection, v: SectionField, cases: Sequence[GbcCase],
                        tol: float = MOD_TOL, order: int = DEFAULT_ORDER, modulus: float = 1.0,
                        jobs: int = 1) -> List[CaseRecord]:
    """Per case: distance between (Euler character - pulled-back Thom
    character) and ``i2(TG_v)`` on ``z``, maximized over the supplied
    decompositions; the record also reports the spread of each side across
    decompositions."""
    S = sphere_bundle(B)
    run = lambda c: _run_case(B, v, c, S, tol, order, modulus)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run, cases))
    return [run(c) for c in cases]


# ---------------------------------------------------------------------------
# Lifts
# ---------------------------------------------------------------------------


def _lift_cell(cell: Cell, s: SectionField, S: SphereBundle, label: str, grid: int) -> Cell:
    if cell.dim != 1:
        raise DimensionError("lifts are provided for 1-cells (rank-2 bundles)")
    base = cell.chart.name
    ticks = np.linspace(0.0, 1.0, grid)
    vals = np.array([s(base, cell(np.array([u]))) for u in ticks])
    norms = np.linalg.norm(vals, axis=1)
    if norms.min() <= MIN_SECTION_NORM:
        raise EvaluationError(f"section vanishes on the cycle (min norm {norms.min():.3g})")
    ref = np.unwrap(np.arctan2(-vals[:, 1], vals[:, 0]))
    target = S.chart(S.chart_over(base, label))

    def angle(u):
        x = s(base, cell(u))
        if np.linalg.norm(x) <= MIN_SECTION_NORM:
            raise EvaluationError("section vanishes on the cycle")
        raw = fiber_angle(x)
        guess = float(np.interp(u[0], ticks, ref))
        return raw + 2 * math.pi * round((guess - raw) / (2 * math.pi))

    return Cell(1, target, lambda u: np.concatenate([cell(u), [angle(u)]]), label=f"lift[{cell.label}]",
                orientation=cell.orientation)


def lift_by_section(z: Chain, s: SectionField, S: Optional[SphereBundle] = None, label: str = "a",
                    grid: int = 257) -> Chain:
    """``u -> (z(u), s/|s|)`` in fiber-angle coordinates, cell by cell."""
    if S is None:
        S = sphere_bundle(s.bundle)
    if S.bundle.rank != 2:
        raise DimensionError("lifts are provided for rank-2 bundles")
    return Chain([(c, _lift_cell(cell, s, S, label, grid)) for c, cell in z.terms], z.dim)


def winding_number(y: Chain) -> float:
    """Counterclockwise turns of the fiber vector along a lifted 1-chain
    (the stored fiber angle runs clockwise)."""
    total = 0.0
    for sign, cell in y.signed_cells():
        total += sign * (cell(np.array([1.0]))[-1] - cell(np.array([0.0]))[-1])
    return -total / (2 * math.pi)


# ---------------------------------------------------------------------------
# Standard cases
# ---------------------------------------------------------------------------


def monopole_cases(B: BundleWithConnection, lift_section: Optional[SectionField] = None,
                   theta0: float = math.pi / 3, theta1: float = math.pi / 2) -> List[GbcCase]:
    """Two cycles in the north chart, each with two decompositions.

    ``exact``: the latitude ``theta0`` as the boundary of the cap, and as a
    lift with no filler.  ``equator``: the latitude ``theta1`` lifted
    directly, and as a lift of ``theta0`` plus the band in between.
    """
    S = sphere_bundle(B)
    north = B.chart("north")
    if lift_section is None:
        lift_section = monopole_section(B, {0: 1.0}, "Y0")
    z0 = Chain.of(latitude_cell(north, theta0))
    z1 = Chain.of(latitude_cell(north, theta1))
    cap = Chain.of(band_cell(north, 0.0, theta0))
    band = Chain.of(band_cell(north, theta0, theta1))
    y0 = lift_by_section(z0, lift_section, S)
    y1 = lift_by_section(z1, lift_section, S)
    empty1 = Chain(dim=1)
    empty2 = Chain(dim=2)
    return [
        GbcCase("exact", z0, [SphereDecomposition(z0, empty1, cap, "cap"),
                              SphereDecomposition(z0, y0, empty2, "lift")]),
        GbcCase("equator", z1, [SphereDecomposition(z1, y1, empty2, "lift"),
                                SphereDecomposition(z1, y0, band, "lift+band")]),
    ]


def holonomy_angle(B: BundleWithConnection, chart: str, path: Callable[[float], np.ndarray],
                   dpath: Callable[[float], np.ndarray]) -> float:
    """Counterclockwise rotation angle of parallel transport around a closed
    path in one chart (``ds/dt = -omega(dpath) s``, rank 2)."""
    from scipy.integrate import solve_ivp

    def rhs(t, s):
        w = np.einsum("ija,a->ij", B.omega(chart, path(t)), dpath(t))
        return -w @ s

    sol = solve_ivp(rhs, (0.0, 1.0), [1.0, 0.0], rtol=1e-12, atol=1e-13)
    s = sol.y[:, -1]
    return math.atan2(s[1], s[0])
