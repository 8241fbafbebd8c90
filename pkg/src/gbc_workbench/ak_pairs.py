"""Pairs of forms with singularities and the characters they induce."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .bundles import s2_charts
from .chains import (
    DEFAULT_ORDER, AdmissibilityError, AmbientPolynomial, Cell, Chain, ModValue, boundary, integrate,
    mod_distance, mod_reduce, test_form_battery, witness_residual,
)
from .exterior import DERIVATIVE_TOL, FormField, GradedElement, exterior_derivative, wedge

DEFAULT_CLEARANCE = 1e-3
GRID_POINTS = 65  # samples per cube axis, pitch 1/64
INTEGRALITY_TOL = 1e-5


class SingularSet:
    """Finite union of cells and points, measured in ambient coordinates."""

    def __init__(self, cells: Sequence[Cell] = (), points: Sequence[np.ndarray] = (), max_dim: Optional[int] = None,
                 samples: int = GRID_POINTS):
        self.cells = list(cells)
        self.points = [np.asarray(p, float) for p in points]
        self.max_dim = max_dim
        if max_dim is not None and any(c.dim > max_dim for c in self.cells):
            raise ValueError(f"singular cell of dimension above {max_dim}")
        clouds = [np.atleast_2d(p) for p in self.points]
        for c in self.cells:
            clouds.append(np.array([c.chart.to_ambient(q) for q in c.sample(samples, interior=False)]))
        self.cloud = np.vstack(clouds) if clouds else np.zeros((0, 0))

    @property
    def dim(self) -> int:
        return max([0] * bool(self.points) + [c.dim for c in self.cells], default=-1)

    def is_empty(self) -> bool:
        return self.cloud.size == 0

    def distance(self, ambient_points) -> float:
        if self.is_empty():
            return math.inf
        P = np.atleast_2d(np.asarray(ambient_points, float))
        d = np.linalg.norm(P[:, None, :] - self.cloud[None, :, :], axis=2)
        return float(d.min())

    def contained_in(self, other: "SingularSet", tol: float = 1e-9) -> bool:
        return self.is_empty() or all(other.distance(p) <= tol for p in self.cloud)


def chain_support(c: Chain, n: int = GRID_POINTS) -> np.ndarray:
    """Ambient samples of ``|c|`` on a grid of pitch ``1/(n-1)`` per axis."""
    pts = [cell.chart.to_ambient(q) for _, cell in c.terms for q in cell.sample(n, interior=False)]
    return np.array(pts) if pts else np.zeros((0, 0))


@dataclass
class AkPair:
    degree: int
    omega: FormField
    phi: FormField
    e_omega: SingularSet
    e_phi: SingularSet
    modulus: float = 1.0
    clearance: float = DEFAULT_CLEARANCE
    name: str = ""
    order: int = DEFAULT_ORDER

    def __post_init__(self):
        if self.modulus <= 0:
            raise ValueError("modulus must be positive")
        n = self.omega.p
        if self.e_phi.dim > n - self.degree or self.e_omega.dim > n - self.degree - 1:
            raise ValueError("singular sets exceed the allowed dimensions")

    def extension_residual(self, samples: Sequence[Tuple]) -> float:
        """Largest ``|d phi - omega|`` over ``(chart, point)`` samples."""
        worst = 0.0
        for chart, x in samples:
            worst = max(worst, (exterior_derivative(self.phi, chart, x) - self.omega(chart, x)).norm())
        return worst

    def validate(self, samples: Sequence[Tuple], tol: float = DERIVATIVE_TOL) -> None:
        if not self.e_omega.contained_in(self.e_phi):
            raise ValueError("e(omega) is not contained in e(phi)")
        r = self.extension_residual(samples)
        if r > tol:
            raise ValueError(f"d phi differs from omega by {r:.3g}")


def is_admissible(p: AkPair, c: Chain, n: int = GRID_POINTS) -> bool:
    """``|c|`` clears ``e(omega)`` and ``|boundary c|`` clears ``e(phi)`` by
    more than the pair's clearance (grid pitch ``1/(n-1)``)."""
    if c.is_empty():
        return True
    if p.e_omega.distance(chain_support(c, n)) <= p.clearance:
        return False
    if c.dim and c.dim > 0:
        bd = boundary(c)
        if not bd.is_empty() and p.e_phi.distance(chain_support(bd, n)) <= p.clearance:
            return False
    return True


def period(p: AkPair, c: Chain, order: Optional[int] = None) -> float:
    """``int_c omega - int_{boundary c} phi``."""
    if not is_admissible(p, c):
        raise AdmissibilityError(f"chain is not admissible for {p.name or 'pair'}")
    order = order or p.order
    return integrate(p.omega, c, order) - integrate(p.phi, boundary(c), order)


@dataclass
class PairReport:
    residuals: List[float] = field(default_factory=list)
    periods: List[float] = field(default_factory=list)
    skipped: int = 0
    tolerance: float = INTEGRALITY_TOL
    warnings: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r < self.tolerance for r in self.residuals)

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)


def check_pair(p: AkPair, samples: Sequence[Chain], tol: float = INTEGRALITY_TOL) -> PairReport:
    """Distance of each admissible period to the lattice ``modulus * Z``."""
    rep = PairReport(tolerance=tol)
    if not samples:
        msg = "no sample chains: integrality check is vacuous"
        rep.warnings.append(msg)
        warnings.warn(msg)
        return rep
    zero = mod_reduce(0.0, p.modulus)
    for c in samples:
        if not is_admissible(p, c):
            rep.skipped += 1
            continue
        val = period(p, c)
        rep.periods.append(val)
        rep.residuals.append(mod_distance(mod_reduce(val, p.modulus), zero))
    return rep


def eval_induced_character(p: AkPair, c_k: Chain, z_prime: Chain, z: Optional[Chain] = None,
                           battery: Optional[Sequence[FormField]] = None, witness_tol: float = 1e-5,
                           order: Optional[int] = None) -> ModValue:
    """``int_{c_k} omega + int_{z'} phi`` mod A, for ``z = boundary c_k + z'``.

    When ``z`` is given, the decomposition is certified by integrating closed
    test forms over ``z - boundary c_k - z'``.
    """
    order = order or p.order
    if not z_prime.is_empty() and p.e_phi.distance(chain_support(z_prime)) <= p.clearance:
        raise AdmissibilityError("z' comes within the clearance of e(phi)")
    if not c_k.is_empty() and p.e_omega.distance(chain_support(c_k)) <= p.clearance:
        raise AdmissibilityError("c_k comes within the clearance of e(omega)")
    if z is not None:
        forms = battery if battery is not None else test_form_battery(p.phi.p, p.degree - 1)
        diff = z - boundary(c_k) - z_prime
        res = witness_residual(diff, forms, order)
        if res > witness_tol:
            raise ValueError(f"decomposition witness failed: residual {res:.3g}")
    total = integrate(p.omega, c_k, order) + integrate(p.phi, z_prime, order)
    return mod_reduce(total, p.modulus)


def decomposition_independence(p: AkPair, z: Chain, decompositions: Sequence[Tuple[Chain, Chain]], **kw) -> float:
    """Mod-A distance between the values of two decompositions of ``z``."""
    if len(decompositions) != 2:
        raise ValueError("expected two decompositions")
    a, b = (eval_induced_character(p, c, zp, z, **kw) for c, zp in decompositions)
    return mod_distance(a, b)


# ---------------------------------------------------------------------------
# Built-in pairs
# ---------------------------------------------------------------------------


def dirac_pair(scale: float = 1.0, clearance: float = DEFAULT_CLEARANCE) -> AkPair:
    """Normalized area form with the potential ``(1 - cos theta) dphi / 4 pi``,
    singular only at the south pole.  ``scale`` multiplies the area form
    (``scale != 1`` breaks the pair and serves as a negative control)."""
    charts = s2_charts()

    def omega(ch, x):
        return GradedElement(2, 0, {((0, 1), ()): scale * math.sin(x[0]) / (4 * math.pi)})

    def phi(ch, x):
        return GradedElement(2, 0, {((1,), ()): (1 - math.cos(x[0])) / (4 * math.pi)})

    south = np.array([0.0, 0.0, -1.0])
    return AkPair(2, FormField(2, 0, omega, 2, charts, name="dA/4pi"), FormField(2, 0, phi, 1, charts, name="A"),
                  SingularSet(max_dim=0), SingularSet(points=[south], max_dim=0), 1.0, clearance,
                  name=f"dirac(scale={scale:g})")


def exact_pair(seed: int = 0, modulus: float = 1.0) -> AkPair:
    """``(d alpha, alpha)`` for a random smooth polynomial 1-form on S^2."""
    rng = np.random.default_rng(seed)
    f, g = AmbientPolynomial(rng), AmbientPolynomial(rng)
    charts = s2_charts()
    phi = FormField(2, 0, lambda ch, x: g.differential(ch, x) * f.value(ch, x), 1, charts, name="f dg")
    omega = FormField(2, 0, lambda ch, x: wedge(f.differential(ch, x), g.differential(ch, x)), 2, charts,
                      name="df^dg")
    return AkPair(2, omega, phi, SingularSet(), SingularSet(), modulus, name=f"exact(seed={seed})")


def shifted(p: AkPair, alpha: FormField) -> AkPair:
    """``(omega, phi + alpha)`` for a closed global ``alpha`` (or any ``alpha``
    when only evaluation on cycles is wanted)."""
    return AkPair(p.degree, p.omega, p.phi + alpha, p.e_omega, p.e_phi, p.modulus, p.clearance,
                  name=f"{p.name}+{alpha.name}")


def scaled_pair(p: AkPair, c: float) -> AkPair:
    """Both forms and the modulus multiplied by ``c``."""
    return AkPair(p.degree, p.omega.scaled(c), p.phi.scaled(c), p.e_omega, p.e_phi, p.modulus * c, p.clearance,
                  name=f"{c:g}*{p.name}")
