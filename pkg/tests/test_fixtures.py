import math

import numpy as np
import pytest

from gbc_workbench import ak_pairs as akp
from gbc_workbench.bundles import builtin, overlap_points, section_zeros_two
from gbc_workbench.chains import integrate
from gbc_workbench.exterior import FormField, GradedElement
from gbc_workbench.fixtures import DATA_DIR, FixtureError, check_expression, from_document, load, sample_fixtures


def test_sample_fixtures_load():
    paths = sample_fixtures()
    assert {p.name for p in paths} >= {"dirac.yaml", "flat_torus.yaml", "monopole2.yaml"}
    for p in paths:
        assert load(p)


def test_monopole_fixture_matches_builtin():
    fx = load(DATA_DIR / "monopole2.yaml")
    B, ref = fx["bundle"], builtin("monopole", m=2)
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = np.array([rng.uniform(0.2, 2.9), rng.uniform(0, 2 * math.pi)])
        for ch in ("north", "south"):
            if not B.chart(ch).contains(x):
                continue
            assert np.allclose(B.omega(ch, x), ref.omega(ch, x), atol=1e-12)
            assert np.allclose(B.curvature_array(ch, x), ref.curvature_array(ch, x), atol=1e-12)
    for x in overlap_points(B, "north", "south", 5):
        t, tr = B.transition("north", "south"), ref.transition("north", "south")
        assert np.allclose(t.map(x), tr.map(x), atol=1e-12)


def test_monopole_fixture_section_matches_builtin():
    fx = load(DATA_DIR / "monopole2.yaml")
    s, ref = fx["section"], section_zeros_two(builtin("monopole", m=2))
    for x in [(0.4, 1.0), (1.2, 4.0), (2.7, 0.3)]:
        for ch in ("north", "south"):
            if not fx["bundle"].chart(ch).contains(np.array(x)):
                continue
            assert np.allclose(s(ch, x), ref(ch, x), atol=1e-12)


def test_monopole_fixture_chains():
    fx = load(DATA_DIR / "monopole2.yaml")
    z, cap = fx["chains"]["equator"], fx["chains"]["polar_cap"]
    assert z.dim == 1 and cap.dim == 2
    area = FormField(2, 0, lambda ch, x: GradedElement.basis(2, 0, (0, 1), value=math.sin(x[0])), 2)
    assert integrate(area, cap) == pytest.approx(2 * math.pi * (1 - math.cos(math.pi / 3)), rel=1e-8)


def test_dirac_fixture_periods():
    fx = load(DATA_DIR / "dirac.yaml")
    P = fx["pair"]
    assert abs(akp.period(P, fx["chains"]["upper_hemisphere"])) < 1e-6
    assert abs(akp.period(P, fx["chains"]["south_cap"]) - 1.0) < 1e-6
    ref = akp.dirac_pair()
    assert akp.period(P, fx["chains"]["south_cap"]) == pytest.approx(akp.period(ref, fx["chains"]["south_cap"]),
                                                                     abs=1e-9)


def test_flat_torus_fixture():
    fx = load(DATA_DIR / "flat_torus.yaml")
    B, s = fx["bundle"], fx["section"]
    assert not B.curvature_array("torus", (0.3, 0.7)).any()
    assert np.allclose(s("torus", (1.0, 2.0)), [1.0, 0.5])
    assert fx["chains"]["meridian"].dim == 1


@pytest.mark.parametrize("text", ["__import__('os')", "x0.real", "open(x0)", "lambda: 1", "x0 if x0 else 1",
                                  "sin(x0, x1)", "tan(x0)", "y7 + 1", "'a'", "x0 +"])
def test_bad_expressions_rejected(text):
    with pytest.raises(FixtureError):
        check_expression(text, ["x0", "x1"])


def test_good_expression_accepted():
    check_expression("sqrt(x0**2 + 1) * exp(-x1) / (4*pi) - cos(x0)", ["x0", "x1"])


def test_malformed_documents():
    with pytest.raises(FixtureError):
        from_document([1, 2])
    with pytest.raises(FixtureError):
        from_document({"section": {"builtin": "zero"}})
    with pytest.raises(FixtureError):
        from_document({"bundle": {"base": "S2", "rank": 2, "charts": ["north"],
                                  "connection": {"north": {"0,1": ["0", "import os"]}}}})


def test_missing_file(tmp_path):
    with pytest.raises(FixtureError):
        load(tmp_path / "nope.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("bundle: [unclosed")
    with pytest.raises(FixtureError):
        load(bad)
