import logging
from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import approx, mark, raises

from expr_core import ZERO, Chart, ProvedZero, Var, exp, is_zero, mul, parse_expr, sub
from families import (
    SIGMA_CHART,
    SIGMA_PROFILE,
    FamilySpec,
    euler_contact_structure,
    euler_weighted_structure,
    family_structure,
    lehbel_structure,
    sigma_contact_form,
    sigma_structure,
)
from jacobi import (
    CITE_EULER_PARITY,
    CITE_PROPER,
    CITE_SEMI_CONNECTED,
    ContactForm,
    EvenDimension,
    HomogeneousPoisson,
    JacobiStructure,
    NonCoordinateHomothety,
    NotContact,
    NotEulerField,
    NotHomogeneous,
    OddDimension,
    UnsupportedDimension,
    check_homogeneous,
    check_jacobi,
    check_jacobi_dim3,
    check_poisson,
    contact_defect,
    contact_form_to_jacobi,
    dalpha_constant,
    dim3_components,
    dimension3_singular_type,
    divergence_structure,
    euler_degree_check,
    euler_weights,
    is_contact_everywhere,
    jacobi_bracket,
    measure_homogeneity,
    poissonify,
    sample_contact_jacobi,
    singular_locus_report,
    slice_induce,
    symplectic_check,
)
from multivector import (
    bivector_field,
    field_zero_verdict,
    mv_power,
    top_coefficient,
    vector_field,
)

from .testing_utils import random_field, same_expr


XYZ = Chart.of("x", "y", "z")


def p(text, chart=XYZ):
    return parse_expr(text, chart)


def structure(pi, e, chart=XYZ):
    return JacobiStructure.from_components(chart, pi, e)


def zero_structure():
    return structure({}, {})


def example1():
    return family_structure(FamilySpec.from_text("2+3*y"))


def example2():
    return family_structure(FamilySpec.from_text("y^3+y^2+y"))


def example3():
    return family_structure(FamilySpec.from_text("y^2+y+1"))


# ============================================================================
# Identities
# ============================================================================

def test_lehbel_is_jacobi_exactly(lehbel, cfg):
    report = check_jacobi(lehbel, cfg)
    assert report.passed
    assert all(isinstance(c.verdict, ProvedZero) for c in report.checks)


def test_unit_reeb_field_fails(cfg):
    report = check_jacobi(lehbel_structure(1), cfg)
    assert not report.passed
    failing = report.check("jacobi.pi_pi")
    assert not failing.passed
    assert failing.witness is not None
    assert report.check("jacobi.e_pi").passed


def test_linear_bivector_with_vertical_reeb_fails(cfg):
    report = check_jacobi(structure({("x", "y"): "x"}, {"z": 1}), cfg)
    assert not report.check("jacobi.pi_pi").passed


def test_zero_structure_is_jacobi(cfg):
    assert check_jacobi(zero_structure(), cfg).passed


def test_poisson_check(cfg):
    assert check_poisson(bivector_field(XYZ, {("x", "y"): 1, ("y", "z"): "x"}), cfg).passed
    assert not check_poisson(bivector_field(XYZ, {("x", "y"): "y", ("y", "z"): 1}), cfg).passed


def test_dim3_conditions_match_the_bracket(lehbel, cfg):
    report = check_jacobi_dim3(*dim3_components(lehbel), chart=XYZ, cfg=cfg)
    assert report.passed
    assert [c.check_id for c in report.checks] == ["dim3.condition1", "dim3.condition2.x",
                                                   "dim3.condition2.y", "dim3.condition2.z"]
    unit = check_jacobi_dim3(*dim3_components(lehbel_structure(1)), chart=XYZ, cfg=cfg)
    assert not unit.check("dim3.condition1").passed
    assert unit.check("dim3.condition2.z").passed


def test_dim3_needs_three_coordinates():
    with raises(UnsupportedDimension):
        dim3_components(structure({}, {}, Chart.of("x", "y")))


def test_report_lookup_of_unknown_check(lehbel, cfg):
    with raises(KeyError):
        check_jacobi(lehbel, cfg).check("nope")


# ============================================================================
# Contact defect and singular locus
# ============================================================================

def test_lehbel_contact_defect(lehbel):
    assert same_expr(contact_defect(lehbel), p("2*x^4+2*y^4"))


def test_contact_defect_needs_odd_dimension():
    with raises(EvenDimension):
        contact_defect(structure({}, {}, Chart.of("x", "y")))


@mark.parametrize("pi e point kind".split(),
                  (({("x", "y"): "x^4+y^4", ("z", "x"): "x", ("y", "z"): "-y"}, {"z": 2},
                    {"x": 0.0, "y": 0.0, "z": 1.0}, "pi_vanishes"),
                   ({("x", "y"): "x^4+y^4", ("z", "x"): "x", ("y", "z"): "-y"}, {"z": 2},
                    {"x": 1.0, "y": 0.0, "z": 0.0}, "regular"),
                   ({("x", "y"): 1}, {"x": 1},
                    {"x": 0.5, "y": 0.5, "z": 0.5}, "reeb_in_image")))
def test_dimension3_singular_type(pi, e, point, kind):
    assert dimension3_singular_type(structure(pi, e), point) == kind


def test_lehbel_has_no_codim1_witness(lehbel, cfg):
    report = singular_locus_report(lehbel, cfg)
    assert report.singular_status == "no_codim1_witness"
    assert report.witnesses == []
    assert report.citations == []
    assert report.measurements["contact_defect"] == "2*x^4+2*y^4"


def test_example1_has_a_tangential_witness(cfg):
    report = singular_locus_report(example1(), cfg)
    assert report.singular_status == "codim1_witness"
    w = report.witnesses[0]
    assert w.kind == "tangential"
    assert w.order == 2
    assert abs(w.value) <= 1e-10
    assert w.point["y"] == approx(-2 / 3, abs=1e-3)
    assert CITE_PROPER in report.citations
    assert CITE_SEMI_CONNECTED in report.citations


def test_odd_degree_defect_has_a_sign_change_witness(cfg):
    report = singular_locus_report(euler_contact_structure(), cfg)
    assert report.singular_status == "codim1_witness"
    assert report.witnesses[0].kind == "sign_change"
    assert report.witnesses[0].order == 3
    assert report.witnesses[0].point["z"] == approx(0.0, abs=1e-3)


def test_identically_zero_defect(cfg):
    report = singular_locus_report(zero_structure(), cfg)
    assert report.singular_status == "identically_zero"
    assert not is_contact_everywhere(zero_structure(), cfg).passed


def test_contact_everywhere(cfg):
    check = is_contact_everywhere(sigma_structure(), cfg)
    assert check.passed
    assert check.detail == f"at {cfg.samples}/{cfg.samples} samples"
    exact = is_contact_everywhere(family_structure(FamilySpec.from_text("1")), cfg)
    assert exact.passed
    assert exact.detail.startswith("exact")


# ============================================================================
# Poissonification
# ============================================================================

def test_poissonify_lehbel(lehbel, cfg):
    hp = poissonify(lehbel, cfg)
    assert hp.chart.names == ("t", "x", "y", "z")
    assert hp.homogeneity_constant == Fraction(-1)
    assert check_poisson(hp.pi, cfg).passed
    report = check_homogeneous(hp, cfg)
    assert report.passed
    assert report.measurements["homogeneity_constant"] == "-1"
    assert any("+1" in note for note in report.notes)
    assert "exp(-t)" in str(hp.pi.component("x", "y"))


def test_poissonify_picks_a_fresh_coordinate(cfg):
    J = structure({("t", "x"): 1}, {"y": 1}, Chart.of("t", "x", "y"))
    assert poissonify(J, cfg).chart.names[0] == "t_"


def test_poissonify_warns_when_no_constant_is_measured(lehbel, cfg, monkeypatch, caplog):
    monkeypatch.setattr("jacobi.measure_homogeneity", lambda *args, **kwargs: None)
    with caplog.at_level(logging.WARNING, logger="jacobi"):
        hp = poissonify(lehbel, cfg)
    assert hp.homogeneity_constant == -1
    assert any("no homogeneity constant" in r.getMessage() for r in caplog.records)


def test_poissonify_of_the_zero_structure_is_quiet(cfg, caplog):
    with caplog.at_level(logging.WARNING, logger="jacobi"):
        assert poissonify(zero_structure(), cfg).homogeneity_constant == -1
    assert not [r for r in caplog.records if r.name == "jacobi"]


def test_poissonification_square_is_the_defect(lehbel, cfg):
    hp = poissonify(lehbel, cfg)
    top = top_coefficient(mv_power(hp.pi, 2))
    expected = mul(-2, exp(mul(-2, Var("t"))), contact_defect(lehbel))
    assert is_zero(sub(top, expected), cfg).is_zero


@mark.parametrize("build", (lehbel_structure, sigma_structure, example1, example2, example3, zero_structure))
def test_slice_round_trip(build, cfg):
    J = build()
    hp = poissonify(J, cfg)
    assert check_poisson(hp.pi, cfg).passed
    back = slice_induce(hp, hp.chart.names[0], 0)
    assert back.chart == J.chart
    assert field_zero_verdict((back.pi - J.pi).simplified(), cfg).is_zero
    assert field_zero_verdict((back.e - J.e).simplified(), cfg).is_zero


def test_contact_poissonification_is_symplectic(cfg):
    assert symplectic_check(poissonify(sigma_structure(), cfg), cfg).passed
    zero = poissonify(zero_structure(), cfg)
    assert zero.pi.is_structurally_zero
    assert zero.homogeneity_constant == -1
    assert not symplectic_check(zero, cfg).passed


def test_symplectic_check_needs_even_dimension(lehbel):
    hp = HomogeneousPoisson(XYZ, lehbel.pi, vector_field(XYZ, {"z": 1}), Fraction(-1))
    with raises(OddDimension):
        symplectic_check(hp)


def test_slice_needs_a_coordinate_homothety(lehbel, cfg):
    hp = poissonify(lehbel, cfg)
    bent = HomogeneousPoisson(hp.chart, hp.pi, hp.z.scale(2), hp.homogeneity_constant)
    with raises(NonCoordinateHomothety):
        slice_induce(bent, "t")


def test_measure_homogeneity(cfg):
    plane = Chart.of("x", "y")
    euler = vector_field(plane, {"x": "x", "y": "y"})
    assert measure_homogeneity(bivector_field(plane, {("x", "y"): 1}), euler, cfg) == -2
    bent = bivector_field(plane, {("x", "y"): "1+x"})
    assert measure_homogeneity(bent, euler, cfg) is None
    with raises(NotHomogeneous):
        HomogeneousPoisson.measured(plane, bent, euler, cfg)


# ============================================================================
# Contact forms
# ============================================================================

def test_standard_contact_form(cfg):
    J = contact_form_to_jacobi(ContactForm.from_components(XYZ, {"z": 1, "y": "x"}), cfg)
    assert str(J.e.component("z")) == "1"
    assert J.e.component("x") == ZERO
    assert str(J.pi.component("x", "y")) == "-1"
    assert str(J.pi.component("x", "z")) == "x"
    assert J.pi.component("y", "z") == ZERO
    assert check_jacobi(J, cfg).passed


def test_degenerate_form_is_not_contact(cfg):
    with raises(NotContact):
        contact_form_to_jacobi(ContactForm.from_components(XYZ, {"x": 1}), cfg)


def test_symbolic_conversion_is_three_dimensional(cfg):
    chart = Chart.of("a", "b", "c", "d", "e")
    with raises(UnsupportedDimension):
        contact_form_to_jacobi(ContactForm.from_components(chart, {"e": 1}), cfg)


def test_sigma_form_halves_give_the_registry_structure(cfg):
    J = contact_form_to_jacobi(sigma_contact_form(Fraction(1, 2)), cfg)
    target = sigma_structure()
    assert field_zero_verdict((J.pi - target.pi).simplified(), cfg).is_zero
    assert field_zero_verdict((J.e - target.e).simplified(), cfg).is_zero


def test_sigma_form_gives_unit_reeb_field(cfg):
    J = contact_form_to_jacobi(sigma_contact_form(), cfg)
    target = sigma_structure()
    assert field_zero_verdict((J.e - vector_field(SIGMA_CHART, {"p3": 1})).simplified(), cfg).is_zero
    assert field_zero_verdict((J.pi - target.pi.scale(Fraction(1, 2))).simplified(), cfg).is_zero


def test_dalpha_constant(cfg):
    c, verdict = dalpha_constant(sigma_contact_form(), p(SIGMA_PROFILE, SIGMA_CHART), cfg)
    assert c == -2
    assert verdict.is_zero


def test_pointwise_contact_data_matches_symbolic():
    cf = ContactForm.from_components(XYZ, {"z": 1, "x": "-y"})
    sample = sample_contact_jacobi(cf, {"x": 0.3, "y": 0.5, "z": -0.2})
    assert list(sample.reeb) == approx([0.0, 0.0, 1.0])
    assert sample.bivector[0, 1] == approx(-1.0)
    assert sample.bivector[0, 2] == approx(0.0, abs=1e-12)
    assert sample.bivector[1, 2] == approx(0.5)
    assert sample.volume == approx(1.0)


def test_pointwise_contact_data_in_dimension_five():
    chart = Chart.of("x1", "y1", "x2", "y2", "z")
    cf = ContactForm.from_components(chart, {"z": 1, "y1": "x1", "y2": "x2"})
    point = {"x1": 0.4, "y1": -1.1, "x2": 0.7, "y2": 0.2, "z": 1.3}
    sample = sample_contact_jacobi(cf, point)
    assert list(sample.reeb) == approx([0, 0, 0, 0, 1], abs=1e-12)
    assert np.allclose(sample.bivector, -sample.bivector.T)


def test_pointwise_contact_data_needs_odd_dimension():
    cf = ContactForm.from_components(Chart.of("x", "y"), {"x": 1})
    with raises(EvenDimension):
        sample_contact_jacobi(cf, {"x": 0.0, "y": 0.0})


# ============================================================================
# Brackets, divergence, Euler fields
# ============================================================================

@mark.parametrize("f g h".split(),
                  (("x",   "y",   "z"),
                   ("x*y", "z",   "y"),
                   ("x^2", "y*z", "x")))
def test_jacobi_bracket_satisfies_jacobi_identity(f, g, h):
    J = example1()
    f, g, h = (p(t, J.chart) for t in (f, g, h))
    total = (jacobi_bracket(J, f, jacobi_bracket(J, g, h))
             + jacobi_bracket(J, g, jacobi_bracket(J, h, f))
             + jacobi_bracket(J, h, jacobi_bracket(J, f, g)))
    assert same_expr(total, ZERO)


def test_jacobi_bracket_basics():
    J = example1()
    x, y, z = Var("x"), Var("y"), Var("z")
    assert same_expr(jacobi_bracket(J, x, y), sub(0, jacobi_bracket(J, y, x)))
    assert str(jacobi_bracket(J, 1, z)) == "3"
    assert same_expr(jacobi_bracket(J, y, z), p("2+6*y", J.chart))


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_divergence_structure_satisfies_first_identity(seed):
    pi = random_field(np.random.default_rng(seed), XYZ, 2)
    report = check_jacobi(divergence_structure(pi))
    assert report.check("jacobi.pi_pi").passed


def test_euler_contact_example(cfg):
    J = euler_contact_structure()
    weights = euler_weights(J)
    assert weights == [1, 1, 1]
    report = euler_degree_check(J, weights, cfg)
    assert report.passed
    assert report.measurements["parity"] == "odd"
    assert report.measurements["weight_sum"] == "3"
    assert CITE_EULER_PARITY in report.citations
    assert report.witnesses[0].kind == "sign_change"


def test_weighted_euler_example(cfg):
    J = euler_weighted_structure()
    assert check_jacobi(J, cfg).passed
    weights = euler_weights(J)
    assert weights == [2, 1, 1]
    report = euler_degree_check(J, weights, cfg)
    assert report.passed
    assert report.measurements["parity"] == "even"
    assert CITE_EULER_PARITY not in report.citations


def test_euler_degree_fails_for_incompatible_bivector(cfg):
    J = structure({("x", "y"): "z"}, {"x": "x", "y": "y", "z": "z"})
    assert not euler_degree_check(J, [1, 1, 1], cfg).passed


def test_euler_weights_reject_other_fields(lehbel):
    assert euler_weights(lehbel) is None
    with raises(NotEulerField):
        euler_degree_check(lehbel, [1, 1, 1])
    with raises(NotEulerField):
        euler_degree_check(euler_contact_structure(), [1, 1])
