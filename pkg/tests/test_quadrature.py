import math

import numpy as np
import pytest
from scipy.special import erf

from hardylab import errors
from hardylab.cone import ConeSpec
from hardylab.quadrature import (
    convergence_study,
    cone_ball_rule,
    estimate_order,
    integrate,
    log_radial_rule,
    mirror_rule,
    radial_rule,
    richardson,
    sphere_rule,
)
from oracles import sphere_monomial_integral


def test_radial_polynomial_exactness():
    rule = radial_rule(1.0, 64)
    assert integrate(rule, lambda x: x[:, 0] ** 2).value == pytest.approx(1 / 3, abs=1e-12)


def test_radial_singular_integrand_with_grading():
    rule = radial_rule(1.0, 128, grading=2.0)
    assert integrate(rule, lambda x: x[:, 0] ** -0.5).value == pytest.approx(2.0, abs=1e-8)


def test_radial_profile_integral():
    rule = radial_rule(1.0, 32)
    val = integrate(rule, lambda x: (x[:, 0] * (1 - x[:, 0])) ** 2).value
    assert val == pytest.approx(1 / 30, abs=1e-13)


def test_radial_gaussian_against_error_function():
    rule = radial_rule(2.0, 64)
    val = integrate(rule, lambda x: np.exp(-x[:, 0] ** 2)).value
    assert val == pytest.approx(math.sqrt(math.pi) / 2 * erf(2.0), abs=1e-8)


def test_radial_rule_rejects_bad_input():
    with pytest.raises(errors.DomainError):
        radial_rule(-1.0, 8)
    with pytest.raises(errors.DomainError):
        radial_rule(1.0, 0)


def test_sphere_area_and_second_moment():
    rule = sphere_rule(3, 24)
    assert integrate(rule, lambda x: np.ones(len(x))).value == pytest.approx(4 * math.pi, abs=1e-10)
    assert integrate(rule, lambda x: x[:, 2] ** 2).value == pytest.approx(4 * math.pi / 3, abs=1e-10)


def test_hemisphere_second_moment():
    rule = sphere_rule(3, 24, restrict_to_cone=1)
    assert integrate(rule, lambda x: x[:, 2] ** 2).value == pytest.approx(2 * math.pi / 3, abs=1e-12)


@pytest.mark.parametrize("alpha", [(2, 0, 0), (2, 2, 2), (4, 0, 2), (0, 6, 2), (8, 4, 0)])
def test_sphere_monomials_against_gamma_closed_form(alpha):
    rule = sphere_rule(3, 24)
    val = integrate(rule, lambda x: np.prod(x ** np.array(alpha), axis=1)).value
    assert val == pytest.approx(sphere_monomial_integral(alpha), abs=1e-12)


def test_stochastic_sphere_rule_needs_seed_for_n4():
    with pytest.raises(errors.CapabilityError):
        sphere_rule(4, 24)
    rule = sphere_rule(4, seed=1, samples=5000)
    assert rule.stochastic
    est = integrate(rule, lambda x: np.ones(len(x)))
    assert est.value == pytest.approx(2 * math.pi ** 2, rel=1e-12)


def test_stochastic_moment_within_three_sigma():
    rule = sphere_rule(5, seed=3, samples=20000)
    est = integrate(rule, lambda x: x[:, 4] ** 2 * x[:, 3] ** 2)
    exact = sphere_monomial_integral((0, 0, 0, 2, 2))
    assert abs(est.value - exact) <= 3 * est.stderr


@pytest.mark.parametrize("k,fraction", [(1, 0.5), (3, 0.125)])
def test_cone_ball_volume(k, fraction):
    rule = cone_ball_rule(ConeSpec(3, k))
    vol = integrate(rule, lambda x: np.ones(len(x))).value
    assert vol == pytest.approx(fraction * 4 * math.pi / 3, rel=1e-12)


def test_cone_ball_separable_moment():
    rule = cone_ball_rule(ConeSpec(3, 1))
    assert integrate(rule, lambda x: x[:, 2] ** 2).value == pytest.approx(2 * math.pi / 15, rel=1e-12)


def test_mirrored_rule_cancels_odd_integrands(rng):
    rule = mirror_rule(cone_ball_rule(ConeSpec(3, 1)), 1)
    assert rule.symmetric_last_k
    scale = integrate(rule, lambda x: np.abs(x[:, 2]) * np.exp(x[:, 0])).value
    val = integrate(rule, lambda x: x[:, 2] * np.exp(x[:, 0] + x[:, 1])).value
    assert abs(val) < 1e-13 * scale


def test_log_radial_rule_handles_tiny_inner_cut():
    rule = log_radial_rule([-720.0, 0.0])
    assert np.all(rule.log_weights > 0)
    # integral of e^t dt over (-720, 0)
    t = rule.log_nodes
    assert float(np.sum(rule.log_weights * np.exp(t))) == pytest.approx(1.0, rel=1e-12)


def test_richardson_removes_leading_term():
    f = lambda h: 3.0 + 0.7 * h ** 2
    assert richardson(f(0.2), f(0.1), 2.0, 2) == pytest.approx(3.0, abs=1e-14)


def test_order_estimate_second_order_scheme():
    # composite trapezoid on exp over [0,1]
    def trap(m):
        x = np.linspace(0, 1, m + 1)
        y = np.exp(x)
        return (y[0] / 2 + y[1:-1].sum() + y[-1] / 2) / m

    vals = [trap(m) for m in (8, 16, 32, 64)]
    order, flag = estimate_order(vals, (8, 16, 32, 64))
    assert order == pytest.approx(2.0, abs=0.2)


def test_convergence_study_spectral_and_constant():
    table = convergence_study(lambda m: radial_rule(1.0, m, grading=1.0, panels=1), lambda x: np.exp(x[:, 0]), [4, 6, 8])
    assert table.flag == "spectral"
    assert table.extrapolated == pytest.approx(math.e - 1, abs=1e-12)
    const = convergence_study(lambda m: radial_rule(1.0, m), lambda x: np.ones(len(x)), [4, 8, 16])
    assert const.extrapolated == pytest.approx(1.0, abs=1e-14)
