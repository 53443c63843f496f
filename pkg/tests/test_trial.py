import math

import numpy as np
import pytest

from hardylab import errors
from hardylab.cone import ConeSpec, angular_eigenfunction
from hardylab.functionals import reduced_radial_quotient
from hardylab.trial import (
    bump_profile,
    even_extension,
    fd_gradient,
    minimizing_profile,
    odd_extension,
    polynomial_profile,
    product_bump_trial,
    random_trial,
    separable_trial,
    zero_trial,
)
from conftest import specs


def interior_points(spec, count, rng, R=1.0):
    x = rng.standard_normal((count, spec.n))
    x[:, spec.n - spec.k:] = np.abs(x[:, spec.n - spec.k:]) + 0.05
    x *= (0.1 + 0.8 * rng.random((count, 1))) * R / np.linalg.norm(x, axis=1, keepdims=True)
    return x


def test_separable_point_value():
    phi = angular_eigenfunction(ConeSpec(3, 1))
    u = separable_trial(phi, polynomial_profile([0.0, 1.0, -1.0]))
    N = math.sqrt(3 / (2 * math.pi))
    assert u.evaluate(np.array([[0.0, 0.0, 0.5]]))[0] == pytest.approx(N / 4, rel=1e-13)


@pytest.mark.parametrize("spec", specs(), ids=str)
def test_trials_vanish_on_cone_boundary(spec, rng):
    x = interior_points(spec, 10, rng)
    x[:, -1] = 0.0
    phi = angular_eigenfunction(spec)
    for u in (product_bump_trial(spec), separable_trial(phi, bump_profile(spec.k)), random_trial(spec, seed=3)):
        assert np.all(u.evaluate(x) == 0.0)


@pytest.mark.parametrize("spec", specs(), ids=str)
def test_analytic_gradients_match_finite_differences(spec, rng):
    x = interior_points(spec, 20, rng)
    phi = angular_eigenfunction(spec)
    for u in (product_bump_trial(spec), separable_trial(phi, bump_profile(spec.k)), random_trial(spec, seed=5)):
        g = u.gradient(x)
        fd = fd_gradient(u.evaluate, x, 1e-5)
        scale = np.max(np.abs(g))
        assert np.max(np.abs(g - fd)) < 1e-6 * scale


def test_product_bump_vanishing_order():
    assert product_bump_trial(ConeSpec(5, 3)).vanishing_order == 3


def test_random_trial_deterministic(rng):
    spec = ConeSpec(4, 2)
    x = interior_points(spec, 15, rng)
    a, b = random_trial(spec, seed=11), random_trial(spec, seed=11)
    assert np.array_equal(a.evaluate(x), b.evaluate(x))
    assert not np.array_equal(a.evaluate(x), random_trial(spec, seed=12).evaluate(x))


def test_trial_support_is_ball():
    u = product_bump_trial(ConeSpec(3, 1))
    assert u.evaluate(np.array([[0.0, 0.0, 1.5]]))[0] == 0.0


def test_zero_trial():
    u = zero_trial(ConeSpec(3, 2))
    assert np.all(u.evaluate(np.ones((3, 3)) * 0.2) == 0.0)


def test_minimizing_quotient_bracket():
    spec = ConeSpec(3, 1)
    q = reduced_radial_quotient(spec, minimizing_profile(spec, 0.2, 1e-3), 2)
    assert 2.25 <= q <= 2.60


def test_minimizing_profile_rejects_bad_epsilon():
    with pytest.raises(errors.DomainError):
        minimizing_profile(ConeSpec(3, 1), -0.1)


def test_odd_extension_sign_flips(rng):
    spec = ConeSpec(4, 2)
    u = random_trial(spec, seed=2)
    ut = odd_extension(u)
    x = interior_points(spec, 10, rng)
    base = ut.evaluate(x)
    one = x.copy()
    one[:, 3] *= -1
    two = one.copy()
    two[:, 2] *= -1
    assert np.array_equal(ut.evaluate(one), -base)
    assert np.array_equal(ut.evaluate(two), base)
    assert np.array_equal(even_extension(u).evaluate(one), base)
