import io
import itertools
import warnings

import numpy as np
import pytest

from hardylab import errors
from hardylab.cone import ConeSpec, angular_eigenfunction
from hardylab.decompose import (
    MultiIndex,
    chebyshev_radii,
    decomposed_quotient,
    default_sphere_rule,
    energy_doubling_check,
    gram_matrix,
    harmonic_coefficients,
    low_degree_vanishing_check,
    monomial_moment,
    multi_indices,
    parseval_defect,
    reconstruct,
    sphere_basis_n3,
)
from hardylab.operators import laplace_beltrami_apply
from hardylab.quadrature import QuadratureRule, sphere_rule
from hardylab.trial import bump_profile, product_bump_trial, random_trial, separable_trial, zero_trial
from conftest import specs


def test_gram_matrix_identity():
    basis = sphere_basis_n3(8)
    G = gram_matrix(basis, sphere_rule(3, (64, 128)))
    assert np.max(np.abs(G - np.eye(len(basis)))) < 1e-8


def test_harmonics_are_eigenfunctions():
    sig = np.array([[0.36, 0.48, 0.8]])
    for Y in sphere_basis_n3(4):
        lhs = laplace_beltrami_apply(Y, sig, 1e-3)[0]
        assert lhs == pytest.approx(-Y.l * (Y.l + 1) * Y(sig)[0], abs=1e-4)


def test_basis_size_and_limit():
    assert len(sphere_basis_n3(6)) == 49
    with pytest.raises(errors.DomainError):
        sphere_basis_n3(13)


def test_multi_indices_count():
    assert len(multi_indices(4, 2)) == 15
    assert MultiIndex((1, 0, 2)).total_degree == 3


def test_separable_trial_has_single_member():
    spec = ConeSpec(3, 2)
    u = separable_trial(angular_eigenfunction(spec), bump_profile(2))
    c = harmonic_coefficients(u, 4)
    peak = np.max(np.abs(c.values), axis=1)
    keep = np.argmax(peak)
    assert c.members[keep][0] == 2
    others = np.delete(peak, keep)
    assert np.max(others) < 1e-8 * peak[keep]


@pytest.mark.parametrize("k", [1, 2, 3])
def test_low_degrees_vanish_n3(k):
    spec = ConeSpec(3, k)
    for u in (random_trial(spec, seed=4), product_bump_trial(spec)):
        rep = low_degree_vanishing_check(u, spec)
        assert rep.passed and rep.path == "harmonic"
        assert rep.max_coefficient <= 1e-10 * rep.norm_sup


@pytest.mark.parametrize("k", [1, 2, 3])
def test_even_extension_fails_vanishing(k):
    spec = ConeSpec(3, k)
    rep = low_degree_vanishing_check(random_trial(spec, seed=4), spec, extension="even")
    assert not rep.passed


@pytest.mark.parametrize("n,k", [(4, 2), (5, 3)])
def test_moments_vanish_below_degree_k(n, k):
    spec = ConeSpec(n, k)
    u = random_trial(spec, seed=9)
    scale = monomial_moment(u, spec, [0] * (n - k) + [1] * k, enforce_degree=False)
    assert abs(scale) > 1e-6
    for alpha in itertools.product(range(k), repeat=n):
        if sum(alpha) <= k - 1:
            assert abs(monomial_moment(u, spec, alpha)) < 1e-13
    assert low_degree_vanishing_check(u, spec).passed


def test_moment_degree_guard():
    spec = ConeSpec(4, 2)
    with pytest.raises(errors.DomainError):
        monomial_moment(random_trial(spec), spec, (0, 0, 1, 1))


def rotated_rule():
    base = sphere_rule(3, 24)
    c, s = np.cos(0.3), np.sin(0.3)
    rot = np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    return QuadratureRule(nodes=base.nodes @ rot.T, weights=base.weights, domain_tag="rotated_sphere(3)")


def test_nonsymmetric_rule_warns():
    spec = ConeSpec(3, 1)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        low_degree_vanishing_check(random_trial(spec), spec, rule=rotated_rule())
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)


@pytest.mark.parametrize("spec", specs(), ids=str)
def test_energy_doubling(spec):
    rep = energy_doubling_check(random_trial(spec, seed=1), spec)
    assert rep.passed
    assert rep.energy_ratio == pytest.approx(2 ** spec.k, rel=1e-10)
    assert rep.hardy_ratio == pytest.approx(2 ** spec.k, rel=1e-10)


def test_doubling_zero_trial_is_degenerate():
    rep = energy_doubling_check(zero_trial(ConeSpec(3, 1)))
    assert rep.status == "degenerate" and not rep.passed


def test_parseval_and_reconstruction():
    spec = ConeSpec(3, 1)
    u = product_bump_trial(spec)
    proj, total = parseval_defect(u, 0.5, 10)
    assert proj <= total * (1 + 1e-12)
    assert (total - proj) / total < 1e-3
    c = harmonic_coefficients(u, 8, radii=chebyshev_radii(1.0, 32))
    x = np.array([0.1, 0.2, 0.4])
    assert float(reconstruct(c, x)) == pytest.approx(float(u.evaluate(x[None])[0]), rel=1e-3)
    with pytest.raises(errors.DomainError):
        reconstruct(c, np.array([2.0, 0.0, 0.0]))


def test_decomposed_quotient_for_separable_trial():
    spec = ConeSpec(3, 2)
    u = separable_trial(angular_eigenfunction(spec), bump_profile(2))
    # 25/4 + eigenvalue contribution; equals the direct quotient of the profile
    from hardylab.functionals import reduced_radial_quotient

    assert decomposed_quotient(u, 4) == pytest.approx(reduced_radial_quotient(spec, bump_profile(2), 6), rel=1e-8)


def test_coefficients_csv():
    c = harmonic_coefficients(product_bump_trial(ConeSpec(3, 1)), 2, radii=[0.5])
    buf = io.StringIO()
    c.write_csv(buf)
    assert buf.getvalue().splitlines()[0] == "r,l,m,value"


def test_default_sphere_rule_symmetric():
    assert default_sphere_rule().symmetric_last_k
