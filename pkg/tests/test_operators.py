import io
from fractions import Fraction

import numpy as np
import pytest

from hardylab import errors
from hardylab.cone import ConeSpec, angular_eigenfunction
from hardylab.operators import (
    conjugation_identity_residual,
    conjugation_identity_sweep,
    eigen_relation_sweep,
    fit_order,
    interior_probes,
    laplace_beltrami_apply,
    orthant_monomial_harmonicity,
    product_identity_residual,
    product_identity_sweep,
    sample_order,
    smooth_suite,
    stencil_laplacian,
    write_residual_csv,
)

POINT3 = np.array([0.5, -0.25, 2.0])


def quadratic(x):
    x = np.atleast_2d(x)
    return 1 + x[:, 0] ** 2 - 2 * x[:, 1] * x[:, 2] + 0.5 * x[:, 2] ** 2 + x[:, 0] * x[:, 1] ** 2


def test_stencil_laplacian_on_quadratic():
    val = stencil_laplacian(quadratic, POINT3, 1e-2)
    assert val == pytest.approx(2 + 1 + 2 * POINT3[0], abs=1e-9)


def test_conjugation_residual_on_quadratic_is_tiny():
    s = conjugation_identity_residual(quadratic, 1, POINT3, h=1e-3, levels=1)
    assert s.residual < 1e-8


def test_conjugation_order_for_smooth_field():
    g = lambda x: np.exp(np.atleast_2d(x)[:, 0]) * np.sin(np.atleast_2d(x)[:, 2])
    s = conjugation_identity_residual(g, Fraction(3, 2), np.array([0.3, 0.2, 0.7]), h=0.2, levels=4)
    assert sample_order(s) == pytest.approx(2.0, abs=0.2)


def test_conjugation_l0_is_exact():
    g = lambda x: np.cos(np.atleast_2d(x).sum(axis=1))
    s = conjugation_identity_residual(g, 0, np.array([0.1, 0.4, 0.9]), h=0.05, levels=2)
    assert max(s.residuals) < 1e-10


def test_product_identity_reduces_to_conjugation_at_k1():
    spec = ConeSpec(3, 1)
    g = lambda x: np.exp(0.3 * np.atleast_2d(x)[:, 1]) * np.cos(np.atleast_2d(x)[:, 2])
    p = np.array([0.2, 0.1, 0.6])
    a = product_identity_residual(g, spec, p, h=0.1, levels=3)
    b = conjugation_identity_residual(g, 1, p, h=0.1, levels=3)
    assert np.allclose(a.residuals, b.residuals, atol=1e-13)


def test_product_identity_order_4_2():
    rep = product_identity_sweep(ConeSpec(4, 2), seed=3)
    assert rep.passed
    assert all(abs(o - 2) <= 0.2 for o in rep.orders)


def test_product_identity_constant_field():
    g = lambda x: np.ones(len(np.atleast_2d(x)))
    s = product_identity_residual(g, ConeSpec(4, 2), np.array([0.2, 0.3, 0.4, 0.5]), h=0.1, levels=2)
    assert max(s.residuals) < 1e-10


def test_orthant_monomial_is_harmonic_and_control_is_not():
    spec = ConeSpec(3, 1)
    p = np.array([0.1, 0.2, 0.5])
    assert orthant_monomial_harmonicity(spec, p).residual < 1e-12
    assert orthant_monomial_harmonicity(spec, p, exponent=2).residual == pytest.approx(2.0, abs=1e-6)


@pytest.mark.parametrize("n", [3, 4])
@pytest.mark.parametrize("l", ["1/2", "1", "3/2", "2"])
def test_conjugation_sweeps_reach_second_order(n, l):
    rep = conjugation_identity_sweep(n, l)
    assert rep.passed, rep.orders


def test_sweep_coherence_at_k1():
    rep = product_identity_sweep(ConeSpec(3, 1))
    assert rep.coherence is not None and rep.coherence < 1e-12


def test_smooth_suite_is_fixed():
    a, b = smooth_suite(4, seed=1), smooth_suite(4, seed=1)
    x = np.full((1, 4), 0.3)
    assert len(a) == 5
    assert [float(f(x)[0]) for f in a] == [float(f(x)[0]) for f in b]


def test_fit_order_ignores_rounding_floor():
    steps = [0.1, 0.05, 0.025, 0.0125]
    res = [1e-2, 2.5e-3, 6.25e-4, 1e-16]
    assert fit_order(steps, res, [1e-16] * 4) == pytest.approx(2.0, abs=1e-9)
    assert np.isnan(fit_order(steps, [1e-17] * 4, [1e-16] * 4))


def test_laplace_beltrami_constant_and_eigen():
    spec = ConeSpec(3, 1)
    sig = np.array([[0.3, 0.4, np.sqrt(1 - 0.25)]])
    assert abs(laplace_beltrami_apply(lambda s: np.ones(len(s)), sig)[0]) < 1e-10
    phi = angular_eigenfunction(spec)
    assert laplace_beltrami_apply(phi, sig, 1e-3)[0] == pytest.approx(-2 * phi(sig)[0], rel=1e-5)


def test_laplace_beltrami_rejects_off_sphere_points():
    with pytest.raises(errors.DomainError):
        laplace_beltrami_apply(lambda s: np.ones(len(s)), np.array([1.0, 1.0, 0.0]))
    with pytest.raises(errors.DomainError):
        laplace_beltrami_apply(lambda s: np.ones(len(s)), np.array([0.0, 0.0, 1.0]), h=0.7)


def test_interior_probes_are_inside():
    spec = ConeSpec(5, 3)
    p = interior_probes(spec, 100, seed=2)
    assert p.shape == (100, 5)
    assert np.allclose(np.linalg.norm(p, axis=1), 1.0)
    assert np.all(p[:, 2:] > 0)


@pytest.mark.parametrize("n,k", [(4, 2), (5, 3), (6, 3)])
def test_eigen_relation_second_order(n, k):
    rep = eigen_relation_sweep(ConeSpec(n, k))
    assert rep.passed
    assert rep.order_estimate == pytest.approx(2.0, abs=0.3)


def test_residual_csv_columns():
    rep = conjugation_identity_sweep(3, "3/2")
    buf = io.StringIO()
    write_residual_csv(rep.samples, buf)
    assert buf.getvalue().splitlines()[0] == "point_id,h,residual"
