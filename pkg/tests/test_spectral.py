import io

import numpy as np
import pytest

from hardylab import errors
from hardylab.cone import ConeSpec
from hardylab.quadrature import sphere_rule
from hardylab.spectral import (
    angular_rayleigh,
    assemble_operator,
    build_grid,
    smallest_eigenvalue,
    solve,
    verify_principal_eigenvalues,
    write_convergence_csv,
)


def test_unknown_count_k1():
    g = build_grid(1, (32, 64))
    assert g.unknowns == 31 * 64 and g.periodic


@pytest.mark.parametrize("k", [2, 3])
def test_unknown_count_scales_by_four(k):
    a, b = build_grid(k, 32), build_grid(k, 64)
    assert b.unknowns == 4 * a.unknowns


def test_grid_rejects_bad_input():
    with pytest.raises(errors.CapabilityError):
        build_grid(4, 32)
    with pytest.raises(errors.DomainError):
        build_grid(1, 4)


def test_grid_nodes_lie_in_section():
    for k in (1, 2, 3):
        x = build_grid(k, 16).cartesian()
        assert np.allclose(np.linalg.norm(x, axis=1), 1.0)
        assert np.all(x[:, 3 - k:] > 0)


def test_operator_is_symmetrizable():
    op = assemble_operator(build_grid(2, 16))
    assert abs(op.stiffness - op.stiffness.T).max() < 1e-12


def test_operator_on_first_degree_harmonic():
    g = build_grid(1, (64, 128))
    op = assemble_operator(g)
    u = g.cartesian()[:, 2]
    out = op.apply(u)
    inner = u > 0.2
    assert np.max(np.abs(out[inner] - 2 * u[inner])) < 5e-3


@pytest.mark.parametrize("k,target", [(1, 2), (2, 6), (3, 12)])
def test_single_grid_estimate_within_one_percent(k, target):
    res = solve(k, (64, 128) if k == 1 else 64)
    assert abs(res.eigenvalue - target) / target < 0.01
    assert res.single_signed


def test_solver_reports_nonconvergence():
    op = assemble_operator(build_grid(1, 16))
    with pytest.raises(errors.ConvergenceError) as info:
        smallest_eigenvalue(op, tol=1e-30, max_iter=3)
    assert "iterations" in str(info.value) or info.value.diagnostics


@pytest.mark.parametrize("k,target", [(1, 2), (2, 6), (3, 12)])
def test_extrapolated_eigenvalue(k, target):
    rep = verify_principal_eigenvalues(k, (32, 64, 128))
    assert rep.target == target and rep.passed
    assert rep.relative_error < 1e-3


def test_convergence_csv_columns():
    rep = verify_principal_eigenvalues(3, (16, 32, 64))
    buf = io.StringIO()
    write_convergence_csv(rep, buf)
    assert buf.getvalue().splitlines()[0] == "resolution,estimate,error"


def test_angular_rayleigh_deterministic_n3():
    spec = ConeSpec(3, 1)
    est = angular_rayleigh(spec, sphere_rule(3, 24, restrict_to_cone=1))
    assert est.value == pytest.approx(2.0, abs=1e-6)


@pytest.mark.parametrize("n,k,lam", [(4, 2, 8), (6, 3, 21)])
def test_angular_rayleigh_stochastic(n, k, lam):
    est = angular_rayleigh(ConeSpec(n, k), sphere_rule(n, restrict_to_cone=k, seed=1, samples=20000))
    assert abs(est.value - lam) <= 3 * est.stderr
