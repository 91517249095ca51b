import numpy as np
import pytest
from scipy.integrate import quad

import paroc
from paroc.cq import (
    DEFAULT_U_BOX,
    direction_margins,
    linearized_evaluators,
)
from paroc.errors import StructureError
from paroc.lp import LPStatus, simplex_solve

import toys

S_REF = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
B_REF = np.array([[2.0, 1.0], [1.0, 1.0]])


def test_build_R_example31(example31, example31_traj):
    R = paroc.build_R(example31, example31_traj)
    np.testing.assert_allclose(R, np.full((1000, 1, 1), 3.0), atol=1e-14)


def test_build_R_smartgrid(smartgrid, smartgrid_interior_traj):
    R = paroc.build_R(smartgrid, smartgrid_interior_traj)
    dets = np.linalg.det(R)
    np.testing.assert_allclose(dets, 1.0, atol=1e-10)


def test_build_R_identity():
    p = toys.sign_constrained()  # g_u = I (r = m)
    grid = paroc.Grid(20)
    traj = paroc.integrate_state(p, np.zeros((20, 2)), grid)
    R = paroc.build_R(p, traj)
    np.testing.assert_allclose(R, np.tile(np.eye(2), (20, 1, 1)), atol=0.0)


def test_check_h3_verdicts(example31, example31_traj, smartgrid, smartgrid_interior_traj):
    gamma, ok = paroc.check_h3(example31, example31_traj)
    assert abs(gamma - 3.0) < 1e-12 and ok
    gamma_sg, ok_sg = paroc.check_h3(smartgrid, smartgrid_interior_traj)
    assert abs(gamma_sg - 1.0) < 1e-10 and ok_sg


def test_check_h3_singular():
    p = toys.degenerate_mixed()  # g_u identically zero
    grid = paroc.Grid(10)
    traj = paroc.integrate_state(p, np.zeros((10, 1)), grid)
    gamma, ok = paroc.check_h3(p, traj)
    assert gamma == 0.0 and not ok


def test_check_h2(example31, example31_traj):
    det, ok = paroc.check_h2(example31, example31_traj)
    assert abs(det - 1.0) < 1e-12 and ok


def test_nullspace_example31(example31, example31_traj):
    mstar, S = paroc.nullspace_basis(example31, example31_traj)
    assert mstar == 2
    proj_ref = S_REF @ np.linalg.solve(S_REF.T @ S_REF, S_REF.T)
    for i in (0, 500, 999):
        proj = S[i] @ S[i].T
        assert np.max(np.abs(proj - proj_ref)) < 1e-10
        # orthonormal columns annihilated by g_u
        np.testing.assert_allclose(S[i].T @ S[i], np.eye(2), atol=1e-12)
        gu = example31.mixed_constraint.jac_u(0.0, example31_traj.x[i], example31_traj.u[i])
        assert np.max(np.abs(np.asarray(gu) @ S[i])) < 1e-10


def test_nullspace_smartgrid_not_applicable(smartgrid, smartgrid_interior_traj):
    ranks = paroc.cq.rank_profile(smartgrid, smartgrid_interior_traj)
    assert all(r == 3 for r in ranks)
    mstar, _ = paroc.nullspace_basis(smartgrid, smartgrid_interior_traj)
    assert mstar == 0


def test_nullspace_zero_gu():
    p = toys.degenerate_mixed()
    grid = paroc.Grid(10)
    traj = paroc.integrate_state(p, np.zeros((10, 1)), grid)
    mstar, S = paroc.nullspace_basis(p, traj)
    assert mstar == p.m
    for i in range(10):
        np.testing.assert_allclose(S[i] @ S[i].T, np.eye(p.m), atol=1e-12)


def test_nullspace_dimension_jump_rejected(example31):
    # time-varying kernel dimension: g_u vanishes on half the horizon
    base = example31.mixed_constraint
    from paroc.model import Problem, StageMap
    varying = StageMap(
        value=base.value,
        jac_x=base.jac_x,
        jac_u=lambda t, x, u: np.asarray(base.jac_u(t, x, u)) * (1.0 if t < 0.5 else 0.0),
        hess_xx=base.hess_xx, hess_xu=base.hess_xu, hess_uu=base.hess_uu,
    )
    prob = Problem(name="varying", n=2, m=3, k=2, r=1, x0=example31.x0,
                   dynamics=example31.dynamics, running_cost=example31.running_cost,
                   terminal_cost=example31.terminal_cost,
                   endpoint_constraint=example31.endpoint_constraint,
                   mixed_constraint=varying)
    grid = paroc.Grid(20)
    traj = paroc.integrate_state(prob, np.zeros((20, 3)), grid)
    with pytest.raises(StructureError):
        paroc.nullspace_basis(prob, traj)


def test_build_AB_example31(example31, example31_traj):
    A, B = paroc.build_AB(example31, example31_traj)
    nodes = example31_traj.grid.nodes
    for i in range(0, 1000, 111):
        want = np.diag([nodes[i], nodes[i] - 1.0 / 3.0])
        assert np.max(np.abs(A[i] - want)) < 1e-12
    # B equals the reference matrix up to the common change of kernel basis
    mstar, S = paroc.nullspace_basis(example31, example31_traj)
    for i in (0, 999):
        C = np.linalg.lstsq(S_REF, S[i], rcond=None)[0]
        assert np.max(np.abs(S_REF @ C - S[i])) < 1e-12
        phi_u = np.asarray(example31.dynamics.jac_u(0.0, example31_traj.x[i],
                                                    example31_traj.u[i]))
        assert np.max(np.abs(B[i] - phi_u @ S[i])) < 1e-14


def test_build_AB_gx_zero_collapses(smartgrid):
    """With g_x = 0 the correction term vanishes: A = phi_x (use a
    full-kernel variant so the rank route applies)."""
    p = toys.uncontrollable()
    grid = paroc.Grid(10)
    traj = paroc.integrate_state(p, np.zeros((10, 2)), grid)
    A, B = paroc.build_AB(p, traj)
    np.testing.assert_allclose(A, np.zeros((10, 1, 1)), atol=0.0)
    np.testing.assert_allclose(B, np.zeros((10, 1, 1)), atol=1e-14)


def test_check_h5_example31(example31, example31_traj):
    min_eig, ok = paroc.check_h5(example31, example31_traj)
    assert ok and min_eig > 0.0


def test_check_h5_uncontrollable():
    p = toys.uncontrollable()
    grid = paroc.Grid(50)
    traj = paroc.integrate_state(p, np.zeros((50, 2)), grid)
    min_eig, ok = paroc.check_h5(p, traj)
    assert not ok and abs(min_eig) < 1e-12


def test_gramian_verdict_invariant_under_basis_rotation(example31, example31_traj):
    """Replacing S by S Q for orthogonal Q leaves the rank verdict unchanged."""
    A_eval, B_eval = linearized_evaluators(example31, example31_traj)
    grid = paroc.Grid(200)
    rng = np.random.default_rng(11)
    Q, _ = np.linalg.qr(rng.normal(size=(2, 2)))
    gram = paroc.controllability_gramian(A_eval, B_eval, grid)
    gram_rot = paroc.controllability_gramian(A_eval, lambda t: B_eval(t) @ Q, grid)
    assert gram.full_rank == gram_rot.full_rank
    assert abs(gram.min_eig - gram_rot.min_eig) < 1e-8 * (1.0 + gram.min_eig)


def test_controllability_inverse_formula(example31, example31_traj):
    """The closed-form preimage hits every target through the reachability map."""
    alpha0 = quad(lambda tau: np.exp(0.5 - tau ** 2 / 2.0), 0.0, 1.0)[0]
    beta0 = quad(lambda tau: np.exp(1.0 / 6.0 - tau ** 2 / 2.0 + tau / 3.0), 0.0, 1.0)[0]
    A_eval, _ = linearized_evaluators(example31, example31_traj)
    rng = np.random.default_rng(5)
    for _ in range(10):
        xi = rng.normal(size=2)
        v = np.array([xi[0] / alpha0 - xi[1] / beta0,
                      2.0 * xi[1] / beta0 - xi[0] / alpha0])
        Hv = paroc.apply_reachability(A_eval, lambda t: B_REF, lambda t: v,
                                      example31_traj.grid)
        assert np.linalg.norm(Hv - xi) < 1e-7


def test_h4prime_interior_smartgrid(smartgrid, smartgrid_interior_traj):
    cert = paroc.check_h4prime(smartgrid, smartgrid_interior_traj)
    assert cert.ok and cert.slack > 0.0
    assert cert.resim_margin >= 0.5 * cert.slack
    assert cert.lp_status is LPStatus.OPTIMAL


def test_h4prime_analytic_direction(smartgrid, smartgrid_interior_traj):
    """The exponential-in-t direction keeps every linearized row strictly
    negative after simulation."""
    gam = 0.01
    u_hat = lambda t: np.full(3, -gam * np.exp(t / gam))
    margins = direction_margins(smartgrid, smartgrid_interior_traj, u_hat)
    assert margins["endpoint_margin"] > 0.0
    assert margins["mixed_margin"] > 0.0


def test_h4prime_degenerate_rows():
    p = toys.degenerate_mixed()
    grid = paroc.Grid(20)
    traj = paroc.integrate_state(p, np.zeros((20, 1)), grid)
    cert = paroc.check_h4prime(p, traj)
    assert not cert.ok
    assert cert.slack <= 1e-9


def test_h4prime_strictly_inactive_point(lq1):
    """Zero direction suffices when nothing is active."""
    grid = paroc.Grid(40)
    traj = paroc.integrate_state(lq1, np.zeros((40, 1)), grid)
    cert = paroc.check_h4prime(lq1, traj)
    assert cert.ok and cert.slack > 0.0
    assert cert.slack <= DEFAULT_U_BOX + 10.0  # bounded by the box


def test_evaluate_cqs_routes(example31, example31_traj, smartgrid, smartgrid_interior_traj):
    rep31 = paroc.evaluate_cqs(example31, example31_traj)
    assert rep31.decisive_route == "h4h5"
    assert rep31.h4_applicable and rep31.h4_mstar == 2
    assert rep31.h5_ok and rep31.h4p_ok is None and rep31.h4p_slack is None
    assert rep31.overall_ok

    rep_sg = paroc.evaluate_cqs(smartgrid, smartgrid_interior_traj)
    assert rep_sg.decisive_route == "h4prime"
    assert not rep_sg.h4_applicable
    assert rep_sg.h5_ok is None and rep_sg.h5_min_eig is None
    assert rep_sg.h4p_ok
    assert rep_sg.overall_ok
    d = rep_sg.to_dict()
    assert d["decisive_route"] == "h4prime" and d["overall_ok"]


def test_evaluate_cqs_degenerate_reports_instead_of_raising():
    """Zero mixed Jacobian: the rank route applies but its Gram matrix
    is singular; the report records the failure, never raises."""
    p = toys.degenerate_mixed()
    grid = paroc.Grid(10)
    traj = paroc.integrate_state(p, np.zeros((10, 1)), grid)
    rep = paroc.evaluate_cqs(p, traj)
    assert not rep.h3_ok
    assert rep.decisive_route == "h4h5"
    assert rep.h5_ok is False
    assert not rep.overall_ok
    assert any("controllability check unavailable" in n for n in rep.notes)


def test_simplex_lp_basic_cases():
    # bounded maximum
    res = simplex_solve(np.array([1.0, 1.0]),
                        np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([2.0, 3.0]))
    assert res.status is LPStatus.OPTIMAL and abs(res.objective - 5.0) < 1e-9
    # infeasible
    res = simplex_solve(np.array([1.0]), np.array([[1.0], [-1.0]]),
                        np.array([-2.0, 1.0]))
    assert res.status is LPStatus.INFEASIBLE
    # unbounded
    res = simplex_solve(np.array([1.0]), np.array([[-1.0]]), np.array([0.0]))
    assert res.status is LPStatus.UNBOUNDED
