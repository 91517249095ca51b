"""Hand-built problems for targeted tests."""

import numpy as np

from paroc.model import EndpointMap, Problem, StageMap


def _zeros_stage(shape):
    z = np.zeros(shape)
    z.setflags(write=False)
    return lambda t, x, u: z


def _zeros_pt(shape):
    z = np.zeros(shape)
    z.setflags(write=False)
    return lambda x: z


def stage_map(n, m, d, value, jac_x=None, jac_u=None,
              hess_xx=None, hess_xu=None, hess_uu=None):
    return StageMap(
        value=value,
        jac_x=jac_x or _zeros_stage((d, n)),
        jac_u=jac_u or _zeros_stage((d, m)),
        hess_xx=hess_xx or _zeros_stage((d, n, n)),
        hess_xu=hess_xu or _zeros_stage((d, n, m)),
        hess_uu=hess_uu or _zeros_stage((d, m, m)),
    )


def endpoint_map(n, d, value, jac=None, hess=None):
    return EndpointMap(
        value=value,
        jac=jac or _zeros_pt((d, n)),
        hess=hess or _zeros_pt((d, n, n)),
    )


def biobjective():
    """Two quadratic objectives of a scalar control, idle state.

    J1 = int u^2, J2 = int (u - 1)^2; pointwise minimization of the
    weighted sum gives u = w2, so the front is (w2^2, (1 - w2)^2).
    """
    n, m, k, r = 1, 1, 2, 1
    Luu = np.zeros((k, m, m))
    Luu[0, 0, 0] = 2.0
    Luu[1, 0, 0] = 2.0
    Luu.setflags(write=False)
    rc = stage_map(
        n, m, k,
        value=lambda t, x, u: np.array([u[0] ** 2, (u[0] - 1.0) ** 2]),
        jac_u=lambda t, x, u: np.array([[2.0 * u[0]], [2.0 * (u[0] - 1.0)]]),
        hess_uu=lambda t, x, u: Luu,
    )
    return Problem(
        name="biobjective", n=n, m=m, k=k, r=r, x0=np.zeros(1),
        dynamics=stage_map(n, m, n, value=_zeros_stage((n,))),
        running_cost=rc,
        terminal_cost=endpoint_map(n, k, value=_zeros_pt((k,))),
        endpoint_constraint=endpoint_map(
            n, n, value=lambda x: np.array([x[0] - 1.0]),
            jac=lambda x: np.ones((1, 1))),
        mixed_constraint=stage_map(
            n, m, r, value=lambda t, x, u: np.array([u[0] - 100.0]),
            jac_u=lambda t, x, u: np.ones((1, 1))),
    )


def zero_dynamics():
    """phi identically zero; x stays at x0 regardless of the control."""
    n, m, k, r = 2, 2, 1, 1
    rc = stage_map(n, m, k,
                   value=lambda t, x, u: np.array([0.5 * (u @ u)]),
                   jac_u=lambda t, x, u: np.array([u]),
                   hess_uu=lambda t, x, u: np.eye(m)[None, :, :])
    return Problem(
        name="zero_dynamics", n=n, m=m, k=k, r=r, x0=np.array([1.0, -2.0]),
        dynamics=stage_map(n, m, n, value=_zeros_stage((n,))),
        running_cost=rc,
        terminal_cost=endpoint_map(n, k, value=_zeros_pt((k,))),
        endpoint_constraint=endpoint_map(
            n, n, value=lambda x: x - 50.0, jac=lambda x: np.eye(n)),
        mixed_constraint=stage_map(
            n, m, r, value=lambda t, x, u: np.array([u[0] - 50.0]),
            jac_u=lambda t, x, u: np.array([[1.0, 0.0]])),
    )


def transversality_only():
    """L = 0, g independent of x, phi_x = 0, ell = 0, h' = I.

    The costate is constant, equal to its transversality value.
    """
    n, m, k, r = 2, 1, 1, 1
    return Problem(
        name="transversality_only", n=n, m=m, k=k, r=r, x0=np.zeros(n),
        dynamics=stage_map(n, m, n,
                           value=lambda t, x, u: np.array([u[0], -u[0]]),
                           jac_u=lambda t, x, u: np.array([[1.0], [-1.0]])),
        running_cost=stage_map(n, m, k, value=_zeros_stage((k,))),
        terminal_cost=endpoint_map(n, k, value=_zeros_pt((k,))),
        endpoint_constraint=endpoint_map(
            n, n, value=lambda x: x - 10.0, jac=lambda x: np.eye(n)),
        mixed_constraint=stage_map(
            n, m, r, value=lambda t, x, u: np.array([u[0] - 10.0]),
            jac_u=lambda t, x, u: np.ones((1, 1))),
    )


def degenerate_mixed():
    """g identically zero (active) with zero gradients: no strict descent."""
    n, m, k, r = 1, 1, 1, 1
    rc = stage_map(n, m, k,
                   value=lambda t, x, u: np.array([0.5 * u[0] ** 2]),
                   jac_u=lambda t, x, u: np.array([[u[0]]]),
                   hess_uu=lambda t, x, u: np.ones((1, 1, 1)))
    return Problem(
        name="degenerate_mixed", n=n, m=m, k=k, r=r, x0=np.zeros(1),
        dynamics=stage_map(n, m, n,
                           value=lambda t, x, u: np.array([u[0]]),
                           jac_u=lambda t, x, u: np.ones((1, 1))),
        running_cost=rc,
        terminal_cost=endpoint_map(n, k, value=_zeros_pt((k,))),
        endpoint_constraint=endpoint_map(
            n, n, value=lambda x: np.array([x[0] - 10.0]),
            jac=lambda x: np.ones((1, 1))),
        mixed_constraint=stage_map(n, m, r, value=_zeros_stage((r,))),
    )


def uncontrollable():
    """Kernel direction of g_u is invisible to the dynamics: B = 0."""
    n, m, k, r = 1, 2, 1, 1
    rc = stage_map(n, m, k,
                   value=lambda t, x, u: np.array([0.5 * (u @ u)]),
                   jac_u=lambda t, x, u: np.array([u]),
                   hess_uu=lambda t, x, u: np.eye(m)[None, :, :])
    return Problem(
        name="uncontrollable", n=n, m=m, k=k, r=r, x0=np.zeros(1),
        dynamics=stage_map(n, m, n,
                           value=lambda t, x, u: np.array([u[0]]),
                           jac_u=lambda t, x, u: np.array([[1.0, 0.0]])),
        running_cost=rc,
        terminal_cost=endpoint_map(n, k, value=_zeros_pt((k,))),
        endpoint_constraint=endpoint_map(
            n, n, value=lambda x: np.array([x[0] - 10.0]),
            jac=lambda x: np.ones((1, 1))),
        mixed_constraint=stage_map(
            n, m, r, value=lambda t, x, u: np.array([u[0] - 10.0]),
            jac_u=lambda t, x, u: np.array([[1.0, 0.0]])),
    )


def free_directions():
    """Single objective with zero costs, inactive constraints: every
    control perturbation is a critical direction."""
    n, m, k, r = 1, 2, 1, 1
    return Problem(
        name="free_directions", n=n, m=m, k=k, r=r, x0=np.zeros(1),
        dynamics=stage_map(n, m, n,
                           value=lambda t, x, u: np.array([u[0] + u[1]]),
                           jac_u=lambda t, x, u: np.array([[1.0, 1.0]])),
        running_cost=stage_map(n, m, k, value=_zeros_stage((k,))),
        terminal_cost=endpoint_map(n, k, value=_zeros_pt((k,))),
        endpoint_constraint=endpoint_map(
            n, n, value=lambda x: np.array([x[0] - 100.0]),
            jac=lambda x: np.ones((1, 1))),
        mixed_constraint=stage_map(
            n, m, r, value=lambda t, x, u: np.array([u[0] - 100.0]),
            jac_u=lambda t, x, u: np.array([[1.0, 0.0]])),
    )


def sign_constrained():
    """g = u <= 0 componentwise with identity g_u, active along u = 0."""
    n, m = 1, 2
    k, r = 1, 2
    rc = stage_map(n, m, k,
                   value=lambda t, x, u: np.array([0.5 * (u @ u)]),
                   jac_u=lambda t, x, u: np.array([u]),
                   hess_uu=lambda t, x, u: np.eye(m)[None, :, :])
    return Problem(
        name="sign_constrained", n=n, m=m, k=k, r=r, x0=np.zeros(1),
        dynamics=stage_map(n, m, n, value=_zeros_stage((n,))),
        running_cost=rc,
        terminal_cost=endpoint_map(n, k, value=_zeros_pt((k,))),
        endpoint_constraint=endpoint_map(
            n, n, value=lambda x: np.array([x[0] - 10.0]),
            jac=lambda x: np.ones((1, 1))),
        mixed_constraint=stage_map(
            n, m, r, value=lambda t, x, u: u.copy(),
            jac_u=lambda t, x, u: np.eye(2)),
    )


def infeasible_endpoint():
    """h(x(1)) = 1 identically: no feasible point exists."""
    n, m, k, r = 1, 1, 1, 1
    rc = stage_map(n, m, k,
                   value=lambda t, x, u: np.array([0.5 * u[0] ** 2]),
                   jac_u=lambda t, x, u: np.array([[u[0]]]),
                   hess_uu=lambda t, x, u: np.ones((1, 1, 1)))
    return Problem(
        name="infeasible_endpoint", n=n, m=m, k=k, r=r, x0=np.zeros(1),
        dynamics=stage_map(n, m, n,
                           value=lambda t, x, u: np.array([u[0]]),
                           jac_u=lambda t, x, u: np.ones((1, 1))),
        running_cost=rc,
        terminal_cost=endpoint_map(n, k, value=_zeros_pt((k,))),
        endpoint_constraint=endpoint_map(
            n, n, value=lambda x: np.ones(1)),
        mixed_constraint=stage_map(
            n, m, r, value=lambda t, x, u: np.array([u[0] - 10.0]),
            jac_u=lambda t, x, u: np.ones((1, 1))),
    )


def linear_cost():
    """Running cost linear in u: the weighted control Hessian vanishes."""
    n, m, k, r = 1, 1, 1, 1
    rc = stage_map(n, m, k,
                   value=lambda t, x, u: np.array([u[0]]),
                   jac_u=lambda t, x, u: np.ones((1, 1)))
    return Problem(
        name="linear_cost", n=n, m=m, k=k, r=r, x0=np.zeros(1),
        dynamics=stage_map(n, m, n,
                           value=lambda t, x, u: np.array([u[0]]),
                           jac_u=lambda t, x, u: np.ones((1, 1))),
        running_cost=rc,
        terminal_cost=endpoint_map(n, k, value=_zeros_pt((k,))),
        endpoint_constraint=endpoint_map(
            n, n, value=lambda x: np.array([x[0] - 10.0]),
            jac=lambda x: np.ones((1, 1))),
        mixed_constraint=stage_map(
            n, m, r, value=lambda t, x, u: np.array([-u[0] - 10.0]),
            jac_u=lambda t, x, u: -np.ones((1, 1))),
    )


def scaled_costs(problem, s):
    """Clone a problem with all objective costs multiplied by s > 0."""
    rc = problem.running_cost
    tc = problem.terminal_cost
    scaled_rc = StageMap(
        value=lambda t, x, u: s * np.asarray(rc.value(t, x, u)),
        jac_x=lambda t, x, u: s * np.asarray(rc.jac_x(t, x, u)),
        jac_u=lambda t, x, u: s * np.asarray(rc.jac_u(t, x, u)),
        hess_xx=lambda t, x, u: s * np.asarray(rc.hess_xx(t, x, u)),
        hess_xu=lambda t, x, u: s * np.asarray(rc.hess_xu(t, x, u)),
        hess_uu=lambda t, x, u: s * np.asarray(rc.hess_uu(t, x, u)),
    )
    scaled_tc = EndpointMap(
        value=lambda x: s * np.asarray(tc.value(x)),
        jac=lambda x: s * np.asarray(tc.jac(x)),
        hess=lambda x: s * np.asarray(tc.hess(x)),
    )
    return Problem(
        name=f"{problem.name}_x{s}", n=problem.n, m=problem.m, k=problem.k,
        r=problem.r, x0=problem.x0, dynamics=problem.dynamics,
        running_cost=scaled_rc, terminal_cost=scaled_tc,
        endpoint_constraint=problem.endpoint_constraint,
        mixed_constraint=problem.mixed_constraint, params=problem.params,
    )
