"""Single-shooting transcription engine.

The state is eliminated through the RK4 recurrence, so a decision
vector is just the stacked controls.  The running costs are integrated
through the same RK4 stages as the dynamics, which makes the discrete
objective the exact RK4 functional of the continuous one.  Gradients
are computed in adjoint (reverse) mode through the recurrence, exactly.

Mixed-constraint rows are evaluated at interval left nodes
(t_i, x_i, u_i); the endpoint constraint at x_N.
"""

from __future__ import annotations

import numpy as np

from .errors import IntegrationError
from .model import Grid, Problem

Array = np.ndarray


def forward_pass(problem: Problem, grid: Grid, u: Array, need_stages: bool = False):
    """RK4 sweep returning states, integrated costs, constraint values.

    Returns (x, cost, stages, g_vals, h_vals); ``stages`` is None unless
    requested, else (N, 4, n) holding the four stage states per step.
    """
    N = grid.n_intervals
    h = grid.dt
    n, k, r = problem.n, problem.k, problem.r
    f = problem.dynamics.value
    L = problem.running_cost.value
    g = problem.mixed_constraint.value
    x = np.empty((N + 1, n))
    x[0] = problem.x0
    cost = np.zeros(k)
    g_vals = np.empty((N, r))
    stages = np.empty((N, 4, n)) if need_stages else None
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(N):
            t = i * h
            ui = u[i]
            xi = x[i]
            g_vals[i] = g(t, xi, ui)
            k1 = f(t, xi, ui)
            a2 = xi + 0.5 * h * k1
            k2 = f(t + 0.5 * h, a2, ui)
            a3 = xi + 0.5 * h * k2
            k3 = f(t + 0.5 * h, a3, ui)
            a4 = xi + h * k3
            k4 = f(t + h, a4, ui)
            x[i + 1] = xi + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
            cost += (h / 6.0) * (L(t, xi, ui) + 2.0 * (L(t + 0.5 * h, a2, ui)
                                                       + L(t + 0.5 * h, a3, ui))
                                 + L(t + h, a4, ui))
            if need_stages:
                stages[i, 0] = xi
                stages[i, 1] = a2
                stages[i, 2] = a3
                stages[i, 3] = a4
    if not np.all(np.isfinite(x)):
        bad = int(np.argmax(~np.isfinite(x).all(axis=1)))
        raise IntegrationError(f"non-finite state at node {bad}", node=bad)
    h_vals = np.asarray(problem.endpoint_constraint.value(x[N]), dtype=float)
    return x, cost, stages, g_vals, h_vals


def backward_gradient(problem: Problem, grid: Grid, u: Array, x: Array,
                      stages: Array, lam: Array, xbar_terminal: Array,
                      g_weights: Array | None) -> Array:
    """Adjoint-mode gradient of

        lam . (integrated running cost) + <xbar_terminal as d(terminal)/dx>
        + sum_i g_weights[i] . g(t_i, x_i, u_i)

    with respect to the stacked controls.  ``xbar_terminal`` must
    already hold the derivative of all terminal terms at x_N.
    """
    N = grid.n_intervals
    h = grid.dt
    m = problem.m
    phi_x = problem.dynamics.jac_x
    phi_u = problem.dynamics.jac_u
    L_x = problem.running_cost.jac_x
    L_u = problem.running_cost.jac_u
    g_x = problem.mixed_constraint.jac_x
    g_u = problem.mixed_constraint.jac_u
    lam6 = (h / 6.0) * lam
    lam3 = (h / 3.0) * lam
    grad = np.empty((N, m))
    xbar = np.asarray(xbar_terminal, dtype=float).copy()
    # row-vector products q @ A replace A.T @ q below (same result,
    # fewer temporaries in the hottest loop of the package)
    for i in range(N - 1, -1, -1):
        t = i * h
        tm = t + 0.5 * h
        te = t + h
        ui = u[i]
        a1, a2, a3, a4 = stages[i]
        q4 = (h / 6.0) * xbar
        v4 = q4 @ phi_x(te, a4, ui) + lam6 @ L_x(te, a4, ui)
        gu = q4 @ phi_u(te, a4, ui) + lam6 @ L_u(te, a4, ui)
        q3 = (h / 3.0) * xbar + h * v4
        v3 = q3 @ phi_x(tm, a3, ui) + lam3 @ L_x(tm, a3, ui)
        gu += q3 @ phi_u(tm, a3, ui) + lam3 @ L_u(tm, a3, ui)
        q2 = (h / 3.0) * xbar + 0.5 * h * v3
        v2 = q2 @ phi_x(tm, a2, ui) + lam3 @ L_x(tm, a2, ui)
        gu += q2 @ phi_u(tm, a2, ui) + lam3 @ L_u(tm, a2, ui)
        q1 = (h / 6.0) * xbar + 0.5 * h * v2
        v1 = q1 @ phi_x(t, a1, ui) + lam6 @ L_x(t, a1, ui)
        gu += q1 @ phi_u(t, a1, ui) + lam6 @ L_u(t, a1, ui)
        xbar = xbar + v1 + v2 + v3 + v4
        if g_weights is not None:
            w = g_weights[i]
            xbar = xbar + w @ g_x(t, a1, ui)
            gu = gu + w @ g_u(t, a1, ui)
        grad[i] = gu
    return grad


def terminal_seed(problem: Problem, x_end: Array, lam: Array,
                  h_weights: Array | None) -> Array:
    """d/dx_N of lam . terminal_cost + h_weights . endpoint_constraint."""
    seed = np.asarray(problem.terminal_cost.jac(x_end), dtype=float).T @ lam
    if h_weights is not None:
        seed = seed + np.asarray(problem.endpoint_constraint.jac(x_end), dtype=float).T @ h_weights
    return seed


def objective_value(problem: Problem, grid: Grid, u: Array, lam: Array) -> float:
    """Scalarized objective lam . J(u) of the transcription."""
    x, cost, _, _, _ = forward_pass(problem, grid, u)
    ell = np.asarray(problem.terminal_cost.value(x[-1]), dtype=float)
    return float(lam @ (cost + ell))


def objective_gradient(problem: Problem, grid: Grid, u: Array, lam: Array) -> tuple[float, Array]:
    """Objective and its exact adjoint-mode gradient."""
    x, cost, stages, _, h_vals = forward_pass(problem, grid, u, need_stages=True)
    ell = np.asarray(problem.terminal_cost.value(x[-1]), dtype=float)
    val = float(lam @ (cost + ell))
    grad = backward_gradient(problem, grid, u, x, stages, lam,
                             terminal_seed(problem, x[-1], lam, None), None)
    return val, grad


def lagrangian_gradient(problem: Problem, grid: Grid, u: Array, lam: Array,
                        eta_h: Array, eta_g: Array) -> Array:
    """Gradient of lam . J + eta_h . h(x_N) + sum_i eta_g[i] . g_i."""
    x, _, stages, _, _ = forward_pass(problem, grid, u, need_stages=True)
    seed = terminal_seed(problem, x[-1], lam, np.asarray(eta_h, dtype=float))
    return backward_gradient(problem, grid, u, x, stages, lam, seed,
                             np.asarray(eta_g, dtype=float))
