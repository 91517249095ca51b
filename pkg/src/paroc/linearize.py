"""Linearized dynamics along a trajectory.

The variational equation dxt/dt = phi_x[t] xt + phi_u[t] ut is linear,
so one RK4 step reduces exactly to an affine update

    xt_{i+1} = T_i xt_i + U_i ut_i

with per-interval matrices T_i, U_i assembled from the Jacobians at the
step's stage points.  This module precomputes those matrices once per
trajectory and reuses them for propagation, for gradients of linear
functionals of (xt, ut), and for feasibility-direction searches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrate import state_interpolant
from .model import Grid, Problem, Trajectory

Array = np.ndarray


@dataclass(frozen=True)
class LinearizedDynamics:
    """Exact RK4 transition data of the variational equation.

    ``T`` has shape (N, n, n), ``U`` shape (N, n, m).  ``jac_x_nodes``
    and ``jac_u_nodes`` keep phi_x, phi_u at the (N+1) grid nodes
    (evaluated with the left interval's control, final node with the
    last control) for reuse by quadrature rules.
    """

    grid: Grid
    T: Array
    U: Array
    jac_x_nodes: Array
    jac_u_nodes: Array

    def propagate(self, util: Array) -> Array:
        """State response at nodes to a control perturbation, xt(0) = 0."""
        N = self.grid.n_intervals
        n = self.T.shape[1]
        xt = np.zeros((N + 1, n))
        for i in range(N):
            xt[i + 1] = self.T[i] @ xt[i] + self.U[i] @ util[i]
        return xt

    def functional_gradients(self, w_x: Array, w_u: Array, w_end: Array) -> Array:
        """Control-space gradients of linear functionals of (xt, ut).

        For q functionals of the form

            c_j(ut) = sum_i w_x[j, i] . xt_i + sum_i w_u[j, i] . ut_i
                      + w_end[j] . xt_N,

        with xt the propagated response, returns the gradient array of
        shape (q, N, m).  ``w_x`` is (q, N+1, n), ``w_u`` is (q, N, m),
        ``w_end`` is (q, n).
        """
        N = self.grid.n_intervals
        q = w_x.shape[0]
        grads = np.array(w_u, dtype=float, copy=True)
        omega = w_end + w_x[:, N, :]          # (q, n) running cotangents
        for i in range(N - 1, -1, -1):
            grads[:, i, :] += omega @ self.U[i]
            omega = omega @ self.T[i] + w_x[:, i, :]
        return grads


def linearize_along(problem: Problem, traj: Trajectory, grid: Grid | None = None) -> LinearizedDynamics:
    """Build exact RK4 transition matrices of the variational equation.

    ``grid`` may differ from the trajectory's grid (states are then
    interpolated and controls sampled from their containing interval),
    which supports re-checking a direction at a refined resolution.
    """
    tgrid = traj.grid
    grid = grid or tgrid
    N = grid.n_intervals
    h = grid.dt
    n, m = problem.n, problem.m
    same_grid = grid.n_intervals == tgrid.n_intervals
    interp = None if same_grid else state_interpolant(problem, traj)

    def state_at(t: float) -> Array:
        return traj.x[int(round(t / h))] if same_grid else interp(t)

    def control_at(t: float) -> Array:
        # nudge guards against i*h/h rounding just below the node index
        i = min(max(int(t / tgrid.dt + 1e-9), 0), tgrid.n_intervals - 1)
        return traj.u[i]

    jac_x = problem.dynamics.jac_x
    jac_u = problem.dynamics.jac_u
    T = np.empty((N, n, n))
    U = np.empty((N, n, m))
    Ax_nodes = np.empty((N + 1, n, n))
    Au_nodes = np.empty((N + 1, n, m))
    eye = np.eye(n)

    # midpoint states, Hermite within each (sub)interval
    f = problem.dynamics.value
    for i in range(N):
        t0 = i * h
        t1 = t0 + h
        tm = t0 + 0.5 * h
        u_i = control_at(t0)
        x0 = state_at(t0)
        x1 = state_at(t1)
        fl = f(t0, x0, u_i)
        frv = f(t1, x1, u_i)
        xm = 0.5 * (x0 + x1) + (h / 8.0) * (fl - frv)

        A1 = np.asarray(jac_x(t0, x0, u_i), dtype=float)
        A2 = np.asarray(jac_x(tm, xm, u_i), dtype=float)
        A3 = np.asarray(jac_x(t1, x1, u_i), dtype=float)
        B1 = np.asarray(jac_u(t0, x0, u_i), dtype=float)
        B2 = np.asarray(jac_u(tm, xm, u_i), dtype=float)
        B3 = np.asarray(jac_u(t1, x1, u_i), dtype=float)

        K1 = A1
        K2 = A2 @ (eye + 0.5 * h * K1)
        K3 = A2 @ (eye + 0.5 * h * K2)
        K4 = A3 @ (eye + h * K3)
        T[i] = eye + (h / 6.0) * (K1 + 2.0 * (K2 + K3) + K4)

        D1 = B1
        D2 = A2 @ (0.5 * h * D1) + B2
        D3 = A2 @ (0.5 * h * D2) + B2
        D4 = A3 @ (h * D3) + B3
        U[i] = (h / 6.0) * (D1 + 2.0 * (D2 + D3) + D4)

        Ax_nodes[i] = A1
        Au_nodes[i] = B1
    tN = 1.0
    uN = control_at(tN - 0.5 * h)
    xN = state_at(tN)
    Ax_nodes[N] = np.asarray(jac_x(tN, xN, uN), dtype=float)
    Au_nodes[N] = np.asarray(jac_u(tN, xN, uN), dtype=float)
    return LinearizedDynamics(grid=grid, T=T, U=U, jac_x_nodes=Ax_nodes, jac_u_nodes=Au_nodes)
