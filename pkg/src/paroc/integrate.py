"""Fixed-step integration: state, costate, transition matrix, Gramian.

Everything runs on the uniform grid with classical four-stage
Runge-Kutta steps.  Controls (and mixed-constraint densities) are held
constant on each interval; within a step the interval value is used at
all four stages, which keeps the forward, adjoint and linearized
integrators mutually consistent.

States between nodes are recovered by cubic Hermite interpolation so
that evaluations at stage midpoints retain the integrator's order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import IntegrationError, SingularMatrixError
from .model import Grid, Problem, Trajectory

Array = np.ndarray
MatFn = Callable[[float], Array]


# ---------------------------------------------------------------------------
# forward state propagation
# ---------------------------------------------------------------------------

def _forward(problem: Problem, u: Array, grid: Grid, with_cost: bool):
    """RK4 sweep of the dynamics, optionally accumulating the running costs."""
    N = grid.n_intervals
    h = grid.dt
    u = np.asarray(u, dtype=float)
    if u.shape != (N, problem.m):
        raise ValueError(f"control array must have shape ({N}, {problem.m}), got {u.shape}")
    f = problem.dynamics.value
    L = problem.running_cost.value if with_cost else None
    x = np.empty((N + 1, problem.n))
    x[0] = problem.x0
    cost = np.zeros(problem.k)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(N):
            t = i * h
            ui = u[i]
            xi = x[i]
            k1 = f(t, xi, ui)
            a2 = xi + 0.5 * h * k1
            k2 = f(t + 0.5 * h, a2, ui)
            a3 = xi + 0.5 * h * k2
            k3 = f(t + 0.5 * h, a3, ui)
            a4 = xi + h * k3
            k4 = f(t + h, a4, ui)
            x[i + 1] = xi + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
            if L is not None:
                l1 = L(t, xi, ui)
                l2 = L(t + 0.5 * h, a2, ui)
                l3 = L(t + 0.5 * h, a3, ui)
                l4 = L(t + h, a4, ui)
                cost += (h / 6.0) * (l1 + 2.0 * (l2 + l3) + l4)
    if not np.all(np.isfinite(x)):
        bad = int(np.argmax(~np.isfinite(x).all(axis=1)))
        raise IntegrationError(f"non-finite state at node {bad}", node=bad)
    return x, cost


def integrate_state(problem: Problem, u: Array, grid: Grid) -> Trajectory:
    """Propagate the state from x0 under piecewise-constant controls.

    Raises :class:`IntegrationError` naming the first node at which the
    state becomes non-finite.
    """
    x, _ = _forward(problem, u, grid, with_cost=False)
    return Trajectory(grid=grid, x=x, u=np.asarray(u, dtype=float).copy())


def integrate_with_cost(problem: Problem, u: Array, grid: Grid) -> tuple[Trajectory, Array]:
    """Like :func:`integrate_state` but also accumulates the k running costs."""
    x, cost = _forward(problem, u, grid, with_cost=True)
    return Trajectory(grid=grid, x=x, u=np.asarray(u, dtype=float).copy()), cost


def objective_values(problem: Problem, traj: Trajectory) -> Array:
    """Objective vector J = terminal cost + integrated running cost of a trajectory."""
    _, cost = _forward(problem, traj.u, traj.grid, with_cost=True)
    return np.asarray(problem.terminal_cost.value(traj.x[-1]), dtype=float) + cost


# ---------------------------------------------------------------------------
# interpolation between nodes
# ---------------------------------------------------------------------------

def state_midpoints(problem: Problem, traj: Trajectory) -> Array:
    """States at interval midpoints via cubic Hermite interpolation."""
    N = traj.grid.n_intervals
    h = traj.grid.dt
    f = problem.dynamics.value
    mid = np.empty((N, problem.n))
    for i in range(N):
        t = i * h
        fl = f(t, traj.x[i], traj.u[i])
        fr = f(t + h, traj.x[i + 1], traj.u[i])
        mid[i] = 0.5 * (traj.x[i] + traj.x[i + 1]) + (h / 8.0) * (fl - fr)
    return mid


def state_interpolant(problem: Problem, traj: Trajectory) -> Callable[[float], Array]:
    """Cubic Hermite interpolant of the trajectory state on [0, 1]."""
    N = traj.grid.n_intervals
    h = traj.grid.dt
    f = problem.dynamics.value
    fl = np.empty((N, problem.n))
    fr = np.empty((N, problem.n))
    for i in range(N):
        fl[i] = f(i * h, traj.x[i], traj.u[i])
        fr[i] = f((i + 1) * h, traj.x[i + 1], traj.u[i])

    def at(t: float) -> Array:
        i = min(max(int(t / h + 1e-9), 0), N - 1)
        s = (t - i * h) / h
        h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
        h10 = s * (1.0 - s) ** 2
        h01 = s * s * (3.0 - 2.0 * s)
        h11 = s * s * (s - 1.0)
        return (h00 * traj.x[i] + h01 * traj.x[i + 1]
                + h * (h10 * fl[i] + h11 * fr[i]))

    return at


def control_at(traj: Trajectory, t: float) -> Array:
    """Piecewise-constant control value at time t (right-open intervals)."""
    N = traj.grid.n_intervals
    i = min(max(int(t / traj.grid.dt + 1e-9), 0), N - 1)
    return traj.u[i]


def transversality(problem: Problem, x_end: Array, lam: Array, l: Array) -> Array:
    """Terminal costate p(1) = -(lam^T ell'(x(1)) + l^T h'(x(1)))."""
    ell_jac = np.asarray(problem.terminal_cost.jac(x_end), dtype=float)
    h_jac = np.asarray(problem.endpoint_constraint.jac(x_end), dtype=float)
    return -(ell_jac.T @ lam + h_jac.T @ l)


# ---------------------------------------------------------------------------
# adjoint propagation
# ---------------------------------------------------------------------------

def integrate_adjoint(problem: Problem, traj: Trajectory, lam: Array, l: Array,
                      theta: Array) -> Array:
    """Backward RK4 sweep of the costate equation.

    dp/dt = -phi_x[t]^T p + L_x[t]^T lam + g_x[t]^T theta(t),
    p(1) from the transversality formula; theta is held constant on
    each interval.  Returns p at the grid nodes.
    """
    N = traj.grid.n_intervals
    h = traj.grid.dt
    lam = np.asarray(lam, dtype=float)
    l = np.asarray(l, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (N, problem.r):
        raise ValueError(f"theta must have shape ({N}, {problem.r}), got {theta.shape}")
    x_mid = state_midpoints(problem, traj)
    p = np.empty((N + 1, problem.n))
    p[N] = transversality(problem, traj.x[N], lam, l)
    jac_x = problem.dynamics.jac_x
    L_x = problem.running_cost.jac_x
    g_x = problem.mixed_constraint.jac_x
    for i in range(N - 1, -1, -1):
        t = i * h
        ui = traj.u[i]
        th = theta[i]
        pts = ((t + h, traj.x[i + 1]), (t + 0.5 * h, x_mid[i]), (t, traj.x[i]))
        rhs = []
        for tt, xx in pts:
            A = np.asarray(jac_x(tt, xx, ui), dtype=float)
            b = np.asarray(L_x(tt, xx, ui), dtype=float).T @ lam \
                + np.asarray(g_x(tt, xx, ui), dtype=float).T @ th
            rhs.append((A, b))

        def F(j: int, pv: Array) -> Array:
            A, b = rhs[j]
            return -A.T @ pv + b

        pe = p[i + 1]
        k1 = F(0, pe)
        k2 = F(1, pe - 0.5 * h * k1)
        k3 = F(1, pe - 0.5 * h * k2)
        k4 = F(2, pe - h * k3)
        p[i] = pe - (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        if not np.all(np.isfinite(p[i])):
            raise IntegrationError(f"non-finite costate at node {i}", node=i)
    return p


# ---------------------------------------------------------------------------
# principal matrix solution and controllability Gramian
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrincipalMatrix:
    """State-transition data for dx/dt = A(t) x on the grid.

    ``omega_1s[i]`` holds Omega(1, t_i); ``phi[i]`` holds the forward
    fundamental solution Phi(t_i) with Phi(0) = I (kept for semigroup
    checks).  ``fallback_used`` records whether Omega was produced by
    direct backward integration because Phi was badly conditioned.
    """

    grid: Grid
    omega_1s: Array          # (N+1, n, n)
    phi: Array               # (N+1, n, n)
    fallback_used: bool

    def omega(self, t_idx: int, s_idx: int) -> Array:
        """Omega(t_i, t_s) = Phi(t_i) Phi(t_s)^{-1}."""
        return self.phi[t_idx] @ np.linalg.inv(self.phi[s_idx])


def _rk4_matrix_sweep(A_eval: MatFn, grid: Grid, Y0: Array, forward: bool,
                      rhs: Callable[[Array, Array], Array]) -> Array:
    """Shared RK4 sweep for matrix ODEs dY/dt = rhs(A(t), Y)."""
    N = grid.n_intervals
    h = grid.dt if forward else -grid.dt
    out = np.empty((N + 1,) + Y0.shape)
    out[0 if forward else N] = Y0
    steps = range(N) if forward else range(N, 0, -1)
    for i in steps:
        t0 = i * grid.dt
        Y = out[i]
        k1 = rhs(A_eval(t0), Y)
        k2 = rhs(A_eval(t0 + 0.5 * h), Y + 0.5 * h * k1)
        k3 = rhs(A_eval(t0 + 0.5 * h), Y + 0.5 * h * k2)
        k4 = rhs(A_eval(t0 + h), Y + h * k3)
        nxt = Y + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        out[i + 1 if forward else i - 1] = nxt
        if not np.all(np.isfinite(nxt)):
            raise IntegrationError("non-finite transition matrix", node=i)
    return out


def principal_matrix(A_eval: MatFn, grid: Grid, cond_limit: float = 1e12) -> PrincipalMatrix:
    """Omega(1, t_i) for dx/dt = A(t) x at every grid node.

    Integrates Phi' = A(t) Phi forward from the identity and forms
    Omega(1, t) = Phi(1) Phi(t)^{-1} by LU solves.  If any Phi(t_i) has
    a 2-norm condition estimate above ``cond_limit``, falls back to
    integrating dOmega(1, s)/ds = -Omega(1, s) A(s) backward from the
    identity at s = 1.
    """
    n = np.asarray(A_eval(0.0)).shape[0]
    phi = _rk4_matrix_sweep(A_eval, grid, np.eye(n), forward=True,
                            rhs=lambda A, Y: A @ Y)
    conds = np.linalg.cond(phi)
    if not np.all(np.isfinite(conds)):
        raise SingularMatrixError("fundamental solution is numerically singular")
    fallback = bool(np.max(conds) > cond_limit)
    N = grid.n_intervals
    if fallback:
        omega = _rk4_matrix_sweep(A_eval, grid, np.eye(n), forward=False,
                                  rhs=lambda A, Y: -(Y @ A))
    else:
        omega = np.empty_like(phi)
        phi_end = phi[N]
        for i in range(N + 1):
            # Omega(1, t_i)^T solves Phi(t_i)^T Z = Phi(1)^T
            omega[i] = np.linalg.solve(phi[i].T, phi_end.T).T
    omega[N] = np.eye(n)
    return PrincipalMatrix(grid=grid, omega_1s=omega, phi=phi, fallback_used=fallback)


@dataclass(frozen=True)
class Gramian:
    """Controllability Gramian W = int_0^1 Omega(1,s) B(s) B(s)^T Omega(1,s)^T ds."""

    W: Array
    min_eig: float
    rank_tol: float

    @property
    def full_rank(self) -> bool:
        scale = float(np.trace(self.W)) / self.W.shape[0] if self.W.shape[0] else 0.0
        return self.min_eig > self.rank_tol * scale


def controllability_gramian(A_eval: MatFn, B_eval: MatFn, grid: Grid,
                            rank_tol: float = 1e-10) -> Gramian:
    """Composite-trapezoid Gramian of the pair (A(t), B(t)) on the grid."""
    pm = principal_matrix(A_eval, grid)
    nodes = grid.nodes
    n = pm.omega_1s.shape[1]
    W = np.zeros((n, n))
    h = grid.dt
    for i, t in enumerate(nodes):
        OB = pm.omega_1s[i] @ np.asarray(B_eval(t), dtype=float)
        w = 0.5 if i in (0, grid.n_intervals) else 1.0
        W += (w * h) * (OB @ OB.T)
    W = 0.5 * (W + W.T)
    min_eig = float(np.linalg.eigvalsh(W)[0])
    return Gramian(W=W, min_eig=min_eig, rank_tol=rank_tol)


def apply_reachability(A_eval: MatFn, B_eval: MatFn, v_eval: Callable[[float], Array],
                       grid: Grid) -> Array:
    """Terminal value of dy/dt = A(t) y + B(t) v(t), y(0) = 0.

    By variation of constants this equals int_0^1 Omega(1,s) B(s) v(s) ds,
    evaluated here at RK4 accuracy instead of by quadrature of Omega.
    """
    n = np.asarray(A_eval(0.0)).shape[0]
    y = np.zeros(n)
    h = grid.dt
    rhs = lambda t, yv: np.asarray(A_eval(t)) @ yv + np.asarray(B_eval(t)) @ np.asarray(v_eval(t))
    for i in range(grid.n_intervals):
        t = i * h
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    return y
