"""Multiplier reconstruction and optimality-condition verification.

Given a candidate trajectory and a unit weight vector over the
objectives, this module rebuilds the remaining multipliers (endpoint
vector l, costate p, mixed-constraint density theta), measures the
residuals of the first-order conditions

    (i)   costate equation and transversality,
    (ii)  stationarity in the control,
    (iii) sign and complementarity of l and theta,

and evaluates the quadratic form of the second-order conditions over
sampled critical directions.

Conventions.  Control-dependent quantities live on intervals and are
evaluated at interval midpoints (states interpolated): the transcribed
optimum matches the continuous stationarity condition at midpoints to
second order in the step, so midpoint residuals measure optimality
rather than discretization error.  The density theta is reconstructed
from the costate through the closed-form least-squares solve of the
stationarity condition, restricted to the mixed-constraint components
that are active at the node; inactive components carry theta = 0 so
that complementarity is enforced structurally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import SingularMatrixError
from .integrate import integrate_state, state_midpoints, transversality
from .linearize import LinearizedDynamics, linearize_along
from .model import Grid, MultiplierSet, Problem, Trajectory
from .shooting import forward_pass, lagrangian_gradient

Array = np.ndarray


@dataclass(frozen=True)
class KKTTolerances:
    """Tolerances used by :func:`verify_kkt`; echoed into every report.

    The stationarity and costate tolerances are relative: they are
    scaled by (1 + |lam^T L_u|_inf + |p|_inf) and (1 + |p|_inf)
    respectively.
    """

    stationarity_rel: float = 1e-5
    adjoint_rel: float = 1e-5
    transversality_rel: float = 1e-8
    complementarity: float = 1e-6
    primal: float = 1e-7
    activity: float = 1e-6
    activity_band: float = 1e-4
    direction_count: int = 5
    direction_seed: int = 0

    def to_dict(self) -> dict:
        return {
            "stationarity_rel": self.stationarity_rel,
            "adjoint_rel": self.adjoint_rel,
            "transversality_rel": self.transversality_rel,
            "complementarity": self.complementarity,
            "primal": self.primal,
            "activity": self.activity,
            "activity_band": self.activity_band,
            "direction_count": self.direction_count,
            "direction_seed": self.direction_seed,
        }


@dataclass(frozen=True)
class KKTReport:
    """Residuals, margins and verdicts of the first/second-order conditions."""

    stationarity_resid: float
    adjoint_resid: float
    transversality_resid: float
    comp_l: dict
    comp_theta: dict
    primal_feas: float
    second_order_values: list[float]
    normal: bool
    verdict: dict
    tolerances: dict

    @property
    def passed(self) -> bool:
        return bool(self.verdict.get("overall", False))

    def to_dict(self) -> dict:
        return {
            "stationarity_resid": self.stationarity_resid,
            "adjoint_resid": self.adjoint_resid,
            "transversality_resid": self.transversality_resid,
            "comp_l": self.comp_l,
            "comp_theta": self.comp_theta,
            "primal_feas": self.primal_feas,
            "second_order_values": list(self.second_order_values),
            "normal": self.normal,
            "verdict": self.verdict,
            "tolerances": self.tolerances,
        }


# ---------------------------------------------------------------------------
# stage data shared by reconstruction and verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _StageData:
    """Jacobians along the trajectory at (left, mid, right) of each interval."""

    x_mid: Array                  # (N, n)
    phi_x: Array                  # (N, 3, n, n)
    phi_u: Array                  # (N, 3, n, m)
    L_x: Array                    # (N, 3, k, n)
    L_u: Array                    # (N, 3, k, m)
    g_x: Array                    # (N, 3, r, n)
    g_u: Array                    # (N, 3, r, m)
    g_mid: Array                  # (N, r) constraint values at midpoints
    g_left: Array                 # (N, r) constraint values at left nodes


def _assemble_stage_data(problem: Problem, traj: Trajectory) -> _StageData:
    N = traj.grid.n_intervals
    h = traj.grid.dt
    n, m, k, r = problem.n, problem.m, problem.k, problem.r
    x_mid = state_midpoints(problem, traj)
    phi_x = np.empty((N, 3, n, n))
    phi_u = np.empty((N, 3, n, m))
    L_x = np.empty((N, 3, k, n))
    L_u = np.empty((N, 3, k, m))
    g_x = np.empty((N, 3, r, n))
    g_u = np.empty((N, 3, r, m))
    g_mid = np.empty((N, r))
    g_left = np.empty((N, r))
    dyn, rc, mc = problem.dynamics, problem.running_cost, problem.mixed_constraint
    for i in range(N):
        t = i * h
        ui = traj.u[i]
        pts = ((t, traj.x[i]), (t + 0.5 * h, x_mid[i]), (t + h, traj.x[i + 1]))
        for s, (tt, xx) in enumerate(pts):
            phi_x[i, s] = dyn.jac_x(tt, xx, ui)
            phi_u[i, s] = dyn.jac_u(tt, xx, ui)
            L_x[i, s] = rc.jac_x(tt, xx, ui)
            L_u[i, s] = rc.jac_u(tt, xx, ui)
            g_x[i, s] = mc.jac_x(tt, xx, ui)
            g_u[i, s] = mc.jac_u(tt, xx, ui)
        g_mid[i] = mc.value(t + 0.5 * h, x_mid[i], ui)
        g_left[i] = mc.value(t, traj.x[i], ui)
    return _StageData(x_mid=x_mid, phi_x=phi_x, phi_u=phi_u, L_x=L_x, L_u=L_u,
                      g_x=g_x, g_u=g_u, g_mid=g_mid, g_left=g_left)


# ---------------------------------------------------------------------------
# theta extraction
# ---------------------------------------------------------------------------

def extract_theta(problem: Problem, traj: Trajectory, lam: Array, p: Array) -> Array:
    """Density recovered from the stationarity condition, one row per interval.

    theta[i] = (-lam^T L_u[t_i] + p[t_i]^T phi_u[t_i]) g_u[t_i]^T R[t_i]^{-1}

    evaluated at interval left nodes with the costate row p[i].  Raises
    :class:`SingularMatrixError` where R[t] = g_u g_u^T is singular.
    """
    N = traj.grid.n_intervals
    h = traj.grid.dt
    lam = np.asarray(lam, dtype=float)
    p = np.asarray(p, dtype=float)
    out = np.empty((N, problem.r))
    for i in range(N):
        t, x, u = i * h, traj.x[i], traj.u[i]
        L_u = np.asarray(problem.running_cost.jac_u(t, x, u), dtype=float)
        phi_u = np.asarray(problem.dynamics.jac_u(t, x, u), dtype=float)
        g_u = np.asarray(problem.mixed_constraint.jac_u(t, x, u), dtype=float)
        R = g_u @ g_u.T
        rhs = g_u @ (phi_u.T @ p[i] - L_u.T @ lam)
        try:
            out[i] = np.linalg.solve(R, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(f"R[t] singular at node {i}") from exc
    return out


# ---------------------------------------------------------------------------
# coupled costate reconstruction
# ---------------------------------------------------------------------------

def _adjoint_coefficients(data: _StageData, lam: Array, active: Array):
    """Affine costate right-hand sides dp/dt = Ap p + bp per stage point.

    Substituting the active-set density theta(p) into the costate
    equation leaves a linear ODE; ``active`` is the (N, r) boolean mask
    of mixed components treated as active on each interval.
    """
    N = data.phi_x.shape[0]
    n = data.phi_x.shape[2]
    Ap = np.empty((N, 3, n, n))
    bp = np.empty((N, 3, n))
    for i in range(N):
        act = active[i]
        for s in range(3):
            A = -data.phi_x[i, s].T
            b = data.L_x[i, s].T @ lam
            if act.any():
                gua = data.g_u[i, s][act]
                gxa = data.g_x[i, s][act]
                R = gua @ gua.T
                try:
                    M = gxa.T @ np.linalg.solve(R, gua)   # (n, m)
                except np.linalg.LinAlgError as exc:
                    raise SingularMatrixError(
                        f"active-set Gram matrix singular at interval {i}") from exc
                A = A + M @ data.phi_u[i, s].T
                b = b - M @ (data.L_u[i, s].T @ lam)
            Ap[i, s] = A
            bp[i, s] = b
    return Ap, bp


def _costate_sweep(grid: Grid, Ap: Array, bp: Array, p_end: Array):
    """Backward RK4 for the affine costate system; nodes and midpoints."""
    N = grid.n_intervals
    h = grid.dt
    n = p_end.shape[0]
    p = np.empty((N + 1, n))
    p_mid = np.empty((N, n))
    p[N] = p_end
    for i in range(N - 1, -1, -1):
        A_l, A_m, A_r = Ap[i]
        b_l, b_m, b_r = bp[i]
        pe = p[i + 1]
        k1 = A_r @ pe + b_r
        k2 = A_m @ (pe - 0.5 * h * k1) + b_m
        k3 = A_m @ (pe - 0.5 * h * k2) + b_m
        k4 = A_l @ (pe - h * k3) + b_l
        p[i] = pe - (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        p_mid[i] = 0.5 * (p[i] + pe) + (h / 8.0) * ((A_l @ p[i] + b_l) - k1)
    return p, p_mid


def _theta_and_residual(data: _StageData, lam: Array, active: Array, p_mid: Array):
    """Density at midpoints by exact solve on fixed active rows, plus residual."""
    N, r = data.g_mid.shape
    m = data.phi_u.shape[3]
    theta = np.zeros((N, r))
    resid = np.empty((N, m))
    for i in range(N):
        raw = data.L_u[i, 1].T @ lam - data.phi_u[i, 1].T @ p_mid[i]
        act = active[i]
        if act.any():
            gua = data.g_u[i, 1][act]
            R = gua @ gua.T
            try:
                theta[i, act] = np.linalg.solve(R, -(gua @ raw))
            except np.linalg.LinAlgError as exc:
                raise SingularMatrixError(
                    f"active-set Gram matrix singular at interval {i}") from exc
        resid[i] = raw + data.g_u[i, 1].T @ theta[i]
    return theta, resid


def _refine_theta(data: _StageData, lam: Array, p_mid: Array, band: float,
                  comp_tol: float):
    """Complementarity-admissible density fit per interval.

    Rows whose enforced constraint value (at the interval's left node,
    where the transcription imposes it) lies above ``-band`` are
    candidates; a nonnegative least-squares fit of the stationarity
    condition is then pruned of rows whose complementarity product
    theta_j |g_j| exceeds ``comp_tol``.  A solver-converged point sits
    a small complementarity gap inside its active set, so admission
    must go by the product, not by a sharp activity cutoff; and a
    boundary-riding row that couples state and control is exactly
    active only at the enforced nodes, so the product uses those
    values, never interpolated ones.
    """
    N, r = data.g_left.shape
    m = data.phi_u.shape[3]
    theta = np.zeros((N, r))
    resid = np.empty((N, m))
    masks = np.zeros((N, r), dtype=bool)
    for i in range(N):
        raw = data.L_u[i, 1].T @ lam - data.phi_u[i, 1].T @ p_mid[i]
        cand = list(np.flatnonzero(data.g_left[i] >= -band))
        while cand:
            th = _nnls_small(data.g_u[i, 1][cand].T, -raw)
            products = th * np.abs(data.g_left[i][cand])
            worst = int(np.argmax(products))
            if products[worst] <= comp_tol:
                theta[i, cand] = th
                masks[i, cand] = True
                break
            cand.pop(worst)
        resid[i] = raw + data.g_u[i, 1].T @ theta[i]
    return theta, resid, masks


def _nnls_small(A: Array, b: Array) -> Array:
    """argmin |A x - b| over x >= 0 by subset enumeration (few columns)."""
    ncols = A.shape[1]
    best_x = np.zeros(ncols)
    best_r = float(np.linalg.norm(b))
    for size in range(1, ncols + 1):
        for subset in combinations(range(ncols), size):
            sub = A[:, subset]
            sol, *_ = np.linalg.lstsq(sub, b, rcond=None)
            if np.any(sol < 0):
                continue
            res = float(np.linalg.norm(sub @ sol - b))
            if res < best_r - 1e-15:
                best_r = res
                best_x = np.zeros(ncols)
                best_x[list(subset)] = sol
    return best_x


def reconstruct_multipliers(problem: Problem, traj: Trajectory, lam: Array,
                            tol: KKTTolerances | None = None,
                            _data: _StageData | None = None) -> MultiplierSet:
    """Rebuild (l, p, theta) for a given unit weight vector.

    For fixed trajectory and weights the stationarity-residual vector
    is affine in the endpoint multiplier l (the costate solves a linear
    ODE whose terminal value is affine in l, and theta is affine in the
    costate).  The affine map is assembled from sweeps at l = 0 and
    l = e_i for the active endpoint rows, then l >= 0 is fitted by
    nonnegative least squares; inactive rows carry l_i = 0.

    The returned set carries ``status = "no_normal_multiplier"`` when
    the best residual stays above ten times the stationarity tolerance.
    """
    tol = tol or KKTTolerances()
    lam = np.asarray(lam, dtype=float)
    if abs(np.linalg.norm(lam) - 1.0) > 1e-9 or np.any(lam < -1e-12):
        raise ValueError("weights must be nonnegative with unit Euclidean norm")
    data = _data if _data is not None else _assemble_stage_data(problem, traj)
    x_end = traj.x[-1]
    h_val = np.asarray(problem.endpoint_constraint.value(x_end), dtype=float)

    # settle the mixed active rows at l = 0, then freeze them so the
    # residual-vs-l map is exactly affine
    masks = data.g_mid >= -tol.activity
    for _ in range(3):
        Ap, bp = _adjoint_coefficients(data, lam, masks)
        _, p_mid0 = _costate_sweep(traj.grid, Ap, bp,
                                   transversality(problem, x_end, lam, np.zeros(problem.n)))
        _, _, masks_new = _refine_theta(data, lam, p_mid0, tol.activity_band,
                                        tol.complementarity)
        done = bool(np.all(masks_new == masks))
        masks = masks_new
        if done:
            break
    Ap, bp = _adjoint_coefficients(data, lam, masks)

    def residual_for(l_vec: Array):
        p, p_mid = _costate_sweep(traj.grid, Ap, bp,
                                  transversality(problem, x_end, lam, l_vec))
        theta, resid = _theta_and_residual(data, lam, masks, p_mid)
        return p, p_mid, theta, resid

    l = np.zeros(problem.n)
    _, _, _, resid0 = residual_for(l)
    cand_end = list(np.flatnonzero(h_val >= -tol.activity_band))
    if cand_end:
        cols = []
        for j in cand_end:
            e = np.zeros(problem.n)
            e[j] = 1.0
            _, _, _, resid_j = residual_for(e)
            cols.append((resid_j - resid0).ravel())
        M_all = np.stack(cols, axis=1)
        while cand_end:
            sol = _nnls_small(M_all, -resid0.ravel())
            products = sol * np.abs(h_val[cand_end])
            worst = int(np.argmax(products))
            if products[worst] <= tol.complementarity:
                l[cand_end] = sol
                break
            cand_end.pop(worst)
            M_all = np.delete(M_all, worst, axis=1)
    p, p_mid, theta, resid = residual_for(l)
    # final pass lets the density re-fit at the fitted l
    theta, resid, _ = _refine_theta(data, lam, p_mid, tol.activity_band,
                                    tol.complementarity)

    lu_scale = float(np.max(np.abs(np.einsum("nkm,k->nm", data.L_u[:, 1], lam)))) \
        if data.L_u.size else 0.0
    stat_tol = tol.stationarity_rel * (1.0 + lu_scale + float(np.max(np.abs(p))))
    status = "ok"
    if float(np.max(np.abs(resid))) > 10.0 * stat_tol:
        status = "no_normal_multiplier"
    return MultiplierSet(lam=lam, l=l, p=p, theta=theta, p_mid=p_mid, status=status)


def costate_midpoints(problem: Problem, traj: Trajectory, mult: MultiplierSet) -> Array:
    """Hermite midpoint values of an externally supplied costate."""
    data = _assemble_stage_data(problem, traj)
    N = traj.grid.n_intervals
    h = traj.grid.dt
    p_mid = np.empty((N, problem.n))
    for i in range(N):
        dl = (-data.phi_x[i, 0].T @ mult.p[i] + data.L_x[i, 0].T @ mult.lam
              + data.g_x[i, 0].T @ mult.theta[i])
        dr = (-data.phi_x[i, 2].T @ mult.p[i + 1] + data.L_x[i, 2].T @ mult.lam
              + data.g_x[i, 2].T @ mult.theta[i])
        p_mid[i] = 0.5 * (mult.p[i] + mult.p[i + 1]) + (h / 8.0) * (dl - dr)
    return p_mid


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

def verify_kkt(problem: Problem, traj: Trajectory, lam: Array,
               tol: KKTTolerances | None = None,
               mult: MultiplierSet | None = None,
               _data: _StageData | None = None) -> KKTReport:
    """Fill a :class:`KKTReport` for a candidate trajectory.

    Reconstructs multipliers unless a set is supplied.  Report-only:
    verdict flags are deterministic functions of the residuals and the
    echoed tolerances.
    """
    tol = tol or KKTTolerances()
    lam = np.asarray(lam, dtype=float)
    data = _data if _data is not None else _assemble_stage_data(problem, traj)
    if mult is None:
        mult = reconstruct_multipliers(problem, traj, lam, tol, _data=data)
    p_mid = mult.p_mid if mult.p_mid is not None else costate_midpoints(problem, traj, mult)

    N = traj.grid.n_intervals
    h = traj.grid.dt
    # (ii) stationarity at midpoints
    resid = np.empty((N, problem.m))
    lu_scale = 0.0
    for i in range(N):
        lu = data.L_u[i, 1].T @ mult.lam
        lu_scale = max(lu_scale, float(np.max(np.abs(lu))))
        resid[i] = lu - data.phi_u[i, 1].T @ p_mid[i] + data.g_u[i, 1].T @ mult.theta[i]
    stationarity = float(np.max(np.abs(resid)))

    # (i) one-step defect of the costate recurrence with frozen theta
    adjoint_defect = 0.0
    for i in range(N):
        def rhs(s: int, pv: Array) -> Array:
            return (-data.phi_x[i, s].T @ pv + data.L_x[i, s].T @ mult.lam
                    + data.g_x[i, s].T @ mult.theta[i])

        pe = mult.p[i + 1]
        k1 = rhs(2, pe)
        k2 = rhs(1, pe - 0.5 * h * k1)
        k3 = rhs(1, pe - 0.5 * h * k2)
        k4 = rhs(0, pe - h * k3)
        p_back = pe - (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        adjoint_defect = max(adjoint_defect, float(np.max(np.abs(p_back - mult.p[i]))))

    x_end = traj.x[-1]
    trans = float(np.max(np.abs(mult.p[N] - transversality(problem, x_end, lam, mult.l))))

    h_val = np.asarray(problem.endpoint_constraint.value(x_end), dtype=float)
    comp_l = {
        "max_prod": float(np.max(np.abs(mult.l * h_val))) if h_val.size else 0.0,
        "min_multiplier": float(np.min(mult.l)) if mult.l.size else 0.0,
    }
    comp_theta = {
        "max_prod": float(np.max(np.abs(mult.theta * data.g_mid))) if mult.theta.size else 0.0,
        "min_multiplier": float(np.min(mult.theta)) if mult.theta.size else 0.0,
    }

    # primal feasibility: endpoint, mixed rows, dynamics defect
    mixed_viol = max(float(np.max(data.g_left)), float(np.max(data.g_mid)))
    endpoint_viol = float(np.max(h_val))
    re_x = integrate_state(problem, traj.u, traj.grid).x
    dyn_defect = float(np.max(np.abs(re_x - traj.x)))
    primal = max(0.0, endpoint_viol, mixed_viol, dyn_defect)

    directions = sample_critical_directions(problem, traj, tol.direction_count,
                                            tol.direction_seed, eps_act=tol.activity)
    so_values = [second_order_form(problem, traj, mult, d) for d in directions]

    p_scale = 1.0 + float(np.max(np.abs(mult.p)))
    stat_tol = tol.stationarity_rel * (p_scale + lu_scale)
    normal = bool(abs(np.linalg.norm(mult.lam) - 1.0) <= 1e-12 and np.all(mult.lam >= -1e-15))
    so_scale = 1e-8 * (1.0 + max((abs(v) for v in so_values), default=0.0))
    verdict = {
        "stationarity": stationarity <= stat_tol,
        "adjoint": adjoint_defect <= tol.adjoint_rel * p_scale,
        "transversality": trans <= tol.transversality_rel * p_scale,
        "complementarity": (comp_l["max_prod"] <= tol.complementarity
                            and comp_theta["max_prod"] <= tol.complementarity
                            and comp_l["min_multiplier"] >= -tol.complementarity
                            and comp_theta["min_multiplier"] >= -tol.complementarity),
        "primal": primal <= tol.primal,
        "second_order": (min(so_values) >= -so_scale) if so_values else None,
        "normal": normal,
        "multiplier_status": mult.status,
    }
    verdict["overall"] = bool(
        verdict["stationarity"] and verdict["adjoint"] and verdict["transversality"]
        and verdict["complementarity"] and verdict["primal"] and normal
        and mult.status == "ok"
        and (verdict["second_order"] is None or verdict["second_order"]))
    return KKTReport(
        stationarity_resid=stationarity,
        adjoint_resid=adjoint_defect,
        transversality_resid=trans,
        comp_l=comp_l,
        comp_theta=comp_theta,
        primal_feas=primal,
        second_order_values=so_values,
        normal=normal,
        verdict=verdict,
        tolerances=tol.to_dict(),
    )


# ---------------------------------------------------------------------------
# critical directions and second-order forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalDirection:
    """A linearized feasible direction that does not increase any objective."""

    xtil: Array                   # (N+1, n)
    util: Array                   # (N, m)
    activity: dict = field(default_factory=dict)


def _critical_rows(problem: Problem, traj: Trajectory, lin: LinearizedDynamics,
                   eps_act: float):
    """Gradient rows (over stacked controls) of all active cone constraints."""
    N = traj.grid.n_intervals
    h = traj.grid.dt
    n, m, k = problem.n, problem.m, problem.k
    x_end = traj.x[-1]

    w_x_list, w_u_list, w_end_list, labels = [], [], [], []

    # objective rows: ell' xt(1) + trapezoid of (L_x xt + L_u ut) <= 0
    ell_jac = np.asarray(problem.terminal_cost.jac(x_end), dtype=float)
    w_x = np.zeros((k, N + 1, n))
    w_u = np.zeros((k, N, m))
    for i in range(N):
        t = i * h
        ui = traj.u[i]
        Lx_l = np.asarray(problem.running_cost.jac_x(t, traj.x[i], ui), dtype=float)
        Lx_r = np.asarray(problem.running_cost.jac_x(t + h, traj.x[i + 1], ui), dtype=float)
        Lu_l = np.asarray(problem.running_cost.jac_u(t, traj.x[i], ui), dtype=float)
        Lu_r = np.asarray(problem.running_cost.jac_u(t + h, traj.x[i + 1], ui), dtype=float)
        w_x[:, i] += 0.5 * h * Lx_l
        w_x[:, i + 1] += 0.5 * h * Lx_r
        w_u[:, i] = 0.5 * h * (Lu_l + Lu_r)
    for c in range(k):
        w_x_list.append(w_x[c])
        w_u_list.append(w_u[c])
        w_end_list.append(ell_jac[c])
        labels.append(("objective", c))

    # active endpoint rows: h_i'(x(1)) xt(1) <= 0
    h_val = np.asarray(problem.endpoint_constraint.value(x_end), dtype=float)
    h_jac = np.asarray(problem.endpoint_constraint.jac(x_end), dtype=float)
    for i in np.flatnonzero(np.abs(h_val) <= eps_act):
        w_x_list.append(np.zeros((N + 1, n)))
        w_u_list.append(np.zeros((N, m)))
        w_end_list.append(h_jac[i])
        labels.append(("endpoint", int(i)))

    # active mixed rows at left nodes: g_x xt + g_u ut <= 0
    for i in range(N):
        t = i * h
        ui = traj.u[i]
        g_val = np.asarray(problem.mixed_constraint.value(t, traj.x[i], ui), dtype=float)
        act = np.flatnonzero(g_val >= -eps_act)
        if act.size == 0:
            continue
        g_x = np.asarray(problem.mixed_constraint.jac_x(t, traj.x[i], ui), dtype=float)
        g_u = np.asarray(problem.mixed_constraint.jac_u(t, traj.x[i], ui), dtype=float)
        for j in act:
            wx = np.zeros((N + 1, n))
            wu = np.zeros((N, m))
            wx[i] = g_x[j]
            wu[i] = g_u[j]
            w_x_list.append(wx)
            w_u_list.append(wu)
            w_end_list.append(np.zeros(n))
            labels.append(("mixed", (i, int(j))))

    w_x_all = np.stack(w_x_list)
    w_u_all = np.stack(w_u_list)
    w_end_all = np.stack(w_end_list)
    rows = lin.functional_gradients(w_x_all, w_u_all, w_end_all)
    return rows.reshape(rows.shape[0], N * m), labels


def sample_critical_directions(problem: Problem, traj: Trajectory, count: int,
                               seed: int, eps_act: float = 1e-6,
                               max_passes: int = 50) -> list[CriticalDirection]:
    """Draw random control directions and project them onto the critical cone.

    Gaussian draws are projected onto the active half-spaces by cyclic
    projection (at most ``max_passes`` sweeps); directions still
    violating a constraint after projection are discarded.  Up to
    ``count`` directions are returned, each normalized to unit discrete
    L2 norm of the control part; the cone may be trivial, in which case
    fewer (possibly zero) directions come back.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    N = traj.grid.n_intervals
    h = traj.grid.dt
    m = problem.m
    lin = linearize_along(problem, traj)
    rows, labels = _critical_rows(problem, traj, lin, eps_act)
    row_norms2 = np.einsum("ij,ij->i", rows, rows)
    keep = row_norms2 > 1e-24
    out: list[CriticalDirection] = []
    for draw in range(4 * count):
        if len(out) >= count:
            break
        rng = np.random.default_rng([seed, draw])
        util = rng.standard_normal((N, m)).ravel()
        for _ in range(max_passes):
            vals = rows @ util
            violated = np.flatnonzero((vals > 0.0) & keep)
            if violated.size == 0:
                break
            for idx in violated:
                v = rows[idx] @ util
                if v > 0.0:
                    util -= (v / row_norms2[idx]) * rows[idx]
        vals = rows @ util
        if np.any(vals > eps_act):
            continue
        norm = float(np.sqrt(h * (util @ util)))
        if norm < 1e-12:
            continue
        util = (util / norm).reshape(N, m)
        xtil = lin.propagate(util)
        tight = [labels[i] for i in np.flatnonzero(np.abs(rows @ util.ravel()) <= eps_act)]
        out.append(CriticalDirection(xtil=xtil, util=util,
                                     activity={"tight": tight}))
    return out


def linearized_defect(problem: Problem, traj: Trajectory, direction: CriticalDirection) -> float:
    """Defect of the direction against the discrete variational recurrence."""
    lin = linearize_along(problem, traj)
    xt = lin.propagate(direction.util)
    return float(np.max(np.abs(xt - direction.xtil)))


def _quad(T: Array, a: Array, b: Array) -> Array:
    """Componentwise bilinear contraction T[d, i, j] a_i b_j."""
    return np.einsum("dij,i,j->d", T, a, b)


def second_order_form(problem: Problem, traj: Trajectory, mult: MultiplierSet,
                      direction: CriticalDirection) -> float:
    """Quadratic form of the second-order optimality condition.

    lam . ell''(x1)[xt,xt] + l . h''(x1)[xt,xt]
    + int lam . (L_xx[xt,xt] + 2 L_xu[xt,ut] + L_uu[ut,ut])
    - int p . (phi_xx[xt,xt] + 2 phi_xu[xt,ut] + phi_uu[ut,ut])
    + int theta . (g_xx[xt,xt] + 2 g_xu[xt,ut] + g_uu[ut,ut])

    with composite-trapezoid quadrature over the grid; the interval's
    control perturbation and density are used at both interval ends.
    """
    N = traj.grid.n_intervals
    h = traj.grid.dt
    xt = direction.xtil
    ut = direction.util
    x_end = traj.x[-1]
    val = float(mult.lam @ _quad(np.asarray(problem.terminal_cost.hess(x_end), dtype=float),
                                 xt[N], xt[N]))
    val += float(mult.l @ _quad(np.asarray(problem.endpoint_constraint.hess(x_end), dtype=float),
                                xt[N], xt[N]))

    def integrand(t: float, x: Array, u: Array, xv: Array, uv: Array,
                  p: Array, th: Array) -> float:
        rc, dyn, mc = problem.running_cost, problem.dynamics, problem.mixed_constraint
        sL = (_quad(np.asarray(rc.hess_xx(t, x, u), dtype=float), xv, xv)
              + 2.0 * _quad(np.asarray(rc.hess_xu(t, x, u), dtype=float), xv, uv)
              + _quad(np.asarray(rc.hess_uu(t, x, u), dtype=float), uv, uv))
        sP = (_quad(np.asarray(dyn.hess_xx(t, x, u), dtype=float), xv, xv)
              + 2.0 * _quad(np.asarray(dyn.hess_xu(t, x, u), dtype=float), xv, uv)
              + _quad(np.asarray(dyn.hess_uu(t, x, u), dtype=float), uv, uv))
        sG = (_quad(np.asarray(mc.hess_xx(t, x, u), dtype=float), xv, xv)
              + 2.0 * _quad(np.asarray(mc.hess_xu(t, x, u), dtype=float), xv, uv)
              + _quad(np.asarray(mc.hess_uu(t, x, u), dtype=float), uv, uv))
        return float(mult.lam @ sL) - float(p @ sP) + float(th @ sG)

    acc = 0.0
    for i in range(N):
        t = i * h
        u_i = traj.u[i]
        left = integrand(t, traj.x[i], u_i, xt[i], ut[i], mult.p[i], mult.theta[i])
        right = integrand(t + h, traj.x[i + 1], u_i, xt[i + 1], ut[i],
                          mult.p[i + 1], mult.theta[i])
        acc += 0.5 * h * (left + right)
    return val + acc


@dataclass(frozen=True)
class SSCReport:
    """Sampled certificate of the second-order sufficient conditions."""

    precondition_ok: bool
    uniform_convexity_min_eig: float | None
    uniform_convexity_ok: bool | None
    form_values: list[float]
    form_min: float | None
    forms_positive: bool | None
    verdict: bool | None
    note: str

    def to_dict(self) -> dict:
        return {
            "precondition_ok": self.precondition_ok,
            "uniform_convexity_min_eig": self.uniform_convexity_min_eig,
            "uniform_convexity_ok": self.uniform_convexity_ok,
            "form_values": list(self.form_values),
            "form_min": self.form_min,
            "forms_positive": self.forms_positive,
            "verdict": self.verdict,
            "note": self.note,
        }


def check_ssc(problem: Problem, traj: Trajectory, mult: MultiplierSet,
              directions: Sequence[CriticalDirection], gamma0: float,
              tol: KKTTolerances | None = None) -> SSCReport:
    """Sufficient-condition check over sampled directions.

    Requires the first-order conditions to hold for ``mult``; verifies
    (a) the weighted control Hessian lam^T L_uu[t] has smallest
    eigenvalue >= gamma0 at every node, and (b) the second-order form
    is strictly positive on every sampled nonzero direction.  This is a
    sampled certificate, not an exhaustive one, and the report says so.
    """
    tol = tol or KKTTolerances()
    report = verify_kkt(problem, traj, mult.lam, tol, mult=mult)
    first_order_ok = bool(report.verdict["stationarity"] and report.verdict["adjoint"]
                          and report.verdict["transversality"]
                          and report.verdict["complementarity"])
    if not first_order_ok:
        return SSCReport(precondition_ok=False, uniform_convexity_min_eig=None,
                         uniform_convexity_ok=None, form_values=[], form_min=None,
                         forms_positive=None, verdict=None,
                         note="first-order conditions fail; no sufficiency verdict")
    N = traj.grid.n_intervals
    h = traj.grid.dt
    min_eig = np.inf
    for i in range(N):
        Luu = np.asarray(problem.running_cost.hess_uu(i * h, traj.x[i], traj.u[i]), dtype=float)
        W = np.tensordot(mult.lam, Luu, axes=1)
        min_eig = min(min_eig, float(np.linalg.eigvalsh(0.5 * (W + W.T))[0]))
    convexity_ok = bool(min_eig >= gamma0)
    forms = [second_order_form(problem, traj, mult, d) for d in directions]
    form_min = min(forms) if forms else None
    forms_positive = bool(forms and all(v > 0.0 for v in forms))
    verdict = bool(convexity_ok and forms_positive)
    return SSCReport(precondition_ok=True, uniform_convexity_min_eig=float(min_eig),
                     uniform_convexity_ok=convexity_ok, form_values=forms,
                     form_min=form_min, forms_positive=forms_positive, verdict=verdict,
                     note="sufficient conditions hold on sampled directions only"
                          if verdict else "sampled sufficiency check failed")


# ---------------------------------------------------------------------------
# discrete-level cross check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteKKTReport:
    """Residuals of the transcribed program's own first-order conditions."""

    grad_inf_scaled: float
    min_multiplier: float
    comp_max: float
    feas_max: float

    def to_dict(self) -> dict:
        return {
            "grad_inf_scaled": self.grad_inf_scaled,
            "min_multiplier": self.min_multiplier,
            "comp_max": self.comp_max,
            "feas_max": self.feas_max,
        }


def check_discrete_vop_kkt(problem: Problem, grid: Grid, u: Array, weights: Array,
                           eta_h: Array, eta_g: Array) -> DiscreteKKTReport:
    """First-order residuals of the transcribed program at (u, multipliers).

    ``weights`` are the scalarization weights of the objective;
    ``eta_h`` and ``eta_g`` the multipliers of the stacked endpoint and
    per-node mixed constraint rows.  The Lagrangian gradient norm is
    scaled by the grid step, so it is comparable to the continuous
    stationarity residual; multiplying ``eta_g`` rows by the same step
    estimates the continuous density.
    """
    u = np.asarray(u, dtype=float)
    weights = np.asarray(weights, dtype=float)
    eta_h = np.asarray(eta_h, dtype=float)
    eta_g = np.asarray(eta_g, dtype=float)
    grad = lagrangian_gradient(problem, grid, u, weights, eta_h, eta_g)
    _, _, _, g_vals, h_vals = forward_pass(problem, grid, u)
    comp = 0.0
    if h_vals.size:
        comp = float(np.max(np.abs(eta_h * h_vals)))
    if g_vals.size:
        comp = max(comp, float(np.max(np.abs(eta_g * g_vals))))
    feas = max(0.0, float(np.max(h_vals)) if h_vals.size else 0.0,
               float(np.max(g_vals)) if g_vals.size else 0.0)
    min_mult = min(float(np.min(eta_h)) if eta_h.size else 0.0,
                   float(np.min(eta_g)) if eta_g.size else 0.0)
    return DiscreteKKTReport(
        grad_inf_scaled=float(np.max(np.abs(grad))) / grid.dt,
        min_multiplier=min_mult,
        comp_max=comp,
        feas_max=feas,
    )
