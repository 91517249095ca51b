"""Runnable constraint-qualification checks along a candidate trajectory.

Five checks are implemented, mirroring the regularity assumptions that
guarantee normal multipliers:

* endpoint regularity: det h'(x(1)) != 0;
* mixed-constraint regularity: |det R[t]| >= gamma with R = g_u g_u^T;
* rank structure of g_u[t] and the nullspace basis S[t];
* controllability of the reduced linear pair (A[t], B[t]) certified by
  a full-rank Gramian;
* existence of a strictly feasible linearized direction (the fallback
  route when g_u[t] has full row rank equal to m).

Exactly one of the two routes (rank+controllability, or strict
feasibility) is decisive for a given problem; the report records which.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularMatrixError, StructureError
from .integrate import controllability_gramian, state_interpolant
from .linearize import linearize_along
from .lp import LPStatus, simplex_solve
from .model import Grid, Problem, Trajectory

Array = np.ndarray

DEFAULT_GAMMA_MIN = 1e-8
DEFAULT_RANK_TOL = 1e-10
DEFAULT_DET_TOL = 1e-8
DEFAULT_U_BOX = 1e3
DEFAULT_LP_INTERVALS = 50


@dataclass(frozen=True)
class CQReport:
    """Verdicts and margins for every constraint qualification."""

    h2_det: float
    h2_ok: bool
    h3_gamma: float
    h3_ok: bool
    h4_rank: list[int]
    h4_mstar: int | None
    h4_applicable: bool
    h5_min_eig: float | None
    h5_ok: bool | None
    h4p_slack: float | None
    h4p_ok: bool | None
    decisive_route: str
    notes: list[str] = field(default_factory=list)

    @property
    def route_ok(self) -> bool:
        if self.decisive_route == "h4h5":
            return bool(self.h5_ok)
        return bool(self.h4p_ok)

    @property
    def overall_ok(self) -> bool:
        return self.h2_ok and self.h3_ok and self.route_ok

    def to_dict(self) -> dict:
        return {
            "h2_det": self.h2_det, "h2_ok": self.h2_ok,
            "h3_gamma": self.h3_gamma, "h3_ok": self.h3_ok,
            "h4_rank": self.h4_rank, "h4_mstar": self.h4_mstar,
            "h4_applicable": self.h4_applicable,
            "h5_min_eig": self.h5_min_eig, "h5_ok": self.h5_ok,
            "h4p_slack": self.h4p_slack, "h4p_ok": self.h4p_ok,
            "decisive_route": self.decisive_route,
            "route_ok": self.route_ok, "overall_ok": self.overall_ok,
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------------------
# pointwise structure: R, nullspace, reduced pair (A, B)
# ---------------------------------------------------------------------------

def build_R(problem: Problem, traj: Trajectory) -> Array:
    """R[t_i] = g_u[t_i] g_u[t_i]^T at the left node of each interval, (N, r, r)."""
    N = traj.grid.n_intervals
    h = traj.grid.dt
    out = np.empty((N, problem.r, problem.r))
    for i in range(N):
        gu = np.asarray(problem.mixed_constraint.jac_u(i * h, traj.x[i], traj.u[i]), dtype=float)
        out[i] = gu @ gu.T
    return out


def check_h2(problem: Problem, traj: Trajectory, det_tol: float = DEFAULT_DET_TOL) -> tuple[float, bool]:
    """Determinant of the endpoint-constraint Jacobian at x(1)."""
    det = float(np.linalg.det(np.asarray(problem.endpoint_constraint.jac(traj.x[-1]), dtype=float)))
    return det, abs(det) >= det_tol


def check_h3(problem: Problem, traj: Trajectory,
             gamma_min: float = DEFAULT_GAMMA_MIN) -> tuple[float, bool]:
    """Worst |det R[t_i]| over the grid and its verdict against gamma_min."""
    R = build_R(problem, traj)
    gamma = float(np.min(np.abs(np.linalg.det(R))))
    return gamma, gamma >= gamma_min


def nullspace_basis(problem: Problem, traj: Trajectory,
                    svd_tol: float = DEFAULT_RANK_TOL) -> tuple[int, Array]:
    """Orthonormal kernel basis S[t_i] of g_u[t_i] per interval, (N, m, m*).

    Columns are matched to the previous node's basis (orthogonal
    Procrustes alignment) so that S(t) stays continuous in t.  Raises
    :class:`StructureError` if the kernel dimension varies over the
    grid.
    """
    N = traj.grid.n_intervals
    h = traj.grid.dt
    m = problem.m
    bases = []
    mstars = []
    for i in range(N):
        gu = np.asarray(problem.mixed_constraint.jac_u(i * h, traj.x[i], traj.u[i]), dtype=float)
        _, sv, vt = np.linalg.svd(gu)
        smax = sv[0] if sv.size else 0.0
        rank = int(np.sum(sv > svd_tol * max(smax, 1e-300)))
        mstars.append(m - rank)
        bases.append(vt[rank:].T)  # (m, m - rank), orthonormal columns
    if len(set(mstars)) > 1:
        raise StructureError(
            f"kernel dimension of g_u varies over the grid: {sorted(set(mstars))}")
    mstar = mstars[0]
    S = np.empty((N, m, mstar))
    prev = None
    for i, base in enumerate(bases):
        if prev is not None and mstar > 0:
            uu, _, vv = np.linalg.svd(base.T @ prev)
            base = base @ (uu @ vv)
        S[i] = base
        prev = base
    return mstar, S


def rank_profile(problem: Problem, traj: Trajectory,
                 svd_tol: float = DEFAULT_RANK_TOL) -> list[int]:
    """rank g_u[t_i] per interval."""
    N = traj.grid.n_intervals
    h = traj.grid.dt
    ranks = []
    for i in range(N):
        gu = np.asarray(problem.mixed_constraint.jac_u(i * h, traj.x[i], traj.u[i]), dtype=float)
        sv = np.linalg.svd(gu, compute_uv=False)
        smax = sv[0] if sv.size else 0.0
        ranks.append(int(np.sum(sv > svd_tol * max(smax, 1e-300))))
    return ranks


def _reduced_A(problem: Problem, t: float, x: Array, u: Array) -> Array:
    """A[t] = phi_x - phi_u g_u^T R^{-1} g_x at one point."""
    phi_x = np.asarray(problem.dynamics.jac_x(t, x, u), dtype=float)
    phi_u = np.asarray(problem.dynamics.jac_u(t, x, u), dtype=float)
    g_x = np.asarray(problem.mixed_constraint.jac_x(t, x, u), dtype=float)
    g_u = np.asarray(problem.mixed_constraint.jac_u(t, x, u), dtype=float)
    R = g_u @ g_u.T
    try:
        correction = phi_u @ g_u.T @ np.linalg.solve(R, g_x)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"R[t] singular at t={t}") from exc
    return phi_x - correction


def build_AB(problem: Problem, traj: Trajectory) -> tuple[Array, Array]:
    """Reduced pair A[t_i] (N, n, n) and B[t_i] = phi_u S (N, n, m*) at left nodes."""
    N = traj.grid.n_intervals
    h = traj.grid.dt
    mstar, S = nullspace_basis(problem, traj)
    A = np.empty((N, problem.n, problem.n))
    B = np.empty((N, problem.n, mstar))
    for i in range(N):
        t, x, u = i * h, traj.x[i], traj.u[i]
        A[i] = _reduced_A(problem, t, x, u)
        B[i] = np.asarray(problem.dynamics.jac_u(t, x, u), dtype=float) @ S[i]
    return A, B


def linearized_evaluators(problem: Problem, traj: Trajectory):
    """Smooth-in-t callables for A(t) and B(t) along the trajectory.

    States between nodes come from the Hermite interpolant; the kernel
    basis is taken from the containing interval, so B(t) is piecewise
    continuous while A(t) inherits the smoothness of the data.
    """
    mstar, S = nullspace_basis(problem, traj)
    interp = state_interpolant(problem, traj)
    N = traj.grid.n_intervals
    dt = traj.grid.dt

    def interval_of(t: float) -> int:
        return min(max(int(t / dt + 1e-9), 0), N - 1)

    def A_eval(t: float) -> Array:
        i = interval_of(t)
        return _reduced_A(problem, t, interp(t), traj.u[i])

    def B_eval(t: float) -> Array:
        i = interval_of(t)
        phi_u = np.asarray(problem.dynamics.jac_u(t, interp(t), traj.u[i]), dtype=float)
        return phi_u @ S[i]

    return A_eval, B_eval


def check_h5(problem: Problem, traj: Trajectory,
             rank_tol: float = DEFAULT_RANK_TOL) -> tuple[float, bool]:
    """Gramian controllability certificate for the reduced pair."""
    A_eval, B_eval = linearized_evaluators(problem, traj)
    gram = controllability_gramian(A_eval, B_eval, traj.grid, rank_tol=rank_tol)
    return gram.min_eig, gram.full_rank


# ---------------------------------------------------------------------------
# strict feasibility route
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class H4PrimeCertificate:
    """Result of the strict-feasibility linear program.

    ``u_hat`` is piecewise constant on the search grid; ``x_hat`` is its
    linearized state response re-simulated at double resolution, at
    which the reported ``resim_margin`` (worst slack of the endpoint
    and mixed rows) is measured.
    """

    slack: float
    ok: bool
    u_hat: Array | None          # (N_lp, m)
    x_hat: Array | None          # (2N+1, n)
    resim_margin: float
    lp_status: LPStatus
    search_intervals: int


def _search_intervals(N: int, cap: int) -> int:
    if N <= cap:
        return N
    for d in range(cap, 0, -1):
        if N % d == 0:
            return d
    return N


def check_h4prime(problem: Problem, traj: Trajectory,
                  u_box: float = DEFAULT_U_BOX,
                  lp_max_intervals: int = DEFAULT_LP_INTERVALS) -> H4PrimeCertificate:
    """Search for a direction making all constraints strictly feasible.

    Maximizes the uniform margin eps over directions u_hat (piecewise
    constant, |u_hat| <= u_box) with x_hat the linearized state
    response, subject to

        h_i(x(1)) + h_i'(x(1)) x_hat(1) <= -eps   for all i,
        g_j[t] + g_x[t] x_hat + g_u[t] u_hat <= -eps  at grid nodes.

    The LP runs on a coarsened control grid for tractability; the
    maximizing direction is then re-simulated at double the trajectory
    resolution and accepted only if it retains at least half the LP
    margin there.
    """
    N = traj.grid.n_intervals
    n, m, r = problem.n, problem.m, problem.r
    Nc = _search_intervals(N, lp_max_intervals)
    cgrid = Grid(Nc)
    lin = linearize_along(problem, traj, cgrid)
    hc = cgrid.dt

    # sensitivity of x_hat at coarse nodes to the coarse controls
    nvar = Nc * m
    sens = np.zeros((Nc + 1, n, nvar))
    for i in range(Nc):
        sens[i + 1] = lin.T[i] @ sens[i]
        sens[i + 1][:, i * m:(i + 1) * m] += lin.U[i]

    interp = state_interpolant(problem, traj)
    tN = traj.grid.n_intervals

    def control_of(t: float) -> Array:
        j = min(max(int(t / traj.grid.dt + 1e-9), 0), tN - 1)
        return traj.u[j]

    x_end = traj.x[-1]
    h_val = np.asarray(problem.endpoint_constraint.value(x_end), dtype=float)
    h_jac = np.asarray(problem.endpoint_constraint.jac(x_end), dtype=float)

    rows = []
    rhs = []
    # endpoint rows: h + h' x_hat(1) + eps <= 0
    for i in range(n):
        rows.append(np.concatenate([h_jac[i] @ sens[Nc], [1.0, -1.0]]))
        rhs.append(-h_val[i])
    # mixed rows at coarse left nodes
    for i in range(Nc):
        t = i * hc
        x_t = interp(t)
        u_t = control_of(t)
        g_val = np.asarray(problem.mixed_constraint.value(t, x_t, u_t), dtype=float)
        g_x = np.asarray(problem.mixed_constraint.jac_x(t, x_t, u_t), dtype=float)
        g_u = np.asarray(problem.mixed_constraint.jac_u(t, x_t, u_t), dtype=float)
        block = g_x @ sens[i]
        block[:, i * m:(i + 1) * m] += g_u
        for j in range(r):
            rows.append(np.concatenate([block[j], [1.0, -1.0]]))
            rhs.append(-g_val[j])
    A_dir = np.array(rows)          # rows over (u_hat, eps+, eps-)
    b_dir = np.array(rhs)

    # shift u_hat to v = u_hat + u_box >= 0 and add the box v <= 2 u_box
    A_lp = A_dir.copy()
    b_lp = b_dir + A_dir[:, :nvar] @ (u_box * np.ones(nvar))
    box = np.zeros((nvar, nvar + 2))
    box[:, :nvar] = np.eye(nvar)
    A_lp = np.vstack([A_lp, box])
    b_lp = np.concatenate([b_lp, 2.0 * u_box * np.ones(nvar)])
    c = np.zeros(nvar + 2)
    c[nvar] = 1.0
    c[nvar + 1] = -1.0

    res = simplex_solve(c, A_lp, b_lp)
    if res.status is not LPStatus.OPTIMAL:
        return H4PrimeCertificate(slack=0.0, ok=False, u_hat=None, x_hat=None,
                                  resim_margin=-np.inf, lp_status=res.status,
                                  search_intervals=Nc)
    u_hat = (res.x[:nvar] - u_box).reshape(Nc, m)
    eps = float(res.x[nvar] - res.x[nvar + 1])

    # re-simulate at double resolution and re-measure every margin
    fine = Grid(2 * N)
    margin = _direction_margin(problem, traj, u_hat_coarse=u_hat, fine=fine)
    x_hat = margin.pop("x_hat")
    resim = margin["margin"]
    ok = eps > 0.0 and resim >= 0.5 * eps
    return H4PrimeCertificate(slack=eps, ok=ok, u_hat=u_hat, x_hat=x_hat,
                              resim_margin=resim, lp_status=res.status,
                              search_intervals=Nc)


def _direction_margin(problem: Problem, traj: Trajectory, *,
                      u_hat_coarse: Array | None = None,
                      u_hat_eval=None, fine: Grid | None = None) -> dict:
    """Simulate a linearized direction on a refined grid and measure slacks.

    The direction may be given either piecewise constant on a coarse
    grid (``u_hat_coarse``) or as a callable of time (``u_hat_eval``).
    Returns the worst margin (positive = strictly feasible) of the
    endpoint and mixed rows plus the per-family margins.
    """
    N = traj.grid.n_intervals
    fine = fine or Grid(2 * N)
    Nf = fine.n_intervals
    hf = fine.dt
    lin = linearize_along(problem, traj, fine)
    interp = state_interpolant(problem, traj)

    if u_hat_eval is None:
        Nc = u_hat_coarse.shape[0]

        def u_hat_eval(t: float) -> Array:
            return u_hat_coarse[min(max(int(t * Nc + 1e-9), 0), Nc - 1)]

    uf = np.array([u_hat_eval(i * hf) for i in range(Nf)])
    x_hat = lin.propagate(uf)

    x_end = traj.x[-1]
    h_val = np.asarray(problem.endpoint_constraint.value(x_end), dtype=float)
    h_jac = np.asarray(problem.endpoint_constraint.jac(x_end), dtype=float)
    endpoint_lhs = h_val + h_jac @ x_hat[-1]

    worst_mixed = -np.inf
    tN = traj.grid.n_intervals
    for i in range(Nf):
        t = i * hf
        x_t = interp(t)
        j = min(max(int(t / traj.grid.dt + 1e-9), 0), tN - 1)
        u_t = traj.u[j]
        g_val = np.asarray(problem.mixed_constraint.value(t, x_t, u_t), dtype=float)
        g_x = np.asarray(problem.mixed_constraint.jac_x(t, x_t, u_t), dtype=float)
        g_u = np.asarray(problem.mixed_constraint.jac_u(t, x_t, u_t), dtype=float)
        lhs = g_val + g_x @ x_hat[i] + g_u @ uf[i]
        worst_mixed = max(worst_mixed, float(np.max(lhs)))
    endpoint_worst = float(np.max(endpoint_lhs))
    return {
        "margin": -max(endpoint_worst, worst_mixed),
        "endpoint_margin": -endpoint_worst,
        "mixed_margin": -worst_mixed,
        "x_hat": x_hat,
    }


def direction_margins(problem: Problem, traj: Trajectory, u_hat_eval) -> dict:
    """Margins of an explicit time-callable direction (re-simulated at 2N)."""
    out = _direction_margin(problem, traj, u_hat_eval=u_hat_eval)
    out.pop("x_hat")
    return out


# ---------------------------------------------------------------------------
# combined report
# ---------------------------------------------------------------------------

def evaluate_cqs(problem: Problem, traj: Trajectory, *,
                 gamma_min: float = DEFAULT_GAMMA_MIN,
                 det_tol: float = DEFAULT_DET_TOL,
                 rank_tol: float = DEFAULT_RANK_TOL,
                 u_box: float = DEFAULT_U_BOX,
                 lp_max_intervals: int = DEFAULT_LP_INTERVALS) -> CQReport:
    """Run every constraint-qualification check and assemble the report."""
    notes = ["R[t] computed pointwise as g_u g_u^T from the problem's g_u evaluator"]
    notes.extend(problem.notes)
    h2_det, h2_ok = check_h2(problem, traj, det_tol)
    h3_gamma, h3_ok = check_h3(problem, traj, gamma_min)
    ranks = rank_profile(problem, traj)
    mstar: int | None = None
    applicable = all(rk < problem.m for rk in ranks)
    if applicable:
        try:
            mstar, _ = nullspace_basis(problem, traj)
        except StructureError as exc:
            notes.append(f"rank route unavailable: {exc}")
            applicable = False
    if applicable and mstar == 0:
        applicable = False

    if applicable:
        try:
            h5_min_eig, h5_ok = check_h5(problem, traj, rank_tol)
        except SingularMatrixError as exc:
            # the reduced pair needs an invertible Gram matrix; without
            # it the controllability certificate cannot be formed
            notes.append(f"controllability check unavailable: {exc}")
            h5_min_eig, h5_ok = None, False
        return CQReport(h2_det=h2_det, h2_ok=h2_ok, h3_gamma=h3_gamma, h3_ok=h3_ok,
                        h4_rank=ranks, h4_mstar=mstar, h4_applicable=True,
                        h5_min_eig=h5_min_eig, h5_ok=h5_ok,
                        h4p_slack=None, h4p_ok=None,
                        decisive_route="h4h5", notes=notes)
    cert = check_h4prime(problem, traj, u_box=u_box, lp_max_intervals=lp_max_intervals)
    return CQReport(h2_det=h2_det, h2_ok=h2_ok, h3_gamma=h3_gamma, h3_ok=h3_ok,
                    h4_rank=ranks, h4_mstar=mstar, h4_applicable=False,
                    h5_min_eig=None, h5_ok=None,
                    h4p_slack=cert.slack, h4p_ok=cert.ok,
                    decisive_route="h4prime", notes=notes)
