"""Scalarized solves and the Pareto-front sweep driver.

The scalarized problem min w . J(u) subject to the endpoint and mixed
inequality rows is solved by an augmented-Lagrangian outer loop
(multiplier updates mu <- max(0, mu + rho c), penalty doubling) around
a limited-memory quasi-Newton descent with Armijo backtracking.  Mixed
rows are step-weighted inside the penalty so the subproblem's
conditioning is grid independent.

Two weight normalizations coexist deliberately: solves take simplex
weights (sum one), first-order verification takes unit-Euclidean
weights; :func:`pareto_sweep` converts explicitly between the two.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationError
from .kkt import (KKTReport, KKTTolerances, _assemble_stage_data,
                  reconstruct_multipliers, verify_kkt)
from .model import Grid, MultiplierSet, Problem, Trajectory
from .shooting import backward_gradient, forward_pass, objective_gradient, objective_value, terminal_seed

Array = np.ndarray


@dataclass(frozen=True)
class SolveOptions:
    """Augmented-Lagrangian solver settings.

    ``grad_tol`` bounds the grid-scaled sup norm of the Lagrangian
    gradient (comparable to the continuous stationarity residual);
    ``feas_tol`` bounds the worst constraint violation.
    """

    grad_tol: float = 1e-6
    feas_tol: float = 1e-7
    max_outer: int = 50
    max_inner: int = 3000
    armijo_c: float = 1e-4
    rho0: float = 1000.0
    rho_growth: float = 2.0
    inner_tol0: float = 1e-3
    inner_shrink: float = 0.1


@dataclass(frozen=True)
class SolveResult:
    traj: Trajectory
    mult_h: Array                # (n,) discrete endpoint multipliers
    mult_g: Array                # (N, r) discrete mixed multipliers
    converged: bool
    objective: float
    grad_inf_scaled: float
    feas_max: float
    outer_iters: int
    inner_iters: int
    message: str


def _al_value(problem: Problem, grid: Grid, u: Array, lam: Array,
              mu_h: Array, mu_g: Array, rho: float):
    """Augmented Lagrangian value plus the forward data needed for its gradient.

    Mixed rows are weighted by the grid step inside the penalty so that
    the subproblem's conditioning does not degrade with refinement;
    ``mu_g`` accordingly lives on the density scale (multiplier per
    unit time).
    """
    x, cost, stages, g_vals, h_vals = forward_pass(problem, grid, u, need_stages=True)
    ell = np.asarray(problem.terminal_cost.value(x[-1]), dtype=float)
    val = float(lam @ (cost + ell))
    w_h = np.maximum(0.0, mu_h + rho * h_vals)
    w_g = np.maximum(0.0, mu_g + rho * grid.dt * g_vals)
    val += float(np.sum(w_h * w_h - mu_h * mu_h)) / (2.0 * rho)
    val += float(np.sum(w_g * w_g - mu_g * mu_g)) / (2.0 * rho)
    return val, (x, stages, g_vals, h_vals, w_h, w_g)


def _al_gradient(problem: Problem, grid: Grid, u: Array, lam: Array, aux) -> Array:
    """Gradient of the augmented Lagrangian from cached forward data."""
    x, stages, _, _, w_h, w_g = aux
    seed = terminal_seed(problem, x[-1], lam, w_h)
    return backward_gradient(problem, grid, u, x, stages, lam, seed, grid.dt * w_g)


def _lbfgs_direction(g: Array, s_hist: list, y_hist: list) -> Array:
    """Two-loop recursion; falls back to steepest descent with no history."""
    q = g.ravel().copy()
    if not s_hist:
        return -q
    alphas = []
    rhos = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / float(y @ s)
        a = rho * float(s @ q)
        q -= a * y
        alphas.append(a)
        rhos.append(rho)
    s_last, y_last = s_hist[-1], y_hist[-1]
    q *= float(s_last @ y_last) / float(y_last @ y_last)
    for (s, y), a, rho in zip(zip(s_hist, y_hist), reversed(alphas), reversed(rhos)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return -q


def _inner_descent(value_fn, grad_fn, u0: Array, tol_scaled: float, dt: float,
                   max_iter: int, armijo_c: float, memory: int = 10):
    """L-BFGS descent with Armijo backtracking on the step length.

    The Armijo test carries a roundoff allowance: near the minimum the
    true decrease falls below the resolution of the objective, and the
    allowance lets the iteration keep moving there.  The best iterate
    by gradient norm is tracked and returned, and the loop stops after
    a long stretch without gradient progress.
    """
    u = u0.copy()
    f, aux = value_fn(u)
    g = grad_fn(u, aux)
    gmax = float(np.max(np.abs(g))) if g.size else 0.0
    best = (gmax, u.copy(), f, g)
    s_hist: list = []
    y_hist: list = []
    iters = 0
    stall = 0
    while iters < max_iter:
        if gmax / dt <= tol_scaled:
            break
        d = _lbfgs_direction(g, s_hist, y_hist).reshape(u.shape)
        slope = float(g.ravel() @ d.ravel())
        if slope >= 0.0:
            s_hist.clear()
            y_hist.clear()
            d = -g
            slope = -float(g.ravel() @ g.ravel())
        noise = 1e-13 * (1.0 + abs(f))
        step = 1.0
        accepted = False
        for _ in range(60):
            try:
                f_new, aux_new = value_fn(u + step * d)
            except IntegrationError:
                f_new = np.inf
            if f_new <= f + armijo_c * step * slope + noise:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        u_new = u + step * d
        g_new = grad_fn(u_new, aux_new)
        s = (u_new - u).ravel()
        y = (g_new - g).ravel()
        if float(s @ y) > 1e-300:
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
        u, f, g = u_new, f_new, g_new
        gmax = float(np.max(np.abs(g))) if g.size else 0.0
        iters += 1
        if gmax < 0.999 * best[0]:
            best = (gmax, u.copy(), f, g)
            stall = 0
        else:
            stall += 1
            if stall > 50:
                break
    if best[0] < gmax:
        _, u, f, g = best
    return u, f, g, iters


def solve_scalarized(problem: Problem, lam: Array, u_init: Array | None,
                     grid: Grid, opts: SolveOptions | None = None,
                     mu_h_init: Array | None = None,
                     mu_g_init: Array | None = None) -> SolveResult:
    """Solve min lam . J(u) s.t. h(x(1)) <= 0, g <= 0 at grid nodes.

    ``lam`` must be simplex weights (nonnegative, summing to one).
    Optional multiplier warm starts (``mu_h_init`` as endpoint
    multipliers, ``mu_g_init`` as a density, i.e. per-row multipliers
    divided by the grid step) speed up sweeps over nearby weight
    vectors.  Returns the best iterate with ``converged=False`` when
    the outer loop hits its iteration cap without meeting the
    tolerances.
    """
    opts = opts or SolveOptions()
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < -1e-12) or abs(float(np.sum(lam)) - 1.0) > 1e-9:
        raise ValueError("scalarization weights must be simplex weights (>=0, sum 1)")
    N = grid.n_intervals
    u = np.zeros((N, problem.m)) if u_init is None else np.asarray(u_init, dtype=float).copy()
    if u.shape != (N, problem.m):
        raise ValueError(f"u_init must have shape ({N}, {problem.m})")
    val0 = objective_value(problem, grid, u, lam)
    if not np.isfinite(val0):
        raise IntegrationError("objective non-finite at the initial control")

    mu_h = np.zeros(problem.n) if mu_h_init is None \
        else np.maximum(0.0, np.asarray(mu_h_init, dtype=float).copy())
    mu_g = np.zeros((N, problem.r)) if mu_g_init is None \
        else np.maximum(0.0, np.asarray(mu_g_init, dtype=float).copy())
    rho = opts.rho0
    feas_prev = np.inf
    inner_total = 0
    best = None
    feas_known = np.inf
    for outer in range(1, opts.max_outer + 1):
        inner_tol = max(opts.grad_tol, opts.inner_tol0 * opts.inner_shrink ** (outer - 1))
        if feas_known <= opts.feas_tol:
            inner_tol = opts.grad_tol
        value_fn = lambda uu: _al_value(problem, grid, uu, lam, mu_h, mu_g, rho)
        grad_fn = lambda uu, aux: _al_gradient(problem, grid, uu, lam, aux)
        u, _, g, iters = _inner_descent(value_fn, grad_fn, u, inner_tol,
                                        grid.dt, opts.max_inner, opts.armijo_c)
        inner_total += iters
        x, cost, _, g_vals, h_vals = forward_pass(problem, grid, u)
        feas = max(0.0, float(np.max(h_vals)) if h_vals.size else 0.0,
                   float(np.max(g_vals)) if g_vals.size else 0.0)
        feas_known = feas
        mu_h = np.maximum(0.0, mu_h + rho * h_vals)
        mu_g = np.maximum(0.0, mu_g + rho * grid.dt * g_vals)
        # at the inner optimum the AL gradient equals the Lagrangian
        # gradient at the updated multipliers
        grad_scaled = float(np.max(np.abs(g))) / grid.dt if g.size else 0.0
        obj = float(lam @ (cost + np.asarray(problem.terminal_cost.value(x[-1]), dtype=float)))
        state = (u.copy(), mu_h.copy(), mu_g.copy(), obj, grad_scaled, feas, outer)
        if best is None or (feas, grad_scaled) < (best[5], best[4]):
            best = state
        if feas <= opts.feas_tol and grad_scaled <= opts.grad_tol:
            traj = Trajectory(grid=grid, x=x, u=u.copy())
            return SolveResult(traj=traj, mult_h=mu_h, mult_g=grid.dt * mu_g, converged=True,
                               objective=obj, grad_inf_scaled=grad_scaled, feas_max=feas,
                               outer_iters=outer, inner_iters=inner_total,
                               message="converged")
        if feas > 0.1 * feas_prev and feas > opts.feas_tol:
            rho *= opts.rho_growth
        feas_prev = max(feas, 1e-300)
    u, mu_h, mu_g, obj, grad_scaled, feas, outer = best
    x, _, _, _, _ = forward_pass(problem, grid, u)
    traj = Trajectory(grid=grid, x=x, u=u)
    return SolveResult(traj=traj, mult_h=mu_h, mult_g=grid.dt * mu_g, converged=False,
                       objective=obj, grad_inf_scaled=grad_scaled, feas_max=feas,
                       outer_iters=opts.max_outer, inner_iters=inner_total,
                       message=f"not converged: feasibility {feas:.3e}, "
                               f"scaled gradient {grad_scaled:.3e}")


# ---------------------------------------------------------------------------
# transcription facade
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TranscribedNLP:
    """Flattened-control view of the scalarized problem.

    Decision vector: the stacked controls (N*m reals).  Objective and
    constraint evaluations run the same RK4 recurrence as
    :func:`paroc.integrate.integrate_state`; gradients are exact
    adjoint-mode derivatives of the recurrence.
    """

    problem: Problem
    grid: Grid
    lam: Array

    def _reshape(self, z: Array) -> Array:
        return np.asarray(z, dtype=float).reshape(self.grid.n_intervals, self.problem.m)

    def objective(self, z: Array) -> float:
        return objective_value(self.problem, self.grid, self._reshape(z), self.lam)

    def gradient(self, z: Array) -> Array:
        _, grad = objective_gradient(self.problem, self.grid, self._reshape(z), self.lam)
        return grad.ravel()

    def constraints(self, z: Array) -> tuple[Array, Array]:
        """(endpoint rows h(x_N), mixed rows g at interval left nodes)."""
        _, _, _, g_vals, h_vals = forward_pass(self.problem, self.grid, self._reshape(z))
        return h_vals, g_vals


# ---------------------------------------------------------------------------
# Pareto sweep
# ---------------------------------------------------------------------------

def _van_der_corput(i: int, base: int) -> float:
    q, denom = 0.0, 1.0
    while i:
        denom *= base
        i, rem = divmod(i, base)
        q += rem / denom
    return q


_HALTON_BASES = (2, 3, 5, 7, 11, 13, 17)


def simplex_weights(k: int, count: int) -> Array:
    """Deterministic weight vectors on the (k-1)-simplex, shape (<=count, k).

    k = 1 collapses to the simplex's single point regardless of count;
    k = 2 sweeps the segment uniformly; k >= 3 uses a Halton
    low-discrepancy sequence mapped to the simplex through sorted-gap
    coordinates, anchored at the uniform weight.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if k == 1:
        return np.ones((1, 1))
    if k == 2:
        if count == 1:
            return np.array([[0.5, 0.5]])
        s = np.linspace(0.0, 1.0, count)
        return np.column_stack([1.0 - s, s])
    out = np.empty((count, k))
    out[0] = 1.0 / k
    for j in range(1, count):
        pt = np.array([_van_der_corput(j, _HALTON_BASES[d]) for d in range(k - 1)])
        knots = np.concatenate([[0.0], np.sort(pt), [1.0]])
        out[j] = np.diff(knots)
    return out


def dominance_filter(values: Array, tol: float = 1e-10) -> list[int]:
    """Indices of points not dominated by any other point (stable order).

    Point b dominates a when b <= a componentwise and b < a in some
    component, both up to ``tol``.  Exact duplicates survive.
    """
    values = np.asarray(values, dtype=float)
    kept = []
    for a in range(values.shape[0]):
        dominated = False
        for b in range(values.shape[0]):
            if b == a:
                continue
            if np.all(values[b] <= values[a] + tol) and np.any(values[b] < values[a] - tol):
                dominated = True
                break
        if not dominated:
            kept.append(a)
    return kept


@dataclass(frozen=True)
class ParetoPoint:
    weights: Array               # simplex weights used for the solve
    J: Array                     # objective values
    traj: Trajectory
    mult: MultiplierSet
    kkt: KKTReport

    @property
    def kkt_pass(self) -> bool:
        return self.kkt.passed


@dataclass(frozen=True)
class SweepResult:
    points: list[ParetoPoint]
    failures: list[dict] = field(default_factory=list)
    attempted: int = 0

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def _solve_and_verify(problem: Problem, w: Array, u0: Array | None, grid: Grid,
                      opts: SolveOptions, tol: KKTTolerances,
                      mu_h0: Array | None = None, mu_g0: Array | None = None):
    res = solve_scalarized(problem, w, u0, grid, opts,
                           mu_h_init=mu_h0, mu_g_init=mu_g0)
    if not res.converged:
        return res, None, None, None
    x, cost, _, _, _ = forward_pass(problem, grid, res.traj.u)
    J = cost + np.asarray(problem.terminal_cost.value(x[-1]), dtype=float)
    lam_e = w / float(np.linalg.norm(w))
    data = _assemble_stage_data(problem, res.traj)
    mult = reconstruct_multipliers(problem, res.traj, lam_e, tol, _data=data)
    report = verify_kkt(problem, res.traj, lam_e, tol, mult=mult, _data=data)
    return res, J, mult, report


def _chain_order(weights: Array) -> list[int]:
    """Greedy nearest-neighbor ordering of the weight vectors.

    Warm starts work best when consecutive solves are close in weight
    space; low-discrepancy sequences deliberately jump around, so the
    sweep visits them along a short deterministic chain instead.
    """
    count = weights.shape[0]
    remaining = list(range(1, count))
    order = [0]
    while remaining:
        last = weights[order[-1]]
        dists = [float(np.linalg.norm(weights[j] - last)) for j in remaining]
        nxt = remaining.pop(int(np.argmin(dists)))
        order.append(nxt)
    return order


def pareto_sweep(problem: Problem, weight_count: int, grid: Grid,
                 opts: SolveOptions | None = None,
                 tol: KKTTolerances | None = None,
                 jobs: int = 1) -> SweepResult:
    """Weighted-sum sweep over the objective simplex with dominance filtering.

    Sequential mode warm-starts each solve from the previous solution,
    visiting the weights along a nearest-neighbor chain; ``jobs > 1``
    solves the weights concurrently from cold starts instead (results
    are merged deterministically by weight index).  Solver failures are
    recorded and excluded, never fatal.  Each converged point is
    first-order verified with the weights re-normalized to unit
    Euclidean norm.
    """
    opts = opts or SolveOptions()
    tol = tol or KKTTolerances()
    weights = simplex_weights(problem.k, weight_count)
    records: list[tuple[int, object]] = []
    if jobs > 1:
        def run(idx_w):
            idx, w = idx_w
            try:
                return idx, _solve_and_verify(problem, w, None, grid, opts, tol)
            except Exception as exc:  # recorded, not fatal
                return idx, exc
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run, enumerate(weights)))
        records.sort(key=lambda kv: kv[0])
    else:
        u0 = None
        mu_h0 = None
        mu_g0 = None
        for idx in _chain_order(weights):
            w = weights[idx]
            try:
                out = _solve_and_verify(problem, w, u0, grid, opts, tol, mu_h0, mu_g0)
                if out[0].converged:
                    u0 = out[0].traj.u
                    mu_h0 = out[0].mult_h
                    mu_g0 = out[0].mult_g / grid.dt
                records.append((idx, out))
            except Exception as exc:
                records.append((idx, exc))
        records.sort(key=lambda kv: kv[0])

    candidates: list[ParetoPoint] = []
    failures: list[dict] = []
    for idx, out in records:
        w = weights[idx]
        if isinstance(out, Exception):
            failures.append({"index": idx, "weights": w.tolist(), "message": str(out)})
            continue
        res, J, mult, report = out
        if not res.converged:
            failures.append({"index": idx, "weights": w.tolist(), "message": res.message})
            continue
        candidates.append(ParetoPoint(weights=w, J=J, traj=res.traj, mult=mult, kkt=report))
    kept = dominance_filter(np.array([c.J for c in candidates])) if candidates else []
    return SweepResult(points=[candidates[i] for i in kept], failures=failures,
                       attempted=len(weights))
