"""Core data model: problems, grids, trajectories and multiplier sets.

A :class:`Problem` bundles user-supplied analytic evaluators for the
dynamics, the vector-valued running and terminal costs, the endpoint
constraint map and the mixed state-control constraint, together with
all first and second derivatives.  Evaluators must be pure functions;
all model types are immutable after construction so they can be shared
freely across threads.

Derivatives are analytic by design; :func:`check_derivatives` validates
them against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

Array = np.ndarray
StageFn = Callable[[float, Array, Array], Array]
PointFn = Callable[[Array], Array]


@dataclass(frozen=True)
class StageMap:
    """A time-stage map psi(t, x, u) with derivatives.

    Shapes, for output dimension d, state dimension n and control
    dimension m:

    ==========  ============
    value       (d,)
    jac_x       (d, n)
    jac_u       (d, m)
    hess_xx     (d, n, n)
    hess_xu     (d, n, m)
    hess_uu     (d, m, m)
    ==========  ============

    ``hess_xu[i, a, b]`` is the mixed second derivative of component i
    with respect to x_a and u_b.
    """

    value: StageFn
    jac_x: StageFn
    jac_u: StageFn
    hess_xx: StageFn
    hess_xu: StageFn
    hess_uu: StageFn


@dataclass(frozen=True)
class EndpointMap:
    """A terminal-state map with derivatives: value (d,), jac (d, n), hess (d, n, n)."""

    value: PointFn
    jac: PointFn
    hess: PointFn


@dataclass(frozen=True)
class Problem:
    """A multiobjective optimal control problem on the time interval [0, 1].

    Minimize the k objectives

        J_i(x, u) = terminal_cost_i(x(1)) + integral_0^1 running_cost_i(t, x, u) dt

    subject to

        x(t) = x0 + integral_0^t dynamics(s, x(s), u(s)) ds,
        endpoint_constraint(x(1)) <= 0        (n components),
        mixed_constraint(t, x(t), u(t)) <= 0  (r components, a.e. t).

    The endpoint map is square (n outputs for n states); problems whose
    natural endpoint constraint has fewer rows pad the remaining rows
    with constraints that stay strictly inactive.
    """

    name: str
    n: int
    m: int
    k: int
    r: int
    x0: Array
    dynamics: StageMap
    running_cost: StageMap
    terminal_cost: EndpointMap
    endpoint_constraint: EndpointMap
    mixed_constraint: StageMap
    params: Mapping[str, float] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))
        if self.x0.shape != (self.n,):
            raise ValueError(f"x0 must have shape ({self.n},), got {self.x0.shape}")


@dataclass(frozen=True)
class Grid:
    """Uniform time grid on [0, 1] with N intervals (N+1 nodes)."""

    n_intervals: int

    def __post_init__(self):
        if self.n_intervals < 1:
            raise ValueError("grid needs at least one interval")

    @property
    def dt(self) -> float:
        return 1.0 / self.n_intervals

    @property
    def nodes(self) -> Array:
        return np.linspace(0.0, 1.0, self.n_intervals + 1)

    @property
    def midpoints(self) -> Array:
        h = self.dt
        return np.arange(self.n_intervals) * h + 0.5 * h


@dataclass(frozen=True)
class Trajectory:
    """States at grid nodes and piecewise-constant controls on intervals.

    ``u[i]`` is the control value on [t_i, t_{i+1}).
    """

    grid: Grid
    x: Array  # (N+1, n)
    u: Array  # (N, m)

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        N = self.grid.n_intervals
        if self.x.shape[0] != N + 1:
            raise ValueError("state array must have one row per node")
        if self.u.shape[0] != N:
            raise ValueError("control array must have one row per interval")


@dataclass(frozen=True)
class MultiplierSet:
    """Multipliers attached to a candidate trajectory.

    ``lam`` weights the objectives (nonnegative, Euclidean norm one for
    a normal set), ``l`` multiplies the endpoint constraint, ``p`` is
    the costate at grid nodes and ``theta`` the mixed-constraint
    density, one row per interval.
    """

    lam: Array       # (k,)
    l: Array         # (n,)
    p: Array         # (N+1, n)
    theta: Array     # (N, r)
    p_mid: Array | None = None  # (N, n) costate at interval midpoints, if available
    status: str = "ok"

    def __post_init__(self):
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=float))
        object.__setattr__(self, "l", np.asarray(self.l, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))


def _central_jac(fn: Callable[[Array], Array], z: Array, h: float) -> Array:
    """Central finite-difference Jacobian of fn at z, columns over z."""
    cols = []
    for a in range(z.size):
        zp = z.copy()
        zm = z.copy()
        zp[a] += h
        zm[a] -= h
        cols.append((np.asarray(fn(zp), dtype=float) - np.asarray(fn(zm), dtype=float)) / (2.0 * h))
    return np.stack(cols, axis=-1)


def _rel_err(fd: Array, an: Array) -> float:
    an = np.asarray(an, dtype=float)
    scale = 1.0 + float(np.max(np.abs(an))) if an.size else 1.0
    return float(np.max(np.abs(fd - an))) / scale if an.size else 0.0


@dataclass(frozen=True)
class DerivativeReport:
    """Worst relative finite-difference error per derivative block."""

    blocks: Mapping[str, float]

    @property
    def max_first_order(self) -> float:
        return max(v for k, v in self.blocks.items() if not k.startswith("hess")) if self.blocks else 0.0

    @property
    def max_second_order(self) -> float:
        seconds = [v for k, v in self.blocks.items() if k.startswith("hess")]
        return max(seconds) if seconds else 0.0


def check_derivatives(problem: Problem, t: float, x: Array, u: Array,
                      h_fd: float = 1e-5) -> DerivativeReport:
    """Compare declared Jacobians/Hessians against central differences.

    Report-only: never raises on a mismatch.  Relative errors are scaled
    by 1 + max|analytic|, so exactly-zero blocks report exactly zero.
    """
    if h_fd <= 0:
        raise ValueError("finite-difference step must be positive")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    blocks: dict[str, float] = {}

    def stage_blocks(tag: str, sm: StageMap):
        fd_x = _central_jac(lambda z: sm.value(t, z, u), x, h_fd)
        fd_u = _central_jac(lambda z: sm.value(t, x, z), u, h_fd)
        blocks[f"{tag}_x"] = _rel_err(fd_x, sm.jac_x(t, x, u))
        blocks[f"{tag}_u"] = _rel_err(fd_u, sm.jac_u(t, x, u))
        fd_xx = _central_jac(lambda z: np.asarray(sm.jac_x(t, z, u)), x, h_fd)
        fd_xu = _central_jac(lambda z: np.asarray(sm.jac_x(t, x, z)), u, h_fd)
        fd_uu = _central_jac(lambda z: np.asarray(sm.jac_u(t, x, z)), u, h_fd)
        blocks[f"hess_{tag}_xx"] = _rel_err(fd_xx, sm.hess_xx(t, x, u))
        blocks[f"hess_{tag}_xu"] = _rel_err(fd_xu, sm.hess_xu(t, x, u))
        blocks[f"hess_{tag}_uu"] = _rel_err(fd_uu, sm.hess_uu(t, x, u))

    def endpoint_blocks(tag: str, em: EndpointMap):
        fd = _central_jac(em.value, x[: problem.n], h_fd)
        blocks[f"{tag}_x"] = _rel_err(fd, em.jac(x[: problem.n]))
        fd2 = _central_jac(lambda z: np.asarray(em.jac(z)), x[: problem.n], h_fd)
        blocks[f"hess_{tag}_xx"] = _rel_err(fd2, em.hess(x[: problem.n]))

    stage_blocks("phi", problem.dynamics)
    stage_blocks("L", problem.running_cost)
    stage_blocks("g", problem.mixed_constraint)
    endpoint_blocks("ell", problem.terminal_cost)
    endpoint_blocks("h", problem.endpoint_constraint)
    return DerivativeReport(blocks)


def validate_shapes(problem: Problem, t: float = 0.5) -> None:
    """Probe every evaluator once and verify declared output shapes."""
    n, m, k, r = problem.n, problem.m, problem.k, problem.r
    x = np.asarray(problem.x0, dtype=float)
    u = np.zeros(m)
    expect = {
        "dynamics.value": (problem.dynamics.value(t, x, u), (n,)),
        "dynamics.jac_x": (problem.dynamics.jac_x(t, x, u), (n, n)),
        "dynamics.jac_u": (problem.dynamics.jac_u(t, x, u), (n, m)),
        "dynamics.hess_xx": (problem.dynamics.hess_xx(t, x, u), (n, n, n)),
        "dynamics.hess_xu": (problem.dynamics.hess_xu(t, x, u), (n, n, m)),
        "dynamics.hess_uu": (problem.dynamics.hess_uu(t, x, u), (n, m, m)),
        "running_cost.value": (problem.running_cost.value(t, x, u), (k,)),
        "running_cost.jac_x": (problem.running_cost.jac_x(t, x, u), (k, n)),
        "running_cost.jac_u": (problem.running_cost.jac_u(t, x, u), (k, m)),
        "running_cost.hess_xx": (problem.running_cost.hess_xx(t, x, u), (k, n, n)),
        "running_cost.hess_xu": (problem.running_cost.hess_xu(t, x, u), (k, n, m)),
        "running_cost.hess_uu": (problem.running_cost.hess_uu(t, x, u), (k, m, m)),
        "mixed_constraint.value": (problem.mixed_constraint.value(t, x, u), (r,)),
        "mixed_constraint.jac_x": (problem.mixed_constraint.jac_x(t, x, u), (r, n)),
        "mixed_constraint.jac_u": (problem.mixed_constraint.jac_u(t, x, u), (r, m)),
        "mixed_constraint.hess_xx": (problem.mixed_constraint.hess_xx(t, x, u), (r, n, n)),
        "mixed_constraint.hess_xu": (problem.mixed_constraint.hess_xu(t, x, u), (r, n, m)),
        "mixed_constraint.hess_uu": (problem.mixed_constraint.hess_uu(t, x, u), (r, m, m)),
        "terminal_cost.value": (problem.terminal_cost.value(x), (k,)),
        "terminal_cost.jac": (problem.terminal_cost.jac(x), (k, n)),
        "terminal_cost.hess": (problem.terminal_cost.hess(x), (k, n, n)),
        "endpoint_constraint.value": (problem.endpoint_constraint.value(x), (n,)),
        "endpoint_constraint.jac": (problem.endpoint_constraint.jac(x), (n, n)),
        "endpoint_constraint.hess": (problem.endpoint_constraint.hess(x), (n, n, n)),
    }
    for label, (got, shape) in expect.items():
        got = np.asarray(got)
        if got.shape != shape:
            raise ValueError(f"{problem.name}: {label} has shape {got.shape}, expected {shape}")
