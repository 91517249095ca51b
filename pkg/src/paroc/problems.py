"""Registry of built-in benchmark problems.

Three problems are registered:

``example31``
    A two-state, three-control linear system with one mixed constraint
    and a nonlinear endpoint constraint.  Its linearized structure has
    closed forms (state-transition matrix, reduced control matrix) that
    the test suite checks against, which makes it the reference case
    for the constraint-qualification machinery.  The running costs are
    convex quadratics: L1 = (|x|^2 + |u|^2)/2 and L2 = |u - u_ref|^2/2
    with u_ref = (1, 0, 0); terminal costs are zero.

``smartgrid``
    An energy-management model with three states (battery energy, grid
    load, cumulated emissions), three controls (solar, wind and
    conventional input power) and four objectives: generation cost,
    negative renewable usage, terminal emissions and load-tracking
    error.  All numeric defaults are illustrative values chosen for
    this implementation and can be overridden; reports should treat
    them as artifact defaults, not as measured data.

``lq1``
    A scalar linear-quadratic problem (dx/dt = u, L = (x^2 + u^2)/2)
    whose optimum is known in closed form through a two-point boundary
    value problem.  Used as the end-to-end solver oracle.

Parameters are overridable through :func:`get_problem`; every
parameter has a declared range and out-of-range overrides are
rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import ParameterError, UnknownProblemError
from .model import EndpointMap, Problem, StageMap, validate_shapes


@dataclass(frozen=True)
class ParamSpec:
    default: float
    lo: float
    hi: float
    doc: str


def _const(a: np.ndarray) -> Callable:
    """Wrap a constant array as a stage evaluator (read-only, shared)."""
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return lambda t, x, u: a


def _const_pt(a: np.ndarray) -> Callable:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return lambda x: a


# ---------------------------------------------------------------------------
# example31
# ---------------------------------------------------------------------------

_EXAMPLE31_PARAMS: dict[str, ParamSpec] = {
    "x10": ParamSpec(1.0, -10.0, 10.0, "initial value of x1"),
    "x20": ParamSpec(0.0, -10.0, 10.0, "initial value of x2"),
}


def _build_example31(p: Mapping[str, float]) -> Problem:
    n, m, k, r = 2, 3, 2, 1
    u_ref = np.array([1.0, 0.0, 0.0])
    u_ref.setflags(write=False)

    phi_u = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    dynamics = StageMap(
        value=lambda t, x, u: np.array([t * x[0] + u[0] + u[2],
                                        -x[0] / 3.0 + t * x[1] + u[1]]),
        jac_x=lambda t, x, u: np.array([[t, 0.0], [-1.0 / 3.0, t]]),
        jac_u=_const(phi_u),
        hess_xx=_const(np.zeros((n, n, n))),
        hess_xu=_const(np.zeros((n, n, m))),
        hess_uu=_const(np.zeros((n, m, m))),
    )

    L_xx = np.zeros((k, n, n))
    L_xx[0] = np.eye(n)
    L_uu = np.zeros((k, m, m))
    L_uu[0] = np.eye(m)
    L_uu[1] = np.eye(m)
    running_cost = StageMap(
        value=lambda t, x, u: np.array([0.5 * (x @ x + u @ u),
                                        0.5 * ((u - u_ref) @ (u - u_ref))]),
        jac_x=lambda t, x, u: np.array([x, np.zeros(2)]),
        jac_u=lambda t, x, u: np.array([u, u - u_ref]),
        hess_xx=_const(L_xx),
        hess_xu=_const(np.zeros((k, n, m))),
        hess_uu=_const(L_uu),
    )

    terminal_cost = EndpointMap(
        value=_const_pt(np.zeros(k)),
        jac=_const_pt(np.zeros((k, n))),
        hess=_const_pt(np.zeros((k, n, n))),
    )

    h_hess = np.zeros((n, n, n))
    h_hess[0, 1, 1] = -2.0
    endpoint = EndpointMap(
        value=lambda x: np.array([x[0] - x[1] ** 2 - 1.0, x[1] - 1.0]),
        jac=lambda x: np.array([[1.0, -2.0 * x[1]], [0.0, 1.0]]),
        hess=_const_pt(h_hess),
    )

    # g(t, x, u) = x2 - x1 + u1 + u2 - u3 - 1 <= 0
    g_u = np.array([[1.0, 1.0, -1.0]])
    mixed = StageMap(
        value=lambda t, x, u: np.array([x[1] - x[0] + u[0] + u[1] - u[2] - 1.0]),
        jac_x=_const(np.array([[-1.0, 1.0]])),
        jac_u=_const(g_u),
        hess_xx=_const(np.zeros((r, n, n))),
        hess_xu=_const(np.zeros((r, n, m))),
        hess_uu=_const(np.zeros((r, m, m))),
    )

    return Problem(
        name="example31", n=n, m=m, k=k, r=r,
        x0=np.array([p["x10"], p["x20"]]),
        dynamics=dynamics, running_cost=running_cost,
        terminal_cost=terminal_cost, endpoint_constraint=endpoint,
        mixed_constraint=mixed, params=dict(p),
    )


# ---------------------------------------------------------------------------
# smartgrid
# ---------------------------------------------------------------------------

_SMARTGRID_PARAMS: dict[str, ParamSpec] = {
    "c1": ParamSpec(0.05, 1e-6, 100.0, "unit cost of source-1 (solar) power"),
    "c2": ParamSpec(0.03, 1e-6, 100.0, "unit cost of source-2 (wind) power"),
    "c3": ParamSpec(0.10, 1e-6, 100.0, "unit cost of conventional power"),
    "eta": ParamSpec(0.9, 1e-3, 1.0, "storage efficiency"),
    "alpha3": ParamSpec(0.5, 0.0, 10.0, "emission rate of conventional power"),
    "x2_target": ParamSpec(1.0, -100.0, 100.0, "target grid load"),
    "x1_max": ParamSpec(2.0, 1e-3, 1e3, "battery capacity bound at t=1"),
    "u1_max": ParamSpec(1.5, 1e-3, 1e3, "source-1 capacity"),
    "u2_max": ParamSpec(1.5, 1e-3, 1e3, "source-2 capacity"),
    "c_bound": ParamSpec(3.0, 1e-3, 1e3, "combined-input bound c(t), constant"),
    "delta": ParamSpec(0.4, 0.0, 10.0, "load relaxation rate in f(t, x2)"),
    "d_base": ParamSpec(0.8, -10.0, 10.0, "constant part of the load forcing d(t)"),
    "d_amp": ParamSpec(0.4, -10.0, 10.0, "amplitude of the sinusoidal load forcing"),
    "b1": ParamSpec(1.0, -10.0, 10.0, "load coupling of source 1"),
    "b2": ParamSpec(1.0, -10.0, 10.0, "load coupling of source 2"),
    "b3": ParamSpec(1.0, -10.0, 10.0, "load coupling of source 3"),
    "x10": ParamSpec(0.5, -100.0, 100.0, "initial battery energy"),
    "x20": ParamSpec(1.0, -100.0, 100.0, "initial grid load"),
    "x30": ParamSpec(0.0, -100.0, 100.0, "initial cumulated emissions"),
    "x2_pad": ParamSpec(1e3, 10.0, 1e9, "inactive padding bound on x2(1)"),
    "x3_pad": ParamSpec(1e3, 10.0, 1e9, "inactive padding bound on x3(1)"),
}


def _build_smartgrid(p: Mapping[str, float]) -> Problem:
    n, m, k, r = 3, 3, 4, 3
    eta, alpha3, delta = p["eta"], p["alpha3"], p["delta"]
    c1, c2, c3 = p["c1"], p["c2"], p["c3"]
    b = np.array([p["b1"], p["b2"], p["b3"]])
    d_base, d_amp = p["d_base"], p["d_amp"]
    x2t = p["x2_target"]

    phi_x = np.array([[0.0, -eta, 0.0], [0.0, -delta, 0.0], [0.0, 0.0, 0.0]])
    phi_u = np.array([[eta, eta, eta], [b[0], b[1], b[2]], [0.0, 0.0, alpha3]])
    dynamics = StageMap(
        value=lambda t, x, u: np.array([
            eta * (u[0] + u[1] + u[2] - x[1]),
            -delta * x[1] + d_base + d_amp * math.sin(2.0 * math.pi * t) + b @ u,
            alpha3 * u[2],
        ]),
        jac_x=_const(phi_x),
        jac_u=_const(phi_u),
        hess_xx=_const(np.zeros((n, n, n))),
        hess_xu=_const(np.zeros((n, n, m))),
        hess_uu=_const(np.zeros((n, m, m))),
    )

    L_xx = np.zeros((k, n, n))
    L_xx[3, 1, 1] = 2.0
    L_uu = np.zeros((k, m, m))
    L_uu[0] = np.diag([2.0 * c1, 2.0 * c2, 2.0 * c3])

    def L_value(t, x, u):
        return np.array([
            c1 * u[0] ** 2 + c2 * u[1] ** 2 + c3 * u[2] ** 2,
            -(u[0] + u[1]),
            0.0,
            (x[1] - x2t) ** 2,
        ])

    def L_jac_x(t, x, u):
        out = np.zeros((k, n))
        out[3, 1] = 2.0 * (x[1] - x2t)
        return out

    L_u_fixed = np.zeros((k, m))
    L_u_fixed[1] = [-1.0, -1.0, 0.0]

    def L_jac_u(t, x, u):
        out = L_u_fixed.copy()
        out[0] = [2.0 * c1 * u[0], 2.0 * c2 * u[1], 2.0 * c3 * u[2]]
        return out

    running_cost = StageMap(
        value=L_value, jac_x=L_jac_x, jac_u=L_jac_u,
        hess_xx=_const(L_xx),
        hess_xu=_const(np.zeros((k, n, m))),
        hess_uu=_const(L_uu),
    )

    ell_jac = np.zeros((k, n))
    ell_jac[2, 2] = 1.0
    terminal_cost = EndpointMap(
        value=lambda x: np.array([0.0, 0.0, x[2], 0.0]),
        jac=_const_pt(ell_jac),
        hess=_const_pt(np.zeros((k, n, n))),
    )

    caps = np.array([p["x1_max"], p["x2_pad"], p["x3_pad"]])
    endpoint = EndpointMap(
        value=lambda x: x - caps,
        jac=_const_pt(np.eye(n)),
        hess=_const_pt(np.zeros((n, n, n))),
    )

    u_caps = np.array([p["u1_max"], p["u2_max"]])
    c_bound = p["c_bound"]
    mixed = StageMap(
        value=lambda t, x, u: np.array([
            u[0] - u_caps[0],
            u[1] - u_caps[1],
            t * u[0] + t * u[1] + u[2] - c_bound,
        ]),
        jac_x=_const(np.zeros((r, n))),
        jac_u=lambda t, x, u: np.array([[1.0, 0.0, 0.0],
                                        [0.0, 1.0, 0.0],
                                        [t, t, 1.0]]),
        hess_xx=_const(np.zeros((r, n, n))),
        hess_xu=_const(np.zeros((r, n, m))),
        hess_uu=_const(np.zeros((r, m, m))),
    )

    return Problem(
        name="smartgrid", n=n, m=m, k=k, r=r,
        x0=np.array([p["x10"], p["x20"], p["x30"]]),
        dynamics=dynamics, running_cost=running_cost,
        terminal_cost=terminal_cost, endpoint_constraint=endpoint,
        mixed_constraint=mixed, params=dict(p),
        notes=(
            "parameter defaults are illustrative artifact values, not measured data",
            "endpoint rows 2 and 3 are inactive padding bounds restoring a square endpoint map",
        ),
    )


# ---------------------------------------------------------------------------
# lq1
# ---------------------------------------------------------------------------

_LQ1_PARAMS: dict[str, ParamSpec] = {
    "x10": ParamSpec(1.0, -100.0, 100.0, "initial state"),
    "x_cap": ParamSpec(10.0, -100.0, 100.0, "endpoint bound x(1) <= x_cap"),
    "u_cap": ParamSpec(10.0, -100.0, 100.0, "control bound u <= u_cap"),
}


def _build_lq1(p: Mapping[str, float]) -> Problem:
    n = m = k = r = 1
    x_cap, u_cap = p["x_cap"], p["u_cap"]
    dynamics = StageMap(
        value=lambda t, x, u: np.array([u[0]]),
        jac_x=_const(np.zeros((1, 1))),
        jac_u=_const(np.ones((1, 1))),
        hess_xx=_const(np.zeros((1, 1, 1))),
        hess_xu=_const(np.zeros((1, 1, 1))),
        hess_uu=_const(np.zeros((1, 1, 1))),
    )
    running_cost = StageMap(
        value=lambda t, x, u: np.array([0.5 * (x[0] ** 2 + u[0] ** 2)]),
        jac_x=lambda t, x, u: np.array([[x[0]]]),
        jac_u=lambda t, x, u: np.array([[u[0]]]),
        hess_xx=_const(np.ones((1, 1, 1))),
        hess_xu=_const(np.zeros((1, 1, 1))),
        hess_uu=_const(np.ones((1, 1, 1))),
    )
    terminal_cost = EndpointMap(
        value=_const_pt(np.zeros(1)),
        jac=_const_pt(np.zeros((1, 1))),
        hess=_const_pt(np.zeros((1, 1, 1))),
    )
    endpoint = EndpointMap(
        value=lambda x: np.array([x[0] - x_cap]),
        jac=_const_pt(np.ones((1, 1))),
        hess=_const_pt(np.zeros((1, 1, 1))),
    )
    mixed = StageMap(
        value=lambda t, x, u: np.array([u[0] - u_cap]),
        jac_x=_const(np.zeros((1, 1))),
        jac_u=_const(np.ones((1, 1))),
        hess_xx=_const(np.zeros((1, 1, 1))),
        hess_xu=_const(np.zeros((1, 1, 1))),
        hess_uu=_const(np.zeros((1, 1, 1))),
    )
    return Problem(
        name="lq1", n=n, m=m, k=k, r=r,
        x0=np.array([p["x10"]]),
        dynamics=dynamics, running_cost=running_cost,
        terminal_cost=terminal_cost, endpoint_constraint=endpoint,
        mixed_constraint=mixed, params=dict(p),
    )


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

_REGISTRY: dict[str, tuple[Callable[[Mapping[str, float]], Problem], dict[str, ParamSpec]]] = {
    "example31": (_build_example31, _EXAMPLE31_PARAMS),
    "smartgrid": (_build_smartgrid, _SMARTGRID_PARAMS),
    "lq1": (_build_lq1, _LQ1_PARAMS),
}


def problem_names() -> list[str]:
    return list(_REGISTRY)


def param_specs(name: str) -> dict[str, ParamSpec]:
    if name not in _REGISTRY:
        raise UnknownProblemError(f"unknown problem {name!r}; known: {sorted(_REGISTRY)}")
    return dict(_REGISTRY[name][1])


def get_problem(name: str, overrides: Mapping[str, float] | None = None) -> Problem:
    """Build a registered problem, applying parameter overrides.

    Raises
    ------
    UnknownProblemError
        If ``name`` is not registered.
    ParameterError
        On an unknown override key or a value outside its declared range.
    """
    if name not in _REGISTRY:
        raise UnknownProblemError(f"unknown problem {name!r}; known: {sorted(_REGISTRY)}")
    builder, specs = _REGISTRY[name]
    values = {key: spec.default for key, spec in specs.items()}
    for key, raw in (overrides or {}).items():
        if key not in specs:
            raise ParameterError(f"{name}: unknown parameter {key!r}; known: {sorted(specs)}")
        val = float(raw)
        spec = specs[key]
        if not (spec.lo <= val <= spec.hi) or not math.isfinite(val):
            raise ParameterError(
                f"{name}: parameter {key}={val} outside declared range [{spec.lo}, {spec.hi}]")
        values[key] = val
    problem = builder(values)
    validate_shapes(problem)
    return problem
