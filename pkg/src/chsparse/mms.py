"""Manufactured-solution refinement studies for the forward solver.

The exact solution is ``mu = sigma = 0``, ``phi = a(t) cos(pi x)`` on [0, 1].
Each study isolates one error source: the temporal study builds its forcing
from the discrete Laplacian of the exact nodal field, so the only error left
is the time discretisation; the spatial study uses the backward difference of
``a`` in place of ``a'``, leaving only the spatial error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import Control
from .grid import build_grid
from .model import CostParams, ModelParams
from .state import InitialData, SolverOptions, TimeGrid, solve_state

MMS_PARAMS = ModelParams(alpha=1.0, beta=1.0, chi=0.1, f2_k=1.2, p_kind="logistic-smooth",
                         p_coeffs={"p0": 0.5, "scale": 1.0})


def amplitude(t):
    return 0.5 * np.exp(-t)


def amplitude_rate(t):
    return -0.5 * np.exp(-t)


@dataclass
class RefinementStudy:
    kind: str
    sizes: list
    errors: list
    order: float


def _forcing(params: ModelParams, x, times, dt, lap_phi, exact_rate: bool):
    a = amplitude(times)
    c = np.cos(np.pi * x)
    phi = a[:, None] * c[None]
    if exact_rate:
        rate = amplitude_rate(times)
    else:
        rate = np.empty_like(times)
        rate[1:] = (a[1:] - a[:-1]) / dt
        rate[0] = amplitude_rate(times[0])
    phi_t = rate[:, None] * c[None]
    reaction = params.P(phi, 0) * params.chi * (1.0 - phi)
    f1 = phi_t - reaction
    f2 = params.beta * phi_t - lap_phi + params.dF(phi, 1)
    f3 = params.chi * lap_phi + reaction
    return (f1, f2, f3), phi


def _solve_error(params: ModelParams, n_nodes: int, steps: int, t_final: float, kind: str) -> float:
    grid = build_grid(1, [1.0], [n_nodes])
    tg = TimeGrid(t_final, steps)
    (x,) = grid.coordinates()
    times = tg.times
    exact = amplitude(times)[:, None] * np.cos(np.pi * x)[None]
    if kind == "temporal":
        lap = grid.apply_laplacian(exact)
        forcing, phi = _forcing(params, x, times, tg.dt, lap, exact_rate=True)
    elif kind == "spatial":
        forcing, phi = _forcing(params, x, times, tg.dt, -np.pi**2 * exact, exact_rate=False)
    else:
        raise ValueError(f"unknown study {kind!r}")
    z = np.zeros(n_nodes)
    init = InitialData(grid, z, phi[0], z)
    cost = CostParams(0.0, 0.0, 1.0, 1.0, np.zeros(n_nodes), np.zeros(n_nodes), (-1.0, 1.0, -1.0, 1.0),
                      np.ones(n_nodes))
    traj = solve_state(params, cost, Control.zeros(steps, n_nodes), init, tg, forcing=forcing,
                       options=SolverOptions(newton_tol=1e-13))
    err = np.max(np.abs(traj.phi - phi))
    err = max(err, np.max(np.abs(traj.mu)), np.max(np.abs(traj.sigma)))
    return float(err)


def fit_order(sizes, errors) -> float:
    """Least-squares slope of log(error) against log(size)."""
    slope, _ = np.polyfit(np.log(np.asarray(sizes, float)), np.log(np.asarray(errors, float)), 1)
    return float(slope)


def temporal_study(levels: int = 4, params: ModelParams = MMS_PARAMS, n_nodes: int = 33,
                   coarsest_steps: int = 8, t_final: float = 1.0) -> RefinementStudy:
    steps = [coarsest_steps * 2**i for i in range(levels)]
    errors = [_solve_error(params, n_nodes, s, t_final, "temporal") for s in steps]
    dts = [t_final / s for s in steps]
    return RefinementStudy("temporal", dts, errors, fit_order(dts, errors))


def spatial_study(levels: int = 4, params: ModelParams = MMS_PARAMS, coarsest_nodes: int = 9,
                  steps: int = 16, t_final: float = 1.0) -> RefinementStudy:
    nodes = [(coarsest_nodes - 1) * 2**i + 1 for i in range(levels)]
    errors = [_solve_error(params, n, steps, t_final, "spatial") for n in nodes]
    hs = [1.0 / (n - 1) for n in nodes]
    return RefinementStudy("spatial", hs, errors, fit_order(hs, errors))
