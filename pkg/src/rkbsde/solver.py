"""Backward Runge-Kutta sweep for one-dimensional BSDEs on a spatial grid.

The solver marches a pair of grid functions ``(Y, Z)`` backward in time with
an explicit stage tableau.  Stage ``m`` of each step is the already-computed
pair at the next time level; stages ``m-1 .. 1`` and the final ``b``-row
(stage 0) are built from conditional expectations of stored grid functions
under the Gaussian transition of the forward state ``X_t = X_0 + sigma W_t``.
Every conditional expectation is realized as a short correlation kernel
(Gauss-Hermite weights composed with Lagrange interpolation stencils), so a
whole grid level is updated with a handful of kernel sweeps.

Grids are index-aligned with ``{i*h : i integer}``.  Because each expectation
looks a bounded distance ahead in space, the spatial extent needed at level
``n+1`` is the level-``n`` extent widened by a fixed per-step padding; the
terminal grid therefore covers a cone whose width grows linearly in the
number of steps.  Inside that cone no stencil is ever clamped.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .kernels import correlate_pair
from .order_conditions import ButcherTableau
from .quadrature import (
    DEFAULT_QUADRATURE_POINTS,
    MAX_QUADRATURE_POINTS,
    GaussHermiteRule,
    GridFunction,
    gh_rule,
    lagrange_basis_weights,
)

__all__ = [
    "BSDEProblem",
    "SolveConfig",
    "Solution",
    "SolverError",
    "required_domain",
    "solve",
]

_SQRT_PI = math.sqrt(math.pi)


class SolverError(RuntimeError):
    """Raised when a backward sweep cannot proceed."""


@dataclass(frozen=True)
class BSDEProblem:
    """One-dimensional decoupled BSDE driven by ``X_t = X_0 + sigma W_t``.

    Parameters
    ----------
    sigma : float
        Diffusion coefficient of the forward state.
    T : float
        Terminal time; must be positive.
    f : callable
        Generator ``f(t, x, y, z)`` with scalar ``t``; must accept numpy
        arrays for ``x, y, z`` and evaluate elementwise.
    phi : callable
        Terminal condition ``phi(x)``, elementwise on arrays.
    phi_prime : callable
        Spatial derivative of ``phi``; supplies the terminal ``Z`` values
        ``Z_T = phi'(x) * sigma``.
    domain : tuple of float
        Interval of interest ``(a, b)`` where the solution is reported.
    exact_y, exact_z : callable, optional
        Known exact solutions ``(t, x) -> value`` for error reporting.
    name : str, optional
        Label used in reports.
    """

    sigma: float
    T: float
    f: Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    phi: Callable[[np.ndarray], np.ndarray]
    phi_prime: Callable[[np.ndarray], np.ndarray]
    domain: tuple[float, float]
    exact_y: Callable[[float, np.ndarray], np.ndarray] | None = None
    exact_z: Callable[[float, np.ndarray], np.ndarray] | None = None
    name: str = ""

    def __post_init__(self) -> None:
        sigma = float(self.sigma)
        T = float(self.T)
        if not math.isfinite(sigma):
            raise ValueError("sigma must be finite")
        if not (math.isfinite(T) and T > 0.0):
            raise ValueError("terminal time T must be positive")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "domain", _checked_interval(self.domain))


def _checked_interval(domain: object) -> tuple[float, float]:
    try:
        a, b = domain  # type: ignore[misc]
        a = float(a)
        b = float(b)
    except (TypeError, ValueError):
        raise ValueError("domain must be a pair (a, b)") from None
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise ValueError("domain must satisfy a < b with finite endpoints")
    return (a, b)


@dataclass(frozen=True)
class SolveConfig:
    """Discretization parameters for one backward sweep.

    Parameters
    ----------
    tableau : ButcherTableau
        Explicit stage tableau; must pass structural validation.
    N : int
        Number of uniform time steps; ``dt = T / N``.
    domain : tuple of float
        Interval of interest ``(a, b)``; the level-0 grid covers it.
    l : int
        Lagrange interpolation degree (odd).
    M : int, optional
        Number of Gauss-Hermite quadrature points.
    h : float, optional
        Spatial mesh width.  When omitted, the balance rule
        ``h = dt ** ((order + 1) / (l + 1))`` is applied, which requires
        ``order``.
    order : int, optional
        Nominal convergence order of the tableau, used only for the default
        mesh rule.
    max_grid_points : int, optional
        Upper bound on the width of the padded terminal grid; the solve
        aborts early when the required cone exceeds it.
    """

    tableau: ButcherTableau
    N: int
    domain: tuple[float, float]
    l: int
    M: int = DEFAULT_QUADRATURE_POINTS
    h: float | None = None
    order: int | None = None
    max_grid_points: int = 20_000_000

    def __post_init__(self) -> None:
        if not isinstance(self.tableau, ButcherTableau):
            raise ValueError("tableau must be a ButcherTableau")
        if isinstance(self.N, bool) or not isinstance(self.N, int) or self.N < 1:
            raise ValueError("N must be a positive integer")
        object.__setattr__(self, "domain", _checked_interval(self.domain))
        if isinstance(self.l, bool) or not isinstance(self.l, int) or self.l < 1 or self.l % 2 == 0:
            raise ValueError("interpolation degree l must be a positive odd integer")
        if (
            isinstance(self.M, bool)
            or not isinstance(self.M, int)
            or not 1 <= self.M <= MAX_QUADRATURE_POINTS
        ):
            raise ValueError(
                f"M must be an integer in [1, {MAX_QUADRATURE_POINTS}]"
            )
        if self.h is not None:
            h = float(self.h)
            if not (math.isfinite(h) and h > 0.0):
                raise ValueError("mesh width h must be positive")
            object.__setattr__(self, "h", h)
        if self.order is not None:
            if isinstance(self.order, bool) or not isinstance(self.order, int) or self.order < 1:
                raise ValueError("order must be a positive integer")
        if self.h is None and self.order is None:
            raise ValueError("config needs h, or order for the default mesh rule")
        if (
            isinstance(self.max_grid_points, bool)
            or not isinstance(self.max_grid_points, int)
            or self.max_grid_points < 1
        ):
            raise ValueError("max_grid_points must be a positive integer")


@dataclass(frozen=True)
class Solution:
    """Result of one backward sweep.

    Attributes
    ----------
    y0, z0 : GridFunction
        Approximations of ``Y`` and ``Z`` at ``t = 0`` on the same mesh,
        restricted to the configured interval of interest.
    runtime : float
        Wall-clock seconds spent in the sweep.
    extents : tuple of (int, int)
        Grid index extent used at each time level ``0 .. N``.
    """

    y0: GridFunction
    z0: GridFunction
    runtime: float
    extents: tuple[tuple[int, int], ...]

    def to_csv(
        self,
        exact_y: Callable[[np.ndarray], np.ndarray] | None = None,
        exact_z: Callable[[np.ndarray], np.ndarray] | None = None,
    ) -> str:
        """Render ``x, Y0, Z0`` rows, with exact values and errors if known.

        ``exact_y`` and ``exact_z`` take the node positions ``x`` (already at
        ``t = 0``) and return exact values; when omitted the corresponding
        columns are left empty.
        """
        xs = self.y0.xs()
        ey = None if exact_y is None else np.asarray(exact_y(xs), dtype=float)
        ez = None if exact_z is None else np.asarray(exact_z(xs), dtype=float)
        lines = ["x,Y0,Z0,exactY,exactZ,errY,errZ"]
        for k in range(self.y0.size):
            cells = [
                repr(float(xs[k])),
                repr(float(self.y0.values[k])),
                repr(float(self.z0.values[k])),
            ]
            cells.append("" if ey is None else repr(float(ey[k])))
            cells.append("" if ez is None else repr(float(ez[k])))
            cells.append("" if ey is None else repr(abs(float(self.y0.values[k]) - float(ey[k]))))
            cells.append("" if ez is None else repr(abs(float(self.z0.values[k]) - float(ez[k]))))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def diagnostics(self, *, indent: int | None = 2, include_runtime: bool = True) -> str:
        """Render a JSON diagnostics blob (mesh, per-level extents, timing)."""
        payload: dict[str, object] = {
            "h": self.y0.h,
            "levels": [
                {"level": n, "lo": lo, "hi": hi}
                for n, (lo, hi) in enumerate(self.extents)
            ],
        }
        if include_runtime:
            payload["runtime"] = self.runtime
        return json.dumps(payload, indent=indent)


def _resolve_h(problem: BSDEProblem, cfg: SolveConfig) -> tuple[float, float]:
    """Return ``(h, dt)``, applying the balance rule when ``h`` is absent."""
    dt = problem.T / cfg.N
    if cfg.h is not None:
        return cfg.h, dt
    if cfg.order is None:  # unreachable after config validation
        raise ValueError("config needs h, or order for the default mesh rule")
    return dt ** ((cfg.order + 1) / (cfg.l + 1)), dt


def _pad_cells(sigma: float, tau: float, q_max: float, h: float, l: int) -> int:
    """Grid cells a single expectation over time ``tau`` can look ahead.

    The farthest quadrature abscissa sits ``|sigma| * sqrt(2 tau) * q_max``
    away; on top of that the interpolation stencil spans ``(l+1)/2`` cells to
    either side, plus one cell of slack for the floor-based stencil anchor.
    """
    reach = abs(sigma) * math.sqrt(2.0 * tau) * q_max
    return int(math.ceil(reach / h + (l + 1) / 2)) + 1


def _stage_offsets(
    tableau: ButcherTableau, sigma: float, dt: float, q_max: float, h: float, l: int
) -> list[int]:
    """Per-stage extra extent (in cells) relative to the step's target level.

    ``off[0] = 0`` is the final update; stage ``j`` must cover every query
    made from the stages ``i < j`` that consume it, so
    ``off[j] = max_{i<j}(off[i] + pad((c_i - c_j) dt))``.  ``off[m]`` is the
    per-step growth of the whole grid.
    """
    c = tableau.c
    off = [0] * (tableau.m + 1)
    for j in range(1, tableau.m + 1):
        need = 0
        for i in range(j):
            tau = (c[i] - c[j]) * dt
            if not tau > 0.0:
                raise SolverError(
                    f"stage time increment must be positive, got tau={tau!r} "
                    f"for stages ({i}, {j})"
                )
            need = max(need, off[i] + _pad_cells(sigma, tau, q_max, h, l))
        off[j] = need
    return off


def _base_extent(domain: tuple[float, float], h: float) -> tuple[int, int]:
    lo = math.floor(domain[0] / h)
    hi = math.ceil(domain[1] / h)
    return lo, max(hi, lo)


def required_domain(problem: BSDEProblem, cfg: SolveConfig, level: int) -> tuple[int, int]:
    """Grid index extent needed at a time level so no stencil is clamped.

    Level 0 covers the interval of interest; each later level widens it by
    the fixed per-step padding, so every quadrature abscissa queried anywhere
    in the sweep lies strictly inside the stored extent of the level it reads.
    """
    if isinstance(level, bool) or not isinstance(level, int) or not 0 <= level <= cfg.N:
        raise ValueError(f"level must be an integer in [0, {cfg.N}]")
    h, dt = _resolve_h(problem, cfg)
    q_max = float(gh_rule(cfg.M).nodes[-1])
    off = _stage_offsets(cfg.tableau, problem.sigma, dt, q_max, h, cfg.l)
    lo, hi = _base_extent(cfg.domain, h)
    growth = off[cfg.tableau.m]
    return lo - level * growth, hi + level * growth


@dataclass(frozen=True)
class _NodeKernels:
    """Interpolation stencils for one expectation: one kernel per node.

    For each quadrature node ``q_k`` the queried point sits ``delta_k`` away
    from the target node; ``shifts[k]`` is the index offset of the stencil's
    first tap and ``taps[k]`` its Lagrange weights.  ``w_y`` are the plain
    expectation weights, ``w_z`` the increment-ratio weights used for the
    ``Z`` component.
    """

    shifts: tuple[int, ...]
    taps: tuple[np.ndarray, ...]
    deltas: np.ndarray
    w_y: np.ndarray
    w_z: np.ndarray


def _node_kernels(
    rule: GaussHermiteRule, sigma: float, tau: float, h: float, l: int
) -> _NodeKernels:
    half = (l - 1) // 2
    scale = sigma * math.sqrt(2.0 * tau)
    deltas = scale * rule.nodes
    shifts: list[int] = []
    taps: list[np.ndarray] = []
    for delta in deltas:
        cell = math.floor(delta / h)
        shifts.append(cell - half)
        taps.append(lagrange_basis_weights(l, (delta / h - cell) + half))
    w_y = rule.weights / _SQRT_PI
    w_z = w_y * (math.sqrt(2.0 * tau) * rule.nodes) / tau
    return _NodeKernels(tuple(shifts), tuple(taps), deltas, w_y, w_z)


def _collapsed_kernel(
    rule: GaussHermiteRule, sigma: float, tau: float, h: float, l: int
) -> tuple[int, np.ndarray]:
    """Quadrature and interpolation collapsed into one dense tap kernel.

    A plain conditional expectation is linear in the stored values, so the
    per-node stencils can be summed into a single kernel; one correlation
    sweep then transports a whole grid level.  Returns ``(shift, taps)``.
    """
    nk = _node_kernels(rule, sigma, tau, h, l)
    s_min = min(nk.shifts)
    width = max(nk.shifts) - s_min + len(nk.taps[0])
    dense = np.zeros(width)
    for k, (shift, taps) in enumerate(zip(nk.shifts, nk.taps)):
        dense[shift - s_min : shift - s_min + taps.shape[0]] += nk.w_y[k] * taps
    return s_min, dense


def _values_on(fn_result: object, n: int, what: str) -> np.ndarray:
    arr = np.asarray(fn_result, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(
            f"{what} must return a scalar or an array of shape ({n},), got {arr.shape}"
        )
    return np.ascontiguousarray(arr)


def _ensure_finite(values: np.ndarray, n: int, i: int, xs: np.ndarray) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        k = int(np.argmax(bad))
        raise SolverError(
            f"non-finite value at time level n={n}, stage i={i}, x={float(xs[k])!r}"
        )


def solve(problem: BSDEProblem, cfg: SolveConfig) -> Solution:
    """Run the backward sweep and return the ``t = 0`` solution pair.

    The terminal grid carries ``Y = phi(x)`` and ``Z = phi'(x) * sigma``.
    Each step then evaluates, for stages ``i = m-1 .. 1`` and finally the
    ``b``-row (stage 0), the pair

    ``Theta_i(x) = E[Theta_m(x + sigma dW over c_i dt)]
    + dt * sum_{j>i} row_i[j] * E[F(t_j, Theta_j) over (c_i - c_j) dt]``

    where ``F``'s ``Y``-part is the generator at interpolated stage values
    and its ``Z``-part carries the increment ratio inside the expectation.

    Raises
    ------
    ValueError
        If the tableau fails structural validation.
    SolverError
        If a non-finite value appears (reported with its time level, stage,
        and grid position) or the padded grid cone exceeds the memory bound.
    """
    violations = cfg.tableau.structural_violations()
    if violations:
        raise ValueError(
            "tableau fails structural validation: " + "; ".join(violations)
        )
    tab = cfg.tableau
    m = tab.m
    c = tab.c
    h, dt = _resolve_h(problem, cfg)
    rule = gh_rule(cfg.M)
    q_max = float(rule.nodes[-1])
    sigma = problem.sigma

    off = _stage_offsets(tab, sigma, dt, q_max, h, cfg.l)
    growth = off[m]
    lo0, hi0 = _base_extent(cfg.domain, h)
    N = cfg.N
    extents = tuple((lo0 - n * growth, hi0 + n * growth) for n in range(N + 1))
    terminal_width = extents[N][1] - extents[N][0] + 1
    if terminal_width > cfg.max_grid_points:
        raise SolverError(
            f"required grid cone needs {terminal_width} points at the terminal "
            f"level, exceeding max_grid_points={cfg.max_grid_points}"
        )

    start = time.perf_counter()

    # Stage rows and expectation kernels are identical for every step.
    rows = [tab.row(i) for i in range(m)]
    transport = [_collapsed_kernel(rule, sigma, c[i] * dt, h, cfg.l) for i in range(m)]
    pair_kernels: dict[tuple[int, int], _NodeKernels] = {}
    for i in range(m):
        for j in range(i + 1, m + 1):
            if rows[i][j - 1] != 0.0:
                tau = (c[i] - c[j]) * dt
                pair_kernels[(i, j)] = _node_kernels(rule, sigma, tau, h, cfg.l)

    xs_all = np.arange(extents[N][0], extents[N][1] + 1, dtype=float) * h
    all_lo = extents[N][0]

    with np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore"):
        xs_terminal = xs_all
        Y = _values_on(problem.phi(xs_terminal), terminal_width, "phi")
        Z = sigma * _values_on(problem.phi_prime(xs_terminal), terminal_width, "phi_prime")
        Z = np.ascontiguousarray(Z)
        _ensure_finite(Y, N, m, xs_terminal)
        _ensure_finite(Z, N, m, xs_terminal)

        for n in range(N - 1, -1, -1):
            base_lo = lo0 - n * growth
            base_hi = hi0 + n * growth
            stage_lo = [base_lo - off[j] for j in range(m + 1)]
            ys: list[np.ndarray | None] = [None] * (m + 1)
            zs: list[np.ndarray | None] = [None] * (m + 1)
            ys[m] = Y
            zs[m] = Z
            for i in range(m - 1, -1, -1):
                t_lo = stage_lo[i]
                width = (base_hi + off[i]) - t_lo + 1
                xs_t = xs_all[t_lo - all_lo : t_lo - all_lo + width]
                acc_y = np.empty(width)
                acc_z = np.empty(width)
                shift0, dense = transport[i]
                correlate_pair(
                    ys[m], zs[m], dense, (t_lo + shift0) - stage_lo[m], acc_y, acc_z
                )
                buf_y = np.empty(width)
                buf_z = np.empty(width)
                for j in range(i + 1, m + 1):
                    coeff = rows[i][j - 1]
                    if coeff == 0.0:
                        continue
                    plan = pair_kernels[(i, j)]
                    src_lo = stage_lo[j]
                    t_j = (n + 1 - c[j]) * dt
                    for k in range(cfg.M):
                        correlate_pair(
                            ys[j],
                            zs[j],
                            plan.taps[k],
                            (t_lo + plan.shifts[k]) - src_lo,
                            buf_y,
                            buf_z,
                        )
                        fk = _values_on(
                            problem.f(t_j, xs_t + plan.deltas[k], buf_y, buf_z),
                            width,
                            "generator",
                        )
                        acc_y += (dt * coeff * plan.w_y[k]) * fk
                        acc_z += (dt * coeff * plan.w_z[k]) * fk
                _ensure_finite(acc_y, n, i, xs_t)
                _ensure_finite(acc_z, n, i, xs_t)
                ys[i] = acc_y
                zs[i] = acc_z
            Y = ys[0]
            Z = zs[0]

    runtime = time.perf_counter() - start

    a, b = cfg.domain
    lo_r = int(math.ceil((a - 1e-9 * h) / h))
    hi_r = int(math.floor((b + 1e-9 * h) / h))
    if hi_r < lo_r:
        raise SolverError("no grid nodes inside the interval of interest")
    first = lo_r - lo0
    window = slice(first, first + (hi_r - lo_r + 1))
    y0 = GridFunction(h, 0.0, lo_r, hi_r, Y[window])
    z0 = GridFunction(h, 0.0, lo_r, hi_r, Z[window])
    return Solution(y0=y0, z0=z0, runtime=runtime, extents=extents)
