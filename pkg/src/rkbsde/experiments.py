"""Benchmark problems, error norms, and convergence-rate reports.

Two classic one-dimensional BSDEs with known closed-form solutions serve as
test beds: a trigonometric problem on ``[0, pi]`` and a logistic problem on
``[-1, 1]``.  ``convergence_study`` runs the backward solver across a list of
step counts with the balance rule ``h = dt ** ((r+1)/(l+1))`` and the
degree-per-order protocol ``l = 3, 5, 7, 9, 11`` for orders ``1 .. 5``, fits
convergence rates by least squares in log-log coordinates, and renders the
result as Markdown, CSV, or JSON.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .order_conditions import ButcherTableau
from .quadrature import DEFAULT_QUADRATURE_POINTS, GridFunction
from .solver import BSDEProblem, SolveConfig, _checked_interval, solve

__all__ = [
    "L_FOR_ORDER",
    "ConvergenceReport",
    "ConvergenceRow",
    "convergence_study",
    "example1",
    "example2",
    "fitted_rate",
    "linf_error",
]

L_FOR_ORDER = {1: 3, 2: 5, 3: 7, 4: 9, 5: 11}
"""Default interpolation degree for each nominal scheme order."""


def example1() -> BSDEProblem:
    """Trigonometric benchmark problem on ``[0, pi]``.

    The exact solution is ``Y_t = exp(t^2) ln(sin x + 3)`` with
    ``Z_t = exp(t^2) cos x / (sin x + 3)``; the generator couples ``t, y, z``
    through exponentials and a quadratic ``z`` term.  ``sigma = 1, T = 1``.
    """
    T = 1.0

    def f(t: float, x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        et2 = math.exp(t * t)
        return 0.5 * (
            et2 - 4.0 * t * y - 3.0 * np.exp(t * t - y / et2) + z * z / et2
        )

    def phi(x: np.ndarray) -> np.ndarray:
        return math.exp(T * T) * np.log(np.sin(x) + 3.0)

    def phi_prime(x: np.ndarray) -> np.ndarray:
        return math.exp(T * T) * np.cos(x) / (np.sin(x) + 3.0)

    def exact_y(t: float, x: np.ndarray) -> np.ndarray:
        return math.exp(t * t) * np.log(np.sin(x) + 3.0)

    def exact_z(t: float, x: np.ndarray) -> np.ndarray:
        return math.exp(t * t) * np.cos(x) / (np.sin(x) + 3.0)

    return BSDEProblem(
        sigma=1.0,
        T=T,
        f=f,
        phi=phi,
        phi_prime=phi_prime,
        domain=(0.0, math.pi),
        exact_y=exact_y,
        exact_z=exact_z,
        name="example1",
    )


def _logistic(u: np.ndarray) -> np.ndarray:
    # 1 / (1 + exp(-u)) stays finite for any float input: exp overflow on the
    # far-negative side saturates to inf and the quotient to exactly 0.0.
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-u))


def example2(sigma: float = 0.25) -> BSDEProblem:
    """Logistic benchmark problem on ``[-1, 1]``.

    The exact solution is the sigmoid ``Y_t = exp(t+x) / (1 + exp(t+x))``
    with ``Z_t = sigma Y_t (1 - Y_t)``; the generator is
    ``sigma (y - (2 + sigma^2) / (2 sigma^2)) z``.  ``T = 1``.

    Parameters
    ----------
    sigma : float, optional
        Diffusion coefficient; must be positive.
    """
    sigma = float(sigma)
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise ValueError("sigma must be positive")
    T = 1.0
    shift = (2.0 + sigma * sigma) / (2.0 * sigma * sigma)

    def f(t: float, x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        return sigma * (y - shift) * z

    def phi(x: np.ndarray) -> np.ndarray:
        return _logistic(T + x)

    def phi_prime(x: np.ndarray) -> np.ndarray:
        s = _logistic(T + x)
        return s * (1.0 - s)

    def exact_y(t: float, x: np.ndarray) -> np.ndarray:
        return _logistic(t + x)

    def exact_z(t: float, x: np.ndarray) -> np.ndarray:
        s = _logistic(t + x)
        return sigma * s * (1.0 - s)

    return BSDEProblem(
        sigma=sigma,
        T=T,
        f=f,
        phi=phi,
        phi_prime=phi_prime,
        domain=(-1.0, 1.0),
        exact_y=exact_y,
        exact_z=exact_z,
        name="example2",
    )


def linf_error(
    num: GridFunction,
    exact: Callable[[np.ndarray], np.ndarray],
    window: tuple[float, float],
) -> float:
    """Max absolute difference against ``exact`` over grid nodes in a window.

    Parameters
    ----------
    num : GridFunction
        Numerical values on a uniform grid.
    exact : callable
        Maps node positions ``x`` to exact values (elementwise).
    window : tuple of float
        Interval ``(a, b)``; only nodes inside it (with a relative slack of
        ``1e-9 h`` at the endpoints) enter the maximum.

    Raises
    ------
    ValueError
        If no grid node lies inside the window.
    """
    a, b = _checked_interval(window)
    xs = num.xs()
    slack = 1e-9 * num.h
    mask = (xs >= a - slack) & (xs <= b + slack)
    if not mask.any():
        raise ValueError("window does not intersect the grid")
    exact_vals = np.asarray(exact(xs[mask]), dtype=float)
    exact_vals = np.broadcast_to(exact_vals, xs[mask].shape)
    return float(np.max(np.abs(num.values[mask] - exact_vals)))


def fitted_rate(dt_values: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``ln(error)`` against ``ln(dt)``.

    For a pure power law ``error = c * dt**p`` the returned value is ``p``.
    All errors must be strictly positive; use ``None``-handling upstream for
    degenerate (zero-error) sequences.
    """
    dts = np.asarray(dt_values, dtype=float)
    errs = np.asarray(errors, dtype=float)
    if dts.shape != errs.shape or dts.ndim != 1 or dts.shape[0] < 2:
        raise ValueError("need two or more (dt, error) pairs of equal length")
    if not (np.all(dts > 0.0) and np.all(np.isfinite(dts))):
        raise ValueError("dt values must be positive and finite")
    if not (np.all(errs > 0.0) and np.all(np.isfinite(errs))):
        raise ValueError("errors must be positive and finite")
    slope, _ = np.polyfit(np.log(dts), np.log(errs), 1)
    return float(slope)


@dataclass(frozen=True)
class ConvergenceRow:
    """One step-count entry of a convergence study."""

    N: int
    err_y: float
    err_z: float
    runtime: float


@dataclass(frozen=True)
class ConvergenceReport:
    """Fitted convergence rates plus the per-``N`` error table behind them.

    Attributes
    ----------
    scheme : str
        Label of the stage tableau.
    problem : str
        Label of the benchmark problem.
    rows : tuple of ConvergenceRow
        Per-step-count errors, sorted by ``N`` ascending.
    cr_y, cr_z : float or None
        Fitted rates; ``None`` marks a degenerate fit (some error was zero).
    config : dict
        Echo of the discretization parameters used for every run.
    """

    scheme: str
    problem: str
    rows: tuple[ConvergenceRow, ...]
    cr_y: float | None
    cr_z: float | None
    config: dict[str, object]

    @staticmethod
    def _render_cr(value: float | None) -> str:
        return "undefined" if value is None else f"{value:.3f}"

    def to_markdown(self, *, include_runtime: bool = False) -> str:
        """Render the error table plus fitted rates as Markdown."""
        lines = [f"# Convergence of {self.scheme} on {self.problem}", ""]
        conf = ", ".join(f"{k}={v}" for k, v in sorted(self.config.items()))
        lines.append(f"Configuration: {conf}")
        lines.append("")
        header = "| N | errY | errZ |"
        rule = "|---:|---:|---:|"
        if include_runtime:
            header += " RT(s) |"
            rule += "---:|"
        lines.append(header)
        lines.append(rule)
        for row in self.rows:
            cells = f"| {row.N} | {row.err_y:.2e} | {row.err_z:.2e} |"
            if include_runtime:
                cells += f" {row.runtime:.2f} |"
            lines.append(cells)
        lines.append("")
        lines.append(
            f"CR(Y) = {self._render_cr(self.cr_y)}, CR(Z) = {self._render_cr(self.cr_z)}"
        )
        return "\n".join(lines) + "\n"

    def to_csv(self, *, include_runtime: bool = False) -> str:
        """Render per-``N`` rows (full precision) as CSV."""
        header = "N,errY,errZ,CR_Y,CR_Z"
        if include_runtime:
            header += ",runtime"
        lines = [header]
        cry = "" if self.cr_y is None else repr(self.cr_y)
        crz = "" if self.cr_z is None else repr(self.cr_z)
        for row in self.rows:
            cells = f"{row.N},{row.err_y!r},{row.err_z!r},{cry},{crz}"
            if include_runtime:
                cells += f",{row.runtime!r}"
            lines.append(cells)
        return "\n".join(lines) + "\n"

    def to_json(self, *, indent: int | None = 2, include_runtime: bool = False) -> str:
        """Render the full report (full precision) as JSON."""
        rows = []
        for row in self.rows:
            entry: dict[str, object] = {"N": row.N, "errY": row.err_y, "errZ": row.err_z}
            if include_runtime:
                entry["runtime"] = row.runtime
            rows.append(entry)
        payload = {
            "scheme": self.scheme,
            "problem": self.problem,
            "config": self.config,
            "rows": rows,
            "cr_y": self.cr_y,
            "cr_z": self.cr_z,
        }
        return json.dumps(payload, indent=indent)


def convergence_study(
    problem: BSDEProblem,
    tableau: ButcherTableau,
    order: int,
    N_list: Sequence[int],
    *,
    M: int = DEFAULT_QUADRATURE_POINTS,
    l: int | None = None,
    domain: tuple[float, float] | None = None,
    scheme: str = "",
) -> ConvergenceReport:
    """Run the solver across step counts and fit convergence rates.

    For each ``N`` the mesh follows ``h = dt ** ((order+1)/(l+1))``; the
    interpolation degree defaults to the degree-per-order protocol
    (``l = 3, 5, 7, 9, 11`` for orders ``1..5``).  Rates are least-squares
    slopes of ``ln(error)`` against ``ln(dt)``.  A zero error anywhere makes
    the corresponding rate undefined (``None``) rather than raising.

    Parameters
    ----------
    problem : BSDEProblem
        Must carry exact solutions, which define the errors.
    tableau : ButcherTableau
        Stage tableau to run.
    order : int
        Nominal convergence order (drives the mesh and degree defaults).
    N_list : sequence of int
        Two or more distinct step counts.
    M, l, domain, scheme : optional
        Quadrature size, interpolation degree override, error window
        (defaults to the problem's domain), and report label.
    """
    if isinstance(order, bool) or not isinstance(order, int) or order < 1:
        raise ValueError("order must be a positive integer")
    if problem.exact_y is None or problem.exact_z is None:
        raise ValueError("problem must provide exact solutions for error reporting")
    if l is None:
        if order not in L_FOR_ORDER:
            raise ValueError(
                f"no default interpolation degree for order {order}; pass l explicitly"
            )
        l = L_FOR_ORDER[order]
    Ns = [int(N) for N in N_list]
    if len(Ns) < 2 or len(set(Ns)) != len(Ns):
        raise ValueError("N_list needs at least two distinct entries")
    Ns.sort()
    window = problem.domain if domain is None else _checked_interval(domain)

    rows = []
    for N in Ns:
        cfg = SolveConfig(
            tableau=tableau, N=N, domain=window, l=l, M=M, order=order
        )
        sol = solve(problem, cfg)
        err_y = linf_error(sol.y0, lambda x: problem.exact_y(0.0, x), window)
        err_z = linf_error(sol.z0, lambda x: problem.exact_z(0.0, x), window)
        rows.append(ConvergenceRow(N=N, err_y=err_y, err_z=err_z, runtime=sol.runtime))

    dts = [problem.T / row.N for row in rows]
    cr_y = None
    cr_z = None
    if all(row.err_y > 0.0 for row in rows):
        cr_y = fitted_rate(dts, [row.err_y for row in rows])
    if all(row.err_z > 0.0 for row in rows):
        cr_z = fitted_rate(dts, [row.err_z for row in rows])

    config: dict[str, object] = {
        "M": M,
        "l": l,
        "order": order,
        "h_rule": "dt**((order+1)/(l+1))",
        "domain": list(window),
    }
    return ConvergenceReport(
        scheme=scheme or f"stages={tableau.m}",
        problem=problem.name or "problem",
        rows=tuple(rows),
        cr_y=cr_y,
        cr_z=cr_z,
        config=config,
    )
