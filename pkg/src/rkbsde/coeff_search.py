"""Numerical search for tableau coefficients of a prescribed order.

With the abscissae fixed (by default equispaced, ``c_i = 1 - i/m``), the
free coefficients are the strictly-upper-triangular ``a`` entries and the
quadrature row ``b``.  :func:`search` minimizes ``sum(a**2) + sum(b**2)``
subject to the order conditions ``C(r)`` via a quadratic-penalty homotopy
(penalty weight grows tenfold over eight stages) with a BFGS inner solver
driven by analytic gradients, followed by a Gauss-Newton restoration step
that pushes the condition residuals down to the requested tolerance.

When every restart converges to a stationary point whose residual stays
bounded away from zero, the target order is reported as infeasible at the
given stage count — the behaviour of the explicit order barrier.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .order_conditions import (
    TABLE1_MAX_ORDER,
    ButcherTableau,
    check_Cr,
    check_table1,
)
from .trees import Tree, enumerate_trees_minus, leaf

__all__ = ["SearchSpec", "SearchResult", "search"]

#: Number of penalty-homotopy stages and per-stage growth of the weight.
PENALTY_STAGES = 8
PENALTY_GROWTH = 10.0

#: A run is declared infeasible only when the best residual over all
#: restarts exceeds this while some restart reached stationarity.
INFEASIBLE_RESIDUAL = 1e-4

#: Stationarity threshold on the (penalty-normalized) gradient norm.
STATIONARITY_TOL = 1e-8

_POLISH_MAX_ITERATIONS = 60


@dataclass(frozen=True)
class SearchSpec:
    """Problem statement for :func:`search`.

    Attributes
    ----------
    m : int
        Stage count.
    r : int
        Target consistency order.
    c : tuple[float, ...] | None
        Optional abscissae ``(c_0, …, c_m)`` overriding the default
        equispaced rule ``c_i = 1 - i/m``; must satisfy the structural
        ordering with ``c_0 = 1`` and ``c_m = 0``.
    tol : float
        Maximum admissible condition residual for a "found" result.
    budget : int
        Iteration cap for each inner quasi-Newton solve.
    restarts : int
        Number of independent random initializations.
    seed : int
        Seed of the restart generator; fixing it makes the search
        bit-reproducible.
    """

    m: int
    r: int
    c: tuple[float, ...] | None = None
    tol: float = 1e-8
    budget: int = 500
    restarts: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("m", "r"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not self.tol > 0:
            raise ValueError(f"tolerance must be positive, got {self.tol!r}")
        for name in ("budget", "restarts"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.c is not None:
            c = tuple(float(v) for v in self.c)
            if len(c) != self.m + 1:
                raise ValueError(f"c must have length m + 1 = {self.m + 1}, got {len(c)}")
            if c[0] != 1.0 or c[-1] != 0.0:
                raise ValueError("c must run from c_0 = 1 down to c_m = 0")
            if any(c[i] <= c[i + 1] for i in range(self.m)):
                raise ValueError("c must be strictly decreasing")
            object.__setattr__(self, "c", c)

    def abscissae(self) -> np.ndarray:
        """The abscissa vector the search will fix."""
        if self.c is not None:
            return np.array(self.c)
        return np.array([1.0 - i / self.m for i in range(self.m + 1)])


@dataclass(frozen=True)
class SearchResult:
    """Outcome of a coefficient search.

    ``status`` is ``"found"`` (with ``tableau`` set and residuals within
    tolerance), ``"infeasible"`` (all restarts stalled at stationary points
    with residuals bounded away from zero — heuristic, see module notes),
    or ``"budget-exhausted"``.  ``objective`` is ``sum(a**2) + sum(b**2)``
    at the reported point; for unsuccessful runs it refers to the restart
    that achieved ``max_residual``.
    """

    status: str
    tableau: ButcherTableau | None
    objective: float
    max_residual: float
    iterations: int

    def as_dict(self) -> dict:
        """Plain-data view (full precision), suitable for JSON."""
        payload: dict = {
            "status": self.status,
            "objective": self.objective,
            "max_residual": self.max_residual,
            "iterations": self.iterations,
        }
        if self.tableau is None:
            payload["tableau"] = None
        else:
            payload["tableau"] = {
                "m": self.tableau.m,
                "a": self.tableau.a.tolist(),
                "b": self.tableau.b.tolist(),
                "c": self.tableau.c.tolist(),
            }
        return payload

    def to_json(self, *, indent: int | None = 2) -> str:
        return json.dumps(self.as_dict(), indent=indent)


class _ConditionSystem:
    """Residuals of ``C(r)`` and their Jacobian in the free coefficients.

    The variable vector is ``x = (a_{ij} for i < j, row-major; b_1 … b_m)``.
    Residual ordering matches :func:`rkbsde.order_conditions.check_Cr`:
    the stage conditions on ``[ ]_0`` for rows 0..m, then the root
    conditions over the reduced tree set.
    """

    def __init__(self, m: int, r: int, c: np.ndarray) -> None:
        self.m = m
        self.c = c
        self.trees = list(enumerate_trees_minus(r))
        self.pairs = [(i, j) for i in range(1, m + 1) for j in range(i + 1, m + 1)]
        self.n_a = len(self.pairs)
        self.n_vars = self.n_a + m
        self.n_residuals = (m + 1) + len(self.trees)
        # diffs[i, q-1] = c_i - c_q for stage rows i = 0..m, columns q = 1..m
        self.diffs = c[:, None] - c[None, 1:]
        # Free-variable positions per stage row: row 0 holds all of b, row
        # i >= 1 holds the strictly-upper a entries of that row.
        cols_of_row: list[np.ndarray] = [np.arange(m)]
        vars_of_row: list[np.ndarray] = [self.n_a + np.arange(m)]
        a_pos = {pair: pos for pos, pair in enumerate(self.pairs)}
        for i in range(1, m + 1):
            qs = np.arange(i + 1, m + 1)
            cols_of_row.append(qs - 1)
            vars_of_row.append(np.array([a_pos[(i, q)] for q in qs], dtype=int))
        self._cols_of_row = cols_of_row
        self._vars_of_row = vars_of_row

    def tableau(self, x: np.ndarray) -> ButcherTableau:
        """Assemble the tableau encoded by the variable vector ``x``."""
        a = np.zeros((self.m, self.m))
        for pos, (i, j) in enumerate(self.pairs):
            a[i - 1, j - 1] = x[pos]
        return ButcherTableau(m=self.m, a=a, b=np.array(x[self.n_a :]), c=self.c.copy())

    def evaluate(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return the residual vector and its Jacobian at ``x``."""
        m = self.m
        x = np.asarray(x, dtype=float)
        rows = np.zeros((m + 1, m))
        rows[0] = x[self.n_a :]
        for pos, (i, j) in enumerate(self.pairs):
            rows[i, j - 1] = x[pos]
        memo: dict[Tree, tuple[np.ndarray, np.ndarray]] = {}

        def eval_tree(t: Tree) -> tuple[np.ndarray, np.ndarray]:
            hit = memo.get(t)
            if hit is not None:
                return hit
            weights = rows * self.diffs**t.label
            if not t.children:
                u = np.ones(m)
                du = None
            else:
                child_vecs = []
                child_grads = []
                for child in t.children:
                    vec_c, grad_c = eval_tree(child)
                    child_vecs.append(vec_c[1:])
                    child_grads.append(grad_c[1:])
                u = math.prod(child_vecs)
                du = np.zeros((m, self.n_vars))
                for p in range(len(child_vecs)):
                    others = math.prod(
                        child_vecs[q] for q in range(len(child_vecs)) if q != p
                    )
                    if isinstance(others, int):  # single child: empty product
                        du += child_grads[p]
                    else:
                        du += others[:, None] * child_grads[p]
            vec = weights @ u
            if not t.children:
                vec = vec - self.c ** (t.label + 1) / (t.label + 1)
            grad = weights @ du if du is not None else np.zeros((m + 1, self.n_vars))
            for i in range(m + 1):
                cols = self._cols_of_row[i]
                if cols.size:
                    grad[i, self._vars_of_row[i]] += self.diffs[i, cols] ** t.label * u[cols]
            memo[t] = (vec, grad)
            return vec, grad

        root_vec, root_grad = eval_tree(leaf(0))
        residuals = list(root_vec)
        jac_rows = list(root_grad)
        for t in self.trees:
            vec, grad = eval_tree(t)
            residuals.append(vec[0])
            jac_rows.append(grad[0])
        return np.array(residuals), np.vstack(jac_rows)


@dataclass(frozen=True)
class _RestartOutcome:
    x: np.ndarray
    objective: float
    residual: float
    stationarity: float
    iterations: int


def _inner_minimize(
    system: _ConditionSystem, x0: np.ndarray, mu: float, budget: int
) -> tuple[np.ndarray, int]:
    """One quasi-Newton solve of the penalty subproblem at weight ``mu``.

    The subproblem is scaled by ``1/mu`` — ``|x|^2/mu + |residual|^2`` — so
    that gradient magnitudes stay comparable across homotopy stages.
    """
    inv = 1.0 / mu

    def fun(z: np.ndarray) -> tuple[float, np.ndarray]:
        res, jac = system.evaluate(z)
        value = inv * float(z @ z) + float(res @ res)
        grad = 2.0 * inv * z + 2.0 * (jac.T @ res)
        return value, grad

    out = minimize(
        fun, x0, jac=True, method="BFGS", options={"maxiter": budget, "gtol": 1e-12}
    )
    return out.x, int(out.nit)


def _solve_restart(system: _ConditionSystem, x0: np.ndarray, spec: SearchSpec) -> _RestartOutcome:
    x = np.asarray(x0, dtype=float)
    iterations = 0
    mu = 1.0
    for _ in range(PENALTY_STAGES):
        x, nit = _inner_minimize(system, x, mu, spec.budget)
        iterations += nit
        mu *= PENALTY_GROWTH
    mu_max = mu / PENALTY_GROWTH
    # A second pass with a fresh quasi-Newton state tightens stationarity.
    x, nit = _inner_minimize(system, x, mu_max, spec.budget)
    iterations += nit

    res, jac = system.evaluate(x)
    grad = 2.0 * x / mu_max + 2.0 * (jac.T @ res)
    stationarity = float(np.max(np.abs(grad)))

    # Gauss-Newton restoration: project onto the constraint manifold with
    # minimum-norm steps.  On feasible problems this converges quadratically;
    # on infeasible ones it stalls and the pre-restoration point stands.
    best_x, best_res = x, float(np.max(np.abs(res)))
    cur_x, cur_res, cur_jac = x, res, jac
    for _ in range(_POLISH_MAX_ITERATIONS):
        if float(np.max(np.abs(cur_res))) <= spec.tol * 1e-2:
            break
        step, *_ = np.linalg.lstsq(cur_jac, cur_res, rcond=None)
        if not np.all(np.isfinite(step)) or float(np.max(np.abs(step))) < 1e-15:
            break
        cur_x = cur_x - step
        cur_res, cur_jac = system.evaluate(cur_x)
        iterations += 1
        if float(np.max(np.abs(cur_res))) < best_res:
            best_x, best_res = cur_x, float(np.max(np.abs(cur_res)))

    return _RestartOutcome(
        x=best_x,
        objective=float(best_x @ best_x),
        residual=best_res,
        stationarity=stationarity,
        iterations=iterations,
    )


def search(spec: SearchSpec) -> SearchResult:
    """Search for an order-``r`` tableau with ``m`` stages.

    Runs ``spec.restarts`` independent penalty homotopies from uniform
    random initial coefficients and merges deterministically: the feasible
    restart with the lowest objective wins, earlier restarts breaking ties.
    With no feasible restart the run is classified as ``infeasible`` when
    the best residual stayed above ``1e-4`` while at least one restart
    reached a stationary point, and ``budget-exhausted`` otherwise.
    """
    system = _ConditionSystem(spec.m, spec.r, spec.abscissae())
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    inits = rng.uniform(-1.0, 1.0, size=(spec.restarts, system.n_vars))

    best_found: _RestartOutcome | None = None
    best_anywhere: _RestartOutcome | None = None
    any_stationary = False
    total_iterations = 0
    for idx in range(spec.restarts):
        outcome = _solve_restart(system, inits[idx], spec)
        total_iterations += outcome.iterations
        if outcome.stationarity < STATIONARITY_TOL:
            any_stationary = True
        if best_anywhere is None or outcome.residual < best_anywhere.residual:
            best_anywhere = outcome
        if outcome.residual <= spec.tol and (
            best_found is None or outcome.objective < best_found.objective
        ):
            best_found = outcome

    if best_found is not None:
        tableau = system.tableau(best_found.x)
        report = check_Cr(tableau, spec.r, tol=spec.tol)
        if not report.passed:
            raise RuntimeError(
                "internal error: search result fails its own condition check: "
                f"{report.failures()!r}"
            )
        if spec.r <= TABLE1_MAX_ORDER:
            cross = check_table1(tableau, spec.r, tol=max(spec.tol * 100.0, 1e-8))
            if not cross.passed:
                raise RuntimeError(
                    "internal error: search result fails the scalar-condition "
                    f"cross-check: {cross.failures()!r}"
                )
        return SearchResult(
            status="found",
            tableau=tableau,
            objective=best_found.objective,
            max_residual=best_found.residual,
            iterations=total_iterations,
        )

    assert best_anywhere is not None  # restarts >= 1
    status = (
        "infeasible"
        if best_anywhere.residual > INFEASIBLE_RESIDUAL and any_stationary
        else "budget-exhausted"
    )
    return SearchResult(
        status=status,
        tableau=None,
        objective=best_anywhere.objective,
        max_residual=best_anywhere.residual,
        iterations=total_iterations,
    )
