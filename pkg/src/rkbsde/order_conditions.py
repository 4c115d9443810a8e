"""Order conditions for explicit backward Runge-Kutta tableaux.

A tableau is consistent of order ``r`` when its elementary coefficients
vanish over the reduced tree set: ``A_i([ ]_0) = 0`` for every stage row
``i = 0..m`` together with ``A_0(t) = 0`` for every tree ``t`` of order at
most ``r`` that neither is ``[ ]_0`` nor contains it as a branch
(:func:`rkbsde.trees.enumerate_trees_minus`).  For orders up to five the
same content is available as the twenty classical scalar conditions
(:func:`check_table1`); for arbitrary order use :func:`check_Cr`.

Stage indices run *down* from ``m`` to ``1``, with the quadrature row ``b``
acting as stage ``0`` and abscissae ``1 = c_0 > c_1 > … > c_m = 0``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .trees import (
    Tree,
    canonicalize,
    enumerate_trees_minus,
    format_tree,
    leaf,
)

__all__ = [
    "C_MIN_GAP",
    "DEFAULT_TOL",
    "TABLE1_MAX_ORDER",
    "ButcherTableau",
    "ConditionReport",
    "check_Cr",
    "check_table1",
    "elementary_coefficient",
    "render_condition",
]

#: Minimum gap enforced between consecutive abscissae by the structural check.
C_MIN_GAP = 1e-12

#: Default residual tolerance, suited to analytically specified tableaux.
#: Numerically optimized coefficient sets warrant a looser 1e-8.
DEFAULT_TOL = 1e-10

#: Largest order covered by the classical scalar condition table.
TABLE1_MAX_ORDER = 5


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """Coefficient arrays of an explicit backward Runge-Kutta scheme.

    Attributes
    ----------
    m : int
        Stage count.
    a : numpy.ndarray, shape (m, m)
        Stage weights; ``a[i-1, j-1]`` holds the weight ``a_{ij}`` with
        which stage ``i`` consumes stage ``j``.  Explicit schemes have
        ``a_{ij} = 0`` for ``j <= i``.
    b : numpy.ndarray, shape (m,)
        Quadrature row, acting as the row of stage ``0``.
    c : numpy.ndarray, shape (m + 1,)
        Abscissae ``(c_0, …, c_m)`` with ``c_0 = 1`` and ``c_m = 0``;
        stage ``i`` lives at time ``t_{n+1} - c_i * dt``.

    Construction validates shapes, dtype coercion, and finiteness only;
    the structural order conditions are checked by
    :meth:`structural_violations` so that invalid tableaux can still be
    diagnosed by :func:`check_Cr` / :func:`check_table1`.
    """

    m: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self) -> None:
        if isinstance(self.m, bool) or not isinstance(self.m, int) or self.m < 1:
            raise ValueError(f"stage count m must be a positive integer, got {self.m!r}")
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        c = np.array(self.c, dtype=float)
        if a.shape != (self.m, self.m):
            raise ValueError(f"a must have shape ({self.m}, {self.m}), got {a.shape}")
        if b.shape != (self.m,):
            raise ValueError(f"b must have shape ({self.m},), got {b.shape}")
        if c.shape != (self.m + 1,):
            raise ValueError(f"c must have shape ({self.m + 1},), got {c.shape}")
        for name, arr in (("a", a), ("b", b), ("c", c)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        a.flags.writeable = False
        b.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    def row(self, i: int) -> np.ndarray:
        """Return the weight row of stage ``i``: ``b`` for ``i = 0``,
        otherwise the ``a`` row of stage ``i``."""
        if not 0 <= i <= self.m:
            raise IndexError(f"stage index {i} out of range 0..{self.m}")
        return self.b if i == 0 else self.a[i - 1]

    def structural_violations(self, *, min_gap: float = C_MIN_GAP) -> tuple[str, ...]:
        """Check the two structural conditions; return violation messages.

        Condition (1): ``c_0 = 1``, ``c_m = 0``, and the abscissae strictly
        decrease with a gap of at least ``min_gap``.  Condition (2):
        ``a_{ij} = 0`` exactly whenever ``j <= i``.
        """
        problems = []
        if self.c[0] != 1.0:
            problems.append(f"condition (1): c_0 must equal 1, got {self.c[0]!r}")
        if self.c[self.m] != 0.0:
            problems.append(f"condition (1): c_m must equal 0, got {self.c[self.m]!r}")
        diffs = self.c[:-1] - self.c[1:]
        if np.any(diffs < min_gap):
            worst = int(np.argmin(diffs))
            problems.append(
                "condition (1): abscissae must strictly decrease "
                f"(c_{worst} - c_{worst + 1} = {diffs[worst]:.3e} < {min_gap:.0e})"
            )
        lower = np.tril(np.ones((self.m, self.m), dtype=bool))
        bad = lower & (self.a != 0.0)
        if np.any(bad):
            i, j = (int(v[0]) for v in np.nonzero(bad))
            problems.append(
                f"condition (2): explicit tableau requires a_{{{i + 1}{j + 1}}} = 0, "
                f"got {self.a[i, j]!r}"
            )
        return tuple(problems)

    def structurally_equal(self, other: "ButcherTableau") -> bool:
        """Exact equality of stage count and all coefficient entries."""
        return (
            isinstance(other, ButcherTableau)
            and self.m == other.m
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.c, other.c)
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ButcherTableau):
            return NotImplemented
        return self.structurally_equal(other)

    def __repr__(self) -> str:
        return f"ButcherTableau(m={self.m})"


def _coefficient_vector(
    tab: ButcherTableau, t: Tree, memo: dict[Tree, np.ndarray]
) -> np.ndarray:
    """Vector ``(A_0(t), …, A_m(t))`` for one tree, with memoized subtrees."""
    t = canonicalize(t)
    hit = memo.get(t)
    if hit is not None:
        return hit
    rows = np.vstack([tab.b, tab.a])  # row i = weight row of stage i
    diffs = tab.c[:, None] - tab.c[None, 1:]  # diffs[i, j-1] = c_i - c_j
    weighted = rows * diffs**t.label
    if not t.children:
        vec = weighted.sum(axis=1) - tab.c ** (t.label + 1) / (t.label + 1)
    else:
        inner = math.prod(
            _coefficient_vector(tab, child, memo)[1:] for child in t.children
        )
        vec = weighted @ inner
    memo[t] = vec
    return vec


def elementary_coefficient(tab: ButcherTableau, t: Tree, j: int) -> float:
    """Elementary coefficient ``A_j(t)`` of tableau ``tab`` at stage row ``j``.

    For a leaf with label ``k``:
    ``A_j = sum_q row(j)_q (c_j - c_q)^k - c_j^(k+1) / (k+1)``; for an inner
    node the subtractive term is replaced by the product of the children's
    coefficients inside the sum.  Stage ``m`` always yields 0 on an explicit
    tableau, and ``j = 0`` uses the quadrature row with ``c_0 = 1``.
    """
    if not 0 <= j <= tab.m:
        raise IndexError(f"stage index {j} out of range 0..{tab.m}")
    return float(_coefficient_vector(tab, t, {})[j])


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of an order-condition check.

    Attributes
    ----------
    kind : str
        Which condition set was evaluated, e.g. ``"C(3)"`` or
        ``"table(order 3)"``.
    tol : float
        Residual tolerance used for the pass/fail verdict.
    residuals : tuple[tuple[str, float], ...]
        Ordered ``(condition key, signed residual)`` pairs; keys are tree
        notations (with a stage prefix for the per-stage conditions) or
        scalar-condition numbers.
    structural_errors : tuple[str, ...]
        Violations of the exact structural conditions; any entry fails the
        report regardless of residual size.
    """

    kind: str
    tol: float
    residuals: tuple[tuple[str, float], ...]
    structural_errors: tuple[str, ...] = ()

    @property
    def max_residual(self) -> float:
        """Largest absolute residual (0.0 when no residuals were evaluated)."""
        return max((abs(v) for _, v in self.residuals), default=0.0)

    @property
    def passed(self) -> bool:
        """True iff structure is exact and every residual is within ``tol``."""
        return not self.structural_errors and self.max_residual <= self.tol

    def failures(self) -> tuple[tuple[str, float], ...]:
        """The residual entries exceeding ``tol``."""
        return tuple((k, v) for k, v in self.residuals if abs(v) > self.tol)

    def residual(self, key: str) -> float:
        """Look up one residual by its condition key."""
        for k, v in self.residuals:
            if k == key:
                return v
        raise KeyError(key)

    def to_json(self, *, indent: int | None = 2) -> str:
        """Serialize at full precision."""
        payload = {
            "kind": self.kind,
            "pass": self.passed,
            "tol": self.tol,
            "max_residual": self.max_residual,
            "structural_errors": list(self.structural_errors),
            "residuals": {k: v for k, v in self.residuals},
        }
        return json.dumps(payload, indent=indent)

    def to_markdown(self) -> str:
        """Render a compact table (3 significant digits)."""
        verdict = "PASS" if self.passed else "FAIL"
        lines = [
            f"**{self.kind}** — tol {self.tol:.2e}, "
            f"max residual {self.max_residual:.2e} — {verdict}",
            "",
        ]
        for msg in self.structural_errors:
            lines.append(f"- structural violation: {msg}")
        if self.structural_errors:
            lines.append("")
        lines.append("| condition | residual | status |")
        lines.append("| --- | --- | --- |")
        for key, value in self.residuals:
            status = "ok" if abs(value) <= self.tol else "FAIL"
            lines.append(f"| `{key}` | {value:.2e} | {status} |")
        return "\n".join(lines)


def check_Cr(tab: ButcherTableau, r: int, tol: float = DEFAULT_TOL) -> ConditionReport:
    """Evaluate the order-``r`` condition set ``C(r)`` on ``tab``.

    Residuals comprise ``A_i([ ]_0)`` for every stage row ``i = 0..m``
    (these reduce to the row sums and the quadrature-weight sum) plus
    ``A_0(t)`` for every tree ``t`` in the reduced set of order ≤ ``r``.
    Passing implies all root coefficients of order ≤ ``r`` vanish, the
    remaining ones being zero by branch propagation.
    """
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol!r}")
    minus = enumerate_trees_minus(r)  # validates r as well
    memo: dict[Tree, np.ndarray] = {}
    root = leaf(0)
    root_vec = _coefficient_vector(tab, root, memo)
    residuals = [
        (f"stage {i}: {format_tree(root)}", float(root_vec[i])) for i in range(tab.m + 1)
    ]
    for t in minus:
        residuals.append((format_tree(t), float(_coefficient_vector(tab, t, memo)[0])))
    return ConditionReport(
        kind=f"C({r})",
        tol=tol,
        residuals=tuple(residuals),
        structural_errors=tab.structural_violations(),
    )


def _table1_residuals(tab: ButcherTableau, last: int) -> list[tuple[str, float]]:
    """Scalar conditions (3)..(last) as (key, residual) pairs."""
    a = tab.a
    b = tab.b
    c = tab.c[1:]  # c_1 … c_m, aligned with the rows of a and entries of b
    ac = a @ c
    ac2 = a @ c**2
    ac3 = a @ c**3
    aac = a @ ac
    conditions: dict[int, float] = {
        3: float(np.max(np.abs(c - a.sum(axis=1)))),
        4: float(b.sum() - 1.0),
        5: float(b @ c - 1 / 2),
        6: float(b @ c**2 - 1 / 3),
        7: float(b @ ac - 1 / 6),
        8: float(b @ c**3 - 1 / 4),
        9: float((b * c) @ ac - 1 / 8),
        10: float(b @ ac2 - 1 / 12),
        11: float(b @ aac - 1 / 24),
        12: float(b @ c**4 - 1 / 5),
        13: float((b * c**2) @ ac - 1 / 10),
        14: float((b * c) @ ac2 - 1 / 15),
        15: float((b * c) @ aac - 1 / 30),
        16: float(b @ ac**2 - 1 / 20),
        17: float(b @ ac3 - 1 / 20),
        18: float(b @ (a @ (c * ac)) - 1 / 40),
        19: float(b @ (a @ ac2) - 1 / 60),
        20: float(b @ (a @ aac) - 1 / 120),
    }
    return [(f"({n})", conditions[n]) for n in range(3, last + 1)]


#: Final scalar-condition number required for each order 1..5.
_TABLE1_LAST = {1: 4, 2: 5, 3: 7, 4: 11, 5: 20}


def check_table1(
    tab: ButcherTableau, r: int, tol: float = DEFAULT_TOL
) -> ConditionReport:
    """Evaluate the classical scalar conditions for order ``r`` ≤ 5.

    The condition subset follows the standard numbering: order 1 requires
    (1)–(4), order 2 adds (5), order 3 adds (6)–(7), order 4 adds
    (8)–(11), and order 5 adds (12)–(20).  Conditions (1)–(2) are
    structural (exact); (3) is reported as the largest row-sum defect.
    Orders beyond 5 are not tabulated — use :func:`check_Cr` instead.
    """
    if isinstance(r, bool) or not isinstance(r, int) or r < 1:
        raise ValueError(f"order must be a positive integer, got {r!r}")
    if r > TABLE1_MAX_ORDER:
        raise ValueError(
            f"the scalar condition table covers orders 1..{TABLE1_MAX_ORDER}; "
            f"use check_Cr for order {r}"
        )
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol!r}")
    return ConditionReport(
        kind=f"table(order {r})",
        tol=tol,
        residuals=tuple(_table1_residuals(tab, _TABLE1_LAST[r])),
        structural_errors=tab.structural_violations(),
    )


# ---------------------------------------------------------------------------
# Condition rendering
# ---------------------------------------------------------------------------

_SUPERSCRIPTS = {2: "²", 3: "³", 4: "⁴", 5: "⁵", 6: "⁶", 7: "⁷", 8: "⁸", 9: "⁹"}


def _power(base: str, exponent: int) -> str:
    if exponent == 1:
        return base
    if exponent in _SUPERSCRIPTS:
        return base + _SUPERSCRIPTS[exponent]
    return f"{base}^{exponent}"


def _index_names(t: Tree) -> list[str]:
    """Summation-index names by node position (root first)."""
    count = sum(1 for _ in _walk(t))
    if count == 1:
        return ["j"]
    pool = ["i", "j", "k", "l", "p", "q", "u", "v", "w"]
    while len(pool) < count:
        pool.append(f"i{len(pool) + 1}")
    return pool[:count]


def _walk(t: Tree):
    yield t
    for c in t.children:
        yield from _walk(c)


def _node_head(name: str, parent_name: str | None, k: int) -> str:
    """Factor contributed by a node's own summation.

    The root (``parent_name is None``) contributes its quadrature factor
    ``b_x``; interior edges contribute ``a_{px}``; either carries the
    abscissa difference raised to the node label.
    """
    if parent_name is None:
        head = f"b_{name}"
        if k >= 1:
            head += _power(f"(1−c_{name})", k)
        return head
    head = f"a_{{{parent_name}{name}}}"
    if k >= 1:
        head += _power(f"(c_{parent_name}−c_{name})", k)
    return head


def _remainder(parent_name: str | None, k: int) -> tuple[str, set[str]]:
    """The leaf remainder ``c^(k+1)/(k+1)`` (constant at the root, c_0 = 1)."""
    if parent_name is None:
        return ("1" if k == 0 else f"1/{k + 1}"), set()
    term = _power(f"c_{parent_name}", k + 1)
    if k >= 1:
        term += f"/{k + 1}"
    return term, {parent_name}


def _expand(
    t: Tree, names: list[str], next_id: list[int], parent_name: str | None
) -> list[tuple[int, list[str], list[str]]]:
    """Signed product terms of the coefficient expansion of ``t``.

    Returns ``(sign, factors, index names used)`` triples; factor lists keep
    construction order so rendering is deterministic.
    """
    my_id = next_id[0]
    next_id[0] += 1
    name = names[my_id]
    head = _node_head(name, parent_name, t.label)
    head_uses = [name] if parent_name is None else [parent_name, name]
    if not t.children:
        expand_term = (1, [head], head_uses)
        rem, rem_uses = _remainder(parent_name, t.label)
        remainder_term = (-1, [rem], sorted(rem_uses, key=names.index))
        return [expand_term, remainder_term]
    terms = [(1, [head], head_uses)]
    for child in t.children:
        child_terms = _expand(child, names, next_id, name)
        combined = []
        for sign, factors, uses in terms:
            for csign, cfactors, cuses in child_terms:
                merged = uses + [u for u in cuses if u not in uses]
                combined.append((sign * csign, factors + cfactors, merged))
        terms = combined
    return terms


def render_condition(t: Tree) -> str:
    """Render the root order condition of tree ``t`` as display text.

    The coefficient expansion is split by sign into a left-hand sum of
    tableau monomials and a right-hand remainder, e.g.
    ``render_condition(leaf(1)) == "Σ_j b_j(1−c_j) = 1/2"``.
    """
    t = canonicalize(t)
    names = _index_names(t)
    terms = _expand(t, names, [0], None)
    lhs = [term for term in terms if term[0] > 0]
    rhs = [term for term in terms if term[0] < 0]

    def render(term: tuple[int, list[str], list[str]]) -> str:
        _sign, factors, uses = term
        ordered = sorted(set(uses), key=names.index)
        body = " ".join(factors)
        if not ordered:
            return body
        subscript = ordered[0] if len(ordered) == 1 else "{" + ",".join(ordered) + "}"
        return f"Σ_{subscript} {body}"

    left = " + ".join(render(term) for term in lhs)
    right = " + ".join(render(term) for term in rhs) if rhs else "0"
    return f"{left} = {right}"
