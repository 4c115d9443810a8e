"""Tests for elementary coefficients, order-condition checks, and rendering."""

from __future__ import annotations

import json
import random

import numpy as np
import pytest

from rkbsde.order_conditions import (
    DEFAULT_TOL,
    ButcherTableau,
    check_Cr,
    check_table1,
    elementary_coefficient,
    render_condition,
)
from rkbsde.tableaux import NOMINAL_ORDER, builtin
from rkbsde.trees import (
    Tree,
    canonicalize,
    enumerate_trees,
    enumerate_trees_minus,
    format_tree,
    graft,
    leaf,
)


def _elem_direct(tab: ButcherTableau, t: Tree, j: int) -> float:
    """Plain-loop evaluation of the defining recursion (independent oracle)."""
    row = tab.b if j == 0 else tab.a[j - 1]
    total = 0.0
    for q in range(1, tab.m + 1):
        term = row[q - 1] * (tab.c[j] - tab.c[q]) ** t.label
        for child in t.children:
            term *= _elem_direct(tab, child, q)
        total += term
    if not t.children:
        total -= tab.c[j] ** (t.label + 1) / (t.label + 1)
    return total


def _random_tableau(rng: np.random.Generator, m: int) -> ButcherTableau:
    """Structurally valid tableau with otherwise arbitrary coefficients."""
    interior = np.sort(rng.uniform(0.02, 0.98, size=m - 1))[::-1]
    c = np.concatenate([[1.0], interior, [0.0]])
    a = np.zeros((m, m))
    for i in range(1, m + 1):
        for q in range(i + 1, m + 1):
            a[i - 1, q - 1] = rng.uniform(-1.0, 1.0)
    b = rng.uniform(-1.0, 1.0, size=m)
    return ButcherTableau(m=m, a=a, b=b, c=c)


def _random_consistent_tableau(rng: np.random.Generator, m: int) -> ButcherTableau:
    """Random tableau with exact row sums ``c_i`` and unit quadrature sum."""
    interior = np.sort(rng.uniform(0.05, 0.95, size=m - 1))[::-1]
    c = np.concatenate([[1.0], interior, [0.0]])
    a = np.zeros((m, m))
    for i in range(1, m):  # stage m has no admissible columns and c_m = 0
        cols = np.arange(i + 1, m + 1)
        raw = rng.uniform(-1.0, 1.0, size=cols.size)
        raw += (c[i] - raw.sum()) / cols.size
        a[i - 1, cols - 1] = raw
    b = rng.uniform(-1.0, 1.0, size=m)
    b += (1.0 - b.sum()) / m
    return ButcherTableau(m=m, a=a, b=b, c=c)


def _scramble(t: Tree, rng: random.Random) -> Tree:
    """Random non-canonical representative of the equivalence class of ``t``."""
    children = [_scramble(child, rng) for child in t.children]
    rng.shuffle(children)
    return Tree(t.label, tuple(children))


class TestButcherTableau:
    def test_shape_validation(self) -> None:
        with pytest.raises(ValueError, match="a must have shape"):
            ButcherTableau(m=2, a=np.zeros((2, 3)), b=np.zeros(2), c=np.array([1.0, 0.5, 0.0]))
        with pytest.raises(ValueError, match="b must have shape"):
            ButcherTableau(m=2, a=np.zeros((2, 2)), b=np.zeros(3), c=np.array([1.0, 0.5, 0.0]))
        with pytest.raises(ValueError, match="c must have shape"):
            ButcherTableau(m=2, a=np.zeros((2, 2)), b=np.zeros(2), c=np.array([1.0, 0.0]))

    def test_stage_count_validation(self) -> None:
        for bad in (0, -1, True, 2.0, "2"):
            with pytest.raises(ValueError, match="stage count"):
                ButcherTableau(m=bad, a=np.zeros((1, 1)), b=np.ones(1), c=np.array([1.0, 0.0]))

    def test_non_finite_rejected(self) -> None:
        a = np.zeros((2, 2))
        a[0, 1] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            ButcherTableau(m=2, a=a, b=np.zeros(2), c=np.array([1.0, 0.5, 0.0]))

    def test_arrays_are_read_only(self) -> None:
        tab = builtin("rk2")
        with pytest.raises(ValueError):
            tab.b[0] = 5.0
        with pytest.raises(ValueError):
            tab.a[0, 1] = 5.0

    def test_row(self) -> None:
        tab = builtin("rk2")
        assert np.array_equal(tab.row(0), tab.b)
        assert np.array_equal(tab.row(1), tab.a[0])
        assert np.array_equal(tab.row(2), tab.a[1])
        with pytest.raises(IndexError):
            tab.row(3)
        with pytest.raises(IndexError):
            tab.row(-1)

    def test_builtins_are_structurally_clean(self) -> None:
        for name in NOMINAL_ORDER:
            assert builtin(name).structural_violations() == ()

    def test_structural_violation_endpoints(self) -> None:
        tab = ButcherTableau(m=2, a=np.zeros((2, 2)), b=np.ones(2) / 2, c=np.array([0.9, 0.5, 0.0]))
        messages = tab.structural_violations()
        assert any("condition (1)" in msg and "c_0" in msg for msg in messages)
        tab = ButcherTableau(m=2, a=np.zeros((2, 2)), b=np.ones(2) / 2, c=np.array([1.0, 0.5, 0.1]))
        messages = tab.structural_violations()
        assert any("condition (1)" in msg and "c_m" in msg for msg in messages)

    def test_structural_violation_ordering(self) -> None:
        tab = ButcherTableau(m=2, a=np.zeros((2, 2)), b=np.ones(2) / 2, c=np.array([1.0, 1.0, 0.0]))
        assert any("strictly decrease" in msg for msg in tab.structural_violations())

    def test_structural_violation_explicitness(self) -> None:
        a = np.zeros((2, 2))
        a[1, 0] = 0.3
        tab = ButcherTableau(m=2, a=a, b=np.ones(2) / 2, c=np.array([1.0, 0.5, 0.0]))
        messages = tab.structural_violations()
        assert any("condition (2)" in msg and "a_{21}" in msg for msg in messages)
        a = np.zeros((2, 2))
        a[0, 0] = 1e-300  # diagonal entries are forbidden too
        tab = ButcherTableau(m=2, a=a, b=np.ones(2) / 2, c=np.array([1.0, 0.5, 0.0]))
        assert any("a_{11}" in msg for msg in tab.structural_violations())

    def test_equality_is_structural(self) -> None:
        assert builtin("rk3") == builtin("rk3")
        assert builtin("rk3") != builtin("rk3", 0.7, 0.3)
        assert builtin("euler") != builtin("rk2")
        assert builtin("euler") != object()


class TestElementaryCoefficient:
    def test_euler_values(self) -> None:
        tab = builtin("euler")
        assert elementary_coefficient(tab, leaf(0), 0) == 0.0
        assert elementary_coefficient(tab, leaf(1), 0) == 0.5

    def test_midpoint_two_stage_kills_first_label(self) -> None:
        tab = builtin("rk2")
        assert elementary_coefficient(tab, leaf(1), 0) == pytest.approx(0.0, abs=1e-15)

    def test_stage_m_vanishes_identically(self) -> None:
        for name in ("euler", "rk2", "rk3", "rk4_5"):
            tab = builtin(name)
            for t in enumerate_trees(4):
                assert elementary_coefficient(tab, t, tab.m) == 0.0

    def test_stage_index_range(self) -> None:
        tab = builtin("rk2")
        with pytest.raises(IndexError):
            elementary_coefficient(tab, leaf(0), 3)
        with pytest.raises(IndexError):
            elementary_coefficient(tab, leaf(0), -1)

    def test_matches_direct_recursion(self) -> None:
        trees = enumerate_trees(5)
        for seed, m in [(1, 1), (2, 2), (3, 3), (4, 4), (5, 3)]:
            tab = _random_tableau(np.random.default_rng(seed), m)
            for t in trees:
                for j in range(m + 1):
                    assert elementary_coefficient(tab, t, j) == pytest.approx(
                        _elem_direct(tab, t, j), rel=1e-11, abs=1e-12
                    )

    def test_representative_invariance(self) -> None:
        rng = random.Random(7)
        tab = _random_tableau(np.random.default_rng(11), 4)
        for t in enumerate_trees(5):
            scrambled = _scramble(t, rng)
            for j in range(tab.m + 1):
                assert elementary_coefficient(tab, scrambled, j) == elementary_coefficient(
                    tab, t, j
                )


class TestCheckCr:
    def test_euler_order_one_passes(self) -> None:
        report = check_Cr(builtin("euler"), 1)
        assert report.passed
        assert report.max_residual == 0.0
        assert report.kind == "C(1)"

    def test_euler_order_two_fails_on_first_label(self) -> None:
        report = check_Cr(builtin("euler"), 2)
        assert not report.passed
        assert report.residual("[ ]_1") == 0.5
        assert report.failures() == (("[ ]_1", 0.5),)

    def test_residual_keys(self) -> None:
        tab = builtin("rk3")
        report = check_Cr(tab, 3)
        keys = [key for key, _ in report.residuals]
        stage_keys = [f"stage {i}: [ ]_0" for i in range(tab.m + 1)]
        tree_keys = [format_tree(t) for t in enumerate_trees_minus(3)]
        assert keys == stage_keys + tree_keys
        assert len(keys) == tab.m + 1 + 3

    def test_builtins_pass_both_formulations(self) -> None:
        for name, r in NOMINAL_ORDER.items():
            tab = builtin(name)
            assert check_Cr(tab, r, tol=1e-9).passed
            assert check_table1(tab, r, tol=1e-9).passed

    def test_builtins_fail_above_nominal_order(self) -> None:
        for name, r in NOMINAL_ORDER.items():
            if r >= 5:
                continue
            tab = builtin(name)
            assert not check_Cr(tab, r + 1, tol=1e-9).passed
            assert not check_table1(tab, r + 1, tol=1e-9).passed

    def test_reduced_set_covers_all_trees(self) -> None:
        # Passing C(r) forces the root coefficient of *every* tree of order
        # <= r to vanish, not only those checked explicitly.
        for name, r in NOMINAL_ORDER.items():
            tab = builtin(name)
            assert check_Cr(tab, r, tol=1e-9).passed
            for t in enumerate_trees(r):
                assert elementary_coefficient(tab, t, 0) == pytest.approx(0.0, abs=1e-9)

    def test_branch_vanishing_propagation(self) -> None:
        # Exact row sums plus unit quadrature sum make every stage kill
        # [ ]_0, so all trees containing it as a branch drop out at every
        # stage regardless of the remaining coefficients.
        minus = set(enumerate_trees_minus(5))
        for seed, m in [(21, 2), (22, 3), (23, 4)]:
            tab = _random_consistent_tableau(np.random.default_rng(seed), m)
            for t in enumerate_trees(5):
                if t in minus:
                    continue
                for j in range(m + 1):
                    assert elementary_coefficient(tab, t, j) == pytest.approx(0.0, abs=1e-12)

    def test_structural_failure_reported_not_raised(self) -> None:
        a = np.zeros((2, 2))
        a[1, 0] = 0.25
        tab = ButcherTableau(m=2, a=a, b=np.array([1.0, 0.0]), c=np.array([1.0, 0.5, 0.0]))
        report = check_Cr(tab, 1)
        assert not report.passed
        assert report.structural_errors
        assert report.residuals  # residuals are still evaluated and reported

    def test_invalid_inputs(self) -> None:
        tab = builtin("euler")
        with pytest.raises(ValueError):
            check_Cr(tab, 0)
        with pytest.raises(ValueError):
            check_Cr(tab, 9)
        with pytest.raises(ValueError, match="tolerance"):
            check_Cr(tab, 1, tol=0.0)


class TestCheckTable1:
    def test_euler_order_one_passes(self) -> None:
        report = check_table1(builtin("euler"), 1)
        assert report.passed
        assert [key for key, _ in report.residuals] == ["(3)", "(4)"]

    def test_euler_order_two_fails_condition_five(self) -> None:
        report = check_table1(builtin("euler"), 2)
        assert not report.passed
        assert report.residual("(5)") == -0.5
        assert [key for key, _ in report.failures()] == ["(5)"]

    def test_three_stage_default_is_tight(self) -> None:
        assert check_table1(builtin("rk3"), 3, tol=1e-12).passed

    def test_condition_subsets(self) -> None:
        tab = builtin("rk5_7")
        last = {1: 4, 2: 5, 3: 7, 4: 11, 5: 20}
        for r, stop in last.items():
            keys = [key for key, _ in check_table1(tab, r).residuals]
            assert keys == [f"({n})" for n in range(3, stop + 1)]

    def test_orders_above_table_rejected(self) -> None:
        with pytest.raises(ValueError, match="check_Cr"):
            check_table1(builtin("rk5_8"), 6)

    def test_invalid_inputs(self) -> None:
        tab = builtin("euler")
        for bad in (0, -2, True, 1.5):
            with pytest.raises(ValueError):
                check_table1(tab, bad)
        with pytest.raises(ValueError, match="tolerance"):
            check_table1(tab, 1, tol=-1.0)

    def test_row_sum_defect_is_condition_three(self) -> None:
        a = np.zeros((2, 2))
        a[0, 1] = 0.75  # row sum 0.75 against c_1 = 0.5
        tab = ButcherTableau(m=2, a=a, b=np.array([1.0, 0.0]), c=np.array([1.0, 0.5, 0.0]))
        report = check_table1(tab, 1)
        assert report.residual("(3)") == pytest.approx(0.25)


class TestRenderCondition:
    def test_frozen_examples(self) -> None:
        assert render_condition(leaf(0)) == "Σ_j b_j = 1"
        assert render_condition(leaf(1)) == "Σ_j b_j(1−c_j) = 1/2"
        assert (
            render_condition(graft([leaf(1)], 0))
            == "Σ_{i,j} b_i a_{ij}(c_i−c_j) = Σ_i b_i c_i²/2"
        )

    def test_single_branch_zero_labels(self) -> None:
        assert render_condition(graft([leaf(0)], 0)) == "Σ_{i,j} b_i a_{ij} = Σ_i b_i c_i"

    def test_labelled_chain(self) -> None:
        assert (
            render_condition(graft([leaf(1)], 1))
            == "Σ_{i,j} b_i(1−c_i) a_{ij}(c_i−c_j) = Σ_i b_i(1−c_i) c_i²/2"
        )

    def test_representative_invariance(self) -> None:
        rng = random.Random(3)
        for t in enumerate_trees(5):
            assert render_condition(_scramble(t, rng)) == render_condition(t)

    def test_index_pool_extends(self) -> None:
        t = leaf(0)
        for _ in range(9):
            t = graft([t], 0)
        assert "i10" in render_condition(t)

    def test_higher_labels_use_caret(self) -> None:
        text = render_condition(leaf(9))
        assert "(1−c_j)⁹" in text and text.endswith("= 1/10")
        assert "^10" in render_condition(leaf(10))


class TestConditionReport:
    def test_json_payload(self) -> None:
        report = check_Cr(builtin("rk2"), 2)
        payload = json.loads(report.to_json())
        assert payload["kind"] == "C(2)"
        assert payload["pass"] is True
        assert payload["tol"] == DEFAULT_TOL
        assert payload["structural_errors"] == []
        for key, value in report.residuals:
            assert payload["residuals"][key] == value  # full-precision round trip

    def test_markdown_rendering(self) -> None:
        good = check_Cr(builtin("rk2"), 2).to_markdown()
        assert "PASS" in good and "| condition | residual | status |" in good
        bad = check_Cr(builtin("euler"), 2).to_markdown()
        assert "FAIL" in bad and "`[ ]_1`" in bad

    def test_markdown_lists_structural_errors(self) -> None:
        a = np.zeros((2, 2))
        a[1, 0] = 0.25
        tab = ButcherTableau(m=2, a=a, b=np.array([1.0, 0.0]), c=np.array([1.0, 0.5, 0.0]))
        text = check_Cr(tab, 1).to_markdown()
        assert "structural violation" in text and "condition (2)" in text

    def test_residual_lookup_raises_on_unknown_key(self) -> None:
        report = check_Cr(builtin("euler"), 1)
        with pytest.raises(KeyError):
            report.residual("(99)")

    def test_max_residual_empty(self) -> None:
        report = check_table1(builtin("euler"), 1)
        assert report.max_residual >= 0.0
