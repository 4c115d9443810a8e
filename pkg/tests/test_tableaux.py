"""Tests for the built-in tableaux and tableau serialization."""

from __future__ import annotations

import json

import numpy as np
import pytest

from rkbsde.order_conditions import check_Cr, check_table1
from rkbsde.tableaux import (
    BUILTIN_NAMES,
    DEFAULT_PARAMS,
    NOMINAL_ORDER,
    builtin,
    parse_tableau,
    render_tableau,
    serialize_tableau,
)


class TestBuiltins:
    def test_names(self) -> None:
        assert BUILTIN_NAMES == ("euler", "rk2", "rk3", "rk4_5", "rk4_6", "rk5_7", "rk5_8")
        assert set(NOMINAL_ORDER) == set(BUILTIN_NAMES)
        assert set(DEFAULT_PARAMS) == set(BUILTIN_NAMES)

    def test_all_builtins_pass_nominal_order(self) -> None:
        for name, r in NOMINAL_ORDER.items():
            tab = builtin(name)
            assert tab.structural_violations() == ()
            table_report = check_table1(tab, r, tol=1e-9)
            tree_report = check_Cr(tab, r, tol=1e-9)
            assert table_report.passed, f"{name}: {table_report.failures()}"
            assert tree_report.passed, f"{name}: {tree_report.failures()}"

    def test_euler_is_exact(self) -> None:
        tab = builtin("euler")
        assert tab.m == 1
        assert tab.a.tolist() == [[0.0]]
        assert tab.b.tolist() == [1.0]
        assert tab.c.tolist() == [1.0, 0.0]

    def test_two_stage_default(self) -> None:
        tab = builtin("rk2")
        assert tab.c.tolist() == [1.0, 0.5, 0.0]
        assert tab.a[0, 1] == 0.5
        assert tab.b.tolist() == [1.0, 0.0]

    def test_two_stage_family(self) -> None:
        for c1 in (0.3, 0.5, 2 / 3, 0.9):
            tab = builtin("rk2", c1)
            assert tab.a[0, 1] == c1
            assert tab.b[0] == pytest.approx(1 / (2 * c1))
            assert check_table1(tab, 2, tol=1e-12).passed
            assert check_Cr(tab, 2, tol=1e-12).passed

    def test_three_stage_default_values(self) -> None:
        tab = builtin("rk3")
        assert tab.c.tolist() == pytest.approx([1.0, 2 / 3, 1 / 3, 0.0])
        assert tab.a[1, 2] == pytest.approx(1 / 3)
        assert tab.a[0, 1] == pytest.approx(2 / 3)
        assert tab.a[0, 2] == pytest.approx(0.0, abs=1e-15)
        assert tab.b.tolist() == pytest.approx([3 / 4, 0.0, 1 / 4])

    def test_three_stage_family(self) -> None:
        rng = np.random.default_rng(2024)
        samples = []
        while len(samples) < 10:
            c1 = rng.uniform(0.3, 0.95)
            c2 = rng.uniform(0.05, c1 - 0.1)
            if abs(c2 - 2 / 3) < 2e-3:
                continue
            samples.append((c1, c2))
        for c1, c2 in samples:
            tab = builtin("rk3", c1, c2)
            assert check_table1(tab, 3, tol=1e-10).passed
            assert check_Cr(tab, 3, tol=1e-10).passed

    def test_three_stage_closed_forms(self) -> None:
        # Independent transcription of the closed-form coefficients.
        for c1, c2 in ((0.8, 0.25), (0.55, 0.4), (2 / 3, 1 / 3)):
            tab = builtin("rk3", c1, c2)
            denom = c2 * (2 - 3 * c2)
            assert tab.a[1, 2] == pytest.approx(c2, rel=1e-14)
            assert tab.a[0, 2] == pytest.approx(
                c1 * (3 * c2 - 3 * c2**2 - c1) / denom, rel=1e-14, abs=1e-16
            )
            assert tab.a[0, 1] == pytest.approx(c1 * (c1 - c2) / denom, rel=1e-14)
            assert tab.b[2] == pytest.approx(
                (-3 * c1 + 6 * c2 * c1 + 2 - 3 * c2) / (6 * c2 * c1), rel=1e-14
            )
            assert tab.b[1] == pytest.approx(
                (3 * c1 - 2) / (6 * c2 * (c1 - c2)), rel=1e-14, abs=1e-16
            )
            assert tab.b[0] == pytest.approx((2 - 3 * c2) / (6 * c1 * (c1 - c2)), rel=1e-14)

    def test_optimized_spot_values(self) -> None:
        tab = builtin("rk4_5")
        assert tab.m == 5
        assert tab.a[3, 4] == 0.2
        assert tab.b[4] == 0.04623081469521772
        assert tab.a[0, 1] == 0.36267114167362885
        tab = builtin("rk5_8")
        assert tab.m == 8
        assert tab.a[6, 7] == 1 / 8
        assert tab.b[0] == 0.25882300131865577

    def test_optimized_abscissae_are_equispaced(self) -> None:
        for name in ("rk4_5", "rk4_6", "rk5_7", "rk5_8"):
            tab = builtin(name)
            m = tab.m
            assert tab.c.tolist() == [1.0 - i / m for i in range(m + 1)]
            assert tab.c[0] == 1.0
            assert tab.c[m] == 0.0

    def test_two_stage_parameter_domain(self) -> None:
        for bad in (0.0, 1.0, -0.2, 1.3, 5e-10, 1 - 5e-10):
            with pytest.raises(ValueError, match="rk2"):
                builtin("rk2", bad)

    def test_three_stage_parameter_domain(self) -> None:
        for c1, c2 in ((0.5, 0.5), (0.3, 0.6), (1.0, 0.3), (0.6, 0.0), (0.6, -0.1)):
            with pytest.raises(ValueError, match="rk3"):
                builtin("rk3", c1, c2)

    def test_three_stage_singularity_guard(self) -> None:
        for c2 in (2 / 3, 2 / 3 + 1e-10, 2 / 3 - 1e-10):
            with pytest.raises(ValueError, match="singular"):
                builtin("rk3", 0.9, c2)
        # Just outside the guard the family is fine.
        assert check_table1(builtin("rk3", 0.9, 2 / 3 + 1e-6), 3, tol=1e-6).passed

    def test_unknown_name(self) -> None:
        with pytest.raises(ValueError, match="unknown scheme"):
            builtin("rk9")

    def test_wrong_parameter_count(self) -> None:
        with pytest.raises(ValueError, match="parameter"):
            builtin("euler", 0.5)
        with pytest.raises(ValueError, match="parameter"):
            builtin("rk3", 0.5)
        with pytest.raises(ValueError, match="parameter"):
            builtin("rk2", 0.5, 0.25)


class TestSerialization:
    def test_round_trip_all_builtins(self) -> None:
        for name in BUILTIN_NAMES:
            tab = builtin(name)
            assert parse_tableau(serialize_tableau(tab)) == tab

    def test_parse_minimal_document(self) -> None:
        text = '{"m": 1, "a": [[0.0]], "b": [1.0], "c": [1.0, 0.0]}'
        assert parse_tableau(text) == builtin("euler")

    def test_parse_rejects_malformed_json(self) -> None:
        with pytest.raises(ValueError, match="could not parse"):
            parse_tableau("{not json")

    def test_parse_rejects_non_object(self) -> None:
        with pytest.raises(ValueError, match="object"):
            parse_tableau("[1, 2, 3]")

    def test_parse_rejects_missing_and_unknown_fields(self) -> None:
        with pytest.raises(ValueError, match="missing field"):
            parse_tableau('{"m": 1, "a": [[0.0]], "b": [1.0]}')
        with pytest.raises(ValueError, match="unknown field"):
            parse_tableau('{"m": 1, "a": [[0.0]], "b": [1.0], "c": [1.0, 0.0], "x": 1}')

    def test_parse_rejects_bad_shapes(self) -> None:
        with pytest.raises(ValueError, match="shape"):
            parse_tableau('{"m": 2, "a": [[0.0]], "b": [1.0, 0.0], "c": [1.0, 0.5, 0.0]}')

    def test_parse_rejects_unordered_abscissae(self) -> None:
        payload = json.loads(serialize_tableau(builtin("rk2")))
        payload["c"] = [1.0, 1.0, 0.0]
        with pytest.raises(ValueError, match=r"condition \(1\)"):
            parse_tableau(json.dumps(payload))

    def test_parse_rejects_implicit_entries(self) -> None:
        payload = json.loads(serialize_tableau(builtin("rk2")))
        payload["a"][1][0] = 0.3
        with pytest.raises(ValueError, match=r"condition \(2\).*a_\{21\}"):
            parse_tableau(json.dumps(payload))

    def test_serialized_document_is_plain_json(self) -> None:
        payload = json.loads(serialize_tableau(builtin("rk4_6")))
        assert set(payload) == {"m", "a", "b", "c"}
        assert payload["m"] == 6
        assert payload["b"][5] == 0.03548077842498064


class TestRenderTableau:
    def test_one_stage_layout(self) -> None:
        assert render_tableau(builtin("euler")) == "0.0 |\n----+-----\n1.0 | 1.0"

    def test_rows_run_from_stage_m_to_quadrature(self) -> None:
        lines = render_tableau(builtin("rk3")).split("\n")
        assert len(lines) == 5  # three stage rows, separator, quadrature row
        assert lines[0].endswith("|")  # stage m row is structurally blank
        assert lines[-1].lstrip().startswith("1.0 |")

    def test_contains_all_printed_coefficients(self) -> None:
        text = render_tableau(builtin("rk4_5"))
        assert "0.04623081469521772" in text
        assert "0.5324223370650263" in text
        assert "-0.1432565921142024" in text

    def test_deterministic(self) -> None:
        tab = builtin("rk5_7")
        assert render_tableau(tab) == render_tableau(tab)
