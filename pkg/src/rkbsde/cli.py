"""Command-line interface tying the library together.

One executable, six subcommands::

    rkbsde trees        --order 4 [--minus]
    rkbsde conditions   --order 3 [--render]
    rkbsde check        --tableau euler --order 2
    rkbsde search       --stages 5 --order 4
    rkbsde solve        --example 2 --scheme rk3 --N 30
    rkbsde convergence  --example 2 --scheme euler

Every subcommand accepts ``--config FILE`` (a JSON object of option
defaults; explicit flags win), ``--emit md|csv|json`` and ``--output PATH``.
Markdown reports round numbers to three significant digits; CSV and JSON
carry full precision.  Output is byte-deterministic for a fixed
configuration: wall-clock columns appear only with ``--include-runtime``.

Exit codes: ``0`` success (or a passing check / a found search), ``2`` a
*determinate* negative outcome (a failed check, an infeasible search),
``1`` a runtime failure, ``64`` a usage error.  Reports go to stdout,
diagnostics to stderr.  Numeric kernels honor ``OMP_NUM_THREADS`` for
BLAS-backed operations.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from .coeff_search import SearchResult, SearchSpec, search
from .experiments import L_FOR_ORDER, convergence_study, example1, example2, linf_error
from .order_conditions import (
    TABLE1_MAX_ORDER,
    ButcherTableau,
    check_Cr,
    check_table1,
    render_condition,
)
from .solver import SolveConfig, SolverError, solve
from .tableaux import BUILTIN_NAMES, NOMINAL_ORDER, builtin, parse_tableau, render_tableau
from .trees import (
    MAX_ENUMERATION_ORDER,
    alpha,
    enumerate_trees,
    enumerate_trees_minus,
    factorial,
    format_tree,
    level,
    order as tree_order,
    symmetry,
)

__all__ = ["CliConfig", "main"]

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_DETERMINATE_FAIL = 2
EXIT_USAGE = 64

_EMIT_CHOICES = ("md", "csv", "json")


class _UsageError(Exception):
    """A problem with flags or config values, reported with exit code 64."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


@dataclass(frozen=True)
class CliConfig:
    """Merged, validated options of one invocation.

    Precedence: hard defaults, then the ``--config`` JSON file, then
    explicit flags.  Unknown config keys are rejected.
    """

    subcommand: str
    order: int | None = None
    minus: bool = False
    render: bool = False
    tableau: str | None = None
    params: tuple[float, ...] = ()
    stages: int | None = None
    abscissae: tuple[float, ...] | None = None
    tol: float | None = None
    budget: int | None = None
    restarts: int | None = None
    seed: int | None = None
    example: int | None = None
    scheme: str | None = None
    N: int | None = None
    N_list: tuple[int, ...] | None = None
    M: int | None = None
    l: int | None = None
    domain: tuple[float, float] | None = None
    include_runtime: bool = False
    emit: str = "md"
    output: str | None = None

    def validate(self) -> None:
        if self.emit not in _EMIT_CHOICES:
            raise _UsageError(
                f"--emit must be one of {', '.join(_EMIT_CHOICES)}, got {self.emit!r}"
            )
        if self.subcommand in ("trees", "conditions", "check", "search"):
            if self.order is None:
                raise _UsageError("--order is required")
            if not 1 <= self.order <= MAX_ENUMERATION_ORDER:
                raise _UsageError(
                    f"--order must be in 1..{MAX_ENUMERATION_ORDER}, got {self.order}"
                )
        if self.subcommand == "check" and not self.tableau:
            raise _UsageError("--tableau is required (a built-in name or a JSON file path)")
        if self.subcommand == "search" and self.stages is None:
            raise _UsageError("--stages is required")
        if self.subcommand in ("solve", "convergence"):
            if self.example not in (1, 2):
                raise _UsageError("--example must be 1 or 2")
            if not self.scheme:
                raise _UsageError("--scheme is required")
            if self.scheme not in BUILTIN_NAMES:
                raise _UsageError(
                    f"unknown scheme {self.scheme!r}; available: {', '.join(BUILTIN_NAMES)}"
                )
        if self.subcommand == "solve" and self.N is None:
            raise _UsageError("--N is required")


_HARD_DEFAULTS: dict[str, dict[str, object]] = {
    "trees": {"minus": False},
    "conditions": {"render": False},
    "check": {"params": ()},
    "search": {"tol": 1e-8, "budget": 500, "restarts": 32, "seed": 0},
    "solve": {"params": (), "M": 16, "include_runtime": False},
    "convergence": {
        "params": (),
        "M": 16,
        "N_list": (30, 40, 54, 70, 90),
        "include_runtime": False,
    },
}

_SEQUENCE_KEYS = {"params", "abscissae", "N_list", "domain"}


def _comma_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers, got {text!r}"
        ) from None


def _comma_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}"
        ) from None


def _domain_arg(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}")
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, metavar="FILE",
                   help="JSON object of option defaults; explicit flags override it")
    p.add_argument("--emit", choices=_EMIT_CHOICES, default=None,
                   help="output format (default: md)")
    p.add_argument("--output", default=None, metavar="PATH",
                   help="write the report to PATH instead of stdout")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="rkbsde",
        description="Stage-tableau calculus and a grid solver for "
        "backward stochastic differential equations.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("trees", help="tabulate rooted-tree statistics")
    p.add_argument("--order", type=int, default=None, help="highest tree order")
    p.add_argument("--minus", action="store_true", default=None,
                   help="restrict to the reduced set entering the order conditions")
    _add_common(p)

    p = sub.add_parser("conditions", help="list the order conditions")
    p.add_argument("--order", type=int, default=None, help="target consistency order")
    p.add_argument("--render", action="store_true", default=None,
                   help="include each condition as a rendered equation")
    _add_common(p)

    p = sub.add_parser("check", help="verify a tableau against the order conditions")
    p.add_argument("--tableau", default=None,
                   help="built-in scheme name or path to a tableau JSON file")
    p.add_argument("--order", type=int, default=None, help="order to verify")
    p.add_argument("--params", type=_comma_floats, default=None, metavar="X[,Y...]",
                   help="parameters for a parametrized built-in scheme")
    p.add_argument("--tol", type=float, default=None, help="residual tolerance")
    _add_common(p)

    p = sub.add_parser("search", help="search stage coefficients for a target order")
    p.add_argument("--stages", type=int, default=None, help="stage count")
    p.add_argument("--order", type=int, default=None, help="target consistency order")
    p.add_argument("--abscissae", type=_comma_floats, default=None, metavar="C0[,C1...]",
                   help="fixed abscissae c_0..c_m (default: equispaced)")
    p.add_argument("--tol", type=float, default=None, help="residual tolerance")
    p.add_argument("--budget", type=int, default=None, help="iteration cap per restart")
    p.add_argument("--restarts", type=int, default=None, help="random restarts")
    p.add_argument("--seed", type=int, default=None, help="restart generator seed")
    _add_common(p)

    p = sub.add_parser("solve", help="run one backward sweep on a benchmark problem")
    p.add_argument("--example", type=int, default=None, help="benchmark problem, 1 or 2")
    p.add_argument("--scheme", default=None, help="built-in scheme name")
    p.add_argument("--params", type=_comma_floats, default=None, metavar="X[,Y...]",
                   help="parameters for a parametrized built-in scheme")
    p.add_argument("--N", type=int, default=None, help="number of time steps")
    p.add_argument("--M", type=int, default=None, help="quadrature points (default: 16)")
    p.add_argument("--l", type=int, default=None,
                   help="interpolation degree (default: per-order protocol)")
    p.add_argument("--order", type=int, default=None,
                   help="nominal order for the mesh rule (default: the scheme's)")
    p.add_argument("--domain", type=_domain_arg, default=None, metavar="A,B",
                   help="interval of interest (default: the problem's)")
    p.add_argument("--include-runtime", action="store_true", default=None,
                   dest="include_runtime", help="add wall-clock timings to the report")
    _add_common(p)

    p = sub.add_parser("convergence", help="error table and fitted rates across N")
    p.add_argument("--example", type=int, default=None, help="benchmark problem, 1 or 2")
    p.add_argument("--scheme", default=None, help="built-in scheme name")
    p.add_argument("--params", type=_comma_floats, default=None, metavar="X[,Y...]",
                   help="parameters for a parametrized built-in scheme")
    p.add_argument("--N-list", type=_comma_ints, default=None, dest="N_list",
                   metavar="N1,N2[,...]", help="step counts (default: 30,40,54,70,90)")
    p.add_argument("--M", type=int, default=None, help="quadrature points (default: 16)")
    p.add_argument("--l", type=int, default=None,
                   help="interpolation degree (default: per-order protocol)")
    p.add_argument("--order", type=int, default=None,
                   help="nominal order for mesh and degree (default: the scheme's)")
    p.add_argument("--domain", type=_domain_arg, default=None, metavar="A,B",
                   help="error window (default: the problem's domain)")
    p.add_argument("--include-runtime", action="store_true", default=None,
                   dest="include_runtime", help="add wall-clock timings to the report")
    _add_common(p)

    return parser


def _load_config_file(path: str, allowed: set[str], subcommand: str) -> dict[str, object]:
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise _UsageError(f"cannot read config file {path!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise _UsageError(f"config file {path!r} is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise _UsageError(f"config file {path!r} must hold a JSON object")
    values: dict[str, object] = {}
    for key, value in payload.items():
        if key not in allowed:
            raise _UsageError(
                f"unknown config key {key!r} for subcommand {subcommand!r}"
            )
        if key in _SEQUENCE_KEYS and isinstance(value, list):
            value = tuple(value)
        values[key] = value
    return values


def _merge_options(ns: argparse.Namespace) -> CliConfig:
    subcommand = ns.subcommand
    flag_values = {
        key: value
        for key, value in vars(ns).items()
        if key not in ("subcommand", "config")
    }
    merged: dict[str, object] = dict(_HARD_DEFAULTS.get(subcommand, {}))
    if ns.config is not None:
        merged.update(_load_config_file(ns.config, set(flag_values), subcommand))
    merged.update({key: value for key, value in flag_values.items() if value is not None})
    known = {f.name for f in fields(CliConfig)}
    unknown = set(merged) - known
    if unknown:  # unreachable from the parser; guards future flag additions
        raise _UsageError(f"unknown option(s): {', '.join(sorted(unknown))}")
    cfg = CliConfig(subcommand=subcommand, **merged)
    cfg.validate()
    return cfg


def _csv_text(rows: list[list[object]]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _json_text(payload: object) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _resolve_builtin(name: str, params: tuple[float, ...]) -> ButcherTableau:
    try:
        return builtin(name, *params)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None


def _scheme_label(name: str, params: tuple[float, ...]) -> str:
    if not params:
        return name
    return f"{name}({', '.join(format(p, 'g') for p in params)})"


def _cmd_trees(cfg: CliConfig) -> tuple[str, int]:
    tree_set = enumerate_trees_minus(cfg.order) if cfg.minus else enumerate_trees(cfg.order)
    rows = [
        {
            "index": i + 1,
            "tree": format_tree(t),
            "L": level(t),
            "order": tree_order(t),
            "S": symmetry(t),
            "gamma": factorial(t),
            "alpha": alpha(t),
        }
        for i, t in enumerate(tree_set.trees)
    ]
    if cfg.emit == "json":
        return _json_text({"order": cfg.order, "reduced": cfg.minus, "trees": rows}), EXIT_OK
    if cfg.emit == "csv":
        table = [["index", "tree", "L", "order", "S", "gamma", "alpha"]]
        table += [[r["index"], r["tree"], r["L"], r["order"], r["S"], r["gamma"], r["alpha"]] for r in rows]
        return _csv_text(table), EXIT_OK
    variant = "reduced set" if cfg.minus else "full set"
    lines = [
        f"# Tree statistics through order {cfg.order} ({variant})",
        "",
        "| # | tree | L | order | S | gamma | alpha |",
        "|---:|:---|---:|---:|---:|---:|---:|",
    ]
    for r in rows:
        lines.append(
            f"| {r['index']} | `{r['tree']}` | {r['L']} | {r['order']} "
            f"| {r['S']} | {r['gamma']} | {r['alpha']} |"
        )
    noun = "tree" if len(rows) == 1 else "trees"
    lines += ["", f"{len(rows)} {noun}."]
    return "\n".join(lines) + "\n", EXIT_OK


def _cmd_conditions(cfg: CliConfig) -> tuple[str, int]:
    trees = enumerate_trees_minus(cfg.order).trees
    rows = []
    for i, t in enumerate(trees):
        row = {"index": i + 1, "tree": format_tree(t), "order": tree_order(t)}
        if cfg.render:
            row["condition"] = render_condition(t)
        rows.append(row)
    if cfg.emit == "json":
        return (
            _json_text({"order": cfg.order, "rendered": cfg.render, "conditions": rows}),
            EXIT_OK,
        )
    if cfg.emit == "csv":
        header = ["index", "tree", "order"] + (["condition"] if cfg.render else [])
        table = [header] + [[row[key] for key in header] for row in rows]
        return _csv_text(table), EXIT_OK
    lines = [
        f"# Order conditions through order {cfg.order}",
        "",
        "A tableau is consistent at this order when, besides one",
        "quadrature-weight condition per stage, the weighted elementary",
        "sum of every tree below vanishes.",
        "",
    ]
    if cfg.render:
        lines += ["| # | tree | order | condition |", "|---:|:---|---:|:---|"]
        for row in rows:
            lines.append(
                f"| {row['index']} | `{row['tree']}` | {row['order']} | {row['condition']} |"
            )
    else:
        lines += ["| # | tree | order |", "|---:|:---|---:|"]
        for row in rows:
            lines.append(f"| {row['index']} | `{row['tree']}` | {row['order']} |")
    noun = "condition" if len(rows) == 1 else "conditions"
    lines += ["", f"{len(rows)} {noun}."]
    return "\n".join(lines) + "\n", EXIT_OK


def _load_tableau(cfg: CliConfig) -> ButcherTableau:
    assert cfg.tableau is not None
    if cfg.tableau in BUILTIN_NAMES:
        return _resolve_builtin(cfg.tableau, cfg.params)
    if os.path.exists(cfg.tableau):
        with open(cfg.tableau, encoding="utf-8") as fh:
            return parse_tableau(fh.read())
    raise _UsageError(
        f"unknown tableau {cfg.tableau!r}: not a built-in name "
        f"({', '.join(BUILTIN_NAMES)}) and no such file"
    )


def _cmd_check(cfg: CliConfig) -> tuple[str, int]:
    tab = _load_tableau(cfg)
    tol_args = {} if cfg.tol is None else {"tol": cfg.tol}
    reports = []
    if cfg.order <= TABLE1_MAX_ORDER:
        reports.append(check_table1(tab, cfg.order, **tol_args))
    reports.append(check_Cr(tab, cfg.order, **tol_args))
    passed = all(r.passed for r in reports)
    code = EXIT_OK if passed else EXIT_DETERMINATE_FAIL
    if cfg.emit == "json":
        payload = {
            "tableau": cfg.tableau,
            "order": cfg.order,
            "pass": passed,
            "checks": [json.loads(r.to_json()) for r in reports],
        }
        return _json_text(payload), code
    if cfg.emit == "csv":
        table: list[list[object]] = [["kind", "condition", "residual", "status"]]
        for r in reports:
            failing = {name for name, _ in r.failures()}
            for msg in r.structural_errors:
                table.append([r.kind, "structure", "", msg])
            for name, residual in r.residuals:
                status = "FAIL" if name in failing else "ok"
                table.append([r.kind, name, repr(residual), status])
        return _csv_text(table), code
    parts = [r.to_markdown().rstrip() for r in reports]
    verdict = "PASS" if passed else "FAIL"
    return "\n\n".join(parts) + f"\n\noverall: {verdict}\n", code


def _cmd_search(cfg: CliConfig) -> tuple[str, int]:
    try:
        spec = SearchSpec(
            m=cfg.stages,
            r=cfg.order,
            c=cfg.abscissae,
            tol=cfg.tol,
            budget=cfg.budget,
            restarts=cfg.restarts,
            seed=cfg.seed,
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    result: SearchResult = search(spec)
    if result.status == "found":
        code = EXIT_OK
    elif result.status == "infeasible":
        code = EXIT_DETERMINATE_FAIL
    else:
        code = EXIT_FAILURE
    if cfg.emit == "json":
        payload = {
            "stages": cfg.stages,
            "order": cfg.order,
            "seed": cfg.seed,
            **json.loads(result.to_json()),
        }
        return _json_text(payload), code
    if cfg.emit == "csv":
        table = [
            ["status", "objective", "max_residual", "iterations"],
            [result.status, repr(result.objective), repr(result.max_residual), result.iterations],
        ]
        return _csv_text(table), code
    lines = [
        f"# Coefficient search: {cfg.stages} stage{'' if cfg.stages == 1 else 's'}, "
        f"target order {cfg.order}",
        "",
        f"status: {result.status}",
        f"objective: {result.objective:.2e}",
        f"max residual: {result.max_residual:.2e}",
        f"iterations: {result.iterations}",
    ]
    if result.tableau is not None:
        lines += ["", "```", render_tableau(result.tableau).rstrip(), "```"]
    return "\n".join(lines) + "\n", code


def _benchmark_problem(example: int):
    return example1() if example == 1 else example2()


def _solve_setup(cfg: CliConfig):
    problem = _benchmark_problem(cfg.example)
    tab = _resolve_builtin(cfg.scheme, cfg.params)
    nominal = NOMINAL_ORDER[cfg.scheme]
    order = cfg.order if cfg.order is not None else nominal
    l = cfg.l
    if l is None:
        l = L_FOR_ORDER.get(order)
        if l is None:
            raise _UsageError(
                f"no default interpolation degree for order {order}; pass --l"
            )
    domain = cfg.domain if cfg.domain is not None else problem.domain
    return problem, tab, order, l, domain


def _cmd_solve(cfg: CliConfig) -> tuple[str, int]:
    problem, tab, order, l, domain = _solve_setup(cfg)
    try:
        solve_cfg = SolveConfig(
            tableau=tab, N=cfg.N, domain=domain, l=l, M=cfg.M, order=order
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    sol = solve(problem, solve_cfg)
    exact_y = lambda x: problem.exact_y(0.0, x)
    exact_z = lambda x: problem.exact_z(0.0, x)
    err_y = linf_error(sol.y0, exact_y, domain)
    err_z = linf_error(sol.z0, exact_z, domain)
    label = _scheme_label(cfg.scheme, cfg.params)
    if cfg.emit == "csv":
        return sol.to_csv(exact_y=exact_y, exact_z=exact_z), EXIT_OK
    if cfg.emit == "json":
        payload: dict[str, object] = {
            "example": cfg.example,
            "scheme": label,
            "config": {
                "N": cfg.N,
                "M": cfg.M,
                "l": l,
                "order": order,
                "domain": list(domain),
                "h": sol.y0.h,
            },
            "errY": err_y,
            "errZ": err_z,
            "x": sol.y0.xs().tolist(),
            "y0": sol.y0.values.tolist(),
            "z0": sol.z0.values.tolist(),
        }
        if cfg.include_runtime:
            payload["runtime"] = sol.runtime
        return _json_text(payload), EXIT_OK
    conf = ", ".join(
        f"{k}={v}"
        for k, v in sorted(
            {
                "M": cfg.M,
                "l": l,
                "order": order,
                "domain": list(domain),
                "h": format(sol.y0.h, ".6g"),
            }.items()
        )
    )
    lines = [
        f"# Solve: example {cfg.example}, {label}, N={cfg.N}",
        "",
        f"Configuration: {conf}",
        "",
    ]
    header = "| N | errY | errZ |"
    rule = "|---:|---:|---:|"
    row = f"| {cfg.N} | {err_y:.2e} | {err_z:.2e} |"
    if cfg.include_runtime:
        header += " RT(s) |"
        rule += "---:|"
        row += f" {sol.runtime:.2f} |"
    lines += [header, rule, row]
    return "\n".join(lines) + "\n", EXIT_OK


def _cmd_convergence(cfg: CliConfig) -> tuple[str, int]:
    problem, tab, order, l, domain = _solve_setup(cfg)
    label = _scheme_label(cfg.scheme, cfg.params)
    try:
        report = convergence_study(
            problem,
            tab,
            order,
            list(cfg.N_list),
            M=cfg.M,
            l=l,
            domain=domain,
            scheme=label,
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    if cfg.emit == "json":
        return report.to_json(include_runtime=cfg.include_runtime) + "\n", EXIT_OK
    if cfg.emit == "csv":
        return report.to_csv(include_runtime=cfg.include_runtime), EXIT_OK
    return report.to_markdown(include_runtime=cfg.include_runtime), EXIT_OK


_DISPATCH = {
    "trees": _cmd_trees,
    "conditions": _cmd_conditions,
    "check": _cmd_check,
    "search": _cmd_search,
    "solve": _cmd_solve,
    "convergence": _cmd_convergence,
}


def _write_output(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
        cfg = _merge_options(ns)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        text, code = _DISPATCH[cfg.subcommand](cfg)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    _write_output(text, cfg.output)
    return code


if __name__ == "__main__":
    sys.exit(main())
