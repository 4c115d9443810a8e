"""Built-in Butcher tableaux and tableau serialization.

Seven named schemes are provided: the backward Euler-type one-stage scheme,
the classical two- and three-stage families (parametrized by their interior
abscissae and evaluated from closed forms), and four numerically optimized
coefficient sets of orders four and five with equispaced abscissae
``c_i = 1 - i/m``.  The optimized constants are embedded verbatim at full
printed precision; entries not listed in the source tables are zero.
"""

from __future__ import annotations

import json

import numpy as np

from .order_conditions import ButcherTableau

__all__ = [
    "BUILTIN_NAMES",
    "DEFAULT_PARAMS",
    "builtin",
    "parse_tableau",
    "render_tableau",
    "serialize_tableau",
]

#: Guard radius around excluded parameter points (domain endpoints and the
#: removable singularity of the three-stage closed form).
_PARAM_GUARD = 1e-9

#: Default parameters for the parametrized families: the midpoint two-stage
#: scheme and the (2/3, 1/3) three-stage scheme used throughout the
#: numerical studies.
DEFAULT_PARAMS: dict[str, tuple[float, ...]] = {
    "euler": (),
    "rk2": (0.5,),
    "rk3": (2 / 3, 1 / 3),
    "rk4_5": (),
    "rk4_6": (),
    "rk5_7": (),
    "rk5_8": (),
}

BUILTIN_NAMES = tuple(DEFAULT_PARAMS)

#: Nominal consistency order of each built-in scheme.
NOMINAL_ORDER: dict[str, int] = {
    "euler": 1,
    "rk2": 2,
    "rk3": 3,
    "rk4_5": 4,
    "rk4_6": 4,
    "rk5_7": 5,
    "rk5_8": 5,
}


def _equispaced_c(m: int) -> np.ndarray:
    return np.array([1.0 - i / m for i in range(m + 1)])


def _from_sparse(m: int, entries: dict[tuple[int, int], float], b: list[float]) -> ButcherTableau:
    """Build a tableau from 1-based sparse ``a`` entries and ``b = (b_1 … b_m)``."""
    a = np.zeros((m, m))
    for (i, j), value in entries.items():
        a[i - 1, j - 1] = value
    return ButcherTableau(m=m, a=a, b=np.array(b), c=_equispaced_c(m))


def _euler() -> ButcherTableau:
    return ButcherTableau(m=1, a=np.zeros((1, 1)), b=np.array([1.0]), c=np.array([1.0, 0.0]))


def _rk2(c1: float) -> ButcherTableau:
    if not _PARAM_GUARD < c1 < 1.0 - _PARAM_GUARD:
        raise ValueError(
            f"rk2 requires 0 < c_1 < 1 (away from the endpoints by {_PARAM_GUARD:g}), "
            f"got c_1 = {c1!r}"
        )
    a = np.zeros((2, 2))
    a[0, 1] = c1
    b = np.array([1 / (2 * c1), 1 - 1 / (2 * c1)])
    return ButcherTableau(m=2, a=a, b=b, c=np.array([1.0, c1, 0.0]))


def _rk3(c1: float, c2: float) -> ButcherTableau:
    if not (
        _PARAM_GUARD < c2
        and c2 + _PARAM_GUARD < c1
        and c1 < 1.0 - _PARAM_GUARD
    ):
        raise ValueError(
            f"rk3 requires 0 < c_2 < c_1 < 1 (pairwise separated by {_PARAM_GUARD:g}), "
            f"got c_1 = {c1!r}, c_2 = {c2!r}"
        )
    if abs(c2 - 2 / 3) <= _PARAM_GUARD:
        raise ValueError(
            f"rk3 is singular at c_2 = 2/3; got c_2 = {c2!r} within {_PARAM_GUARD:g} of it"
        )
    a = np.zeros((3, 3))
    a[1, 2] = c2
    a[0, 2] = c1 * (3 * c2 - 3 * c2**2 - c1) / (c2 * (2 - 3 * c2))
    a[0, 1] = c1 * (c1 - c2) / (c2 * (2 - 3 * c2))
    b = np.array(
        [
            (2 - 3 * c2) / (6 * c1 * (c1 - c2)),
            (3 * c1 - 2) / (6 * c2 * (c1 - c2)),
            (-3 * c1 + 6 * c2 * c1 + 2 - 3 * c2) / (6 * c2 * c1),
        ]
    )
    return ButcherTableau(m=3, a=a, b=b, c=np.array([1.0, c1, c2, 0.0]))


def _rk4_5() -> ButcherTableau:
    entries = {
        (4, 5): 0.2,
        (3, 5): -0.13242233706502626,
        (3, 4): 0.5324223370650263,
        (2, 5): 0.019886552336434136,
        (2, 4): 0.24294264564990678,
        (2, 3): 0.3371708020136592,
        (1, 5): 0.1963917348918804,
        (1, 4): -0.005472324607713924,
        (1, 3): 0.2464094480422048,
        (1, 2): 0.36267114167362885,
    }
    b = [
        0.5045641480285504,
        -0.1432565921142024,
        0.31905155483797115,
        0.27341007455246313,
        0.04623081469521772,
    ]
    return _from_sparse(5, entries, b)


def _rk4_6() -> ButcherTableau:
    entries = {
        (5, 6): 1 / 6,
        (4, 6): -0.025061513556965075,
        (4, 5): 0.3583948468902984,
        (3, 6): 0.13841067828110443,
        (3, 5): 0.1693249424852804,
        (3, 4): 0.1922643792336152,
        (2, 6): -0.0038511700476725353,
        (2, 5): 0.09581249968889799,
        (2, 4): 0.22659933188130044,
        (2, 3): 0.34810600514414075,
        (1, 6): 0.16161918775745476,
        (1, 5): 0.10244745111384074,
        (1, 4): 0.1276198408649451,
        (1, 3): 0.12764301041543388,
        (1, 2): 0.31400384318165875,
    }
    b = [
        0.3514488504169638,
        0.12968537675712494,
        -0.033230011198136004,
        0.3070892688820228,
        0.2095257367170438,
        0.03548077842498064,
    ]
    return _from_sparse(6, entries, b)


def _rk5_7() -> ButcherTableau:
    entries = {
        (6, 7): 1 / 7,
        (5, 7): -0.00849922984652299,
        (5, 6): 0.2942135155608087,
        (4, 7): 0.012111601574373559,
        (4, 6): 0.027194944061276653,
        (4, 5): 0.3892648829357783,
        (3, 7): 0.17649344547970258,
        (3, 6): 0.038519474866316364,
        (3, 5): 0.013295135548829034,
        (3, 4): 0.3431205155337234,
        (2, 7): 0.20775831541493936,
        (2, 6): -0.0013035026399939747,
        (2, 5): 0.05244696764836481,
        (2, 4): 0.24416745620882727,
        (2, 3): 0.21121647765357676,
        (1, 7): 0.04201635027665935,
        (1, 6): 0.16939620723268453,
        (1, 5): 0.17374202049423548,
        (1, 4): 0.1849766339309189,
        (1, 3): -0.053226048370035584,
        (1, 2): 0.3402376935783944,
    }
    b = [
        0.3688702662486858,
        -0.12974529206631724,
        0.2976169110457616,
        0.021246618173088202,
        0.3316242728057178,
        0.018048818525724868,
        0.09233840526733901,
    ]
    return _from_sparse(7, entries, b)


def _rk5_8() -> ButcherTableau:
    entries = {
        (7, 8): 1 / 8,
        (6, 8): -0.019695026811446536,
        (6, 7): 0.2696950268114465,
        (5, 8): 0.12027883922164721,
        (5, 7): -0.025389113361355534,
        (5, 6): 0.28011027413970835,
        (4, 8): 0.17348303333838974,
        (4, 7): 0.15121241994785925,
        (4, 6): 0.11261192763186804,
        (4, 5): 0.06269261908188303,
        (3, 8): 0.027377326034266746,
        (3, 7): 0.048508067745817715,
        (3, 6): 0.14412177807635515,
        (3, 5): 0.2178666996537625,
        (3, 4): 0.18712612848979787,
        (2, 8): 0.12076055643080501,
        (2, 7): 0.07237536565936713,
        (2, 6): 0.1519401323946871,
        (2, 5): 0.16024192906367374,
        (2, 4): -0.07416278224686454,
        (2, 3): 0.3188447986983316,
        (1, 8): 0.03658677645498778,
        (1, 7): 0.08834233979368933,
        (1, 6): 0.20873825484619646,
        (1, 5): 0.22487804433654632,
        (1, 4): -0.017586277300601805,
        (1, 3): 0.03916189598076387,
        (1, 2): 0.29487896588841805,
    }
    b = [
        0.25882300131865577,
        0.10972598940350983,
        0.044156049175500874,
        -0.01436402197198115,
        0.3625707619097686,
        0.14240515226981773,
        -0.005963693910170281,
        0.10264676180489864,
    ]
    return _from_sparse(8, entries, b)


_FACTORIES = {
    "euler": _euler,
    "rk2": _rk2,
    "rk3": _rk3,
    "rk4_5": _rk4_5,
    "rk4_6": _rk4_6,
    "rk5_7": _rk5_7,
    "rk5_8": _rk5_8,
}

_PARAM_COUNT = {"euler": 0, "rk2": 1, "rk3": 2, "rk4_5": 0, "rk4_6": 0, "rk5_7": 0, "rk5_8": 0}


def builtin(name: str, *params: float) -> ButcherTableau:
    """Return a built-in tableau by name.

    ``rk2`` takes ``c_1`` (default 1/2) and ``rk3`` takes ``(c_1, c_2)``
    (default (2/3, 1/3)); the remaining schemes take no parameters.
    Raises ``ValueError`` for unknown names, wrong parameter counts, or
    parameters at/near the excluded points of the closed forms.
    """
    if name not in _FACTORIES:
        raise ValueError(
            f"unknown scheme {name!r}; available: {', '.join(BUILTIN_NAMES)}"
        )
    expected = _PARAM_COUNT[name]
    values = tuple(float(p) for p in params) if params else DEFAULT_PARAMS[name]
    if len(values) != expected:
        raise ValueError(
            f"scheme {name!r} takes {expected} parameter(s), got {len(values)}"
        )
    return _FACTORIES[name](*values)


def serialize_tableau(tab: ButcherTableau, *, indent: int | None = 2) -> str:
    """Serialize a tableau to the JSON layout accepted by :func:`parse_tableau`."""
    payload = {
        "m": tab.m,
        "a": tab.a.tolist(),
        "b": tab.b.tolist(),
        "c": tab.c.tolist(),
    }
    return json.dumps(payload, indent=indent)


def parse_tableau(text: str) -> ButcherTableau:
    """Parse the JSON tableau layout and validate its structure.

    The document must be an object with exactly the fields ``m`` (stage
    count), ``a`` (m×m), ``b`` (length m), and ``c`` (length m+1).
    Structural violations — badly ordered abscissae or nonzero entries in
    the forbidden triangle — are rejected with the violated condition
    named.
    """
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"could not parse tableau JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ValueError("tableau JSON must be an object with fields m, a, b, c")
    required = {"m", "a", "b", "c"}
    missing = required - payload.keys()
    if missing:
        raise ValueError(f"tableau JSON missing field(s): {', '.join(sorted(missing))}")
    extra = payload.keys() - required
    if extra:
        raise ValueError(f"tableau JSON has unknown field(s): {', '.join(sorted(extra))}")
    tab = ButcherTableau(m=payload["m"], a=payload["a"], b=payload["b"], c=payload["c"])
    problems = tab.structural_violations()
    if problems:
        raise ValueError("; ".join(problems))
    return tab


def render_tableau(tab: ButcherTableau) -> str:
    """Render the tableau in its decreasing-stage-index layout.

    Rows run from stage ``m`` (abscissa 0) down to stage 1, followed by the
    quadrature row at abscissa 1; columns hold the weights for stages
    ``m … 1``.  Structurally zero entries are left blank.
    """

    def fmt(x: float) -> str:
        return repr(float(x))

    m = tab.m
    rows: list[list[str]] = []
    for i in range(m, 0, -1):
        cells = [fmt(tab.c[i])]
        for j in range(m, 0, -1):
            cells.append("" if j <= i else fmt(tab.a[i - 1, j - 1]))
        rows.append(cells)
    rows.append([fmt(tab.c[0])] + [fmt(tab.b[j - 1]) for j in range(m, 0, -1)])
    widths = [max(len(r[col]) for r in rows) for col in range(m + 1)]
    lines = []
    for idx, cells in enumerate(rows):
        if idx == m:
            lines.append("-" * (widths[0] + 1) + "+" + "-" * (sum(widths[1:]) + 2 * m))
        padded = [cells[col].rjust(widths[col]) for col in range(m + 1)]
        lines.append((padded[0] + " | " + "  ".join(padded[1:])).rstrip())
    return "\n".join(lines)
