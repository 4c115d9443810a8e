"""Labelled numbered trees and their permutation-equivalence classes.

A labelled numbered tree is a finite rooted tree in which every node carries
a natural-number label and children are ordered.  Trees that differ only by
reordering child lists (recursively, at any node) are regarded as equivalent;
each equivalence class is represented by its *canonical form*, in which every
child list is sorted under a fixed total order on canonical trees.  All
measures defined here (:func:`order`, :func:`symmetry`, :func:`factorial`,
:func:`alpha`, :func:`level`) are invariant under that equivalence.

Bracket notation renders a leaf with label ``k`` as ``[ ]_k`` and an inner
node with children ``C1 … Cl`` and label ``k`` as ``[C1 C2 … Cl]_k``, e.g.
``[[ ]_1]_0`` for a two-node chain.  :func:`format_tree` and
:func:`parse_tree` round-trip this notation.
"""

from __future__ import annotations

import functools
import itertools
import json
import math
from collections.abc import Iterable, Iterator
from dataclasses import dataclass

__all__ = [
    "MAX_ENUMERATION_ORDER",
    "Tree",
    "TreeSet",
    "alpha",
    "canonicalize",
    "enumerate_trees",
    "enumerate_trees_minus",
    "factorial",
    "format_tree",
    "graft",
    "has_branch",
    "leaf",
    "level",
    "order",
    "parse_tree",
    "symmetry",
]

#: Largest order bound accepted by the enumeration routines.  The number of
#: equivalence classes grows quickly with the order; this cap keeps
#: enumeration instantaneous and memory bounded.
MAX_ENUMERATION_ORDER = 8


@dataclass(frozen=True)
class Tree:
    """A labelled numbered tree with ordered children.

    Instances are immutable and hashable; structural equality compares the
    label and the child sequence position-wise.  Canonical representatives
    of equivalence classes are produced by :func:`canonicalize` (or directly
    by :func:`leaf` and :func:`graft`).

    Attributes
    ----------
    label : int
        Natural-number label of the root node.
    children : tuple[Tree, ...]
        Ordered (possibly empty) sequence of subtrees.
    """

    label: int
    children: tuple[Tree, ...] = ()

    def __post_init__(self) -> None:
        if isinstance(self.label, bool) or not isinstance(self.label, int):
            raise TypeError(f"tree label must be an integer, got {self.label!r}")
        if self.label < 0:
            raise ValueError(f"tree label must be >= 0, got {self.label}")
        if not isinstance(self.children, tuple):
            object.__setattr__(self, "children", tuple(self.children))
        for child in self.children:
            if not isinstance(child, Tree):
                raise TypeError(
                    f"children must be Tree instances, got {type(child).__name__}"
                )

    def __repr__(self) -> str:
        return f"Tree({format_tree(self)!r})"


@functools.cache
def order(t: Tree) -> int:
    """Order of a tree: ``1 + label + sum of child orders``.

    Equivalently, the number of nodes plus the sum of all labels.
    """
    return 1 + t.label + sum(order(c) for c in t.children)


@functools.cache
def _key(t: Tree) -> tuple:
    """Canonical sort key: (order, label, child count, children keys)."""
    return (order(t), t.label, len(t.children), tuple(_key(c) for c in t.children))


@functools.cache
def canonicalize(t: Tree) -> Tree:
    """Return the canonical representative of the equivalence class of ``t``.

    Every child list is recursively sorted under the canonical total order;
    the map is idempotent, and two trees are equivalent (equal up to child
    permutations) iff their canonical forms are structurally equal.
    """
    kids = sorted((canonicalize(c) for c in t.children), key=_key)
    return Tree(t.label, tuple(kids))


def leaf(k: int) -> Tree:
    """Return the single-node tree with label ``k`` (canonical by construction)."""
    return Tree(k)


def graft(children: Iterable[Tree], k: int) -> Tree:
    """Join ``children`` under a new root labelled ``k``, canonically.

    The result is independent of the input ordering of ``children``.
    """
    kids = sorted((canonicalize(c) for c in children), key=_key)
    return Tree(k, tuple(kids))


@functools.cache
def symmetry(t: Tree) -> int:
    """Symmetry order ``S``: child-permutation count times child symmetries.

    ``S(t) = N_P * prod S(child)`` where ``N_P`` is the number of
    permutations of the child list that fix it; on a canonical child list
    this is the product of factorials of multiplicities of identical
    children.  Leaves have ``S = 1``.
    """
    t = canonicalize(t)
    n_p = 1
    for _value, run in itertools.groupby(t.children):
        n_p *= math.factorial(sum(1 for _ in run))
    return n_p * math.prod(symmetry(c) for c in t.children)


@functools.cache
def factorial(t: Tree) -> int:
    """Tree factorial ``gamma``: ``label! * l! * prod gamma(child)`` with ``l`` children.

    For a leaf this reduces to ``label!``.
    """
    return (
        math.factorial(t.label)
        * math.factorial(len(t.children))
        * math.prod(factorial(c) for c in t.children)
    )


@functools.cache
def alpha(t: Tree) -> int:
    """Cardinality of the equivalence class of ``t``.

    Counts the distinct ordered-children trees obtainable from ``t`` by
    child permutations at every node: the multinomial coefficient of the
    child-class multiplicities times the product of child cardinalities.
    """
    t = canonicalize(t)
    arrangements = math.factorial(len(t.children))
    for _value, run in itertools.groupby(t.children):
        arrangements //= math.factorial(sum(1 for _ in run))
    return arrangements * math.prod(alpha(c) for c in t.children)


@functools.cache
def level(t: Tree) -> int:
    """Nesting level: 1 for a leaf, else one more than the deepest child."""
    return 1 + max((level(c) for c in t.children), default=0)


def has_branch(t: Tree, b: Tree) -> bool:
    """True iff ``b`` is a child of ``t`` or, recursively, a branch of a child.

    Comparison is up to equivalence (canonical forms).  Leaves have no
    branches; a tree is never a branch of itself unless nested inside.
    """
    return _has_branch(canonicalize(t), canonicalize(b))


def _has_branch(t: Tree, b: Tree) -> bool:
    return any(c == b or _has_branch(c, b) for c in t.children)


@dataclass(frozen=True)
class TreeSet:
    """Ordered collection of distinct canonical trees with orders ≤ ``r``."""

    trees: tuple[Tree, ...]
    r: int

    def __iter__(self) -> Iterator[Tree]:
        return iter(self.trees)

    def __len__(self) -> int:
        return len(self.trees)

    def __contains__(self, t: object) -> bool:
        if not isinstance(t, Tree):
            return False
        return canonicalize(t) in self.trees

    def to_json(self, *, indent: int | None = 2) -> str:
        """Serialize as a JSON list of measure rows, one per tree."""
        rows = [
            {
                "notation": format_tree(t),
                "order": order(t),
                "symmetry": symmetry(t),
                "factorial": factorial(t),
                "alpha": alpha(t),
            }
            for t in self.trees
        ]
        return json.dumps(rows, indent=indent)


def _check_order_bound(r: int) -> None:
    if isinstance(r, bool) or not isinstance(r, int) or r < 1:
        raise ValueError(f"order bound must be a positive integer, got {r!r}")
    if r > MAX_ENUMERATION_ORDER:
        raise ValueError(
            f"order bound {r} exceeds the supported maximum {MAX_ENUMERATION_ORDER}"
        )


@functools.lru_cache(maxsize=None)
def _trees_of_exact_order(n: int) -> tuple[Tree, ...]:
    """All canonical trees of order exactly ``n``, ascending under the key."""
    found = [
        Tree(k, kids) for k in range(n) for kids in _child_multisets(n - 1 - k)
    ]
    found.sort(key=_key)
    return tuple(found)


@functools.lru_cache(maxsize=None)
def _child_multisets(budget: int) -> tuple[tuple[Tree, ...], ...]:
    """All key-sorted tuples of canonical trees with orders summing to ``budget``."""
    if budget == 0:
        return ((),)
    pool = [t for n in range(1, budget + 1) for t in _trees_of_exact_order(n)]
    out: list[tuple[Tree, ...]] = []

    def extend(remaining: int, start: int, acc: list[Tree]) -> None:
        if remaining == 0:
            out.append(tuple(acc))
            return
        for idx in range(start, len(pool)):
            child = pool[idx]
            if order(child) <= remaining:
                acc.append(child)
                extend(remaining - order(child), idx, acc)
                acc.pop()

    extend(budget, 0, [])
    return tuple(out)


def enumerate_trees(r: int) -> TreeSet:
    """Enumerate every equivalence class with order ≤ ``r``.

    Returns a :class:`TreeSet` of canonical forms in ascending canonical
    order, without duplicates.  ``r`` must satisfy
    ``1 ≤ r ≤ MAX_ENUMERATION_ORDER``.
    """
    _check_order_bound(r)
    trees = tuple(
        t for n in range(1, r + 1) for t in _trees_of_exact_order(n)
    )
    return TreeSet(trees, r)


def enumerate_trees_minus(r: int) -> TreeSet:
    """Enumerate classes of order ≤ ``r`` other than ``leaf(0)`` that do not
    contain ``leaf(0)`` as a branch.

    This is the reduced index set over which the root elementary
    coefficients must vanish for order-``r`` consistency, the remaining
    conditions being implied by branch propagation.
    """
    base = enumerate_trees(r)
    root = leaf(0)
    keep = tuple(t for t in base if t != root and not _has_branch(t, root))
    return TreeSet(keep, r)


def format_tree(t: Tree) -> str:
    """Render ``t`` in bracket notation, e.g. ``[[ ]_1]_0``."""
    if not t.children:
        return f"[ ]_{t.label}"
    inner = " ".join(format_tree(c) for c in t.children)
    return f"[{inner}]_{t.label}"


def parse_tree(text: str) -> Tree:
    """Parse bracket notation and return the canonical tree.

    Accepts arbitrary whitespace between brackets; child order in the input
    is irrelevant (the result is canonicalized).  Raises ``ValueError`` on
    malformed input, with the offending position.
    """
    parser = _TreeParser(text)
    tree = parser.parse_node()
    parser.expect_end()
    return canonicalize(tree)


class _TreeParser:
    """Recursive-descent parser for bracket notation."""

    def __init__(self, text: str) -> None:
        if not isinstance(text, str):
            raise TypeError(f"expected str, got {type(text).__name__}")
        self.text = text
        self.pos = 0

    def _skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def _fail(self, expected: str) -> ValueError:
        found = self.text[self.pos] if self.pos < len(self.text) else "end of input"
        return ValueError(
            f"invalid tree notation at position {self.pos}: "
            f"expected {expected}, found {found!r}"
        )

    def parse_node(self) -> Tree:
        self._skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != "[":
            raise self._fail("'['")
        self.pos += 1
        children = []
        while True:
            self._skip_ws()
            if self.pos < len(self.text) and self.text[self.pos] == "[":
                children.append(self.parse_node())
            else:
                break
        if self.pos >= len(self.text) or self.text[self.pos] != "]":
            raise self._fail("']' or a child '['")
        self.pos += 1
        if self.pos >= len(self.text) or self.text[self.pos] != "_":
            raise self._fail("'_' after ']'")
        self.pos += 1
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if self.pos == start:
            raise self._fail("a digit after '_'")
        label = int(self.text[start : self.pos])
        return Tree(label, tuple(children))

    def expect_end(self) -> None:
        self._skip_ws()
        if self.pos != len(self.text):
            raise self._fail("end of input")
