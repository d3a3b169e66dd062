"""Expression trees, documents, and the tree utilities shared by all engines.

An expression is one of four immutable node kinds: exact-rational numbers,
identifiers (optionally tagged with a concept string), applications of a
head symbol to one or more arguments, and binders (sums, products,
integrals, lambdas) with optional lower/upper bounds.

Relations (=, <, ...) are ordinary applications with heads from
RELATION_HEADS; multi-line derivations are applications with head "chain"
whose arguments are relation lines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Union

RELATION_HEADS = frozenset({"eq", "neq", "lt", "gt", "leq", "geq"})
BINDER_KINDS = ("sum", "product", "integral", "lambda")
CHAIN_HEAD = "chain"

# Atoms reserved by the canonical s-expression form; they cannot be used as
# application heads, which keeps the serialization unambiguous.
RESERVED_HEADS = frozenset(BINDER_KINDS) | {"vars", "from", "to"}


class InvalidPath(Exception):
    """A child-index path does not address a node of the tree."""


class Expr:
    """Base class for expression-tree nodes. All nodes are immutable."""

    __slots__ = ()


@dataclass(frozen=True)
class Number(Expr):
    """Exact rational constant."""

    value: Fraction

    def __post_init__(self) -> None:
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Identifier(Expr):
    """Named symbol, optionally tagged with a lowercase concept string."""

    name: str
    tag: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.name or "_" in self.name or any(c.isspace() for c in self.name):
            raise ValueError(f"bad identifier name: {self.name!r}")
        if self.tag is not None and not self.tag:
            raise ValueError("identifier tag must be nonempty when present")


@dataclass(frozen=True)
class Apply(Expr):
    """Application of a head symbol to one or more arguments."""

    head: str
    args: tuple[Expr, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))
        if not self.head or any(c.isspace() or c in "()" for c in self.head):
            raise ValueError(f"bad head symbol: {self.head!r}")
        if self.head in RESERVED_HEADS:
            raise ValueError(f"reserved head symbol: {self.head!r}")
        if len(self.args) < 1:
            raise ValueError("Apply needs at least one argument")


@dataclass(frozen=True)
class Binder(Expr):
    """Binding form: sum, product, integral, or lambda.

    Bound variables scope over the body only; bounds are evaluated outside
    the binding. Absent bounds compare unequal to present ones.
    """

    kind: str
    bound: tuple[str, ...]
    body: Expr
    lower: Optional[Expr] = None
    upper: Optional[Expr] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "bound", tuple(self.bound))
        if self.kind not in BINDER_KINDS:
            raise ValueError(f"unknown binder kind: {self.kind!r}")
        if len(set(self.bound)) != len(self.bound):
            raise ValueError("binder bound variables must be distinct")


def num(value) -> Number:
    return Number(Fraction(value))


def ident(name: str, tag: Optional[str] = None) -> Identifier:
    return Identifier(name, tag)


def apply(head: str, *args: Expr) -> Apply:
    return Apply(head, tuple(args))


def children(e: Expr) -> tuple[Expr, ...]:
    """Child nodes in canonical order (binder bounds precede the body)."""
    match e:
        case Apply(_, args):
            return args
        case Binder(_, _, body, lower, upper):
            parts = [x for x in (lower, upper) if x is not None]
            parts.append(body)
            return tuple(parts)
        case _:
            return ()


def label(e: Expr) -> str:
    """Node label: head symbol, binder kind, identifier name, or literal."""
    match e:
        case Number(value):
            return str(value)
        case Identifier(name, _):
            return name
        case Apply(head, _):
            return head
        case Binder(kind, _, _, _, _):
            return kind
        case _:
            raise TypeError(f"not an Expr: {e!r}")


def walk(e: Expr) -> Iterator[Expr]:
    """Pre-order traversal of all nodes."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def node_count(e: Expr) -> int:
    return sum(1 for _ in walk(e))


def subtree_at(e: Expr, path: list[int]) -> Expr:
    node = e
    for idx in path:
        kids = children(node)
        if not 0 <= idx < len(kids):
            raise InvalidPath(f"index {idx} out of range at {label(node)}")
        node = kids[idx]
    return node


def depth_at(e: Expr, path: list[int]) -> int:
    """Number of edges from the root to the node addressed by path."""
    subtree_at(e, path)
    return len(path)


def replace_at(e: Expr, path: list[int], new: Expr) -> Expr:
    """Copy of the tree with the node at path replaced by new."""
    if not path:
        return new
    idx, rest = path[0], path[1:]
    kids = children(e)
    if not 0 <= idx < len(kids):
        raise InvalidPath(f"index {idx} out of range at {label(e)}")
    match e:
        case Apply(head, args):
            new_args = list(args)
            new_args[idx] = replace_at(args[idx], rest, new)
            return Apply(head, tuple(new_args))
        case Binder(kind, bound, body, lower, upper):
            parts = [x for x in (lower, upper) if x is not None] + [body]
            parts[idx] = replace_at(parts[idx], rest, new)
            body_new = parts.pop()
            lo_new = parts.pop(0) if lower is not None else None
            up_new = parts.pop(0) if upper is not None else None
            return Binder(kind, bound, body_new, lo_new, up_new)
        case _:
            raise InvalidPath("leaf node has no children")


def is_relation(e: Expr) -> bool:
    return isinstance(e, Apply) and e.head in RELATION_HEADS


def is_formula(e: Expr) -> bool:
    """True when the root is a relation or a chain of relations."""
    return isinstance(e, Apply) and (e.head in RELATION_HEADS or e.head == CHAIN_HEAD)


def free_identifiers(e: Expr) -> set[str]:
    """Names of identifiers not bound by an enclosing binder."""
    free: set[str] = set()

    def go(node: Expr, bound: frozenset[str]) -> None:
        match node:
            case Identifier(name, _):
                if name not in bound:
                    free.add(name)
            case Apply(_, args):
                for a in args:
                    go(a, bound)
            case Binder(_, names, body, lower, upper):
                if lower is not None:
                    go(lower, bound)
                if upper is not None:
                    go(upper, bound)
                go(body, bound | frozenset(names))
            case _:
                pass

    go(e, frozenset())
    return free


def all_identifier_names(e: Expr) -> set[str]:
    """Every identifier name in the tree, free or bound, plus binder vars."""
    names: set[str] = set()
    for node in walk(e):
        match node:
            case Identifier(name, _):
                names.add(name)
            case Binder(_, bound, _, _, _):
                names.update(bound)
            case _:
                pass
    return names


def _atom(e: Expr) -> str:
    match e:
        case Number(value):
            return str(value)
        case Identifier(name, None):
            return name
        case Identifier(name, tag):
            return f"{name}_{tag.replace(' ', '-')}"
        case _:
            raise TypeError(f"not an atom: {e!r}")


def canonical_string(e: Expr) -> str:
    """Parenthesized prefix serialization; injective over expression trees."""
    match e:
        case Number() | Identifier():
            return _atom(e)
        case Apply(head, args):
            inner = " ".join(canonical_string(a) for a in args)
            return f"({head} {inner})"
        case Binder(kind, bound, body, lower, upper):
            parts = [kind, f"(vars {' '.join(bound)})" if bound else "(vars)"]
            if lower is not None:
                parts.append(f"(from {canonical_string(lower)})")
            if upper is not None:
                parts.append(f"(to {canonical_string(upper)})")
            parts.append(canonical_string(body))
            return f"({' '.join(parts)})"
        case _:
            raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TextFragment:
    position: int
    content: str


@dataclass(frozen=True)
class FormulaFragment:
    position: int
    expr: Expr
    raw_source: str
    display: bool = False


Fragment = Union[TextFragment, FormulaFragment]


@dataclass(frozen=True)
class Document:
    """Ordered sequence of text and formula fragments."""

    id: str
    fragments: tuple[Fragment, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "fragments", tuple(self.fragments))
        positions = [f.position for f in self.fragments]
        if any(b <= a for a, b in zip(positions, positions[1:])):
            raise ValueError("fragment positions must be strictly increasing")

    def formulas(self) -> tuple[FormulaFragment, ...]:
        return tuple(f for f in self.fragments if isinstance(f, FormulaFragment))

    def texts(self) -> tuple[TextFragment, ...]:
        return tuple(f for f in self.fragments if isinstance(f, TextFragment))


def renumber(fragments: list[Fragment]) -> tuple[Fragment, ...]:
    """Reassign consecutive positions, preserving order."""
    out: list[Fragment] = []
    for i, f in enumerate(fragments):
        match f:
            case TextFragment(_, content):
                out.append(TextFragment(i, content))
            case FormulaFragment(_, expr, raw, display):
                out.append(FormulaFragment(i, expr, raw, display))
    return tuple(out)
