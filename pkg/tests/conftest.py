"""Shared fixtures: seeded random expression generators."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from mathsim.expr import (
    Apply,
    Binder,
    Expr,
    Identifier,
    Number,
)

NAME_POOL = ["x", "y", "z", "a", "b", "c", "t", "u", "w", "m", "n", "k"]
TAG_POOL = [None, None, None, "energy", "mass", "speed of light", "frequency"]
APPLY_HEADS = ["plus", "times", "minus", "div", "pow", "sub", "f", "g",
               "sin", "cos", "log", "sqrt", "binom", "factorial"]
UNARY_HEADS = {"sin", "cos", "sqrt", "factorial", "neg"}
BINARY_HEADS = {"minus", "div", "pow", "sub", "binom"}


def random_expr(rng: random.Random, budget: int, tags: bool = False,
                binders: bool = True) -> Expr:
    """Random tree with at most `budget` nodes."""
    if budget <= 1:
        if rng.random() < 0.35:
            return Number(Fraction(rng.randint(-6, 9)))
        tag = rng.choice(TAG_POOL) if tags else None
        return Identifier(rng.choice(NAME_POOL), tag)
    roll = rng.random()
    if binders and roll < 0.12 and budget >= 4:
        kind = rng.choice(["sum", "product", "integral", "lambda"])
        nvars = rng.randint(0, 2) if kind == "integral" else rng.randint(1, 2)
        bound = tuple(rng.sample(NAME_POOL, nvars))
        lower = upper = None
        rem = budget - 1
        if rng.random() < 0.6:
            lower = random_expr(rng, rem // 3, tags, binders)
            upper = random_expr(rng, rem // 3, tags, binders)
            rem -= 2
        body = random_expr(rng, max(1, rem // 2), tags, binders)
        return Binder(kind, bound, body, lower, upper)
    head = rng.choice(APPLY_HEADS)
    if head in UNARY_HEADS:
        arity = 1
    elif head in BINARY_HEADS:
        arity = 2
    else:
        arity = rng.randint(1 if head in ("f", "g") else 2, 4)
    args = []
    rem = budget - 1
    for i in range(arity):
        share = max(1, rem // (arity - i))
        size = rng.randint(1, share)
        args.append(random_expr(rng, size, tags, binders))
        rem -= size
    return Apply(head, tuple(args))


_PRINTABLE_FUNCS = ["sin", "cos", "tan", "ln", "sqrt"]
_PRINTABLE_NAMES = [n for n in NAME_POOL if n != "d"] + ["alpha", "beta", "pi"]


def _flatten(head: str, args: list[Expr]) -> tuple[Expr, ...]:
    out: list[Expr] = []
    for a in args:
        if isinstance(a, Apply) and a.head == head:
            out.extend(a.args)
        else:
            out.append(a)
    return tuple(out)


def printable_expr(rng: random.Random, budget: int, depth: int = 0) -> Expr:
    """Random tree restricted to shapes the LaTeX printer can round-trip."""
    if budget <= 1 or depth > 6:
        if rng.random() < 0.3:
            return Number(Fraction(rng.randint(0, 12)))
        return Identifier(rng.choice(_PRINTABLE_NAMES))
    roll = rng.random()
    sub = lambda b: printable_expr(rng, b, depth + 1)
    if roll < 0.08 and budget >= 4:
        kind = rng.choice(["sum", "product", "integral"])
        var = rng.choice(_PRINTABLE_NAMES[:8])
        lower = upper = None
        if rng.random() < 0.7:
            lower = sub(2)
            upper = sub(2)
        body = sub(budget - 4)
        if kind == "integral" and rng.random() < 0.4:
            return Binder(kind, (), body, lower, upper)
        return Binder(kind, (var,), body, lower, upper)
    if roll < 0.20:
        head = rng.choice(_PRINTABLE_FUNCS)
        return Apply(head, (sub(budget - 1),))
    if roll < 0.26:
        return Apply("log", (Identifier(rng.choice("abc")), sub(budget - 2)))
    if roll < 0.32:
        return Apply("binom", (sub(budget // 2), sub(budget // 2)))
    if roll < 0.38:
        arg = sub(budget - 1)
        if isinstance(arg, Number):
            return Apply("factorial", (Identifier(rng.choice("xyz")),))
        return Apply("factorial", (arg,))
    if roll < 0.44:
        arg = sub(budget - 1)
        if isinstance(arg, Number):
            arg = Identifier(rng.choice("xyz"))
        return Apply("neg", (arg,))
    if roll < 0.52 and budget >= 3:
        name = rng.choice("fgh")
        n = rng.randint(1, 3)
        return Apply(name, tuple(sub(max(1, (budget - 1) // n)) for _ in range(n)))
    head = rng.choice(["plus", "times", "minus", "div", "pow", "sub"])
    if head in ("plus", "times"):
        n = rng.randint(2, 4)
        args = [sub(max(1, (budget - 1) // n)) for _ in range(n)]
        return Apply(head, _flatten(head, args))
    return Apply(head, (sub(budget // 2), sub(budget // 2)))


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240817)
