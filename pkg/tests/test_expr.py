import random

import pytest

from mathsim.expr import (
    Apply,
    Binder,
    Document,
    FormulaFragment,
    Identifier,
    InvalidPath,
    Number,
    TextFragment,
    canonical_string,
    children,
    depth_at,
    free_identifiers,
    node_count,
    replace_at,
    subtree_at,
    walk,
)
from mathsim.parse import parse_canonical, parse_latex

from conftest import random_expr

X = Identifier("x")
Y = Identifier("y")


class TestNodeCount:
    def test_single_leaf(self):
        assert node_count(X) == 1

    def test_apply(self):
        assert node_count(Apply("plus", (X, Y))) == 3

    def test_parsed_fixture(self):
        assert node_count(parse_latex("x^{t+2} = 1")) == 7

    def test_recursive_identity(self, rng):
        for _ in range(200):
            e = random_expr(rng, rng.randint(1, 30))
            assert node_count(e) == 1 + sum(node_count(c) for c in children(e))


class TestDepthAt:
    def test_root(self):
        assert depth_at(X, []) == 0

    def test_child(self):
        assert depth_at(Apply("plus", (X, Y)), [1]) == 1

    def test_fixture_path(self):
        e = parse_latex("x^{t+2} = 1")
        # eq -> pow -> plus -> 2
        assert subtree_at(e, [0, 1, 1]) == Number(2)
        assert depth_at(e, [0, 1, 1]) == 3

    def test_invalid(self):
        with pytest.raises(InvalidPath):
            depth_at(X, [0])
        with pytest.raises(InvalidPath):
            depth_at(Apply("plus", (X, Y)), [2])


class TestCanonicalString:
    def test_number(self):
        assert canonical_string(Number(1)) == "1"

    def test_apply(self):
        assert canonical_string(Apply("plus", (X, Number(2)))) == "(plus x 2)"

    def test_fixture(self):
        e = parse_latex("x^{t+2} = 1")
        assert canonical_string(e) == "(eq (pow x (plus t 2)) 1)"

    def test_round_trip(self, rng):
        for _ in range(300):
            e = random_expr(rng, rng.randint(1, 50), tags=True)
            assert parse_canonical(canonical_string(e)) == e

    def test_injective(self, rng):
        seen = {}
        for _ in range(400):
            e = random_expr(rng, rng.randint(1, 25), tags=True)
            s = canonical_string(e)
            if s in seen:
                assert seen[s] == e
            seen[s] = e


class TestInvariants:
    def test_apply_needs_args(self):
        with pytest.raises(ValueError):
            Apply("plus", ())

    def test_reserved_heads(self):
        with pytest.raises(ValueError):
            Apply("sum", (X,))
        with pytest.raises(ValueError):
            Apply("vars", (X,))

    def test_binder_distinct_vars(self):
        with pytest.raises(ValueError):
            Binder("sum", ("i", "i"), X)

    def test_identifier_name(self):
        with pytest.raises(ValueError):
            Identifier("a_b")
        with pytest.raises(ValueError):
            Identifier("")

    def test_document_positions(self):
        with pytest.raises(ValueError):
            Document("d", (TextFragment(0, "a"), TextFragment(0, "b")))


class TestTreeEdits:
    def test_replace_at(self):
        e = Apply("plus", (X, Y))
        assert replace_at(e, [1], Number(3)) == Apply("plus", (X, Number(3)))
        assert replace_at(e, [], Number(3)) == Number(3)

    def test_replace_binder_child(self):
        b = Binder("sum", ("i",), Identifier("i"), Number(1), Identifier("n"))
        out = replace_at(b, [2], Number(5))
        assert out == Binder("sum", ("i",), Number(5), Number(1), Identifier("n"))

    def test_walk_preorder(self):
        e = Apply("plus", (X, Apply("times", (Y, Number(2)))))
        labels = [type(n).__name__ for n in walk(e)]
        assert labels == ["Apply", "Identifier", "Apply", "Identifier", "Number"]


class TestFreeIdentifiers:
    def test_plain(self):
        assert free_identifiers(parse_latex("a + b = a^2")) == {"a", "b"}

    def test_binder_scope(self):
        e = parse_latex(r"\sum_{a=1}^{n} a^2")
        assert free_identifiers(e) == {"n"}

    def test_bounds_outside_scope(self):
        e = Binder("sum", ("i",), Identifier("i"), Identifier("i"), None)
        assert free_identifiers(e) == {"i"}
