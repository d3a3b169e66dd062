import random
import string

import pytest

from mathsim.expr import (
    Apply,
    FormulaFragment,
    Identifier,
    Number,
    TextFragment,
    canonical_string,
)
from mathsim.parse import (
    ParseError,
    document_to_text,
    parse_canonical,
    parse_document,
    parse_latex,
    to_latex,
)

from conftest import printable_expr

BERNOULLI_PLAGIARISM = (
    "$$(1+x)^{t+1} = (1+x)^t \\cdot (1+x)$$"
    " Because of the assumption we can apply the induction hypothesis"
    " and can conclude that"
    " $$(1+x)^{t+1} \\geq (1+tx)(1+x) \\\\ &= 1 + x + tx + tx^2"
    " \\\\ &= 1 + (t+1)x + tx^2$$"
    " Finally, since the remaining term is nonnegative, we get"
    " $$(1+x)^{t+1} \\geq 1 + (t+1)x$$"
)


def cs(src: str) -> str:
    return canonical_string(parse_latex(src))


class TestParseLatex:
    def test_worked_conversion_example(self):
        assert cs("x^{t+2} = 1") == "(eq (pow x (plus t 2)) 1)"

    def test_single_identifier(self):
        assert parse_latex("x") == Identifier("x")

    def test_binom(self):
        assert cs(r"\binom{n}{k}") == "(binom n k)"

    def test_binomial_notations_parse_structurally(self):
        assert cs("C(n,k)") == "(C n k)"
        assert cs(r"_nC_k") == "(presub n (sub C k))"
        assert cs("C_k^n") == "(pow (sub C k) n)"
        assert cs(r"\frac{n!}{k!(n-k)!}") == (
            "(div (factorial n) (times (factorial k) (factorial (minus n k))))"
        )

    def test_relations(self):
        assert cs(r"a \leq b") == "(leq a b)"
        assert cs(r"a \geq b") == "(geq a b)"
        assert cs("a < b") == "(lt a b)"
        assert cs("a > b") == "(gt a b)"

    def test_multiplication_forms(self):
        assert cs("2x") == "(times 2 x)"
        assert cs(r"2 \cdot x") == "(times 2 x)"
        assert cs("2 * x") == "(times 2 x)"
        assert cs(r"2 \times x") == "(times 2 x)"

    def test_homoglyph_minus(self):
        assert cs("x − 2") == cs("x - 2") == "(minus x 2)"

    def test_precedence(self):
        assert cs("a + b c") == "(plus a (times b c))"
        assert cs("a b / c d") == "(div (times a b) (times c d))"
        assert cs("x^2!") == "(factorial (pow x 2))"
        assert cs("x^y^z") == "(pow x (pow y z))"
        assert cs("a - b + c") == "(plus (minus a b) c)"
        assert cs("a/b/c") == "(div (div a b) c)"

    def test_function_application_heuristic(self):
        assert cs("f(x, y+1)") == "(f x (plus y 1))"
        assert cs("(a+b)(c+d)") == "(times (plus a b) (plus c d))"

    def test_sum_binder(self):
        assert cs(r"\sum_{a=1}^{n} a^2") == (
            "(sum (vars a) (from 1) (to n) (pow a 2))"
        )
        assert cs(r"\sum\nolimits_{i=1}^n{i^2}") == (
            "(sum (vars i) (from 1) (to n) (pow i 2))"
        )

    def test_sum_body_extent(self):
        assert cs(r"\sum_{i=1}^{n} i^2 + 3") == (
            "(plus (sum (vars i) (from 1) (to n) (pow i 2)) 3)"
        )

    def test_integral(self):
        assert cs(r"\int_{0}^{1} x^2 \, d x") == (
            "(integral (vars x) (from 0) (to 1) (pow x 2))"
        )
        assert cs(r"\int f(x) d x") == "(integral (vars x) (f x))"

    def test_log_forms(self):
        assert cs(r"\log_a(\frac{x+2}{y^2})") == (
            "(log a (div (plus x 2) (pow y 2)))"
        )
        assert cs(r"\log_a(x+2) - \log_a y^2") == (
            "(minus (log a (plus x 2)) (log a (pow y 2)))"
        )
        assert cs(r"\log(x)") == "(log x)"
        assert cs(r"\ln x") == "(ln x)"

    def test_functions(self):
        assert cs(r"\sin^2 x + \cos^2 x") == (
            "(plus (pow (sin x) 2) (pow (cos x) 2))"
        )

    def test_greek(self):
        assert cs(r"\alpha + \beta") == "(plus alpha beta)"
        assert cs("α + β") == "(plus alpha beta)"

    def test_unary_minus(self):
        assert cs("-2") == "-2"
        assert cs("-x + y") == "(plus (neg x) y)"
        assert cs("-2x") == "(times -2 x)"

    def test_relation_chain_on_one_line(self):
        assert cs("a = b = c") == "(chain (eq a b) (eq b c))"

    def test_align_chain(self):
        src = (
            r"(1+x)^{t+1} = (1+x)^t \cdot (1+x)"
            r" \\ &\geq (1+tx)(1+x)"
            r" \\ &= 1 + x + tx + tx^2"
            r" \\ &\geq 1 + (t+1)x"
        )
        e = parse_latex(src)
        assert isinstance(e, Apply) and e.head == "chain"
        assert len(e.args) == 4
        assert [line.head for line in e.args] == ["eq", "geq", "eq", "geq"]
        # each continuation line takes the previous right-hand side
        assert e.args[1].args[0] == e.args[0].args[1]

    def test_errors(self):
        for bad in ["x +", r"\frac{a", "(a", r"\foo{x}", "#", "", "x^", "f(a,"]:
            with pytest.raises(ParseError):
                parse_latex(bad)

    def test_error_fields(self):
        try:
            parse_latex("x + ")
        except ParseError as exc:
            assert exc.position <= 4
            assert exc.expected


class TestParseCanonical:
    def test_apply(self):
        assert parse_canonical("(plus x 2)") == Apply(
            "plus", (Identifier("x"), Number(2))
        )

    def test_number(self):
        assert parse_canonical("1") == Number(1)

    def test_round_trip_fixture(self):
        e = parse_latex("x^{t+2} = 1")
        assert parse_canonical("(eq (pow x (plus t 2)) 1)") == e

    def test_errors(self):
        for bad in ["", "(plus x", "(plus x 2) junk", "(vars x)", ")", "(sum x)"]:
            with pytest.raises(ParseError):
                parse_canonical(bad)


class TestParseDocument:
    def test_inline(self):
        d = parse_document("let $x=1$ hold")
        assert len(d.fragments) == 3
        t1, f, t2 = d.fragments
        assert isinstance(t1, TextFragment) and t1.content == "let "
        assert isinstance(f, FormulaFragment)
        assert canonical_string(f.expr) == "(eq x 1)"
        assert isinstance(t2, TextFragment) and t2.content == " hold"

    def test_empty(self):
        assert parse_document("").fragments == ()

    def test_bernoulli_plagiarism_counts(self):
        d = parse_document(BERNOULLI_PLAGIARISM)
        assert len(d.formulas()) == 3
        assert len(d.texts()) == 2

    def test_positions_and_error_index(self):
        d = parse_document("a $x$ b $y$ c")
        assert [f.position for f in d.fragments] == list(range(len(d.fragments)))
        with pytest.raises(ParseError) as exc:
            parse_document("fine $x$ bad $+$")
        assert exc.value.fragment_index is not None

    def test_unclosed_math(self):
        with pytest.raises(ParseError):
            parse_document("text $x = 1")

    def test_round_trip(self):
        d = parse_document(BERNOULLI_PLAGIARISM)
        again = parse_document(document_to_text(d))
        assert [f.expr for f in again.formulas()] == [f.expr for f in d.formulas()]
        assert [t.content for t in again.texts()] == [t.content for t in d.texts()]


class TestLatexRoundTrip:
    def test_property(self, rng):
        for _ in range(250):
            e = printable_expr(rng, rng.randint(1, 24))
            printed = to_latex(e)
            assert parse_latex(printed) == e, printed

    def test_chain_round_trip(self):
        src = r"a = b + c \\ &= c + b \\ &\leq 2c"
        e = parse_latex(src)
        assert parse_latex(to_latex(e)) == e

    def test_totality_fuzz(self):
        rnd = random.Random(7)
        alphabet = string.ascii_letters + string.digits + r"+-*/^_!(){}\ $="
        for _ in range(300):
            s = "".join(rnd.choice(alphabet) for _ in range(rnd.randint(1, 30)))
            try:
                parse_latex(s)
            except ParseError:
                pass
