"""Parsing of a LaTeX subset, the canonical s-expression form, and documents.

Precedence, tightest first: ^ and _ (right-assoc), postfix !, implicit and
explicit multiplication, /, + and -, relations. Multiple relations on one
line chain into an application with head "chain". Display math may contain
\\\\-separated lines; a line starting with a relation symbol continues the
previous line's right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .expr import (
    BINDER_KINDS,
    CHAIN_HEAD,
    RELATION_HEADS,
    RESERVED_HEADS,
    Apply,
    Binder,
    Document,
    Expr,
    FormulaFragment,
    Fragment,
    Identifier,
    Number,
    TextFragment,
    is_relation,
)


@dataclass
class ParseError(Exception):
    position: int
    expected: str
    found: str
    fragment_index: Optional[int] = None

    def __str__(self) -> str:
        loc = f"offset {self.position}"
        if self.fragment_index is not None:
            loc += f" (fragment {self.fragment_index})"
        return f"expected {self.expected}, found {self.found} at {loc}"


# Characters that render like ASCII operators but carry different codepoints.
# The lexer folds them so char-level obfuscation disappears at parse time.
_CHAR_FOLD = str.maketrans(
    {
        "−": "-",  # minus sign
        "‐": "-",
        "‑": "-",
        "‒": "-",
        "–": "-",
        "—": "-",
        "―": "-",
        "×": "*",  # multiplication sign
        "⋅": "*",  # dot operator
        "·": "*",  # middle dot
        "＋": "+",
    }
)

_GREEK = {
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta",
    "iota", "kappa", "lambda", "mu", "nu", "xi", "pi", "rho", "sigma",
    "tau", "upsilon", "phi", "chi", "psi", "omega",
    "Gamma", "Delta", "Theta", "Lambda", "Xi", "Pi", "Sigma", "Upsilon",
    "Phi", "Psi", "Omega",
}

_GREEK_CHARS = {
    "α": "alpha", "β": "beta", "γ": "gamma", "δ": "delta", "ε": "epsilon",
    "ζ": "zeta", "η": "eta", "θ": "theta", "ι": "iota", "κ": "kappa",
    "λ": "lambda", "μ": "mu", "ν": "nu", "ξ": "xi", "π": "pi", "ρ": "rho",
    "σ": "sigma", "τ": "tau", "υ": "upsilon", "φ": "phi", "χ": "chi",
    "ψ": "psi", "ω": "omega",
}

_FUNCTIONS = {"sin", "cos", "tan", "cot", "sec", "csc", "sinh", "cosh",
              "tanh", "arcsin", "arccos", "arctan", "exp"}
_REL_COMMANDS = {"leq": "leq", "geq": "geq", "neq": "neq", "le": "leq",
                 "ge": "geq", "ne": "neq"}
_IGNORED_COMMANDS = {"nolimits", "limits", "left", "right", "quad", "qquad",
                     "displaystyle", ",", ";", "!", " "}

_REL_OF_CHAR = {"=": "eq", "<": "lt", ">": "gt"}


@dataclass
class _Tok:
    kind: str  # NUM IDENT CMD OP BREAK END
    value: str
    pos: int


def _lex(src: str) -> list[_Tok]:
    text = src.translate(_CHAR_FOLD)
    toks: list[_Tok] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace() or c in "~&":
            i += 1
            continue
        if c in _GREEK_CHARS:
            toks.append(_Tok("IDENT", _GREEK_CHARS[c], i))
            i += 1
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(_Tok("NUM", text[i:j], i))
            i = j
            continue
        if c.isalpha():
            toks.append(_Tok("IDENT", c, i))
            i += 1
            continue
        if c == "\\":
            if i + 1 < n and text[i + 1] == "\\":
                toks.append(_Tok("BREAK", "\\\\", i))
                i += 2
                continue
            j = i + 1
            while j < n and text[j].isalpha():
                j += 1
            name = text[i + 1 : j]
            if not name and j < n:
                name = text[j]
                j += 1
            if name in _IGNORED_COMMANDS:
                i = j
                continue
            if name in ("cdot", "times"):
                toks.append(_Tok("OP", "*", i))
            elif name in _REL_COMMANDS:
                toks.append(_Tok("OP", _REL_COMMANDS[name], i))
            elif name in _GREEK:
                toks.append(_Tok("IDENT", name, i))
            else:
                toks.append(_Tok("CMD", name, i))
            i = j
            continue
        if c in "+-*/=<>^_!(){},.":
            toks.append(_Tok("OP", c, i))
            i += 1
            continue
        raise ParseError(i, "a recognized character", repr(c))
    toks.append(_Tok("END", "", n))
    return toks


_BP_REL = 10
_BP_ADD = 20
_BP_DIV = 30
_BP_BINDER_BODY = 35
_BP_MUL = 40
_BP_POSTFIX = 50
_BP_SCRIPT = 60


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0
        self.in_integral = 0

    def peek(self, ahead: int = 0) -> _Tok:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "END":
            self.i += 1
        return t

    def expect(self, value: str) -> _Tok:
        t = self.next()
        if t.value != value:
            raise ParseError(t.pos, repr(value), repr(t.value or "end of input"))
        return t

    # -- helpers ----------------------------------------------------------

    def at_end(self) -> bool:
        return self.peek().kind == "END"

    def _starts_primary(self, t: _Tok) -> bool:
        if t.kind in ("NUM", "IDENT", "CMD"):
            return True
        return t.kind == "OP" and t.value in ("(", "{", "_")

    def _rel_head(self, t: _Tok) -> Optional[str]:
        if t.kind != "OP":
            return None
        if t.value in _REL_OF_CHAR:
            return _REL_OF_CHAR[t.value]
        if t.value in ("leq", "geq", "neq"):
            return t.value
        return None

    # -- grammar ----------------------------------------------------------

    def parse_formula(self) -> Expr:
        """Full line: expression plus any relation chain."""
        left = self.parse_expr(_BP_REL)
        lines: list[Expr] = []
        while (head := self._rel_head(self.peek())) is not None:
            self.next()
            rhs = self.parse_expr(_BP_REL)
            lhs = lines[-1].args[1] if lines else left
            lines.append(Apply(head, (lhs, rhs)))
        if not lines:
            return left
        if len(lines) == 1:
            return lines[0]
        return Apply(CHAIN_HEAD, tuple(lines))

    def parse_expr(self, rbp: int) -> Expr:
        left = self.nud()
        while True:
            t = self.peek()
            if t.kind == "OP" and t.value in ("^", "_") and rbp < _BP_SCRIPT:
                self.next()
                arg = self._sup_arg() if t.value == "^" else self.script_arg()
                left = Apply("pow" if t.value == "^" else "sub", (left, arg))
                continue
            if t.kind == "OP" and t.value == "!" and rbp < _BP_POSTFIX:
                self.next()
                left = Apply("factorial", (left,))
                continue
            if t.kind == "OP" and t.value == "*" and rbp < _BP_MUL:
                self.next()
                left = self._times(left, self.parse_expr(_BP_MUL))
                continue
            if self._starts_primary(t) and rbp < _BP_MUL:
                if self.in_integral and self._at_differential():
                    break
                left = self._times(left, self.parse_expr(_BP_MUL))
                continue
            if t.kind == "OP" and t.value == "/" and rbp < _BP_DIV:
                self.next()
                left = Apply("div", (left, self.parse_expr(_BP_DIV)))
                continue
            if t.kind == "OP" and t.value in ("+", "-") and rbp < _BP_ADD:
                self.next()
                rhs = self.parse_expr(_BP_ADD)
                if t.value == "+":
                    left = self._plus(left, rhs)
                else:
                    left = Apply("minus", (left, rhs))
                continue
            break
        return left

    def _at_differential(self) -> bool:
        t, u = self.peek(), self.peek(1)
        return t.kind == "IDENT" and t.value == "d" and u.kind == "IDENT"

    @staticmethod
    def _plus(left: Expr, right: Expr) -> Expr:
        args = left.args if isinstance(left, Apply) and left.head == "plus" else (left,)
        return Apply("plus", args + (right,))

    @staticmethod
    def _times(left: Expr, right: Expr) -> Expr:
        args = left.args if isinstance(left, Apply) and left.head == "times" else (left,)
        return Apply("times", args + (right,))

    def _sup_arg(self) -> Expr:
        """Exponent argument; a further unbraced ^ nests to the right."""
        arg = self.script_arg()
        if self.peek().kind == "OP" and self.peek().value == "^":
            self.next()
            return Apply("pow", (arg, self._sup_arg()))
        return arg

    def script_arg(self) -> Expr:
        if self.peek().kind == "OP" and self.peek().value == "{":
            self.next()
            e = self.parse_formula()
            self.expect("}")
            return e
        # Unbraced scripts take a single atom; the function-application
        # heuristic must not fire here (\log_a(x) has base a, argument x).
        t = self.peek()
        if t.kind == "NUM":
            return Number(Fraction(self.next().value))
        if t.kind == "IDENT":
            return Identifier(self.next().value)
        return self.nud()

    def nud(self) -> Expr:
        t = self.next()
        if t.kind == "NUM":
            return Number(Fraction(t.value))
        if t.kind == "IDENT":
            nxt = self.peek()
            if nxt.kind == "OP" and nxt.value == "(":
                return self._call(t.value)
            return Identifier(t.value)
        if t.kind == "CMD":
            return self.command(t)
        if t.kind == "OP":
            if t.value == "(":
                e = self.parse_formula()
                self.expect(")")
                return e
            if t.value == "{":
                e = self.parse_formula()
                self.expect("}")
                return e
            if t.value == "-":
                if self.peek().kind == "NUM":
                    return Number(-Fraction(self.next().value))
                return Apply("neg", (self.parse_expr(_BP_ADD),))
            if t.value == "+":
                return self.parse_expr(_BP_ADD)
            if t.value == "_":
                pre = self.script_arg()
                base = self.parse_expr(_BP_POSTFIX)
                return Apply("presub", (pre, base))
        raise ParseError(t.pos, "an expression", repr(t.value or "end of input"))

    def _call(self, name: str) -> Expr:
        self.expect("(")
        args = [self.parse_formula()]
        while self.peek().value == ",":
            self.next()
            args.append(self.parse_formula())
        self.expect(")")
        return Apply(name, tuple(args))

    def command(self, t: _Tok) -> Expr:
        name = t.value
        if name == "frac":
            a = self.braced()
            b = self.braced()
            return Apply("div", (a, b))
        if name == "binom":
            a = self.braced()
            b = self.braced()
            return Apply("binom", (a, b))
        if name == "sqrt":
            return Apply("sqrt", (self.braced(),))
        if name in ("sum", "prod"):
            kind = "sum" if name == "sum" else "product"
            var, lower = self.binder_subscript()
            upper = None
            if self.peek().value == "^":
                self.next()
                upper = self.script_arg()
            body = self.parse_expr(_BP_BINDER_BODY)
            return Binder(kind, (var,) if var else (), body, lower, upper)
        if name == "int":
            lower = upper = None
            if self.peek().value == "_":
                self.next()
                lower = self.script_arg()
            if self.peek().value == "^":
                self.next()
                upper = self.script_arg()
            self.in_integral += 1
            try:
                body = self.parse_expr(_BP_BINDER_BODY)
            finally:
                self.in_integral -= 1
            var: tuple[str, ...] = ()
            if self._at_differential():
                self.next()
                var = (self.next().value,)
            return Binder("integral", var, body, lower, upper)
        if name in ("log", "ln"):
            base = None
            if name == "log" and self.peek().value == "_":
                self.next()
                base = self.script_arg()
            power = None
            if self.peek().value == "^":
                self.next()
                power = self.script_arg()
            arg = self.func_arg()
            args = (base, arg) if base is not None else (arg,)
            e: Expr = Apply(name, args)
            return Apply("pow", (e, power)) if power is not None else e
        if name in _FUNCTIONS:
            power = None
            if self.peek().value == "^":
                self.next()
                power = self.script_arg()
            e = Apply(name, (self.func_arg(),))
            return Apply("pow", (e, power)) if power is not None else e
        raise ParseError(t.pos, "a supported command", f"\\{name}")

    def braced(self) -> Expr:
        self.expect("{")
        e = self.parse_formula()
        self.expect("}")
        return e

    def func_arg(self) -> Expr:
        if self.peek().value == "(":
            self.next()
            e = self.parse_formula()
            self.expect(")")
            return e
        if self.peek().value == "{":
            return self.braced()
        # One tight factor: the atom keeps its scripts (\log_a y^2 reads as
        # log of y squared) but multiplication and beyond stay outside.
        return self.parse_expr(_BP_MUL + 5)

    def binder_subscript(self) -> tuple[Optional[str], Optional[Expr]]:
        """Parse _{v} or _{v = lower} after a sum/product command."""
        if self.peek().value != "_":
            return None, None
        self.next()
        braced = self.peek().value == "{"
        if braced:
            self.next()
        t = self.next()
        if t.kind != "IDENT":
            raise ParseError(t.pos, "a bound variable", repr(t.value))
        var = t.value
        lower = None
        if braced and self.peek().value == "=":
            self.next()
            lower = self.parse_formula()
        if braced:
            self.expect("}")
        return var, lower


def _parse_tokens(toks: list[_Tok]) -> Expr:
    parser = _Parser(toks)
    e = parser.parse_formula()
    t = parser.peek()
    if t.kind != "END":
        raise ParseError(t.pos, "end of input", repr(t.value))
    return e


def _split_lines(toks: list[_Tok]) -> list[list[_Tok]]:
    lines: list[list[_Tok]] = [[]]
    for t in toks[:-1]:
        if t.kind == "BREAK":
            lines.append([])
        else:
            lines[-1].append(t)
    end = toks[-1]
    return [line + [_Tok("END", "", end.pos)] for line in lines if line]


def parse_latex(src: str) -> Expr:
    """Parse one formula (possibly a multi-line derivation) into a tree."""
    if not src.strip():
        raise ParseError(0, "a formula", "empty input")
    toks = _lex(src)
    line_toks = _split_lines(toks)
    if len(line_toks) <= 1:
        return _parse_tokens(toks if len(line_toks) == 1 else toks)
    lines: list[Expr] = []
    for lt in line_toks:
        parser = _Parser(lt)
        head = parser._rel_head(parser.peek())
        if head is not None and lines:
            parser.next()
            prev = lines[-1]
            lhs = prev.args[1] if is_relation(prev) else prev
            rhs = parser.parse_formula()
            line: Expr = Apply(head, (lhs, rhs))
        else:
            line = parser.parse_formula()
        t = parser.peek()
        if t.kind != "END":
            raise ParseError(t.pos, "end of line", repr(t.value))
        if isinstance(line, Apply) and line.head == CHAIN_HEAD:
            lines.extend(line.args)
        else:
            lines.append(line)
    if len(lines) == 1:
        return lines[0]
    return Apply(CHAIN_HEAD, tuple(lines))


# ---------------------------------------------------------------------------
# Canonical s-expression format
# ---------------------------------------------------------------------------

_NUM_CHARS = set("0123456789/-")


def _canon_tokens(src: str) -> list[tuple[str, int]]:
    toks = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
        elif c in "()":
            toks.append((c, i))
            i += 1
        else:
            j = i
            while j < n and not src[j].isspace() and src[j] not in "()":
                j += 1
            toks.append((src[i:j], i))
            i = j
    return toks


def _is_number_atom(s: str) -> bool:
    body = s[1:] if s.startswith("-") else s
    if not body:
        return False
    head, _, denom = body.partition("/")
    return head.isdigit() and (not denom or denom.isdigit())


def _atom_expr(s: str, pos: int) -> Expr:
    if _is_number_atom(s):
        return Number(Fraction(s))
    name, _, tag = s.partition("_")
    try:
        if tag:
            return Identifier(name, tag.replace("-", " "))
        return Identifier(name)
    except ValueError as exc:
        raise ParseError(pos, "an atom", repr(s)) from exc


def parse_canonical(src: str) -> Expr:
    """Inverse of expr.canonical_string."""
    toks = _canon_tokens(src)
    if not toks:
        raise ParseError(0, "an expression", "empty input")
    pos = 0

    def parse_one() -> Expr:
        nonlocal pos
        tok, at = toks[pos]
        pos += 1
        if tok == ")":
            raise ParseError(at, "an expression", "')'")
        if tok != "(":
            return _atom_expr(tok, at)
        head, head_at = toks[pos]
        pos += 1
        if head in BINDER_KINDS:
            return parse_binder(head, head_at)
        if head in ("(", ")") or head in RESERVED_HEADS:
            raise ParseError(head_at, "a head symbol", repr(head))
        args = []
        while toks[pos][0] != ")":
            args.append(parse_one())
        pos += 1
        return Apply(head, tuple(args))

    def parse_binder(kind: str, at: int) -> Expr:
        nonlocal pos
        if toks[pos][0] != "(" or toks[pos + 1][0] != "vars":
            raise ParseError(toks[pos][1], "(vars ...)", repr(toks[pos][0]))
        pos += 2
        names = []
        while toks[pos][0] != ")":
            names.append(toks[pos][0])
            pos += 1
        pos += 1
        lower = upper = None
        for slot in ("from", "to"):
            if (
                toks[pos][0] == "("
                and pos + 1 < len(toks)
                and toks[pos + 1][0] == slot
            ):
                pos += 2
                e = parse_one()
                if toks[pos][0] != ")":
                    raise ParseError(toks[pos][1], "')'", repr(toks[pos][0]))
                pos += 1
                if slot == "from":
                    lower = e
                else:
                    upper = e
        body = parse_one()
        if toks[pos][0] != ")":
            raise ParseError(toks[pos][1], "')'", repr(toks[pos][0]))
        pos += 1
        return Binder(kind, tuple(names), body, lower, upper)

    try:
        e = parse_one()
    except IndexError:
        raise ParseError(len(src), "more input", "end of input") from None
    if pos != len(toks):
        raise ParseError(toks[pos][1], "end of input", repr(toks[pos][0]))
    return e


# ---------------------------------------------------------------------------
# LaTeX printing (inverse of parse_latex on the supported grammar)
# ---------------------------------------------------------------------------

_REL_LATEX = {"eq": "=", "lt": "<", "gt": ">", "leq": "\\leq", "geq": "\\geq",
              "neq": "\\neq"}
_PREC = {
    "chain": 0,
    **{h: 10 for h in RELATION_HEADS},
    "plus": 20, "minus": 20, "neg": 20,
    "div": 30,
    "times": 40,
    "factorial": 50,
    "pow": 60, "sub": 60, "presub": 60,
}
_ATOMIC_HEADS = {"binom", "sqrt"} | _FUNCTIONS | {"log", "ln"}


def _prec_of(e: Expr) -> int:
    match e:
        case Number(v) if v < 0:
            return _PREC["neg"]
        case Number() | Identifier():
            return 100
        case Apply(head, _):
            if head in _ATOMIC_HEADS:
                return 100
            return _PREC.get(head, 90)  # generic f(args) is self-delimiting
        case Binder():
            return _BP_BINDER_BODY
    return 100


def _wrap(e: Expr, min_prec: int) -> str:
    s = to_latex(e)
    if _prec_of(e) < min_prec:
        return f"({s})"
    return s


def to_latex(e: Expr) -> str:
    """Render a tree in the LaTeX subset accepted by parse_latex."""
    match e:
        case Number(value):
            if value.denominator != 1:
                return f"\\frac{{{value.numerator}}}{{{value.denominator}}}"
            return str(value)
        case Identifier(name, _):
            return f"\\{name}" if name in _GREEK else name
        case Binder(kind, bound, body, lower, upper):
            return _binder_latex(kind, bound, body, lower, upper)
        case Apply(head, args):
            return _apply_latex(head, args)
    raise TypeError(f"not an Expr: {e!r}")


def _apply_latex(head: str, args: tuple[Expr, ...]) -> str:
    if head in RELATION_HEADS:
        lhs, rhs = args
        return f"{_wrap(lhs, 20)} {_REL_LATEX[head]} {_wrap(rhs, 20)}"
    if head == CHAIN_HEAD:
        return _chain_latex(args)
    if head == "plus":
        return " + ".join(
            [_wrap(args[0], 20)] + [_wrap(a, 21) for a in args[1:]]
        )
    if head == "minus":
        return f"{_wrap(args[0], 20)} - {_wrap(args[1], 21)}"
    if head == "neg":
        s = _wrap(args[0], 21)
        if s[0].isdigit():  # keep "-" from fusing into a numeric literal
            s = f"({s})"
        return f"-{s}"
    if head == "times":
        return " \\cdot ".join(
            [_wrap(args[0], 40)] + [_wrap(a, 41) for a in args[1:]]
        )
    if head == "div":
        return f"\\frac{{{to_latex(args[0])}}}{{{to_latex(args[1])}}}"
    if head == "pow":
        return f"{_wrap(args[0], 61)}^{{{to_latex(args[1])}}}"
    if head == "sub":
        return f"{_wrap(args[0], 61)}_{{{to_latex(args[1])}}}"
    if head == "presub":
        return f"_{{{to_latex(args[0])}}} {_wrap(args[1], 60)}"
    if head == "factorial":
        return f"{_wrap(args[0], 51)}!"
    if head == "binom":
        return f"\\binom{{{to_latex(args[0])}}}{{{to_latex(args[1])}}}"
    if head == "sqrt":
        return f"\\sqrt{{{to_latex(args[0])}}}"
    if head == "log" and len(args) == 2:
        return f"\\log_{{{to_latex(args[0])}}}({to_latex(args[1])})"
    if head in ("log", "ln"):
        return f"\\{head}({to_latex(args[0])})"
    if head in _FUNCTIONS:
        return f"\\{head}({to_latex(args[0])})"
    return f"{head}({', '.join(to_latex(a) for a in args)})"


def _binder_latex(kind, bound, body, lower, upper) -> str:
    if kind == "integral":
        s = "\\int"
        if lower is not None:
            s += f"_{{{to_latex(lower)}}}"
        if upper is not None:
            s += f"^{{{to_latex(upper)}}}"
        s += f" {_wrap(body, _BP_BINDER_BODY + 1)}"
        if bound:
            s += f" \\, d {bound[0]}"
        return s
    if kind in ("sum", "product"):
        cmd = "\\sum" if kind == "sum" else "\\prod"
        if bound:
            sub = bound[0] if lower is None else f"{bound[0]} = {to_latex(lower)}"
            cmd += f"_{{{sub}}}"
        if upper is not None:
            cmd += f"^{{{to_latex(upper)}}}"
        return f"{cmd} {_wrap(body, _BP_BINDER_BODY + 1)}"
    # lambda has no LaTeX surface form; emit a readable fallback
    return f"\\lambda {', '.join(bound)} . {to_latex(body)}"


def _chain_latex(lines: tuple[Expr, ...]) -> str:
    parts = [to_latex(lines[0])]
    prev_rhs = lines[0].args[1] if is_relation(lines[0]) else None
    for line in lines[1:]:
        if is_relation(line) and prev_rhs is not None and line.args[0] == prev_rhs:
            parts.append(f"&{_REL_LATEX[line.head]} {_wrap(line.args[1], 20)}")
        else:
            parts.append(to_latex(line))
        prev_rhs = line.args[1] if is_relation(line) else None
    return " \\\\ ".join(parts)


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------


def parse_document(src: str, doc_id: str = "doc") -> Document:
    """Split plain text with $...$ / $$...$$ math into a Document."""
    fragments: list[Fragment] = []
    pos = 0
    i, n = 0, len(src)
    text_start = 0

    def flush_text(end: int) -> None:
        nonlocal pos
        if end > text_start:
            piece = src[text_start:end]
            if piece:
                fragments.append(TextFragment(pos, piece))
                pos += 1

    while i < n:
        if src[i] != "$":
            i += 1
            continue
        display = i + 1 < n and src[i + 1] == "$"
        delim = "$$" if display else "$"
        start = i + len(delim)
        close = src.find(delim, start)
        if close < 0:
            raise ParseError(i, "closing math delimiter", "end of input",
                             fragment_index=len(fragments))
        flush_text(i)
        body = src[start:close]
        try:
            expr = parse_latex(body)
        except ParseError as exc:
            exc.fragment_index = len(fragments)
            raise
        fragments.append(FormulaFragment(pos, expr, body.strip(), display))
        pos += 1
        i = close + len(delim)
        text_start = i
    flush_text(n)
    return Document(doc_id, tuple(fragments))


def document_to_text(d: Document) -> str:
    """Serialize a Document back to $-delimited plain text."""
    parts = []
    for f in d.fragments:
        match f:
            case TextFragment(_, content):
                parts.append(content)
            case FormulaFragment(_, _, raw, display):
                delim = "$$" if display else "$"
                parts.append(f"{delim}{raw}{delim}")
    return "".join(parts)
