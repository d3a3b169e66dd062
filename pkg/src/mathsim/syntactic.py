"""Syntax-based engine: flatten trees into word tokens and compare weighted
n-gram sets with a min/max (weighted Jaccard) overlap."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .expr import (
    CHAIN_HEAD,
    RELATION_HEADS,
    Apply,
    Binder,
    Expr,
    Identifier,
    Number,
    is_relation,
)
from .normalize import NormLevel, RuleTable, default_rules, normalize

MARKER = "marker"
OPERATOR = "operator"
IDENT = "identifier"
NUMBER = "number"

_OP_WORDS = {
    "eq": "Equal",
    "neq": "NotEqual",
    "lt": "Less",
    "gt": "Greater",
    "leq": "LessOrEqual",
    "geq": "GreaterOrEqual",
    "plus": "Plus",
    "minus": "Minus",
    "neg": "Minus",
    "times": "Times",
}
_FUNC_WORDS = {
    "sin": "Sine", "cos": "Cosine", "tan": "Tangent", "cot": "Cotangent",
    "sec": "Secant", "csc": "Cosecant", "sinh": "HypSine", "cosh": "HypCosine",
    "tanh": "HypTangent", "arcsin": "ArcSine", "arccos": "ArcCosine",
    "arctan": "ArcTangent", "log": "Logarithm", "ln": "NaturalLogarithm",
    "exp": "Exponential", "sqrt": "SquareRoot", "binom": "Binomial",
}
_BINDER_WORDS = {"sum": "Sum", "product": "Product", "integral": "Integral",
                 "lambda": "Lambda"}

# Precedence mirror of the parser; used to decide grouping markers so that
# distinct trees flatten to distinct token sequences.
_PREC = {
    **{h: 10 for h in RELATION_HEADS},
    "plus": 20, "minus": 20, "neg": 20,
    "times": 40,
}


@dataclass(frozen=True)
class TokenSeq:
    tokens: tuple[str, ...]
    classes: tuple[str, ...]

    def __post_init__(self) -> None:
        assert len(self.tokens) == len(self.classes)

    def __len__(self) -> int:
        return len(self.tokens)


class _Emitter:
    def __init__(self) -> None:
        self.tokens: list[str] = []
        self.classes: list[str] = []

    def emit(self, token: str, cls: str) -> None:
        self.tokens.append(token)
        self.classes.append(cls)

    def marker(self, word: str) -> None:
        self.emit(word, MARKER)

    def op(self, word: str) -> None:
        self.emit(word, OPERATOR)


def _prec(e: Expr) -> int:
    if isinstance(e, Apply) and e.head in _PREC:
        return _PREC[e.head]
    if isinstance(e, Binder):
        return 35
    if isinstance(e, Number) and e.value < 0:
        return 20
    return 100


def textualize(e: Expr) -> TokenSeq:
    """Deterministic infix flattening with Begin/End structure markers."""
    out = _Emitter()
    _flatten(e, out, 0)
    return TokenSeq(tuple(out.tokens), tuple(out.classes))


def _flatten(e: Expr, out: _Emitter, min_prec: int) -> None:
    grouped = _prec(e) < min_prec
    if grouped:
        out.marker("BeginGroup")
    _flatten_node(e, out)
    if grouped:
        out.marker("EndGroup")


def _flatten_node(e: Expr, out: _Emitter) -> None:
    match e:
        case Number(value):
            out.emit(str(value), NUMBER)
        case Identifier(name, _):
            out.emit(name, IDENT)
        case Binder(kind, bound, body, lower, upper):
            out.marker(f"Begin{_BINDER_WORDS[kind]}")
            for name in bound:
                out.emit(name, IDENT)
            if lower is not None:
                out.marker("From")
                _flatten(lower, out, 0)
            if upper is not None:
                out.marker("To")
                _flatten(upper, out, 0)
            _flatten(body, out, 36)
            out.marker(f"End{_BINDER_WORDS[kind]}")
        case Apply(head, args):
            _flatten_apply(head, args, out)


def _flatten_apply(head: str, args: tuple[Expr, ...], out: _Emitter) -> None:
    if head in RELATION_HEADS:
        _flatten(args[0], out, 11)
        out.op(_OP_WORDS[head])
        _flatten(args[1], out, 11)
    elif head == CHAIN_HEAD:
        for i, line in enumerate(args):
            if i:
                out.marker("Break")
            _flatten(line, out, 0)
    elif head == "plus":
        for i, a in enumerate(args):
            if i:
                out.op("Plus")
            _flatten(a, out, 21 if i else 20)
    elif head == "minus":
        _flatten(args[0], out, 20)
        out.op("Minus")
        _flatten(args[1], out, 21)
    elif head == "neg":
        out.op("Minus")
        _flatten(args[0], out, 21)
    elif head == "times":
        for i, a in enumerate(args):
            if i:
                out.op("Times")
            _flatten(a, out, 41 if i else 40)
    elif head == "div":
        out.marker("BeginFraction")
        _flatten(args[0], out, 0)
        out.marker("Over")
        _flatten(args[1], out, 0)
        out.marker("EndFraction")
    elif head == "pow":
        _flatten(args[0], out, 101)
        out.marker("BeginExponent")
        _flatten(args[1], out, 0)
        out.marker("EndExponent")
    elif head == "sub":
        _flatten(args[0], out, 101)
        out.marker("BeginSubscript")
        _flatten(args[1], out, 0)
        out.marker("EndSubscript")
    elif head == "presub":
        out.marker("BeginPresubscript")
        _flatten(args[0], out, 0)
        out.marker("EndPresubscript")
        _flatten(args[1], out, 101)
    elif head == "factorial":
        _flatten(args[0], out, 101)
        out.op("Factorial")
    else:
        word = _FUNC_WORDS.get(head)
        if word is not None:
            out.op(word)
        else:
            out.emit(head, IDENT)
        out.marker("BeginArgs")
        for i, a in enumerate(args):
            if i:
                out.marker("Comma")
            _flatten(a, out, 0)
        out.marker("EndArgs")


# ---------------------------------------------------------------------------
# Weighted n-grams
# ---------------------------------------------------------------------------

DEFAULT_CLASS_WEIGHTS = {MARKER: 1.5, OPERATOR: 2.0, IDENT: 1.0, NUMBER: 1.0}


@dataclass(frozen=True)
class WeightedNgramSet:
    entries: dict[tuple[str, ...], float]
    n_min: int
    n_max: int


def ngrams(
    t: TokenSeq,
    n_min: int = 1,
    n_max: int = 3,
    weights: Optional[dict[str, float]] = None,
) -> WeightedNgramSet:
    """All contiguous n-grams; a gram's weight is the sum of its tokens'
    class weights."""
    if not 1 <= n_min <= n_max:
        raise ValueError("need 1 <= n_min <= n_max")
    weights = weights or DEFAULT_CLASS_WEIGHTS
    token_weights = [weights[c] for c in t.classes]
    entries: dict[tuple[str, ...], float] = {}
    for n in range(n_min, n_max + 1):
        for i in range(len(t.tokens) - n + 1):
            gram = t.tokens[i : i + n]
            entries[gram] = sum(token_weights[i : i + n])
    return WeightedNgramSet(entries, n_min, n_max)


def weighted_jaccard(a: WeightedNgramSet, b: WeightedNgramSet) -> float:
    """Sum of min weights over sum of max weights; 1.0 when both empty."""
    if not a.entries and not b.entries:
        return 1.0
    num = den = 0.0
    for gram in a.entries.keys() | b.entries.keys():
        wa = a.entries.get(gram, 0.0)
        wb = b.entries.get(gram, 0.0)
        num += min(wa, wb)
        den += max(wa, wb)
    return num / den if den else 1.0


@dataclass(frozen=True)
class SyntacticConfig:
    n_min: int = 1
    n_max: int = 3
    class_weights: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_CLASS_WEIGHTS)
    )
    level: NormLevel = NormLevel.COMMUTE
    equiv: bool = False


def _gram_set(e: Expr, cfg: SyntacticConfig, rules: RuleTable) -> WeightedNgramSet:
    t = textualize(normalize(e, cfg.level, rules, equiv=cfg.equiv))
    return ngrams(t, cfg.n_min, cfg.n_max, cfg.class_weights)


def sim_syntactic(
    a: Expr,
    b: Expr,
    cfg: Optional[SyntacticConfig] = None,
    rules: Optional[RuleTable] = None,
) -> float:
    cfg = cfg or SyntacticConfig()
    rules = rules or default_rules()
    return weighted_jaccard(_gram_set(a, cfg, rules), _gram_set(b, cfg, rules))


def subterm_hits(
    query: Expr,
    doc: Expr,
    threshold: float = 0.0,
    cfg: Optional[SyntacticConfig] = None,
    rules: Optional[RuleTable] = None,
) -> list[tuple[tuple[str, ...], float]]:
    """Shared n-grams with weight >= threshold, heaviest first."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    cfg = cfg or SyntacticConfig()
    rules = rules or default_rules()
    qa = _gram_set(query, cfg, rules)
    qb = _gram_set(doc, cfg, rules)
    hits = [
        (gram, qa.entries[gram])
        for gram in qa.entries.keys() & qb.entries.keys()
        if qa.entries[gram] >= threshold
    ]
    hits.sort(key=lambda item: (-item[1], item[0]))
    return hits
