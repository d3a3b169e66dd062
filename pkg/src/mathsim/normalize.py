"""Ordered normalization pipeline: character folding, synonym rewriting,
commutative ordering, bound-variable and full identifier canonicalization,
plus optional bidirectional equivalence rules.

Rewrite patterns are ordinary trees whose identifiers starting with "?" act
as wildcards; a repeated wildcard must match equal subtrees. Two matching
extensions keep the small rule table effective on flattened n-ary plus/times
nodes: a two-argument commutative pattern nested inside a rule splits an
n-ary subject into first-vs-rest, and at the rule root it may consume any
argument pair, keeping the remaining arguments in place.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Optional

from .expr import (
    Apply,
    Binder,
    Expr,
    Identifier,
    Number,
    canonical_string,
    free_identifiers,
)
from .parse import ParseError, parse_canonical

_AC_HEADS = frozenset({"plus", "times"})


class RuleDivergence(Exception):
    """Rewriting did not reach a fixpoint within the step budget."""


@dataclass(frozen=True)
class RewriteRule:
    pattern: Expr
    replacement: Expr
    name: str = ""


@dataclass(frozen=True)
class EquivRule:
    """Bidirectional rule; `canonical` is the folded single-operator side."""

    name: str
    canonical: Expr
    expanded: Expr


@dataclass(frozen=True)
class RuleTable:
    homoglyphs: dict[str, str] = field(default_factory=dict)
    synonyms: tuple[RewriteRule, ...] = ()
    commutative_heads: frozenset[str] = frozenset({"plus", "times", "eq"})
    equiv_rules: tuple[EquivRule, ...] = ()
    step_budget: int = 1000

    def pattern_literal_names(self) -> set[str]:
        """Identifier names that appear literally in any rule."""
        names: set[str] = set()
        rules = [(r.pattern, r.replacement) for r in self.synonyms]
        rules += [(r.canonical, r.expanded) for r in self.equiv_rules]
        for a, b in rules:
            for side in (a, b):
                names |= {
                    n for n in _pattern_names(side) if not n.startswith("?")
                }
        return names


def _pattern_names(e: Expr) -> set[str]:
    names = set()
    stack = [e]
    while stack:
        node = stack.pop()
        match node:
            case Identifier(name, _):
                names.add(name)
            case Apply(_, args):
                stack.extend(args)
            case Binder(_, _, body, lower, upper):
                stack.extend(x for x in (lower, upper, body) if x is not None)
            case _:
                pass
    return names


class NormLevel(enum.IntEnum):
    """Cumulative normalization levels, weakest to strongest."""

    CHARS = 0
    SYNONYMS = 1
    COMMUTE = 2
    ALPHA_BOUND = 3
    FULL_RENAME = 4


LEVEL_NAMES = {
    "chars": NormLevel.CHARS,
    "syn": NormLevel.SYNONYMS,
    "commute": NormLevel.COMMUTE,
    "alpha": NormLevel.ALPHA_BOUND,
    "rename": NormLevel.FULL_RENAME,
}

FORWARD = "forward"
TO_CANONICAL = "canonical"


# ---------------------------------------------------------------------------
# Rule-table loading
# ---------------------------------------------------------------------------


def _parse_rule_side(src: str, lineno: int) -> Expr:
    try:
        return parse_canonical(src.strip())
    except ParseError as exc:
        raise ValueError(f"bad rule expression on line {lineno}: {exc}") from exc


def parse_rule_table(text: str) -> RuleTable:
    """Parse the rule-table text format (see data/rules.txt for the schema)."""
    homoglyphs: dict[str, str] = {}
    synonyms: list[RewriteRule] = []
    commutative: set[str] = set()
    equiv: list[EquivRule] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            continue
        if section == "homoglyphs":
            src, dst = line.split()
            homoglyphs[chr(int(src, 16))] = chr(int(dst, 16))
        elif section == "commutative":
            commutative.update(line.split())
        elif section == "synonyms":
            lhs, arrow, rhs = line.partition("->")
            if not arrow:
                raise ValueError(f"line {lineno}: synonym rule needs '->'")
            synonyms.append(
                RewriteRule(
                    _parse_rule_side(lhs, lineno), _parse_rule_side(rhs, lineno)
                )
            )
        elif section == "equiv":
            name, colon, rest = line.partition(":")
            if not colon:
                raise ValueError(f"line {lineno}: equiv rule needs 'name:'")
            lhs, arrow, rhs = rest.partition("<->")
            if not arrow:
                raise ValueError(f"line {lineno}: equiv rule needs '<->'")
            equiv.append(
                EquivRule(
                    name.strip(),
                    _parse_rule_side(lhs, lineno),
                    _parse_rule_side(rhs, lineno),
                )
            )
        else:
            raise ValueError(f"line {lineno}: content outside a known section")
    return RuleTable(
        homoglyphs=homoglyphs,
        synonyms=tuple(synonyms),
        commutative_heads=frozenset(commutative) or frozenset({"plus", "times", "eq"}),
        equiv_rules=tuple(equiv),
    )


def load_rules(path: str) -> RuleTable:
    with open(path, encoding="utf-8") as fh:
        return parse_rule_table(fh.read())


_default_rules: Optional[RuleTable] = None


def default_rules() -> RuleTable:
    """Shipped rule table; the MATHSIM_RULES env var overrides the path."""
    global _default_rules
    override = os.environ.get("MATHSIM_RULES")
    if override:
        return load_rules(override)
    if _default_rules is None:
        text = resources.files("mathsim.data").joinpath("rules.txt").read_text("utf-8")
        _default_rules = parse_rule_table(text)
    return _default_rules


# ---------------------------------------------------------------------------
# Pattern matching and rewriting
# ---------------------------------------------------------------------------


def _is_wildcard(e: Expr) -> bool:
    return isinstance(e, Identifier) and e.name.startswith("?")


def match(pattern: Expr, subject: Expr, bindings: Optional[dict] = None):
    """Bindings extending `bindings` if pattern matches subject, else None."""
    b = dict(bindings) if bindings else {}
    return b if _match(pattern, subject, b) else None


def _match(p: Expr, s: Expr, b: dict) -> bool:
    if _is_wildcard(p):
        name = p.name
        if name in b:
            return b[name] == s
        b[name] = s
        return True
    match p, s:
        case (Number(pv), Number(sv)):
            return pv == sv
        case (Identifier(pn, pt), Identifier(sn, st)):
            return pn == sn and pt == st
        case (Apply(ph, pargs), Apply(sh, sargs)):
            if ph != sh:
                return False
            if len(pargs) == len(sargs):
                if _match_seq(pargs, sargs, b):
                    return True
                if ph in _AC_HEADS and len(pargs) == 2:
                    return _match_seq(pargs, sargs[::-1], b)
                return False
            if ph in _AC_HEADS and len(pargs) == 2 and len(sargs) > 2:
                # first-vs-rest grouping of the flattened n-ary node
                rest = Apply(ph, sargs[1:])
                return _match_seq(pargs, (sargs[0], rest), b)
            return False
        case (Binder(pk, pb, pbody, plo, pup), Binder(sk, sb, sbody, slo, sup)):
            if pk != sk or pb != sb:
                return False
            for pe, se in ((plo, slo), (pup, sup)):
                if (pe is None) != (se is None):
                    return False
                if pe is not None and not _match(pe, se, b):
                    return False
            return _match(pbody, sbody, b)
    return False


def _match_seq(ps, ss, b: dict) -> bool:
    trial = dict(b)
    for p, s in zip(ps, ss):
        if not _match(p, s, trial):
            return False
    b.clear()
    b.update(trial)
    return True


def substitute(template: Expr, bindings: dict) -> Expr:
    if _is_wildcard(template):
        return bindings[template.name]
    match template:
        case Apply(head, args):
            return _flatten(Apply(head, tuple(substitute(a, bindings) for a in args)))
        case Binder(kind, bound, body, lower, upper):
            return Binder(
                kind,
                bound,
                substitute(body, bindings),
                substitute(lower, bindings) if lower is not None else None,
                substitute(upper, bindings) if upper is not None else None,
            )
        case _:
            return template


def _flatten(e: Apply) -> Expr:
    """Splice nested plus/times and collapse single-argument nodes."""
    if e.head not in _AC_HEADS:
        return e
    args: list[Expr] = []
    for a in e.args:
        if isinstance(a, Apply) and a.head == e.head:
            args.extend(a.args)
        else:
            args.append(a)
    if len(args) == 1:
        return args[0]
    return Apply(e.head, tuple(args))


def rewrite_at_root(e: Expr, rule: RewriteRule) -> Optional[Expr]:
    """Apply one rule at the root, using pair-of-many on AC nodes."""
    b = match(rule.pattern, e)
    if b is not None:
        return substitute(rule.replacement, b)
    p = rule.pattern
    if (
        isinstance(p, Apply)
        and p.head in _AC_HEADS
        and len(p.args) == 2
        and isinstance(e, Apply)
        and e.head == p.head
        and len(e.args) > 2
    ):
        for i in range(len(e.args)):
            for j in range(len(e.args)):
                if i == j:
                    continue
                b = match(p.args[0], e.args[i])
                if b is None:
                    continue
                b = match(p.args[1], e.args[j], b)
                if b is None:
                    continue
                replaced = substitute(rule.replacement, b)
                rest = [a for k, a in enumerate(e.args) if k not in (i, j)]
                return _flatten(Apply(e.head, tuple([replaced] + rest)))
    return None


def _rewrite_pass(e: Expr, rules: tuple[RewriteRule, ...]):
    """One top-down pass; returns (tree, rewrite happened?)."""
    for rule in rules:
        out = rewrite_at_root(e, rule)
        if out is not None:
            return out, True
    match e:
        case Apply(head, args):
            new_args = []
            changed = False
            for a in args:
                na, ch = _rewrite_pass(a, rules)
                new_args.append(na)
                changed = changed or ch
            return (_flatten(Apply(head, tuple(new_args))) if changed else e), changed
        case Binder(kind, bound, body, lower, upper):
            parts = []
            changed = False
            for part in (lower, upper, body):
                if part is None:
                    parts.append(None)
                    continue
                np_, ch = _rewrite_pass(part, rules)
                parts.append(np_)
                changed = changed or ch
            if not changed:
                return e, False
            return Binder(kind, bound, parts[2], parts[0], parts[1]), True
        case _:
            return e, False


def rewrite_fixpoint(e: Expr, rules: tuple[RewriteRule, ...], budget: int) -> Expr:
    steps = 0
    while True:
        e, changed = _rewrite_pass(e, rules)
        if not changed:
            return e
        steps += 1
        if steps > budget:
            raise RuleDivergence(f"no fixpoint after {budget} rewrite passes")


def find_redexes(e: Expr, rules: tuple[RewriteRule, ...]) -> list[tuple[list[int], RewriteRule]]:
    """All (path, rule) pairs where a rule applies; used by the obfuscators."""
    out: list[tuple[list[int], RewriteRule]] = []

    def go(node: Expr, path: list[int]) -> None:
        for rule in rules:
            if rewrite_at_root(node, rule) is not None:
                out.append((list(path), rule))
        from .expr import children

        for i, c in enumerate(children(node)):
            go(c, path + [i])

    go(e, [])
    return out


# ---------------------------------------------------------------------------
# Normalization stages
# ---------------------------------------------------------------------------


def normalize_chars(s: str, rules: Optional[RuleTable] = None) -> str:
    """Fold homoglyph codepoints and collapse whitespace runs."""
    rules = rules or default_rules()
    out = s.translate(str.maketrans(rules.homoglyphs))
    return " ".join(out.split())


def normalize_synonyms(e: Expr, rules: Optional[RuleTable] = None) -> Expr:
    rules = rules or default_rules()
    return rewrite_fixpoint(e, rules.synonyms, rules.step_budget)


_PAREN_STRIP = str.maketrans("", "", "()")


def _order_key(e: Expr) -> tuple[str, str]:
    # Parens are ignored so atoms interleave with compounds alphabetically;
    # the full canonical string breaks ties deterministically.
    s = canonical_string(e)
    return (s.translate(_PAREN_STRIP), s)


def order_commutative(e: Expr, rules: Optional[RuleTable] = None) -> Expr:
    """Sort arguments of commutative heads by canonical string, bottom-up."""
    rules = rules or default_rules()

    def go(node: Expr) -> Expr:
        match node:
            case Apply(head, args):
                new_args = tuple(go(a) for a in args)
                if head in rules.commutative_heads:
                    new_args = tuple(sorted(new_args, key=_order_key))
                return Apply(head, new_args)
            case Binder(kind, bound, body, lower, upper):
                return Binder(
                    kind,
                    bound,
                    go(body),
                    go(lower) if lower is not None else None,
                    go(upper) if upper is not None else None,
                )
            case _:
                return node

    return go(e)


def alpha_canonicalize(e: Expr) -> Expr:
    """Rename bound variables b1, b2, ... in binder-traversal order.

    Free identifiers are untouched; fresh names skip any free name already
    present so no capture can occur.
    """
    taken = free_identifiers(e)
    counter = [0]

    def fresh() -> str:
        while True:
            counter[0] += 1
            name = f"b{counter[0]}"
            if name not in taken:
                return name

    def go(node: Expr, env: dict[str, str]) -> Expr:
        match node:
            case Identifier(name, tag):
                return Identifier(env.get(name, name), tag)
            case Apply(head, args):
                return Apply(head, tuple(go(a, env) for a in args))
            case Binder(kind, bound, body, lower, upper):
                lo = go(lower, env) if lower is not None else None
                up = go(upper, env) if upper is not None else None
                new_names = tuple(fresh() for _ in bound)
                inner = dict(env)
                inner.update(zip(bound, new_names))
                return Binder(kind, new_names, go(body, inner), lo, up)
            case _:
                return node

    return go(e, {})


def full_rename_canonicalize(e: Expr) -> Expr:
    """Rename every identifier (free and bound) v1, v2, ... by first
    occurrence in pre-order, consistently across the whole tree."""
    mapping: dict[str, str] = {}

    def name_for(name: str) -> str:
        if name not in mapping:
            mapping[name] = f"v{len(mapping) + 1}"
        return mapping[name]

    def go(node: Expr) -> Expr:
        match node:
            case Identifier(name, tag):
                return Identifier(name_for(name), tag)
            case Apply(head, args):
                return Apply(head, tuple(go(a) for a in args))
            case Binder(kind, bound, body, lower, upper):
                new_bound = tuple(name_for(n) for n in bound)
                lo = go(lower) if lower is not None else None
                up = go(upper) if upper is not None else None
                return Binder(kind, new_bound, go(body), lo, up)
            case _:
                return node

    return go(e)


def apply_equiv_rules(
    e: Expr, rules: Optional[RuleTable] = None, orientation: str = TO_CANONICAL
) -> Expr:
    """Fixpoint of the equivalence rules, oriented one way.

    TO_CANONICAL folds toward the single-operator side; FORWARD expands.
    """
    rules = rules or default_rules()
    if orientation == TO_CANONICAL:
        oriented = tuple(
            RewriteRule(r.expanded, r.canonical, r.name) for r in rules.equiv_rules
        )
    elif orientation == FORWARD:
        oriented = tuple(
            RewriteRule(r.canonical, r.expanded, r.name) for r in rules.equiv_rules
        )
    else:
        raise ValueError(f"unknown orientation: {orientation!r}")
    return rewrite_fixpoint(e, oriented, rules.step_budget)


def _iterate_sorted_rename(e: Expr, rules: RuleTable, renamer) -> Expr:
    """Fixpoint of (commutative sort; rename).

    Renaming can change sort keys, so one pass is not idempotent; iterating
    settles the interplay. Should the iteration ever cycle, the member with
    the smallest canonical string is the deterministic representative.
    """
    seen: dict[str, int] = {}
    trail: list[Expr] = []
    cur = e
    for _ in range(32):
        nxt = renamer(order_commutative(cur, rules))
        if nxt == cur:
            return cur
        key = canonical_string(nxt)
        if key in seen:
            cycle = trail[seen[key]:]
            return min(cycle, key=canonical_string)
        seen[key] = len(trail)
        trail.append(nxt)
        cur = nxt
    return cur


def normalize(
    e: Expr,
    level: NormLevel,
    rules: Optional[RuleTable] = None,
    equiv: bool = False,
) -> Expr:
    """Cumulative pipeline: synonyms, optional equivalence fold, commutative
    ordering, then bound-variable or full renaming per level.

    Character normalization happens at parse time, so CHARS is the identity
    on trees.
    """
    rules = rules or default_rules()
    if level >= NormLevel.SYNONYMS:
        e = normalize_synonyms(e, rules)
    if equiv:
        e = apply_equiv_rules(e, rules, TO_CANONICAL)
    if level == NormLevel.COMMUTE:
        e = order_commutative(e, rules)
    elif level == NormLevel.ALPHA_BOUND:
        e = _iterate_sorted_rename(e, rules, alpha_canonicalize)
    elif level == NormLevel.FULL_RENAME:
        e = _iterate_sorted_rename(e, rules, full_rename_canonicalize)
    return e


def unordered_normalize(
    e: Expr,
    level: NormLevel,
    rules: Optional[RuleTable] = None,
    equiv: bool = False,
) -> Expr:
    """Normalization without the commutative sort.

    Sibling order is invisible to subpath sets, and skipping the sort keeps
    the v-numbering of FULL_RENAME independent of argument order, so a pure
    renaming always canonicalizes to the identical tree. Used by the
    structural engine and the obfuscation-preservation checks.
    """
    rules = rules or default_rules()
    if level >= NormLevel.SYNONYMS:
        e = normalize_synonyms(e, rules)
    if equiv:
        e = apply_equiv_rules(e, rules, TO_CANONICAL)
    if level == NormLevel.ALPHA_BOUND:
        e = alpha_canonicalize(e)
    elif level == NormLevel.FULL_RENAME:
        e = full_rename_canonicalize(e)
    return e
