"""Math-expression similarity engines and plagiarism-detection harness."""

from .expr import (
    Apply,
    Binder,
    Document,
    Expr,
    FormulaFragment,
    Identifier,
    Number,
    TextFragment,
    canonical_string,
    node_count,
)
from .parse import ParseError, parse_canonical, parse_document, parse_latex, to_latex

__all__ = [
    "Apply",
    "Binder",
    "Document",
    "Expr",
    "FormulaFragment",
    "Identifier",
    "Number",
    "TextFragment",
    "canonical_string",
    "node_count",
    "ParseError",
    "parse_canonical",
    "parse_document",
    "parse_latex",
    "to_latex",
]
