"""A1 formula grammar: parsing, printing, R1C1 normalization, precedents."""

from eucctl.formula.ast import (
    BinaryOp,
    Boolean,
    Call,
    CellRef,
    ErrorLit,
    Node,
    Number,
    Opaque,
    Paren,
    RangeNode,
    Text,
    UnaryOp,
)
from eucctl.formula.parser import (
    BadReferenceError,
    FormulaSyntaxError,
    UnbalancedParensError,
    parse_formula,
)
from eucctl.formula.printer import print_formula
from eucctl.formula.normalize import (
    NormalizedFormula,
    TranslationRangeError,
    normalize_r1c1,
    translate_formula,
)
from eucctl.formula.precedents import (
    DEFAULT_VOLATILE_FUNCTIONS,
    RANGE_EXPANSION_CAP,
    Precedents,
    ReferenceIndex,
    expand_ranges,
    precedents,
    referenced_by,
)

__all__ = [
    "BadReferenceError",
    "BinaryOp",
    "Boolean",
    "Call",
    "CellRef",
    "DEFAULT_VOLATILE_FUNCTIONS",
    "ErrorLit",
    "FormulaSyntaxError",
    "Node",
    "NormalizedFormula",
    "Number",
    "Opaque",
    "Paren",
    "Precedents",
    "RANGE_EXPANSION_CAP",
    "RangeNode",
    "ReferenceIndex",
    "Text",
    "TranslationRangeError",
    "UnaryOp",
    "UnbalancedParensError",
    "expand_ranges",
    "normalize_r1c1",
    "parse_formula",
    "precedents",
    "print_formula",
    "referenced_by",
    "translate_formula",
]
