"""Symbolic expressions over the states ``x1, x2, x3``."""

from .calculus import (
    NonDifferentiableError,
    antideriv,
    diff,
    gradient,
    is_smooth,
    is_sum_of_nonneg,
    match_affine,
    proportional,
    split_terms,
    substitute,
    var_power_factor,
)
from .core import (
    FUNCTIONS,
    ONE,
    ZERO,
    Add,
    Const,
    DomainError,
    Expr,
    Func,
    Mul,
    Pow,
    Var,
    abs_,
    canonical,
    const_value,
    contains_func,
    cos,
    equivalent,
    free_of,
    poly,
    sign,
    sin,
    sqrt,
    variables,
    x,
)
from .domain import Domain
from .numeric import QuadratureError, evaluate, evaluate_many, integral_from_zero, lambdify, quad
from .parser import ParseError, parse, parse_raw
from .printer import to_source, to_string

__all__ = [
    "FUNCTIONS", "ONE", "ZERO", "Add", "Const", "Domain", "DomainError", "Expr", "Func", "Mul",
    "NonDifferentiableError", "ParseError", "Pow", "QuadratureError", "Var", "abs_", "antideriv",
    "canonical", "const_value", "contains_func", "cos", "diff", "equivalent", "evaluate",
    "evaluate_many", "free_of", "gradient", "integral_from_zero", "is_smooth", "is_sum_of_nonneg",
    "lambdify", "match_affine", "parse", "parse_raw", "poly", "proportional", "quad", "sign", "sin",
    "split_terms", "sqrt", "substitute", "to_source", "to_string", "var_power_factor", "variables", "x",
]
