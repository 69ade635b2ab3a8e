"""Exact engine for enumerative invariants of semistable sheaves on a curve."""

from .exact import (
    Rational,
    bernoulli_number,
    bernoulli_polynomial,
    leibniz_entry,
    rational_from_str,
    rational_to_str,
)
from .superalg import SuperPoly, alpha_var, dual_pair, pair_var, s_var, substitute
from .vertex import CurveContext, HomologyClass, chi, chi_pair, lie_bracket, vertex_op

ENGINE_VERSION = "0.1.0"

__all__ = [
    "ENGINE_VERSION",
    "Rational",
    "bernoulli_number",
    "bernoulli_polynomial",
    "leibniz_entry",
    "rational_from_str",
    "rational_to_str",
    "SuperPoly",
    "s_var",
    "pair_var",
    "alpha_var",
    "dual_pair",
    "substitute",
    "CurveContext",
    "HomologyClass",
    "chi",
    "chi_pair",
    "lie_bracket",
    "vertex_op",
]
