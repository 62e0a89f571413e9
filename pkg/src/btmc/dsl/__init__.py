"""Textual model language: parser, pretty-printer and DOT rendering."""
from .dot import emit_dot
from .lexer import ParseError, tokenize
from .parser import (
    SourceFile, ValidationError, parse_expr, parse_formula, parse_items, parse_monitor,
    parse_scenario, parse_specs, parse_tree, parse_tree_full, resolve_expr, resolve_symbols,
)
from .printer import pretty_print, print_monitor, print_scenario, print_spec

__all__ = [
    "ParseError", "ValidationError", "SourceFile", "tokenize", "parse_tree", "parse_tree_full",
    "parse_monitor", "parse_specs", "parse_scenario", "parse_formula", "parse_expr", "parse_items",
    "resolve_expr", "resolve_symbols", "pretty_print", "print_monitor", "print_spec",
    "print_scenario", "emit_dot",
]
