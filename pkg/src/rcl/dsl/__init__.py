"""Lexer, parser, checker and elaborator for .rcl sources."""
