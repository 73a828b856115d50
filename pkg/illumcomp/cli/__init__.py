"""
Command-line entry point: python -m illumcomp.cli <command> ...
"""

from illumcomp.cli.main import build_parser, main

__all__ = ["build_parser", "main"]
