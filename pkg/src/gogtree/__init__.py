"""Computational toolkit for graphs of free and finite groups.

Stallings foldings, Britton normal forms, Bass-Serre trees, trees of spaces,
ladders and finite-scale limit-set experiments.
"""
from .graph_of_groups import EXAMPLES, GraphOfGroups, Path, load, load_example

__version__ = "0.1.0"

__all__ = ["EXAMPLES", "GraphOfGroups", "Path", "load", "load_example"]
