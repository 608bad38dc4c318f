"""MILP encoding of MPE inference and a small embedded solver."""

from .lpfile import export_lp, parse_lp, read_lp
from .program import MilpProgram, encode
from .pwl import PiecewiseApprox, adaptive_pwl, paper_pwl
from .solve import solve

__all__ = [
    "MilpProgram",
    "PiecewiseApprox",
    "adaptive_pwl",
    "encode",
    "export_lp",
    "paper_pwl",
    "parse_lp",
    "read_lp",
    "solve",
]
