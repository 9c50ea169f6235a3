"""Public goods games on directed networks.

Pure-equilibrium solvers for the indivisible game, threshold games and their
reductions, generalized-circuit gadgets, a bounded-treewidth dynamic program
for approximate equilibria, and divisible summation games.
"""

__version__ = "0.1.0"

from .core import DirectedGraph, IndivisibleGame, StepFunction, check_eps_nash, check_pure_nash
from .divisible import SumGame, WinLoseGame
from .gcircuit import GeneralizedCircuit, compile_circuit
from .pure import brute_force_pure, classify_utility, reduce_3sat, solve_pure
from .threshold import ThresholdGame, check_threshold_eq
from .treewidth import TreeDecomposition, dp_solve

__all__ = [
    "DirectedGraph",
    "GeneralizedCircuit",
    "IndivisibleGame",
    "StepFunction",
    "SumGame",
    "ThresholdGame",
    "TreeDecomposition",
    "WinLoseGame",
    "brute_force_pure",
    "check_eps_nash",
    "check_pure_nash",
    "check_threshold_eq",
    "classify_utility",
    "compile_circuit",
    "dp_solve",
    "reduce_3sat",
    "solve_pure",
]
