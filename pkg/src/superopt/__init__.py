"""Stochastic superoptimization of toy-ISA programs with learned proposal distributions."""

from ._jit import BACKEND
from .cost import CostReport, CostWeights, eq_cost, total_cost
from .isa import (DEFAULT_ISA, Instruction, Isa, ParseError, Program, TestCase, TestSuite,
                  execute, execute_batch, make_tests, parse, perf, render)
from .mcmc import RolloutBatch, SearchConfig, Trace, acceptance, metropolis_run, run_rollouts, score
from .proposal import Move, MoveKind, ProposalParams, apply_move, log_prob, sample_move, uniform_params

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CostReport", "CostWeights", "eq_cost", "total_cost", "DEFAULT_ISA", "Instruction",
    "Isa", "ParseError", "Program", "TestCase", "TestSuite", "execute", "execute_batch",
    "make_tests", "parse", "perf", "render", "RolloutBatch", "SearchConfig", "Trace",
    "acceptance", "metropolis_run", "run_rollouts", "score", "Move", "MoveKind",
    "ProposalParams", "apply_move", "log_prob", "sample_move", "uniform_params", "__version__",
]
