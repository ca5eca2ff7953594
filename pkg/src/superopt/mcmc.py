"""Metropolis search over rewrites with full trace recording.

Per iteration: sample a move, apply it, score the candidate, accept with
probability ``min(1, exp(-beta * (cost_new - cost_old)))``, then record the
cost node ``min(0, (cost(R_t) - min_{i<t} cost(R_i)) / cost(R_0))`` where
``R_t`` is the post-decision state.  The cost nodes telescope:
``sum_t c_t == score - 1``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import kernels as K
from .cost import CostWeights, total_cost
from .isa import Program, TestSuite, as_suite
from .proposal import Move, MoveKind, MoveRecord, ProposalParams, kernel_args

TRACE_COLUMNS = ("iteration", "kind", "logprob", "proposed_cost", "accepted",
                 "cost_node", "running_best")


@dataclass(frozen=True)
class SearchConfig:
    budget: int = 200
    weights: CostWeights = CostWeights()
    beta: float = 1.0
    seed: int = 0
    require_correct_best: bool = False

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")


def acceptance(cost_new: float, cost_old: float, beta: float = 1.0) -> float:
    return float(K.accept_probability(float(cost_new), float(cost_old), float(beta)))


class Step(NamedTuple):
    record: MoveRecord
    proposed_cost: float      # nan for an inapplicable move
    accepted: bool
    cost_node: float


@dataclass(frozen=True, eq=False)
class Trace:
    """One Metropolis run.  Per-step data is stored column-wise."""

    reference: Program
    initial: Program
    params: ProposalParams
    moves: np.ndarray           # (T, 6) int64
    logprobs: np.ndarray
    opcode_index: np.ndarray    # proposable index of a drawn opcode, -1 if none
    subset: np.ndarray          # kernels.SUBSET_* or signature class
    excluded: np.ndarray
    proposed_costs: np.ndarray
    accepted: np.ndarray
    cost_nodes: np.ndarray
    running_best: np.ndarray
    best: Program
    best_cost: float
    initial_cost: float

    @property
    def budget(self) -> int:
        return self.moves.shape[0]

    @property
    def score(self) -> float:
        return self.best_cost / self.initial_cost

    def score_at(self, iteration: int) -> float:
        """Score of the run truncated to its first ``iteration`` steps."""
        if iteration <= 0:
            return 1.0
        return float(self.running_best[min(iteration, self.budget) - 1] / self.initial_cost)

    @cached_property
    def steps(self) -> list[Step]:
        out = []
        for t in range(self.budget):
            rec = MoveRecord(Move.from_array(self.moves[t]), float(self.logprobs[t]),
                             int(self.opcode_index[t]), int(self.subset[t]), int(self.excluded[t]))
            out.append(Step(rec, float(self.proposed_costs[t]), bool(self.accepted[t]),
                            float(self.cost_nodes[t])))
        return out

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for t in range(self.budget):
            w.writerow([t + 1, MoveKind(int(self.moves[t, 0])).name.lower(),
                        repr(float(self.logprobs[t])), repr(float(self.proposed_costs[t])),
                        int(self.accepted[t]), repr(float(self.cost_nodes[t])),
                        repr(float(self.running_best[t]))])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def score(trace: Trace) -> float:
    return trace.score


@dataclass(frozen=True, eq=False)
class RolloutBatch:
    """K independent runs from the same start under the same proposal."""

    reference: Program
    initial: Program
    params: ProposalParams
    moves: np.ndarray           # (K, T, 6)
    logprobs: np.ndarray        # (K, T)
    opcode_index: np.ndarray
    subset: np.ndarray
    excluded: np.ndarray
    proposed_costs: np.ndarray
    accepted: np.ndarray
    cost_nodes: np.ndarray
    running_best: np.ndarray
    best_codes: np.ndarray      # (K, L, 3)
    best_costs: np.ndarray      # (K,)
    initial_cost: float

    def __len__(self):
        return self.moves.shape[0]

    @property
    def scores(self) -> np.ndarray:
        return self.best_costs / self.initial_cost

    def scores_at(self, iteration: int) -> np.ndarray:
        return self.running_best[:, iteration - 1] / self.initial_cost

    def trace(self, k: int) -> Trace:
        return Trace(self.reference, self.initial, self.params, self.moves[k],
                     self.logprobs[k], self.opcode_index[k], self.subset[k], self.excluded[k],
                     self.proposed_costs[k], self.accepted[k], self.cost_nodes[k],
                     self.running_best[k],
                     Program(self.initial.isa, self.best_codes[k], validate=False),
                     float(self.best_costs[k]), self.initial_cost)

    def traces(self) -> list[Trace]:
        return [self.trace(k) for k in range(len(self))]

    @classmethod
    def stack(cls, traces: list[Trace]) -> "RolloutBatch":
        t0 = traces[0]
        return cls(t0.reference, t0.initial, t0.params,
                   *(np.stack([getattr(t, f) for t in traces]) for f in (
                       "moves", "logprobs", "opcode_index", "subset", "excluded",
                       "proposed_costs", "accepted", "cost_nodes", "running_best")),
                   np.stack([t.best.code for t in traces]),
                   np.array([t.best_cost for t in traces]), t0.initial_cost)


def rollout_uniforms(seed: int, run: int, budget: int) -> np.ndarray:
    """Uniform stream for run ``run`` of a seeded batch; prefix-stable in ``budget``."""
    return np.random.default_rng([seed, run]).random((budget, K.N_UNIFORMS))


def _run(reference: Program, start: Program, params: ProposalParams, tests,
         config: SearchConfig, uniforms: np.ndarray) -> RolloutBatch:
    suite: TestSuite = as_suite(tests)
    isa = start.isa
    init = total_cost(start, suite, config.weights).total
    if init == 0:
        raise ValueError("initial cost is zero; the score normalisation is undefined")
    probs, tables = kernel_args(params, isa)
    kind_p, kind_cdf, op_p, op_cdf, cls_mass, uniform = probs
    sig, prop, prop_of, members, size, cls_of, n_regs, pool = tables
    n, T = uniforms.shape[:2]
    L = isa.n_slots
    moves = np.empty((n, T, 6), dtype=np.int64)
    logp = np.empty((n, T))
    opidx = np.empty((n, T), dtype=np.int64)
    subset = np.empty((n, T), dtype=np.int64)
    excl = np.empty((n, T), dtype=np.int64)
    pcost = np.empty((n, T))
    acc = np.empty((n, T), dtype=np.bool_)
    node = np.empty((n, T))
    run_best = np.empty((n, T))
    best_code = np.empty((n, L, 3), dtype=np.int64)
    best_cost = np.empty(n)
    w = config.weights
    c0 = K.run_chains(start.code, uniforms, kind_p, kind_cdf, op_p, op_cdf, cls_mass, uniform,
                      sig, isa.sem, isa.latency, prop, prop_of, members, size, cls_of, n_regs,
                      pool, suite.inputs, suite.expected, suite.mask, isa.strict_shifts,
                      float(w.omega_e), float(w.omega_p), float(config.beta),
                      bool(config.require_correct_best),
                      moves, logp, opidx, subset, excl, pcost, acc, node, run_best,
                      best_code, best_cost)
    return RolloutBatch(reference, start, params, moves, logp, opidx, subset, excl, pcost,
                        acc, node, run_best, best_code, best_cost, float(c0))


def metropolis_run(reference: Program, start: Program, params: ProposalParams, tests,
                   config: SearchConfig = SearchConfig(),
                   rng: np.random.Generator | None = None) -> Trace:
    """One seeded search of ``config.budget`` iterations from ``start``.

    ``params`` is used as-is for every iteration.  Without ``rng`` the
    uniform stream is ``rollout_uniforms(config.seed, 0, budget)``.
    """
    if rng is None:
        u = rollout_uniforms(config.seed, 0, config.budget)
    else:
        u = rng.random((config.budget, K.N_UNIFORMS))
    return _run(reference, start, params, tests, config, u[None]).trace(0)


def run_rollouts(reference: Program, start: Program, params: ProposalParams, tests,
                 config: SearchConfig, n_runs: int, first_run: int = 0) -> RolloutBatch:
    """``n_runs`` searches; run ``j`` uses ``rollout_uniforms(config.seed, first_run + j)``."""
    u = np.stack([rollout_uniforms(config.seed, first_run + j, config.budget)
                  for j in range(n_runs)])
    return _run(reference, start, params, tests, config, u)
