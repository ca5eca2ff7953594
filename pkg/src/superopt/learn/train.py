"""Training loop and seeded evaluation.

Each optimisation step draws a minibatch of start programs, runs K rollouts
per program under the current model, estimates the score gradient with
REINFORCE and applies one Adam step.  All randomness is derived from the
master seed and (epoch, program index), so a run resumed from a saved model
and optimiser state reproduces the remaining epochs exactly.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..cost import CostWeights
from ..mcmc import RolloutBatch, SearchConfig, run_rollouts
from ..proposal import ProposalParams, uniform_params
from .adam import AdamState, adam_step
from .models import Model, featurize, forward, zero_model
from .reinforce import reinforce_grad

log = logging.getLogger(__name__)

# base learning rates, before division by the minibatch size
DEFAULT_LR = {("bias", "hd"): 1.0, ("bias", "synthetic"): 10.0,
              ("mlp", "hd"): 0.01, ("mlp", "synthetic"): 0.1}

CURVE_COLUMNS = ("epoch", "train_mean_score", "test_mean_score")


def derive_seed(*keys: int) -> int:
    """A 63-bit seed that depends on every key."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0] >> 1)


@dataclass(frozen=True)
class TrainConfig:
    model_kind: str = "bias"
    epochs: int = 10
    lr: float = 1.0
    minibatch: int = 32
    rollouts: int = 100
    budget: int = 200
    beta: float = 1.0
    weights: CostWeights = CostWeights()
    credit: str = "t-ge-i"
    baseline: bool = False
    seed: int = 0
    eval_runs: int = 5
    eval_budget: int | None = None
    eval_every: int = 1


def params_for(model: Model | None, program, isa=None) -> ProposalParams:
    if model is None:
        return uniform_params(isa or program.isa)
    return forward(model, featurize(program))


def collect(model: Model | None, entries: Sequence, config: SearchConfig, runs: int,
            salt: int = 0) -> list[RolloutBatch]:
    """``runs`` rollouts per entry; entry ``e`` uses seed ``derive_seed(config.seed, salt, e)``."""
    out = []
    for e, entry in enumerate(entries):
        params = params_for(model, entry.program)
        cfg = SearchConfig(config.budget, config.weights, config.beta,
                           derive_seed(config.seed, salt, e), config.require_correct_best)
        out.append(run_rollouts(entry.reference, entry.program, params, entry.tests, cfg, runs))
    return out


def mean_score(model: Model | None, entries: Sequence, config: SearchConfig, runs: int) -> float:
    if not entries:
        return float("nan")
    return float(np.mean([b.scores.mean() for b in collect(model, entries, config, runs)]))


@dataclass
class TrainResult:
    model: Model
    adam: AdamState
    curves: list = field(default_factory=list)   # (epoch, train_mean, test_mean)

    def write_curves(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for epoch, tr, te in self.curves:
            w.writerow([epoch, repr(tr), repr(te)])


def train(train_set: Sequence, test_set: Sequence, config: TrainConfig,
          model: Model | None = None, adam: AdamState | None = None, start_epoch: int = 0,
          on_epoch: Callable[[int, TrainResult], None] | None = None,
          curves: list | None = None) -> TrainResult:
    """Train for epochs ``start_epoch + 1 .. config.epochs``.

    Curves hold one row per evaluated epoch; epoch 0 is the starting model.
    ``curves`` carries the rows of an interrupted run being resumed.
    """
    if not train_set:
        raise ValueError("empty training set")
    isa = train_set[0].program.isa
    if model is None:
        model = zero_model(config.model_kind, isa, config.seed)
    model.check_isa(isa)
    if adam is None:
        adam = AdamState.init(model, config.lr, config.minibatch)
    run_cfg = SearchConfig(config.budget, config.weights, config.beta, config.seed)
    eval_cfg = SearchConfig(config.eval_budget or config.budget, config.weights, config.beta,
                            derive_seed(config.seed, 7))
    result = TrainResult(model, adam, [tuple(c) for c in curves or ()])

    def evaluate_curves(epoch):
        tr = mean_score(result.model, train_set, eval_cfg, config.eval_runs)
        te = mean_score(result.model, test_set, eval_cfg, config.eval_runs)
        result.curves.append((epoch, tr, te))
        log.info("epoch %d  train %.4f  test %.4f", epoch, tr, te)

    if start_epoch == 0 and config.eval_every:
        evaluate_curves(0)
    n = len(train_set)
    for epoch in range(start_epoch + 1, config.epochs + 1):
        order = np.random.default_rng([config.seed, epoch]).permutation(n)
        for lo in range(0, n, config.minibatch):
            idx = order[lo:lo + config.minibatch]
            batches, feats = [], []
            for i in idx:
                entry = train_set[i]
                feat = featurize(entry.program)
                params = forward(result.model, feat)
                cfg = SearchConfig(run_cfg.budget, run_cfg.weights, run_cfg.beta,
                                   derive_seed(config.seed, 1, epoch, int(i)))
                batches.append(run_rollouts(entry.reference, entry.program, params,
                                            entry.tests, cfg, config.rollouts))
                feats.append(feat)
            grad = reinforce_grad(batches, result.model, feats, config.credit, config.baseline)
            result.model, result.adam = adam_step(result.model, grad, result.adam)
        if config.eval_every and (epoch % config.eval_every == 0 or epoch == config.epochs):
            evaluate_curves(epoch)
        if on_epoch is not None:
            on_epoch(epoch, result)
    return result
