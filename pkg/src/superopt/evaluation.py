"""Seeded comparison of proposal models on dataset splits.

Every model sees the same uniform streams: entry ``e`` of split ``s`` uses
seed ``derive_seed(seed, s, e)`` for its runs.  A single run of
``max(budget, snapshots)`` iterations serves all snapshot budgets because
the uniform streams are prefix-stable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .cost import CostWeights
from .learn.train import collect
from .mcmc import SearchConfig

SPLITS = ("train", "test")


@dataclass(frozen=True, eq=False)
class SplitResult:
    model: str
    split: str
    entries: list          # entry names
    snapshots: tuple       # iteration counts
    scores: np.ndarray     # (n_entries, runs, n_snapshots)

    def mean(self, iteration: int) -> float:
        return float(self.scores[:, :, self.snapshots.index(iteration)].mean())


def evaluate(models: dict, splits: dict, budget: int = 200, runs: int = 20, seed: int = 0,
             snapshots=(100, 200, 400), beta: float = 1.0,
             weights: CostWeights = CostWeights()) -> list[SplitResult]:
    """``models`` maps a row name to a Model, or None for the uniform baseline."""
    snaps = tuple(sorted(set(int(s) for s in snapshots) | {int(budget)}))
    horizon = snaps[-1]
    out = []
    for name, model in models.items():
        for split, entries in splits.items():
            salt = SPLITS.index(split) if split in SPLITS else len(SPLITS)
            cfg = SearchConfig(horizon, weights, beta, seed)
            batches = collect(model, entries, cfg, runs, salt)
            scores = np.stack([np.stack([b.scores_at(s) for s in snaps], axis=-1)
                               for b in batches])
            out.append(SplitResult(name, split, [e.name for e in entries], snaps, scores))
    return out


def write_comparison(fh, results: list[SplitResult], budget: int):
    """One row per (model, split): mean score at ``budget`` and at every snapshot."""
    snaps = results[0].snapshots
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["model", "split", "entries", "runs", "mean_score"]
               + [f"mean_score_at_{s}" for s in snaps])
    for r in results:
        w.writerow([r.model, r.split, r.scores.shape[0], r.scores.shape[1], repr(r.mean(budget))]
                   + [repr(r.mean(s)) for s in snaps])


def write_snapshots(fh, results: list[SplitResult]):
    """Every individual run score at every snapshot (the per-budget distributions)."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["model", "split", "entry", "run", "iterations", "score"])
    for r in results:
        for e, name in enumerate(r.entries):
            for k in range(r.scores.shape[1]):
                for j, s in enumerate(r.snapshots):
                    w.writerow([r.model, r.split, name, k, s, repr(float(r.scores[e, k, j]))])
