"""Score-function (REINFORCE) gradient of the expected search score.

Every sampled move, accepted or not, contributes ``grad log q(move) * G_i``
with ``G_i`` the sum of cost nodes from step ``i`` on.  Only the kind and
opcode choices depend on the parameters; the uniform position and operand
factors drop out.  Gradients are worked out in closed form with respect to
the two logit vectors and then pushed through the model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels as K
from ..mcmc import RolloutBatch, Trace
from ..proposal import N_KINDS, ProposalParams
from .models import BowFeature, Model, forward

CREDIT_MODES = ("t-ge-i", "t-gt-i")
PARAMS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GradEstimate:
    arrays: list
    n_samples: int

    def __post_init__(self):
        for a in self.arrays:
            if not np.isfinite(a).all():
                raise FloatingPointError("non-finite gradient")

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays])


def returns(cost_nodes: np.ndarray, credit: str = "t-ge-i") -> np.ndarray:
    """Per-step returns along the last axis.

    ``t-ge-i``: G_i = sum_{t >= i} c_t.  ``t-gt-i``: G_i = sum_{t > i} c_t.
    """
    if credit not in CREDIT_MODES:
        raise ValueError(f"credit must be one of {CREDIT_MODES}")
    g = np.flip(np.cumsum(np.flip(cost_nodes, -1), -1), -1)
    if credit == "t-gt-i":
        g = g - cost_nodes
    return g


def leave_one_out(g: np.ndarray) -> np.ndarray:
    """Subtract, per timestep, the mean return of the other rollouts."""
    k = g.shape[0]
    if k < 2:
        return g
    return g - (g.sum(axis=0) - g) / (k - 1)


def logit_grads(batch: RolloutBatch, class_of: np.ndarray, credit: str = "t-ge-i",
                baseline: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Sum over rollouts and steps of ``G_i * d log q(move_i) / d logits``."""
    params: ProposalParams = batch.params
    g = returns(batch.cost_nodes, credit)
    if baseline:
        g = leave_one_out(g)
    w = g.ravel()
    kinds = batch.moves[..., 0].ravel()
    p_kind = params.kind_probs
    g_kind = np.bincount(kinds, weights=w, minlength=N_KINDS) - w.sum() * p_kind

    p = params.op_probs
    n = p.shape[0]
    opidx = batch.opcode_index.ravel()
    subset = batch.subset.ravel()
    excl = batch.excluded.ravel()
    full = subset == K.SUBSET_FULL
    same = subset >= 0
    drawn = full | same
    counts = np.bincount(opidx[drawn], weights=w[drawn], minlength=n)
    # same-signature draws renormalise over class minus the excluded opcode
    n_cls = int(class_of.max()) + 1
    cls_mass = np.bincount(class_of, weights=p, minlength=n_cls)
    sc, se = subset[same], excl[same]
    r = w[same] / (cls_mass[sc] - p[se])
    cls_w = np.bincount(sc, weights=r, minlength=n_cls)
    excl_w = np.bincount(se, weights=r, minlength=n)
    g_op = counts - p * (w[full].sum() + cls_w[class_of] - excl_w)
    return g_kind, g_op


def _as_batch(x) -> RolloutBatch:
    return RolloutBatch.stack([x]) if isinstance(x, Trace) else x


def reinforce_grad(batches, model: Model, feats: list[BowFeature], credit: str = "t-ge-i",
                   baseline: bool = False) -> GradEstimate:
    """Gradient of the mean score estimated from recorded runs.

    ``batches`` holds one RolloutBatch (or Trace) per feature vector; each
    must have been sampled under ``forward(model, feat)``.  Contributions are
    summed over steps and averaged over all runs.
    """
    batches = [_as_batch(b) for b in batches]
    if len(batches) != len(feats):
        raise ValueError("need one feature vector per batch")
    acc = [np.zeros(s) for s in model.shapes()]
    n = 0
    for batch, feat in zip(batches, feats):
        isa = batch.initial.isa
        model.check_isa(isa)
        current = forward(model, feat)
        diff = current.max_abs_diff(batch.params)
        if diff > PARAMS_TOL:
            raise ValueError(f"runs were sampled under different proposal params (max diff {diff:.3g})")
        g_kind, g_op = logit_grads(batch, isa.class_of, credit, baseline)
        _, _, cache = model.logits(feat)
        for a, d in zip(acc, model.backward(cache, g_kind, g_op)):
            a += d
        n += len(batch)
    if n:
        for a in acc:
            a /= n
    return GradEstimate(acc, n)
