"""Adam with bias-corrected moments; step size is ``lr / minibatch``."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .models import Model


@dataclass(frozen=True, eq=False)
class AdamState:
    m: list
    v: list
    t: int = 0
    lr: float = 1e-3
    minibatch: int = 1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, model: Model, lr: float, minibatch: int = 32, **kw) -> "AdamState":
        return cls([np.zeros(s) for s in model.shapes()], [np.zeros(s) for s in model.shapes()],
                   0, float(lr), int(minibatch), **kw)

    @property
    def step_size(self) -> float:
        return self.lr / self.minibatch

    def save(self, path):
        arrays = {f"m{i}": a for i, a in enumerate(self.m)}
        arrays.update({f"v{i}": a for i, a in enumerate(self.v)})
        meta = np.array([self.t, self.lr, self.minibatch, self.beta1, self.beta2, self.eps])
        with open(path, "wb") as fh:
            np.savez(fh, meta=meta, **arrays)

    @classmethod
    def load(cls, path) -> "AdamState":
        with np.load(path) as z:
            meta = z["meta"]
            n = sum(1 for k in z.files if k[0] == "m" and k[1:].isdigit())
            m = [z[f"m{i}"] for i in range(n)]
            v = [z[f"v{i}"] for i in range(n)]
        return cls(m, v, int(meta[0]), float(meta[1]), int(meta[2]),
                   float(meta[3]), float(meta[4]), float(meta[5]))


def adam_step(model: Model, grad, state: AdamState) -> tuple[Model, AdamState]:
    """One descent step on ``grad``; returns new model and state, inputs untouched."""
    arrays = grad.arrays if hasattr(grad, "arrays") else grad
    if [a.shape for a in arrays] != [tuple(s) for s in model.shapes()]:
        raise ValueError("gradient shapes do not match the model")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    c1, c2 = 1.0 - b1 ** t, 1.0 - b2 ** t
    lr = state.step_size
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(model.arrays, arrays, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        new_p.append(p - lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return model.with_arrays(new_p), replace(state, m=new_m, v=new_v, t=t)
