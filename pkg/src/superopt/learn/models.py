"""Proposal models: a program-independent Bias and a bag-of-opcodes MLP.

Both map a reference program's opcode histogram to two sets of logits (move
kinds and proposable opcodes); ``forward`` turns them into ProposalParams.
The MLP's forward and backward passes are written out by hand in float64.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..isa import DEFAULT_ISA, Isa, Program
from ..proposal import N_KINDS, ProposalParams

MAGIC = b"SOPTMDL1"
FORMAT_VERSION = 1
HIDDEN = (100, 300, 300)
# exp(-700) is still a normal float64; keeps every probability strictly positive
LOGIT_FLOOR = -700.0


@dataclass(frozen=True, eq=False)
class BowFeature:
    counts: np.ndarray      # (V,) opcode occurrence counts over live slots

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def featurize(p: Program) -> BowFeature:
    counts = np.bincount(p.code[:, 0], minlength=p.isa.n_opcodes).astype(np.float64)
    counts[0] = 0.0
    counts.setflags(write=False)
    return BowFeature(counts)


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.maximum(z - z.max(axis=-1, keepdims=True), LOGIT_FLOOR)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class Model:
    """Named float64 parameter arrays in a fixed order."""

    kind = ""
    names: tuple[str, ...] = ()

    def __init__(self, arrays, n_opcodes: int, n_proposable: int, seed: int = 0):
        self.arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
        self.n_opcodes = n_opcodes
        self.n_proposable = n_proposable
        self.seed = seed
        if len(self.arrays) != len(self.names):
            raise ValueError(f"{self.kind} model needs {len(self.names)} arrays")
        for name, a, shape in zip(self.names, self.arrays, self.shapes()):
            if a.shape != shape:
                raise ValueError(f"{name}: shape {a.shape}, expected {shape}")
            if not np.isfinite(a).all():
                raise ValueError(f"{name}: non-finite parameters")

    def shapes(self) -> list[tuple[int, ...]]:
        raise NotImplementedError

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.arrays)

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays])

    def with_flat(self, flat) -> "Model":
        out, pos = [], 0
        for shape in self.shapes():
            n = int(np.prod(shape))
            out.append(np.asarray(flat[pos:pos + n], dtype=np.float64).reshape(shape))
            pos += n
        if pos != len(flat):
            raise ValueError(f"expected {pos} parameters, got {len(flat)}")
        return self.with_arrays(out)

    def with_arrays(self, arrays) -> "Model":
        raise NotImplementedError

    def copy(self) -> "Model":
        return self.with_arrays([a.copy() for a in self.arrays])

    def __eq__(self, other):
        return (type(self) is type(other) and self.shapes() == other.shapes()
                and all(np.array_equal(a, b) for a, b in zip(self.arrays, other.arrays)))

    __hash__ = None

    def check_isa(self, isa: Isa):
        if (self.n_opcodes, self.n_proposable) != (isa.n_opcodes, isa.n_proposable):
            raise ValueError(f"model vocabulary (V={self.n_opcodes}, V'={self.n_proposable}) "
                             f"does not match ISA (V={isa.n_opcodes}, V'={isa.n_proposable})")

    def logits(self, feat: BowFeature):
        """(kind_logits, op_logits, cache) for one feature vector."""
        raise NotImplementedError

    def backward(self, cache, g_kind, g_op) -> list[np.ndarray]:
        """Parameter gradients given d/d(kind_logits) and d/d(op_logits)."""
        raise NotImplementedError


class BiasModel(Model):
    kind = "bias"
    names = ("kind_logits", "op_logits")

    def shapes(self):
        return [(N_KINDS,), (self.n_proposable,)]

    @classmethod
    def zeros(cls, isa: Isa = DEFAULT_ISA) -> "BiasModel":
        return cls([np.zeros(N_KINDS), np.zeros(isa.n_proposable)], isa.n_opcodes, isa.n_proposable)

    def with_arrays(self, arrays):
        return BiasModel(arrays, self.n_opcodes, self.n_proposable, self.seed)

    def logits(self, feat):
        return self.arrays[0], self.arrays[1], None

    def backward(self, cache, g_kind, g_op):
        return [np.array(g_kind, dtype=np.float64), np.array(g_op, dtype=np.float64)]


class MlpModel(Model):
    """V -> h1 -> h2 -> h3 with ReLU, then linear heads to 9 and V' logits.

    Weights are stored (fan_in, fan_out) so that a layer is ``x @ W + b``.
    """

    kind = "mlp"
    names = ("w1", "b1", "w2", "b2", "w3", "b3", "wk", "bk", "wo", "bo")

    def __init__(self, arrays, n_opcodes, n_proposable, seed=0, hidden=HIDDEN):
        self.hidden = tuple(int(h) for h in hidden)
        super().__init__(arrays, n_opcodes, n_proposable, seed)

    def shapes(self):
        h1, h2, h3 = self.hidden
        V, Vp = self.n_opcodes, self.n_proposable
        return [(V, h1), (h1,), (h1, h2), (h2,), (h2, h3), (h3,),
                (h3, N_KINDS), (N_KINDS,), (h3, Vp), (Vp,)]

    @classmethod
    def init(cls, isa: Isa = DEFAULT_ISA, seed: int = 0, hidden=HIDDEN,
             zero_heads: bool = True) -> "MlpModel":
        """He-scaled hidden layers from ``seed``; heads zero unless ``zero_heads`` is off."""
        rng = np.random.default_rng(seed)
        V, Vp = isa.n_opcodes, isa.n_proposable
        h1, h2, h3 = hidden
        arrays = []
        for fan_in, fan_out in ((V, h1), (h1, h2), (h2, h3)):
            arrays += [rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, fan_out)), np.zeros(fan_out)]
        for n in (N_KINDS, Vp):
            if zero_heads:
                arrays += [np.zeros((h3, n)), np.zeros(n)]
            else:
                arrays += [rng.normal(0.0, np.sqrt(1.0 / h3), (h3, n)), rng.normal(0.0, 0.1, n)]
        return cls(arrays, V, Vp, seed, hidden)

    def with_arrays(self, arrays):
        return MlpModel(arrays, self.n_opcodes, self.n_proposable, self.seed, self.hidden)

    def logits(self, feat):
        w1, b1, w2, b2, w3, b3, wk, bk, wo, bo = self.arrays
        x = feat.counts
        a1 = np.maximum(x @ w1 + b1, 0.0)
        a2 = np.maximum(a1 @ w2 + b2, 0.0)
        a3 = np.maximum(a2 @ w3 + b3, 0.0)
        return a3 @ wk + bk, a3 @ wo + bo, (x, a1, a2, a3)

    def backward(self, cache, g_kind, g_op):
        x, a1, a2, a3 = cache
        w1, b1, w2, b2, w3, b3, wk, bk, wo, bo = self.arrays
        g_wk, g_wo = np.outer(a3, g_kind), np.outer(a3, g_op)
        d3 = (wk @ g_kind + wo @ g_op) * (a3 > 0)
        g_w3 = np.outer(a2, d3)
        d2 = (w3 @ d3) * (a2 > 0)
        g_w2 = np.outer(a1, d2)
        d1 = (w2 @ d2) * (a1 > 0)
        g_w1 = np.outer(x, d1)
        return [g_w1, d1, g_w2, d2, g_w3, d3, g_wk, np.array(g_kind, dtype=np.float64),
                g_wo, np.array(g_op, dtype=np.float64)]


def zero_model(kind: str, isa: Isa = DEFAULT_ISA, seed: int = 0) -> Model:
    """Untrained model of ``kind``; its proposal equals the uniform baseline."""
    if kind == "bias":
        return BiasModel.zeros(isa)
    if kind == "mlp":
        return MlpModel.init(isa, seed)
    raise ValueError(f"unknown model kind {kind!r}")


def forward(model: Model, feat: BowFeature | None = None) -> ProposalParams:
    kind_logits, op_logits, _ = model.logits(feat)
    return ProposalParams(softmax(kind_logits), softmax(op_logits))


# ---------------------------------------------------------------------------
# serialization
#
#   bytes 0..7   b"SOPTMDL1"
#   bytes 8..11  header length n, uint32 little-endian
#   next n bytes UTF-8 JSON: format_version, kind, V, V_prime, hidden,
#                seed, names, shapes
#   rest         float64 little-endian, arrays in ``names`` order, each
#                flattened row-major
# ---------------------------------------------------------------------------

def model_bytes(model: Model) -> bytes:
    header = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "V": model.n_opcodes,
        "V_prime": model.n_proposable,
        "hidden": list(getattr(model, "hidden", ())),
        "seed": model.seed,
        "names": list(model.names),
        "shapes": [list(s) for s in model.shapes()],
    }
    h = json.dumps(header, sort_keys=True).encode()
    return MAGIC + struct.pack("<I", len(h)) + h + model.flat().astype("<f8").tobytes()


def model_from_bytes(data: bytes) -> Model:
    if data[:8] != MAGIC:
        raise ValueError("not a model file")
    (n,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + n])
    if header["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {header['format_version']}")
    flat = np.frombuffer(data[12 + n:], dtype="<f8").astype(np.float64)
    V, Vp, seed = header["V"], header["V_prime"], header["seed"]
    if header["kind"] == "bias":
        proto = BiasModel([np.zeros(N_KINDS), np.zeros(Vp)], V, Vp, seed)
    elif header["kind"] == "mlp":
        hidden = tuple(header["hidden"])
        proto = MlpModel(_zeros_for(V, Vp, hidden), V, Vp, seed, hidden)
    else:
        raise ValueError(f"unknown model kind {header['kind']!r}")
    if [list(s) for s in proto.shapes()] != header["shapes"]:
        raise ValueError("model header shapes are inconsistent")
    return proto.with_flat(flat)


def _zeros_for(V, Vp, hidden):
    h1, h2, h3 = hidden
    return [np.zeros(s) for s in ((V, h1), (h1,), (h1, h2), (h2,), (h2, h3), (h3,),
                                  (h3, N_KINDS), (N_KINDS,), (h3, Vp), (Vp,))]


def save_model(model: Model, path):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(model_bytes(model))
    tmp.replace(path)


def load_model(path) -> Model:
    return model_from_bytes(Path(path).read_bytes())
