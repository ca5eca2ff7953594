"""Hierarchical move proposal.

A move is drawn in stages: first its kind, then kind-specific choices.
Positions and operand values are always uniform; the kind and the opcode are
drawn from the learnable categorical distributions in :class:`ProposalParams`.
Same-signature opcode draws renormalise over the signature class minus the
current opcode; full-instruction and insert draws use the whole proposable set.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import ClassVar

import numpy as np

from . import kernels as K
from .isa import DEFAULT_ISA, Isa, Program


class MoveKind(enum.IntEnum):
    OPCODE_SAME_SIGNATURE = K.K_OPCODE
    OPERAND = K.K_OPERAND
    FULL_INSTRUCTION = K.K_FULL
    SWAP_ANY = K.K_SWAP_ANY
    SWAP_LOCAL = K.K_SWAP_LOCAL
    ROTATE = K.K_ROTATE
    DELETE = K.K_DELETE
    INSERT = K.K_INSERT
    OPERAND_SWAP = K.K_OP_SWAP


N_KINDS = len(MoveKind)
SUM_TOL = 1e-9


@dataclass(frozen=True)
class ProposalParams:
    """Move-kind and opcode probabilities.

    ``constructions`` counts instances ever built; the benchmark uses it to
    check that a search evaluates its proposal distribution exactly once.
    Zero entries are only allowed with ``allow_zero`` (restricted move sets
    in tests).
    """

    kind_probs: np.ndarray
    op_probs: np.ndarray
    allow_zero: bool = field(default=False, compare=False)

    constructions: ClassVar[int] = 0

    def __post_init__(self):
        kp = np.array(self.kind_probs, dtype=np.float64)
        op = np.array(self.op_probs, dtype=np.float64)
        if kp.shape != (N_KINDS,):
            raise ValueError(f"need {N_KINDS} move-kind probabilities")
        for name, v in (("move-kind", kp), ("opcode", op)):
            if abs(v.sum() - 1.0) > SUM_TOL:
                raise ValueError(f"{name} probabilities sum to {v.sum()!r}")
            if not np.isfinite(v).all() or (v < 0).any():
                raise ValueError(f"{name} probabilities must be finite and non-negative")
            if not self.allow_zero and (v <= 0).any():
                raise ValueError(f"{name} probabilities must be strictly positive")
            v.setflags(write=False)
        object.__setattr__(self, "kind_probs", kp)
        object.__setattr__(self, "op_probs", op)
        type(self).constructions += 1

    def __eq__(self, other):
        return (isinstance(other, ProposalParams)
                and np.array_equal(self.kind_probs, other.kind_probs)
                and np.array_equal(self.op_probs, other.op_probs))

    __hash__ = None

    @property
    def n_proposable(self) -> int:
        return self.op_probs.shape[0]

    @cached_property
    def is_uniform(self) -> bool:
        kp, op = self.kind_probs, self.op_probs
        return bool((kp == kp[0]).all() and (op == op[0]).all())

    @cached_property
    def kind_cdf(self) -> np.ndarray:
        return np.cumsum(self.kind_probs)

    @cached_property
    def op_cdf(self) -> np.ndarray:
        return np.cumsum(self.op_probs)

    def max_abs_diff(self, other: "ProposalParams") -> float:
        return float(max(np.abs(self.kind_probs - other.kind_probs).max(),
                         np.abs(self.op_probs - other.op_probs).max()))


def uniform_params(isa: Isa = DEFAULT_ISA) -> ProposalParams:
    """The unlearned baseline: every kind and every proposable opcode equally likely."""
    return ProposalParams(np.full(N_KINDS, 1.0 / N_KINDS),
                          np.full(isa.n_proposable, 1.0 / isa.n_proposable))


def kernel_args(params: ProposalParams, isa: Isa):
    """Positional argument groups shared by the proposal kernels."""
    if params.n_proposable != isa.n_proposable:
        raise ValueError(f"params cover {params.n_proposable} opcodes, ISA proposes {isa.n_proposable}")
    members, size = isa.class_members
    cls_mass = np.bincount(isa.class_of, weights=params.op_probs, minlength=2)
    probs = (params.kind_probs, params.kind_cdf, params.op_probs, params.op_cdf,
             cls_mass, params.is_uniform)
    tables = (isa.sig, isa.proposable, isa.proposable_of, members, size, isa.class_of,
              isa.n_regs, isa.pool)
    return probs, tables


@dataclass(frozen=True)
class Move:
    """One sampled transformation; ``args`` layout depends on ``kind``
    (see :mod:`superopt.kernels`)."""

    kind: MoveKind
    args: tuple[int, ...]
    applicable: bool = True

    @classmethod
    def from_array(cls, arr) -> "Move":
        arr = [int(x) for x in arr]
        args = arr[1:5]
        while args and args[-1] == -1:
            args.pop()
        return cls(MoveKind(arr[0]), tuple(args), bool(arr[5]))

    def to_array(self) -> np.ndarray:
        out = np.full(6, -1, dtype=np.int64)
        out[0] = int(self.kind)
        out[1:1 + len(self.args)] = self.args
        out[5] = int(self.applicable)
        return out


@dataclass(frozen=True)
class MoveRecord:
    move: Move
    logprob: float
    opcode_index: int = -1          # proposable index of a sampled opcode
    subset: int = K.SUBSET_NONE     # SUBSET_FULL, or signature class id
    excluded: int = -1              # opcode removed from a same-signature draw


def _sample_array(params: ProposalParams, program: Program, u: np.ndarray) -> np.ndarray:
    probs, tables = kernel_args(params, program.isa)
    kind_p, kind_cdf, op_p, op_cdf, cls_mass, uniform = probs
    move = np.empty(6, dtype=np.int64)
    K.sample_move(program.code, u, kind_cdf, op_p, op_cdf, cls_mass, uniform, *tables, move)
    return move


def _record(params: ProposalParams, program: Program, arr: np.ndarray) -> MoveRecord:
    isa = program.isa
    probs, _ = kernel_args(params, isa)
    kind_p, _, op_p, _, cls_mass, uniform = probs
    _, size = isa.class_members
    lp, oi, sub, ex = K.move_logprob(program.code, arr, kind_p, op_p, cls_mass, uniform,
                                     isa.sig, isa.proposable_of, size, isa.class_of,
                                     isa.n_regs, isa.pool)
    return MoveRecord(Move.from_array(arr), float(lp), int(oi), int(sub), int(ex))


def sample_move(params: ProposalParams, current: Program, rng: np.random.Generator) -> MoveRecord:
    """Draw one move.  Inapplicable draws come back with ``applicable=False``;
    they are not resampled."""
    u = rng.random(K.N_UNIFORMS)
    return _record(params, current, _sample_array(params, current, u))


def sample_moves(params: ProposalParams, current: Program, n: int,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised draw of ``n`` moves from ``current``: ``(moves[n, 6], logprobs[n])``."""
    probs, tables = kernel_args(params, current.isa)
    kind_p, kind_cdf, op_p, op_cdf, cls_mass, uniform = probs
    u = rng.random((n, K.N_UNIFORMS))
    return K.sample_moves(current.code, u, kind_p, kind_cdf, op_p, op_cdf, cls_mass, uniform,
                          *tables)


def _validate(program: Program, move: Move, pool_only: bool = True):
    """Raise unless ``move`` is well-formed for ``program``.  ``pool_only``
    requires immediates from the proposal pool (anything else has
    probability zero); applying a move only needs a 32-bit value."""
    isa = program.isa
    code = program.code
    L = isa.n_slots
    live = program.live_mask
    a = move.args
    kind = move.kind

    def need(cond, what):
        if not cond:
            raise ValueError(f"{kind.name} move invalid for program: {what}")

    def slot_ok(s):
        return 0 <= s < L

    def imm_ok(v):
        return v in isa.imm_pool if pool_only else 0 <= v <= K.MASK32

    if not move.applicable:
        if kind == MoveKind.OPCODE_SAME_SIGNATURE and a:
            s = a[0]
            need(slot_ok(s) and live[s], "slot not live")
            c = isa.class_of[isa.proposable_of[code[s, 0]]]
            need(isa.class_members[1][c] == 1, "signature class has alternatives")
        elif kind in (MoveKind.OPCODE_SAME_SIGNATURE, MoveKind.OPERAND, MoveKind.DELETE):
            need(not live.any(), "program has live slots")
        elif kind == MoveKind.INSERT:
            need(live.all(), "program has UNUSED slots")
        elif kind == MoveKind.OPERAND_SWAP:
            need(not (isa.sig[code[:, 0]] == K.SIG_RR).any(), "program has reg/reg slots")
        elif kind == MoveKind.SWAP_LOCAL:
            need(L < 2, "program has adjacent slots")
        else:
            need(False, "kind is always applicable")
        return
    if kind in (MoveKind.OPCODE_SAME_SIGNATURE, MoveKind.OPERAND, MoveKind.DELETE):
        need(slot_ok(a[0]) and live[a[0]], "slot not live")
        op = code[a[0], 0]
        if kind == MoveKind.OPCODE_SAME_SIGNATURE:
            need(0 < a[1] < isa.n_opcodes and a[1] != op and isa.sig[a[1]] == isa.sig[op],
                 "opcode not in the signature class")
        elif kind == MoveKind.OPERAND:
            need(a[1] in (0, 1), "operand index")
            if a[1] == 1 and isa.sig[op] == K.SIG_RI:
                need(imm_ok(a[2]), "immediate not in pool")
            else:
                need(0 <= a[2] < isa.n_regs, "register out of range")
    elif kind in (MoveKind.FULL_INSTRUCTION, MoveKind.INSERT):
        need(slot_ok(a[0]), "slot out of range")
        if kind == MoveKind.INSERT:
            need(not live[a[0]], "slot not UNUSED")
        op = a[1]
        need(0 < op < isa.n_opcodes, "opcode not proposable")
        need(0 <= a[2] < isa.n_regs, "register out of range")
        if isa.sig[op] == K.SIG_RI:
            need(imm_ok(a[3]), "immediate not in pool")
        else:
            need(0 <= a[3] < isa.n_regs, "register out of range")
    elif kind in (MoveKind.SWAP_ANY, MoveKind.ROTATE):
        need(slot_ok(a[0]) and slot_ok(a[1]), "slot out of range")
    elif kind == MoveKind.SWAP_LOCAL:
        need(0 <= a[0] < L - 1, "slot out of range")
    elif kind == MoveKind.OPERAND_SWAP:
        need(slot_ok(a[0]) and isa.sig[code[a[0], 0]] == K.SIG_RR, "slot not reg/reg")


def log_prob(params: ProposalParams, current: Program, move: Move) -> float:
    """log q(move | current), including the uniform position/operand factors."""
    _validate(current, move)
    return _record(params, current, move.to_array()).logprob


def apply_move(current: Program, move: Move) -> Program:
    if not move.applicable:
        raise ValueError(f"cannot apply inapplicable {move.kind.name} move")
    _validate(current, move, pool_only=False)
    out = np.empty_like(current.code)
    K.apply_move(current.code, move.to_array(), out)
    return Program(current.isa, out, validate=False)
