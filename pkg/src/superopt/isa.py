"""Toy register ISA: opcode table, programs, interpreter and text format.

Two-operand, x86-flavoured: ``op d, s`` computes ``d <- f(d, s)`` for binary
ops and ``d <- f(s)`` for unary ones (``mov``, ``not``, ``neg``, ``inc``,
``dec``, ``popcnt``, ``lzcnt``, ``setz``, ``setnz``).  ``cmovz d, s`` copies
``s`` into ``d`` when ``d`` is zero (``cmovnz`` when it is not).  Words are
32-bit unsigned; shift amounts are masked to 5 bits unless the ISA is built
with ``strict_shifts``, in which case an amount >= 32 faults.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import kernels as K

MASK32 = K.MASK32


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ExecutionFault(RuntimeError):
    def __init__(self, slot: int):
        super().__init__(f"fault at slot {slot}")
        self.slot = slot


@dataclass(frozen=True)
class Opcode:
    mnemonic: str
    signature: int          # kernels.SIG_NONE / SIG_RR / SIG_RI
    latency: int
    sem: int

    @property
    def operand_kinds(self) -> tuple[str, ...]:
        if self.signature == K.SIG_RR:
            return ("reg-dst", "reg-src")
        if self.signature == K.SIG_RI:
            return ("reg-dst", "imm")
        return ()


_RR_OPS = [
    ("mov", K.SEM_MOV, 1), ("add", K.SEM_ADD, 1), ("sub", K.SEM_SUB, 1),
    ("and", K.SEM_AND, 1), ("or", K.SEM_OR, 1), ("xor", K.SEM_XOR, 1),
    ("andn", K.SEM_ANDN, 1), ("shl", K.SEM_SHL, 1), ("shr", K.SEM_SHR, 1),
    ("sar", K.SEM_SAR, 1), ("not", K.SEM_NOT, 1), ("neg", K.SEM_NEG, 1),
    ("inc", K.SEM_INC, 1), ("dec", K.SEM_DEC, 1), ("setz", K.SEM_SETZ, 1),
    ("setnz", K.SEM_SETNZ, 1), ("slt", K.SEM_SLT, 1), ("sltu", K.SEM_SLTU, 1),
    ("mul", K.SEM_MUL, 3), ("mulhu", K.SEM_MULHU, 3), ("popcnt", K.SEM_POPCNT, 3),
    ("lzcnt", K.SEM_LZCNT, 3), ("min", K.SEM_MIN, 3), ("max", K.SEM_MAX, 3),
    ("cmovz", K.SEM_CMOVZ, 3), ("cmovnz", K.SEM_CMOVNZ, 3),
]
_RI_OPS = [
    ("mov", K.SEM_MOV, 1), ("add", K.SEM_ADD, 1), ("sub", K.SEM_SUB, 1),
    ("and", K.SEM_AND, 1), ("or", K.SEM_OR, 1), ("xor", K.SEM_XOR, 1),
    ("shl", K.SEM_SHL, 1), ("shr", K.SEM_SHR, 1), ("sar", K.SEM_SAR, 1),
    ("mul", K.SEM_MUL, 3),
]

UNUSED = Opcode("unused", K.SIG_NONE, 0, K.SEM_UNUSED)

OPCODES: tuple[Opcode, ...] = (
    (UNUSED,)
    + tuple(Opcode(m, K.SIG_RR, lat, sem) for m, sem, lat in _RR_OPS)
    + tuple(Opcode(m, K.SIG_RI, lat, sem) for m, sem, lat in _RI_OPS)
)

IMM_POOL = (0, 1, 2, 3, 4, 8, 16, 24, 28, 31, 0xFF, 0xFFFF,
            0x80000000, 0xFFFFFFFF, 0x55555555, 0x0F0F0F0F)


@dataclass(frozen=True, eq=False)
class Isa:
    """An opcode vocabulary plus machine shape.

    Opcode 0 must be UNUSED.  Every other opcode is proposable, so
    ``n_proposable == n_opcodes - 1``.
    """

    opcodes: tuple[Opcode, ...] = OPCODES
    n_regs: int = 8
    n_slots: int = 12
    imm_pool: tuple[int, ...] = IMM_POOL
    strict_shifts: bool = False
    name: str = "toy32"

    def __post_init__(self):
        if self.opcodes[0].signature != K.SIG_NONE:
            raise ValueError("opcode 0 must be UNUSED")
        if any(op.signature == K.SIG_NONE for op in self.opcodes[1:]):
            raise ValueError("only opcode 0 may be UNUSED")
        keys = [(op.mnemonic, op.signature) for op in self.opcodes]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (mnemonic, signature) pair")

    def __eq__(self, other):
        return isinstance(other, Isa) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    @cached_property
    def key(self):
        return (self.opcodes, self.n_regs, self.n_slots, self.imm_pool,
                self.strict_shifts, self.name)

    @property
    def n_opcodes(self) -> int:
        return len(self.opcodes)

    @property
    def n_proposable(self) -> int:
        return len(self.opcodes) - 1

    @cached_property
    def sig(self) -> np.ndarray:
        return np.array([op.signature for op in self.opcodes], dtype=np.int64)

    @cached_property
    def sem(self) -> np.ndarray:
        return np.array([op.sem for op in self.opcodes], dtype=np.int64)

    @cached_property
    def latency(self) -> np.ndarray:
        return np.array([op.latency for op in self.opcodes], dtype=np.int64)

    @cached_property
    def pool(self) -> np.ndarray:
        return np.array(self.imm_pool, dtype=np.int64)

    @cached_property
    def proposable(self) -> np.ndarray:
        """Opcode id of each proposable index."""
        return np.arange(1, self.n_opcodes, dtype=np.int64)

    @cached_property
    def proposable_of(self) -> np.ndarray:
        out = np.full(self.n_opcodes, -1, dtype=np.int64)
        out[self.proposable] = np.arange(self.n_proposable)
        return out

    @cached_property
    def class_of(self) -> np.ndarray:
        """Signature class (0 = reg/reg, 1 = reg/imm) of each proposable index."""
        return self.sig[self.proposable] - 1

    @cached_property
    def class_members(self) -> tuple[np.ndarray, np.ndarray]:
        n_cls = 2
        size = np.bincount(self.class_of, minlength=n_cls).astype(np.int64)
        members = np.full((n_cls, max(1, size.max())), -1, dtype=np.int64)
        for c in range(n_cls):
            idx = np.flatnonzero(self.class_of == c)
            members[c, :len(idx)] = idx
        return members, size

    @cached_property
    def by_name(self) -> dict[tuple[str, int], int]:
        return {(op.mnemonic, op.signature): i for i, op in enumerate(self.opcodes)}

    def opcode_index(self, mnemonic: str, signature: int = K.SIG_RR) -> int:
        return self.by_name[(mnemonic, signature)]

    def header(self) -> str:
        return f".slots {self.n_slots} .regs {self.n_regs}"


DEFAULT_ISA = Isa()


def mini_isa(n_slots: int = 2, n_regs: int = 2) -> Isa:
    """Tiny ISA for exhaustive checks: xor/and (reg,reg), mov (reg,imm)."""
    ops = (UNUSED,
           Opcode("xor", K.SIG_RR, 1, K.SEM_XOR),
           Opcode("and", K.SIG_RR, 1, K.SEM_AND),
           Opcode("mov", K.SIG_RI, 1, K.SEM_MOV))
    return Isa(opcodes=ops, n_regs=n_regs, n_slots=n_slots, imm_pool=(0, 1), name="mini")


class Instruction(NamedTuple):
    opcode: int
    a: int = 0
    b: int = 0


class Program:
    """Immutable fixed-capacity slot array of instructions."""

    __slots__ = ("isa", "code", "_hash")

    def __init__(self, isa: Isa, code, validate: bool = True):
        arr = np.array(code, dtype=np.int64).reshape(-1, 3)
        if arr.shape[0] != isa.n_slots:
            raise ValueError(f"expected {isa.n_slots} slots, got {arr.shape[0]}")
        arr.setflags(write=False)
        self.isa = isa
        self.code = arr
        self._hash = None
        if validate:
            self.check()

    @classmethod
    def empty(cls, isa: Isa = DEFAULT_ISA) -> "Program":
        return cls(isa, np.zeros((isa.n_slots, 3), dtype=np.int64))

    @classmethod
    def from_instructions(cls, instrs: Iterable[Sequence[int]], isa: Isa = DEFAULT_ISA) -> "Program":
        rows = [tuple(i) + (0,) * (3 - len(i)) for i in instrs]
        if len(rows) > isa.n_slots:
            raise ValueError(f"{len(rows)} instructions exceed {isa.n_slots} slots")
        code = np.zeros((isa.n_slots, 3), dtype=np.int64)
        if rows:
            code[:len(rows)] = rows
        return cls(isa, code)

    def check(self):
        isa = self.isa
        for k, (op, a, b) in enumerate(self.code.tolist()):
            if not 0 <= op < isa.n_opcodes:
                raise ValueError(f"slot {k}: opcode {op} out of range")
            s = isa.sig[op]
            if s == K.SIG_NONE:
                if a or b:
                    raise ValueError(f"slot {k}: UNUSED slot carries operands")
                continue
            if not 0 <= a < isa.n_regs:
                raise ValueError(f"slot {k}: register r{a} out of range")
            if s == K.SIG_RR and not 0 <= b < isa.n_regs:
                raise ValueError(f"slot {k}: register r{b} out of range")
            if s == K.SIG_RI and not 0 <= b <= MASK32:
                raise ValueError(f"slot {k}: immediate {b} out of range")

    @property
    def instructions(self) -> list[Instruction]:
        return [Instruction(*row) for row in self.code.tolist()]

    @property
    def live_mask(self) -> np.ndarray:
        return self.isa.sig[self.code[:, 0]] != K.SIG_NONE

    @property
    def live_length(self) -> int:
        return int(self.live_mask.sum())

    def compact(self) -> "Program":
        """Same live instructions, packed into the leading slots."""
        live = self.code[self.live_mask]
        code = np.zeros_like(self.code)
        code[:len(live)] = live
        return Program(self.isa, code, validate=False)

    def replace(self, slot: int, instr: Sequence[int]) -> "Program":
        code = self.code.copy()
        code[slot] = tuple(instr) + (0,) * (3 - len(instr))
        return Program(self.isa, code)

    def __eq__(self, other):
        return (isinstance(other, Program) and self.isa == other.isa
                and np.array_equal(self.code, other.code))

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.isa, self.code.tobytes()))
        return self._hash

    def __len__(self):
        return self.isa.n_slots

    def __repr__(self):
        body = "; ".join(render_instruction(self.isa, i) for i in self.instructions
                         if i.opcode != 0)
        return f"Program({body})"

    def __str__(self):
        return render(self)


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def _as_states(isa: Isa, states) -> np.ndarray:
    arr = np.array(states, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.shape[1] != isa.n_regs:
        raise ValueError(f"state needs {isa.n_regs} registers")
    if arr.min(initial=0) < 0 or arr.max(initial=0) > MASK32:
        raise ValueError("register values must be 32-bit unsigned")
    return arr


def execute(p: Program, state) -> np.ndarray:
    """Run ``p`` on one machine state; raise :class:`ExecutionFault` on a fault."""
    out, faults = execute_batch(p, state)
    if faults[0] >= 0:
        raise ExecutionFault(int(faults[0]))
    return out[0]


def execute_batch(p: Program, states) -> tuple[np.ndarray, np.ndarray]:
    """Run ``p`` on each row of ``states``; returns ``(outputs, fault_slots)``.

    ``fault_slots`` is -1 where the row ran to completion.
    """
    isa = p.isa
    arr = _as_states(isa, states)
    return K.execute_batch_kernel(p.code, isa.sig, isa.sem, arr, isa.strict_shifts)


def perf(p: Program) -> int:
    """Sum of latencies of the live slots."""
    return int(K.perf_kernel(p.code, p.isa.latency))


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    input: np.ndarray
    expected: np.ndarray
    mask: tuple[int, ...]

    def __post_init__(self):
        if not self.mask:
            raise ValueError("output mask must be non-empty")


@dataclass(frozen=True)
class TestSuite:
    """Array form of a list of test cases, as consumed by the kernels."""

    __test__ = False

    inputs: np.ndarray
    expected: np.ndarray
    mask: np.ndarray
    cases: tuple[TestCase, ...] = field(repr=False, default=())

    @classmethod
    def from_cases(cls, cases: Sequence[TestCase]) -> "TestSuite":
        if not cases:
            raise ValueError("at least one test case required")
        n_regs = len(cases[0].input)
        inputs = np.array([c.input for c in cases], dtype=np.int64)
        expected = np.array([c.expected for c in cases], dtype=np.int64)
        mask = np.zeros((len(cases), n_regs), dtype=np.int64)
        for t, c in enumerate(cases):
            mask[t, list(c.mask)] = 1
        return cls(inputs, expected, mask, tuple(cases))

    def __len__(self):
        return self.inputs.shape[0]


def as_suite(tests) -> TestSuite:
    if isinstance(tests, TestSuite):
        return tests
    return TestSuite.from_cases(list(tests))


def make_tests(p: Program, inputs, mask: Sequence[int]) -> list[TestCase]:
    """Tests whose expected outputs are whatever ``p`` computes."""
    arr = _as_states(p.isa, inputs)
    out, faults = execute_batch(p, arr)
    if (faults >= 0).any():
        raise ExecutionFault(int(faults[faults >= 0][0]))
    return [TestCase(arr[t].copy(), _masked(out[t], mask), tuple(mask)) for t in range(len(arr))]


def _masked(state, mask):
    out = np.zeros_like(state)
    out[list(mask)] = state[list(mask)]
    return out


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def render_operand_imm(v: int) -> str:
    return str(v) if v <= 255 else f"0x{v:x}"


def render_instruction(isa: Isa, instr: Instruction) -> str:
    op = isa.opcodes[instr.opcode]
    if op.signature == K.SIG_NONE:
        return "unused"
    if op.signature == K.SIG_RR:
        return f"{op.mnemonic} r{instr.a}, r{instr.b}"
    return f"{op.mnemonic} r{instr.a}, {render_operand_imm(instr.b)}"


def render(p: Program, keep_slots: bool = False) -> str:
    """Canonical text.  UNUSED slots are omitted unless ``keep_slots``, which
    writes interior ones as ``unused`` so that slot positions round-trip."""
    lines = [p.isa.header()]
    instrs = p.instructions
    if keep_slots:
        last = max((k for k, i in enumerate(instrs) if i.opcode != 0), default=-1)
        instrs = instrs[:last + 1]
    for instr in instrs:
        if instr.opcode == 0 and not keep_slots:
            continue
        lines.append(render_instruction(p.isa, instr))
    return "\n".join(lines) + "\n"


_HEADER = re.compile(r"^\.slots\s+(\d+)\s+\.regs\s+(\d+)$")
_REG = re.compile(r"^r(\d+)$")


def _parse_imm(tok: str, lineno: int) -> int:
    try:
        v = int(tok, 0)
    except ValueError:
        raise ParseError(lineno, f"bad operand {tok!r}") from None
    if v < 0:
        v += 1 << 32
    if not 0 <= v <= MASK32:
        raise ParseError(lineno, f"immediate {tok} does not fit in 32 bits")
    return v


def parse(text: str, isa: Isa = DEFAULT_ISA) -> Program:
    """Parse the assembly text format (see :func:`render`)."""
    rows: list[tuple[int, int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m:
            slots, regs = int(m.group(1)), int(m.group(2))
            if (slots, regs) != (isa.n_slots, isa.n_regs):
                raise ParseError(lineno, f"header {line!r} does not match ISA {isa.header()!r}")
            continue
        parts = line.split(None, 1)
        mnemonic = parts[0].lower()
        operands = [t.strip() for t in parts[1].split(",")] if len(parts) > 1 else []
        if mnemonic == "unused":
            if operands:
                raise ParseError(lineno, "unused takes no operands")
            rows.append((0, 0, 0))
            continue
        if len(operands) != 2:
            raise ParseError(lineno, f"{mnemonic} expects 2 operands, got {len(operands)}")
        regs_ = []
        for tok in operands:
            rm = _REG.match(tok.lower())
            regs_.append(int(rm.group(1)) if rm else None)
        if regs_[0] is None:
            raise ParseError(lineno, f"destination must be a register, got {operands[0]!r}")
        signature = K.SIG_RR if regs_[1] is not None else K.SIG_RI
        key = (mnemonic, signature)
        if key not in isa.by_name:
            if any(name == mnemonic for name, _ in isa.by_name):
                kind = "register" if signature == K.SIG_RR else "immediate"
                raise ParseError(lineno, f"{mnemonic} has no {kind} source form")
            raise ParseError(lineno, f"unknown mnemonic {mnemonic!r}")
        for r in regs_:
            if r is not None and not 0 <= r < isa.n_regs:
                raise ParseError(lineno, f"register r{r} out of range r0..r{isa.n_regs - 1}")
        b = regs_[1] if signature == K.SIG_RR else _parse_imm(operands[1], lineno)
        rows.append((isa.by_name[key], regs_[0], b))
    if len(rows) > isa.n_slots:
        raise ParseError(len(text.splitlines()), f"{len(rows)} instructions exceed {isa.n_slots} slots")
    return Program.from_instructions(rows, isa)
