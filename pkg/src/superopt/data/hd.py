"""The 25 Hacker's Delight bit-twiddling tasks.

Each task has a reference implementation in the toy ISA (deliberately
unoptimised, like compiler output) and a functional oracle written directly
with numpy integer arithmetic.  Inputs live in r0, r1, ...; the result is
r0.  Scratch registers are always written before they are read.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from ..isa import DEFAULT_ISA, Isa, Program, TestCase, TestSuite, parse

M = np.uint64(0xFFFFFFFF)
OUTPUT_MASK = (0,)


def _u(v):
    return np.asarray(v, dtype=np.uint64) & M


def _s(v):
    v = _u(v).astype(np.int64)
    return np.where(v >= 2**31, v - 2**32, v)


def _nlz(x):
    x = _u(x)
    return sum((x < np.uint64(1 << j)).astype(np.uint64) for j in range(32))


def _pop(x):
    x = _u(x)
    return sum((x >> np.uint64(j)) & np.uint64(1) for j in range(32))


def _b(cond):
    return np.asarray(cond).astype(np.uint64)


def _next_same_pop(x):
    x = _u(x)
    s = x & _u(-x.astype(np.int64))
    r = _u(x + s)
    safe_s = np.where(s == 0, np.uint64(1), s)
    ones = ((x ^ r) >> np.uint64(2)) // safe_s
    return np.where(x == 0, np.uint64(0), r | ones)


def _cycle3_formula(x, a, b, c):
    t1 = _u(-(_b(x == c).astype(np.int64))) & (a ^ c)
    t2 = _u(-(_b(x == a).astype(np.int64))) & (b ^ c)
    return t1 ^ t2 ^ c


def _clp2(x):
    x = _u(x)
    y = _u(x.astype(np.int64) - 1)
    for k in (1, 2, 4, 8, 16):
        y |= y >> np.uint64(k)
    return _u(y + np.uint64(1))


def _exchange(x, m, k):
    k = k & np.uint64(31)
    t = ((x ^ (x >> k)) & m)
    return _u(x ^ t ^ _u(t << k))


def _abs(x):
    s = _s(x)
    return _u(np.where(s < 0, -s, s))


def _sign(x):
    s = _s(x)
    return _u(np.where(s > 0, 1, np.where(s < 0, -1, 0)))


def _max(x, y):
    return _u(np.maximum(_s(x), _s(y)))


def _mulhi(x, y):
    # exact big-integer product
    prod = x.astype(object) * y.astype(object)
    return np.array([int(v) >> 32 for v in prod], dtype=np.uint64)


# (id, description, n_inputs, oracle over uint64 input columns, reference listing)
_TASKS = [
    (1, "turn off the right-most one bit", 1,
     lambda x: x & _u(x - np.uint64(1)),
     """
     mov r1, r0
     mov r2, r1
     sub r2, 1
     and r1, r2
     mov r0, r1
     """),
    (2, "test whether an unsigned integer is of the form 2^n - 1 (zero iff so)", 1,
     lambda x: x & _u(x + np.uint64(1)),
     """
     mov r1, r0
     mov r2, r1
     add r2, 1
     and r1, r2
     mov r0, r1
     """),
    (3, "isolate the right-most one bit", 1,
     lambda x: x & _u(-x.astype(np.int64)),
     """
     mov r1, r0
     mov r2, r1
     neg r2, r2
     and r1, r2
     mov r0, r1
     """),
    (4, "mask of the right-most one bit and trailing zeros", 1,
     lambda x: x ^ _u(x - np.uint64(1)),
     """
     mov r1, r0
     mov r2, r1
     sub r2, 1
     xor r1, r2
     mov r0, r1
     """),
    (5, "right-propagate the right-most one bit", 1,
     lambda x: x | _u(x - np.uint64(1)),
     """
     mov r1, r0
     mov r2, r1
     sub r2, 1
     or r1, r2
     mov r0, r1
     """),
    (6, "turn on the right-most zero bit", 1,
     lambda x: x | _u(x + np.uint64(1)),
     """
     mov r1, r0
     mov r2, r1
     add r2, 1
     or r1, r2
     mov r0, r1
     """),
    (7, "isolate the right-most zero bit", 1,
     lambda x: (x ^ M) & _u(x + np.uint64(1)),
     """
     mov r1, r0
     not r2, r1
     add r1, 1
     and r1, r2
     mov r0, r1
     """),
    (8, "mask of the trailing zeros", 1,
     lambda x: (x ^ M) & _u(x - np.uint64(1)),
     """
     mov r1, r0
     not r2, r1
     sub r1, 1
     and r1, r2
     mov r0, r1
     """),
    (9, "absolute value", 1,
     _abs,
     """
     mov r1, r0
     mov r2, r1
     sar r2, 31
     xor r1, r2
     sub r1, r2
     mov r0, r1
     """),
    (10, "test whether two words have the same number of leading zeros", 2,
     lambda x, y: _b(_nlz(x) == _nlz(y)),
     """
     lzcnt r2, r0
     lzcnt r3, r1
     mov r4, r2
     xor r4, r3
     setz r5, r4
     mov r0, r5
     """),
    (11, "test whether nlz(x) < nlz(y)", 2,
     lambda x, y: _b(_nlz(x) < _nlz(y)),
     """
     lzcnt r2, r0
     lzcnt r3, r1
     mov r4, r2
     sltu r4, r3
     mov r0, r4
     """),
    (12, "test whether nlz(x) <= nlz(y)", 2,
     lambda x, y: _b(_nlz(x) <= _nlz(y)),
     """
     lzcnt r2, r0
     lzcnt r3, r1
     sltu r3, r2
     xor r3, 1
     mov r0, r3
     """),
    (13, "sign function", 1,
     _sign,
     """
     mov r1, r0
     sar r1, 31
     mov r2, r0
     neg r2, r2
     shr r2, 31
     or r1, r2
     mov r0, r1
     """),
    (14, "floor of the average of two unsigned words without overflow", 2,
     lambda x, y: (x + y) >> np.uint64(1),
     """
     mov r2, r0
     and r2, r1
     mov r3, r0
     xor r3, r1
     shr r3, 1
     add r2, r3
     mov r0, r2
     """),
    (15, "ceiling of the average of two unsigned words without overflow", 2,
     lambda x, y: (x + y + np.uint64(1)) >> np.uint64(1),
     """
     mov r2, r0
     or r2, r1
     mov r3, r0
     xor r3, r1
     shr r3, 1
     sub r2, r3
     mov r0, r2
     """),
    (16, "signed maximum of two words", 2,
     _max,
     """
     mov r2, r0
     slt r2, r1
     neg r2, r2
     mov r3, r0
     xor r3, r1
     and r3, r2
     xor r0, r3
     """),
    (17, "turn off the right-most contiguous run of one bits", 1,
     lambda x: _u((x | _u(x - np.uint64(1))) + np.uint64(1)) & x,
     """
     mov r1, r0
     mov r2, r0
     sub r2, 1
     or r1, r2
     add r1, 1
     and r1, r0
     mov r0, r1
     """),
    (18, "test whether a word is a power of two (1 or 0)", 1,
     lambda x: _b(_pop(x) == 1),
     """
     mov r1, r0
     sub r1, 1
     and r1, r0
     setz r2, r1
     setnz r3, r0
     and r2, r3
     mov r0, r2
     """),
    (19, "exchange the bit fields selected by mask m at distance k", 3,
     _exchange,
     """
     mov r3, r0
     shr r3, r2
     xor r3, r0
     and r3, r1
     mov r4, r3
     shl r4, r2
     xor r4, r3
     xor r4, r0
     mov r0, r4
     """),
    (20, "next higher unsigned number with the same number of one bits", 1,
     _next_same_pop,
     """
     neg r1, r0
     and r1, r0
     mov r2, r0
     add r2, r1
     mov r3, r0
     xor r3, r2
     shr r3, 2
     dec r1, r1
     popcnt r1, r1
     shr r3, r1
     or r3, r2
     mov r0, r3
     """),
    (21, "cycle x through the three values a -> b -> c -> a", 4,
     _cycle3_formula,
     """
     mov r5, r0
     xor r5, r1
     setz r5, r5
     xor r2, r3
     mul r5, r2
     xor r0, r3
     setz r0, r0
     xor r1, r3
     mul r0, r1
     xor r0, r5
     xor r0, r3
     """),
    (22, "parity of a word", 1,
     lambda x: _pop(x) & np.uint64(1),
     """
     mov r1, r0
     shr r1, 1
     xor r0, r1
     mov r1, r0
     shr r1, 2
     xor r0, r1
     and r0, 0x11111111
     mul r0, 0x11111111
     shr r0, 28
     and r0, 1
     """),
    (23, "count the one bits", 1,
     _pop,
     """
     mov r1, r0
     and r1, 0xffff
     popcnt r1, r1
     shr r0, 16
     popcnt r0, r0
     add r0, r1
     """),
    (24, "round up to the next power of two", 1,
     _clp2,
     """
     mov r1, r0
     sub r1, 1
     lzcnt r2, r1
     setnz r3, r2
     neg r3, r3
     mov r4, 32
     sub r4, r2
     mov r5, 1
     shl r5, r4
     and r5, r3
     mov r0, r5
     """),
    (25, "high half of the unsigned product of two words", 2,
     _mulhi,
     """
     mov r2, r0
     mov r3, r1
     mulhu r2, r3
     mov r0, r2
     """),
]


@dataclass(frozen=True, eq=False)
class Task:
    id: int
    description: str
    n_inputs: int
    fn: Callable
    source: str
    isa: Isa = DEFAULT_ISA

    @cached_property
    def reference(self) -> Program:
        return parse(self.source, self.isa)

    @property
    def name(self) -> str:
        return f"hd{self.id:02d}"

    def oracle(self, states) -> np.ndarray:
        """Expected r0 for each row of ``states`` (shape (N, n_regs) or (n_regs,))."""
        s = np.atleast_2d(np.asarray(states, dtype=np.int64)).astype(np.uint64) & M
        out = self.fn(*(s[:, i] for i in range(self.n_inputs)))
        return (np.asarray(out, dtype=np.uint64) & M).astype(np.int64)

    def sample_inputs(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Random machine states shaped so the task's interesting cases occur."""
        R = self.isa.n_regs
        s = rng.integers(0, 2**32, size=(n, R), dtype=np.int64)
        # spread magnitudes so leading-zero counts and small values show up
        shift = rng.integers(0, 32, size=(n, R))
        half = rng.random((n, R)) < 0.5
        s = np.where(half, s >> shift, s)
        if self.id == 18:
            pw = np.int64(1) << rng.integers(0, 32, size=n)
            s[:, 0] = np.where(rng.random(n) < 0.5, pw, s[:, 0])
        elif self.id == 19:
            s[:, 2] = rng.integers(0, 32, size=n)
        elif self.id == 21:
            abc = s[:, 1:4]
            s[:, 0] = abc[np.arange(n), rng.integers(0, 3, size=n)]
        return s

    def edge_inputs(self, rng: np.random.Generator) -> np.ndarray:
        """r0 in {0, 1, 2^32-1, random power of two}, other registers random."""
        s = self.sample_inputs(rng, 4)
        s[:, 0] = [0, 1, 0xFFFFFFFF, 1 << int(rng.integers(0, 32))]
        if self.id == 21:
            s[:, 1] = s[:, 0]   # keep x one of the cycled values
        return s

    def make_tests(self, seed: int, n_random: int = 12) -> TestSuite:
        rng = np.random.default_rng([seed, self.id])
        states = np.vstack([self.sample_inputs(rng, n_random), self.edge_inputs(rng)])
        out = self.oracle(states)
        cases = []
        for st, o in zip(states, out):
            exp = np.zeros(self.isa.n_regs, dtype=np.int64)
            exp[0] = o
            cases.append(TestCase(st, exp, OUTPUT_MASK))
        return TestSuite.from_cases(cases)


def hd_tasks(isa: Isa = DEFAULT_ISA) -> list[Task]:
    return [Task(i, d, n, f, src, isa) for i, d, n, f, src in _TASKS]


def hd_task(task_id: int, isa: Isa = DEFAULT_ISA) -> Task:
    return hd_tasks(isa)[task_id - 1]


def cycle3_table(x, a, b, c):
    """Case-by-case definition of task 21 for distinct a, b, c.

    Returns ``(value, defined)``; ``defined`` is false where x is none of them.
    """
    x, a, b, c = _u(x), _u(a), _u(b), _u(c)
    value = np.where(x == a, b, np.where(x == b, c, a))
    return value, (x == a) | (x == b) | (x == c)


EDGE_VALUES = (0, 1, 2, 3, 0x7FFFFFFF, 0x80000000, 0x80000001, 0xFFFFFFFE, 0xFFFFFFFF,
               0x55555555, 0xAAAAAAAA, 0xFFFF, 0x10000, 0xFFFF0000)


def exhaustive_inputs(task: Task, rng: np.random.Generator | None = None,
                      n_random: int = 20000) -> np.ndarray:
    """Inputs for the brute-force reference check.

    The edge set is ``EDGE_VALUES`` plus every power of two.
    One-input tasks: every 16-bit value, the edge values, and the 16-bit
    values with the top bit or top halfword set.  Multi-input tasks: a
    256 x 256 low-byte grid on (r0, r1), the edge cross product, and random
    rows.  Extra inputs take random values.
    """
    rng = rng or np.random.default_rng(12345)
    R = task.isa.n_regs
    edge = np.unique(np.array(EDGE_VALUES + tuple(1 << j for j in range(32)), dtype=np.int64))
    if task.n_inputs == 1:
        low = np.arange(1 << 16, dtype=np.int64)
        x = np.concatenate([low, low | 0x80000000, low | 0xFFFF0000, edge])
        s = rng.integers(0, 2**32, size=(len(x), R), dtype=np.int64)
        s[:, 0] = x
        return s
    g = np.arange(256, dtype=np.int64)
    gx, gy = np.meshgrid(g, g, indexing="ij")
    ex, ey = np.meshgrid(edge, edge, indexing="ij")
    xs = np.concatenate([gx.ravel(), ex.ravel()])
    ys = np.concatenate([gy.ravel(), ey.ravel()])
    s = rng.integers(0, 2**32, size=(len(xs), R), dtype=np.int64)
    s[:, 0], s[:, 1] = xs, ys
    extra = task.sample_inputs(rng, n_random)
    if task.id == 19:
        s[:, 2] = rng.integers(0, 32, size=len(s))
    if task.id == 21:
        # both the cycled case (x in {a, b, c}) and arbitrary x
        s[: len(s) // 2, 1] = s[: len(s) // 2, 0]
    return np.vstack([s, extra])
