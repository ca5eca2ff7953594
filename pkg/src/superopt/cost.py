"""Rewrite cost: weighted sum of test-case mismatch and static latency."""

from __future__ import annotations

from dataclasses import dataclass

from . import kernels as K
from .isa import Program, as_suite, perf

FAULT_PENALTY_BITS = K.FAULT_BITS


@dataclass(frozen=True)
class CostWeights:
    omega_e: float = 4.0
    omega_p: float = 1.0

    def __post_init__(self):
        if self.omega_e < 0 or self.omega_p < 0:
            raise ValueError("cost weights must be non-negative")

    @classmethod
    def augmentation(cls, omega_e: float = 4.0) -> "CostWeights":
        """Correctness only; used to harvest equivalent programs."""
        return cls(omega_e, 0.0)


@dataclass(frozen=True)
class CostReport:
    eq: float
    perf: float
    total: float

    @property
    def is_correct(self) -> bool:
        return self.eq == 0


def eq_cost(rewrite: Program, tests) -> int:
    """Total Hamming distance over the masked registers of every test.

    A faulting test contributes ``32 * |mask|``.
    """
    suite = as_suite(tests)
    isa = rewrite.isa
    return int(K.eq_cost_kernel(rewrite.code, isa.sig, isa.sem, suite.inputs,
                                suite.expected, suite.mask, isa.strict_shifts))


def total_cost(rewrite: Program, tests, weights: CostWeights = CostWeights()) -> CostReport:
    e = eq_cost(rewrite, tests)
    p = perf(rewrite)
    return CostReport(float(e), float(p), weights.omega_e * e + weights.omega_p * p)
