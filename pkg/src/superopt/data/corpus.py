"""Training corpora and their on-disk form.

Two sources of start programs:

* HD augmentation: a sampler run from each task's reference with the
  performance term switched off, keeping the distinct correct programs it
  visits (padded and rearranged equivalents of the reference).
* Synthetic: constant-cost random walks from random programs; each final
  program is its own specification.

A dataset directory holds ``manifest.json``, ``programs/<name>.s``,
``references/<name>.s`` and ``tests/<name>.tests``.  A test line reads
``in r0=0x0000002a r1=... ; out r0=0x00000028`` with every register on the
input side and only the checked registers on the output side.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import kernels as K
from ..cost import CostWeights
from ..isa import DEFAULT_ISA, Isa, Program, TestCase, TestSuite, make_tests, parse, render
from ..proposal import kernel_args, uniform_params
from .hd import Task, hd_tasks

N_TESTS = 16


@dataclass(frozen=True, eq=False)
class Entry:
    name: str
    program: Program
    tests: TestSuite
    reference: Program
    task_id: int | None = None


@dataclass(eq=False)
class Dataset:
    entries: list
    split: str
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __iter__(self):
        return iter(self.entries)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    @property
    def isa(self) -> Isa:
        return self.entries[0].program.isa if self.entries else DEFAULT_ISA

    def check_unique(self):
        seen = {}
        for e in self.entries:
            key = render(e.program.compact())
            if key in seen:
                raise ValueError(f"duplicate start program: {seen[key]} and {e.name}")
            seen[key] = e.name

    def save(self, path):
        path = Path(path)
        for sub in ("programs", "references", "tests"):
            (path / sub).mkdir(parents=True, exist_ok=True)
        for e in self.entries:
            _write(path / "programs" / f"{e.name}.s", render(e.program))
            _write(path / "references" / f"{e.name}.s", render(e.reference))
            _write(path / "tests" / f"{e.name}.tests", format_tests(e.tests))
        manifest = {
            "split": self.split,
            "provenance": self.provenance,
            "isa": self.isa.header(),
            "entries": [{"name": e.name, "task_id": e.task_id} for e in self.entries],
        }
        _write(path / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path, isa: Isa = DEFAULT_ISA) -> "Dataset":
        path = Path(path)
        manifest = json.loads((path / "manifest.json").read_text())
        entries = []
        for item in manifest["entries"]:
            name = item["name"]
            entries.append(Entry(
                name,
                parse((path / "programs" / f"{name}.s").read_text(), isa),
                parse_tests((path / "tests" / f"{name}.tests").read_text(), isa),
                parse((path / "references" / f"{name}.s").read_text(), isa),
                item.get("task_id"),
            ))
        return cls(entries, manifest["split"], manifest.get("provenance", {}))


def _write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def format_tests(suite: TestSuite) -> str:
    lines = []
    for t in range(len(suite)):
        ins = " ".join(f"r{r}=0x{int(v):08x}" for r, v in enumerate(suite.inputs[t]))
        outs = " ".join(f"r{r}=0x{int(suite.expected[t, r]):08x}"
                        for r in np.flatnonzero(suite.mask[t]))
        lines.append(f"in {ins} ; out {outs}")
    return "\n".join(lines) + "\n"


def _assignments(text: str, n_regs: int, lineno: int) -> dict[int, int]:
    out = {}
    for tok in text.split():
        reg, _, val = tok.partition("=")
        if not reg.startswith("r") or not val:
            raise ValueError(f"tests line {lineno}: bad assignment {tok!r}")
        r = int(reg[1:])
        if not 0 <= r < n_regs:
            raise ValueError(f"tests line {lineno}: register {reg} out of range")
        out[r] = int(val, 0) & K.MASK32
    return out


def parse_tests(text: str, isa: Isa = DEFAULT_ISA) -> TestSuite:
    cases = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if not line.startswith("in ") or " ; out " not in line:
            raise ValueError(f"tests line {lineno}: expected 'in ... ; out ...'")
        lhs, rhs = line[3:].split(" ; out ", 1)
        ins = _assignments(lhs, isa.n_regs, lineno)
        outs = _assignments(rhs, isa.n_regs, lineno)
        if not outs:
            raise ValueError(f"tests line {lineno}: no output registers")
        state = np.zeros(isa.n_regs, dtype=np.int64)
        for r, v in ins.items():
            state[r] = v
        exp = np.zeros(isa.n_regs, dtype=np.int64)
        for r, v in outs.items():
            exp[r] = v
        cases.append(TestCase(state, exp, tuple(sorted(outs))))
    return TestSuite.from_cases(cases)


# ---------------------------------------------------------------------------
# HD augmentation
# ---------------------------------------------------------------------------

def augment_hd(task: Task, n: int = 20, budget: int = 2000, seed: int = 0, chains: int = 10,
               tests: TestSuite | None = None, beta: float = 1.0) -> list[Program]:
    """Up to ``n`` distinct programs equivalent to the task reference on its tests.

    Runs ``chains`` sampler chains of ``budget`` steps from the reference
    with cost ``omega_e * eq`` only and harvests every accepted state with
    zero mismatch.  The reference always comes first; the rest are a seeded
    sample of the harvest.  Programs are returned compacted.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    ref = task.reference.compact()
    tests = tests if tests is not None else task.make_tests(seed)
    if n == 1:
        return [ref]
    isa = ref.isa
    probs, tables = kernel_args(uniform_params(isa), isa)
    kind_p, kind_cdf, op_p, op_cdf, cls_mass, uniform = probs
    sig, prop, prop_of, members, size, cls_of, n_regs, pool = tables
    w = CostWeights.augmentation()
    rng = np.random.default_rng([seed, task.id, 1])
    found: dict[str, Program] = {render(ref): ref}
    out_codes = np.empty((budget, isa.n_slots, 3), dtype=np.int64)
    for _ in range(chains):
        u = rng.random((budget, K.N_UNIFORMS))
        k = K.harvest_chain(ref.code, u, kind_cdf, op_p, op_cdf, cls_mass, uniform,
                            sig, isa.sem, isa.latency, prop, prop_of, members, size, cls_of,
                            n_regs, pool, tests.inputs, tests.expected, tests.mask,
                            isa.strict_shifts, w.omega_e, w.omega_p, beta, out_codes)
        for code in out_codes[:k]:
            p = Program(isa, code.copy(), validate=False).compact()
            if p.live_length:
                found.setdefault(render(p), p)
        if len(found) >= 4 * n:
            break
    pool_programs = list(found.values())[1:]
    if len(pool_programs) < n - 1:
        warnings.warn(f"task {task.id}: only {len(pool_programs) + 1} distinct programs "
                      f"found, wanted {n}", stacklevel=2)
        picks = pool_programs
    else:
        idx = np.sort(rng.choice(len(pool_programs), size=n - 1, replace=False))
        picks = [pool_programs[i] for i in idx]
    return [ref] + picks


def split_even_odd(entries: Sequence[Entry]) -> tuple[list[Entry], list[Entry]]:
    """Entries of even-numbered tasks train; odd-numbered ones are held out."""
    train = [e for e in entries if e.task_id % 2 == 0]
    test = [e for e in entries if e.task_id % 2 == 1]
    return train, test


def build_hd(n_variants: int = 20, budget: int = 2000, chains: int = 10, seed: int = 0,
             tasks: Sequence[Task] | None = None) -> tuple[Dataset, Dataset]:
    tasks = list(tasks) if tasks is not None else hd_tasks()
    entries = []
    for task in tasks:
        tests = task.make_tests(seed)
        for k, p in enumerate(augment_hd(task, n_variants, budget, seed, chains, tests)):
            entries.append(Entry(f"{task.name}_v{k:02d}", p, tests, task.reference, task.id))
    prov = {"mode": "hd-augment", "seed": seed, "n_variants": n_variants, "budget": budget,
            "chains": chains, "tasks": [t.id for t in tasks]}
    train, test = split_even_odd(entries)
    return Dataset(train, "train", dict(prov)), Dataset(test, "test", dict(prov))


# ---------------------------------------------------------------------------
# synthetic corpus
# ---------------------------------------------------------------------------

def random_program(rng: np.random.Generator, live_length: int, isa: Isa = DEFAULT_ISA) -> Program:
    """``live_length`` uniformly random instructions in the leading slots."""
    code = np.zeros((isa.n_slots, 3), dtype=np.int64)
    for k in range(live_length):
        op = int(isa.proposable[rng.integers(isa.n_proposable)])
        code[k, 0] = op
        code[k, 1] = rng.integers(isa.n_regs)
        if isa.sig[op] == K.SIG_RI:
            code[k, 2] = isa.imm_pool[rng.integers(len(isa.imm_pool))]
        else:
            code[k, 2] = rng.integers(isa.n_regs)
    return Program(isa, code)


def written_registers(p: Program) -> tuple[int, ...]:
    return tuple(sorted({int(i.a) for i in p.instructions if i.opcode != 0}))


def random_inputs(rng: np.random.Generator, n: int, n_regs: int) -> np.ndarray:
    s = rng.integers(0, 2**32, size=(n, n_regs), dtype=np.int64)
    shift = rng.integers(0, 32, size=(n, n_regs))
    return np.where(rng.random((n, n_regs)) < 0.5, s >> shift, s)


def synth_generate(count: int = 600, live_length: int = 6, walk_iters: int = 5000,
                   seed: int = 0, isa: Isa = DEFAULT_ISA, n_tests: int = N_TESTS,
                   keep_live: bool = True) -> tuple[Dataset, Dataset]:
    """``count`` distinct random-walk programs split evenly into train and test.

    Walks use the uniform proposal under a constant cost, so every applicable
    move is accepted; moves that would change the live length are rejected to
    keep program size fixed.
    """
    if count % 2:
        raise ValueError("count must be even")
    if not 1 <= live_length <= isa.n_slots:
        raise ValueError("live_length out of range")
    probs, tables = kernel_args(uniform_params(isa), isa)
    kind_p, kind_cdf, op_p, op_cdf, cls_mass, uniform = probs
    programs: dict[str, Program] = {}
    tests = []
    accepted = []
    attempt = 0
    while len(programs) < count:
        rng = np.random.default_rng([seed, attempt])
        attempt += 1
        start = random_program(rng, live_length, isa)
        u = rng.random((walk_iters, K.N_UNIFORMS))
        code, n_acc = K.random_walk(start.code, u, kind_cdf, op_p, op_cdf, cls_mass, uniform,
                                    *tables, keep_live)
        p = Program(isa, code, validate=False).compact()
        if p.live_length == 0:
            continue
        key = render(p)
        if key in programs:
            continue
        programs[key] = p
        accepted.append(n_acc / walk_iters)
        tests.append(TestSuite.from_cases(
            make_tests(p, random_inputs(rng, n_tests, isa.n_regs), written_registers(p))))
    entries = [Entry(f"syn{i:04d}", p, t, p, None)
               for i, (p, t) in enumerate(zip(programs.values(), tests))]
    prov = {"mode": "synthetic", "seed": seed, "count": count, "live_length": live_length,
            "walk_iters": walk_iters, "keep_live": keep_live, "attempts": attempt,
            "mean_walk_acceptance": float(np.mean(accepted))}
    half = count // 2
    return Dataset(entries[:half], "train", dict(prov)), Dataset(entries[half:], "test", dict(prov))


def save_split(out_dir, train: Dataset, test: Dataset):
    """Write ``out_dir/{train,test}`` plus a top-level manifest."""
    out = Path(out_dir)
    train.save(out / "train")
    test.save(out / "test")
    manifest = {"provenance": train.provenance, "train": train.names, "test": test.names}
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_split(data_dir, isa: Isa = DEFAULT_ISA) -> tuple[Dataset, Dataset]:
    d = Path(data_dir)
    return Dataset.load(d / "train", isa), Dataset.load(d / "test", isa)
