import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import PY_ALU, programs, py_execute, random_program, states
from superopt import kernels as K
from superopt.isa import (DEFAULT_ISA, ExecutionFault, Isa, ParseError, Program, TestCase,
                          execute, execute_batch, make_tests, mini_isa, parse, perf, render)

ISA = DEFAULT_ISA
STRICT = Isa(strict_shifts=True, name="toy32-strict")


def op(name, sig=K.SIG_RR):
    return ISA.opcode_index(name, sig)


def prog(text, isa=ISA):
    return parse(text, isa)


# --- opcode table -----------------------------------------------------------

def test_opcode_table_shape():
    assert ISA.opcodes[0].mnemonic == "unused" and ISA.opcodes[0].latency == 0
    assert all(o.latency >= 1 for o in ISA.opcodes[1:])
    assert all(len(o.operand_kinds) <= 2 for o in ISA.opcodes)
    assert ISA.n_opcodes == 37 and ISA.n_proposable == 36
    assert set(PY_ALU) == {o.mnemonic for o in ISA.opcodes[1:]}


def test_latency_table():
    slow = {"popcnt", "lzcnt", "min", "max", "cmovz", "cmovnz", "mul", "mulhu"}
    for o in ISA.opcodes[1:]:
        assert o.latency == (3 if o.mnemonic in slow else 1), o.mnemonic


def test_indices_are_stable():
    # BoW features and softmax heads index this order
    assert [o.mnemonic for o in ISA.opcodes[:6]] == ["unused", "mov", "add", "sub", "and", "or"]
    assert op("mov", K.SIG_RI) == 27
    assert ISA == Isa() and hash(ISA) == hash(Isa())


# --- execute ----------------------------------------------------------------

def test_empty_program_is_identity():
    state = [7, 0, 0, 0, 0, 0, 0, 0]
    assert execute(Program.empty(), state).tolist() == state


def test_task1_formula():
    p = prog("mov r1, r0\nsub r1, 1\nand r0, r1")
    assert execute(p, [88] + [0] * 7)[0] == 88 & 87 == 80


def test_xor_self_clears():
    state = [123, 4, 5, 6, 7, 8, 9, 10]
    out = execute(prog("xor r0, r0"), state)
    assert out[0] == 0 and out[1:].tolist() == state[1:]


@pytest.mark.parametrize("mnemonic", sorted(PY_ALU))
def test_each_opcode_against_python_semantics(mnemonic):
    rng = np.random.default_rng(1)
    vals = [0, 1, 2, 31, 32, 33, 0x7FFFFFFF, 0x80000000, 0xFFFFFFFF, 0xFFFF]
    vals += rng.integers(0, 2**32, 30).tolist()
    for sig in (K.SIG_RR, K.SIG_RI):
        if (mnemonic, sig) not in ISA.by_name:
            continue
        o = ISA.opcode_index(mnemonic, sig)
        for d in vals:
            for s in vals[::3]:
                if sig == K.SIG_RR:
                    p = Program.from_instructions([(o, 0, 1)])
                    got = execute(p, [d, s, 0, 0, 0, 0, 0, 0])[0]
                else:
                    p = Program.from_instructions([(o, 0, s)])
                    got = execute(p, [d, 0, 0, 0, 0, 0, 0, 0])[0]
                assert got == PY_ALU[mnemonic](d, s), (mnemonic, sig, d, s)


def test_same_register_operands():
    # d and s alias: "sub r2, r2" reads the old value twice
    out = execute(prog("sub r2, r2\nadd r3, r3"), [0, 0, 9, 5, 0, 0, 0, 0])
    assert out[2] == 0 and out[3] == 10


@given(programs(), states())
def test_interpreter_matches_reference(p, state):
    got, faults = execute_batch(p, [state])
    want, fault = py_execute(p, state)
    assert faults[0] == -1 and fault == -1
    assert got[0].tolist() == want


@given(programs(STRICT), states(STRICT))
def test_strict_mode_faults_match_reference(p, state):
    got, faults = execute_batch(p, [state])
    want, fault = py_execute(p, state)
    assert faults[0] == fault
    if fault < 0:
        assert got[0].tolist() == want


def test_strict_shift_fault_and_default_mask():
    text = "mov r2, r0\nshl r0, r1"
    state = [3, 40, 0, 0, 0, 0, 0, 0]
    assert execute(prog(text), state)[0] == (3 << 8)
    with pytest.raises(ExecutionFault) as e:
        execute(prog(text, STRICT), state)
    assert e.value.slot == 1


def test_execution_is_pure():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        p = random_program(rng, pool_only=False)
        s = rng.integers(0, 2**32, (1, 8), dtype=np.int64)
        before = s.copy()
        a, _ = execute_batch(p, s)
        b, _ = execute_batch(p, s)
        assert np.array_equal(a, b) and np.array_equal(s, before)


def test_execute_rejects_bad_states():
    with pytest.raises(ValueError):
        execute(Program.empty(), [0] * 7)
    with pytest.raises(ValueError):
        execute(Program.empty(), [2**32] + [0] * 7)


# --- perf -------------------------------------------------------------------

def test_perf_examples():
    assert perf(Program.empty()) == 0
    assert perf(prog("and r0, r1")) == 1
    assert perf(prog("mov r1, r0\nmul r1, r1\nand r0, r1")) == 1 + 3 + 1


@given(programs(), st.randoms(use_true_random=False))
def test_perf_depends_only_on_live_multiset(p, rnd):
    order = list(range(ISA.n_slots))
    rnd.shuffle(order)
    q = Program(ISA, p.code[order])
    assert perf(q) == perf(p) == perf(p.compact())
    assert perf(p) == sum(ISA.opcodes[i.opcode].latency for i in p.instructions)


# --- text format -------------------------------------------------------------

def test_parse_empty():
    assert parse("") == Program.empty()
    assert parse("# nothing\n\n.slots 12 .regs 8\n") == Program.empty()


def all_opcode_fixture():
    """Every opcode once, written in a deliberately messy style."""
    messy, canonical = [".slots 12 .regs 8"], [".slots 12 .regs 8"]
    for i, o in enumerate(ISA.opcodes[1:], start=1):
        r = i % 8
        if o.signature == K.SIG_RR:
            messy.append(f"  {o.mnemonic.upper()}   R{r} ,r{(r + 3) % 8}   # op {i}")
            canonical.append(f"{o.mnemonic} r{r}, r{(r + 3) % 8}")
        else:
            imm = ISA.imm_pool[i % len(ISA.imm_pool)]
            messy.append(f"{o.mnemonic} r{r},{hex(imm)}")
            canonical.append(f"{o.mnemonic} r{r}, {imm if imm <= 255 else hex(imm)}")
    return messy, canonical


def test_render_parse_canonical_for_every_opcode():
    messy, canonical = all_opcode_fixture()
    # 36 opcodes do not fit in 12 slots; check in chunks of 12
    for lo in range(1, len(messy), 12):
        body = [messy[0]] + messy[lo:lo + 12]
        want = "\n".join([canonical[0]] + canonical[lo:lo + 12]) + "\n"
        assert render(parse("\n".join(body))) == want


@given(programs())
def test_round_trip(p):
    assert parse(render(p, keep_slots=True)) == p
    assert parse(render(p)) == p.compact()
    assert render(parse(render(p))) == render(p)


def test_immediates_accept_negative_and_hex():
    p = parse("add r0, -1\nand r1, 0xff")
    assert p.code[0, 2] == 0xFFFFFFFF and p.code[1, 2] == 255
    assert "add r0, 0xffffffff" in render(p)


@pytest.mark.parametrize("text, needle", [
    ("and r0, r9", "out of range"),
    ("frob r0, r1", "unknown mnemonic"),
    ("and r0", "expects 2 operands"),
    ("and r0, r1, r2", "expects 2 operands"),
    ("not r0, 5", "no immediate source form"),
    ("and 5, r1", "destination must be a register"),
    ("add r0, 0x1ffffffff", "32 bits"),
    (".slots 4 .regs 8", "does not match"),
    ("unused r0", "no operands"),
])
def test_parse_errors(text, needle):
    with pytest.raises(ParseError) as e:
        parse("# header comment\n" + text)
    assert needle in str(e.value)
    assert e.value.line == 2


def test_too_many_instructions():
    with pytest.raises(ParseError):
        parse("\n".join(["inc r0, r0"] * 13))


# --- program and test-case invariants ----------------------------------------

def test_program_validation():
    with pytest.raises(ValueError):
        Program(ISA, np.zeros((11, 3)))
    with pytest.raises(ValueError):
        Program.from_instructions([(99, 0, 0)])
    with pytest.raises(ValueError):
        Program.from_instructions([(0, 1, 0)])
    with pytest.raises(ValueError):
        Program.from_instructions([(op("and"), 0, 8)])
    p = Program.from_instructions([(op("and"), 0, 1)])
    with pytest.raises(ValueError):
        p.code[0, 0] = 2


def test_live_length_and_compact():
    p = Program(ISA, np.array([[0, 0, 0], [op("and"), 0, 1]] + [[0, 0, 0]] * 10))
    assert p.live_length == 1
    assert p.compact().code[0].tolist() == [op("and"), 0, 1]


def test_make_tests_masks_outputs():
    p = prog("mov r1, r0\nadd r0, 1")
    tests = make_tests(p, [[5, 9, 9, 9, 9, 9, 9, 9]], [0])
    assert tests[0].expected.tolist() == [6, 0, 0, 0, 0, 0, 0, 0] and tests[0].mask == (0,)
    with pytest.raises(ValueError):
        TestCase(np.zeros(8), np.zeros(8), ())


def test_mini_isa():
    m = mini_isa()
    assert m.n_slots == 2 and m.n_regs == 2 and m.n_proposable == 3
    assert render(parse("xor r0, r1\nmov r1, 1", m), keep_slots=True).startswith(".slots 2 .regs 2")
