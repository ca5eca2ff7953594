import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import enumerate_moves, mini_programs, programs, random_program
from superopt import kernels as K
from superopt.isa import DEFAULT_ISA, Program, mini_isa, parse
from superopt.proposal import (N_KINDS, Move, MoveKind, ProposalParams, apply_move, log_prob,
                               sample_move, sample_moves, uniform_params)

ISA = DEFAULT_ISA
L = ISA.n_slots
MINI = mini_isa()


def random_params(rng, isa=ISA, scale=1.0):
    def sm(n):
        z = rng.normal(0, scale, n)
        e = np.exp(z - z.max())
        return e / e.sum()
    return ProposalParams(sm(N_KINDS), sm(isa.n_proposable))


def forced(kind, isa=ISA):
    kp = np.zeros(N_KINDS)
    kp[kind] = 1.0
    return ProposalParams(kp, np.full(isa.n_proposable, 1 / isa.n_proposable), allow_zero=True)


# --- params -------------------------------------------------------------------

def test_nine_kinds_in_stable_order():
    assert N_KINDS == 9
    assert [k.name for k in MoveKind] == [
        "OPCODE_SAME_SIGNATURE", "OPERAND", "FULL_INSTRUCTION", "SWAP_ANY", "SWAP_LOCAL",
        "ROTATE", "DELETE", "INSERT", "OPERAND_SWAP"]


def test_uniform_params():
    u = uniform_params()
    assert np.all(u.kind_probs == 1 / 9)
    assert abs(u.op_probs.sum() - 1) < 1e-12 and np.all(u.op_probs == 1 / 36)
    assert uniform_params() == u and u.is_uniform


def test_params_validation():
    with pytest.raises(ValueError):
        ProposalParams(np.full(9, 0.1), np.full(36, 1 / 36))
    with pytest.raises(ValueError):
        ProposalParams(np.full(8, 1 / 8), np.full(36, 1 / 36))
    kp = np.r_[np.zeros(1), np.full(8, 1 / 8)]
    with pytest.raises(ValueError):
        ProposalParams(kp, np.full(36, 1 / 36))
    assert ProposalParams(kp, np.full(36, 1 / 36), allow_zero=True).kind_probs[0] == 0
    with pytest.raises(ValueError):
        ProposalParams(np.full(9, np.nan), np.full(36, 1 / 36))


def test_params_are_immutable():
    u = uniform_params()
    with pytest.raises(ValueError):
        u.kind_probs[0] = 1.0


def test_params_must_match_isa():
    p = ProposalParams(np.full(9, 1 / 9), np.full(3, 1 / 3))
    with pytest.raises(ValueError):
        sample_move(p, Program.empty(), np.random.default_rng(0))


# --- spec examples ---------------------------------------------------------------

def test_swap_any_logprob():
    p = parse("and r0, r1")
    rec = sample_move(uniform_params(), p, np.random.default_rng(0))
    rng = np.random.default_rng(3)
    for _ in range(50):
        rec = sample_move(uniform_params(), p, rng)
        if rec.move.kind == MoveKind.SWAP_ANY:
            break
    assert rec.move.kind == MoveKind.SWAP_ANY
    assert rec.logprob == pytest.approx(math.log(1 / 9) + 2 * math.log(1 / L), abs=1e-12)
    # forcing the kind changes only the kind factor
    rec = sample_move(forced(MoveKind.SWAP_ANY), p, np.random.default_rng(1))
    assert rec.logprob == pytest.approx(2 * math.log(1 / L), abs=1e-12)


def test_delete_on_empty_program_is_inapplicable():
    rec = sample_move(forced(MoveKind.DELETE), Program.empty(), np.random.default_rng(0))
    assert rec.move.kind == MoveKind.DELETE and not rec.move.applicable
    with pytest.raises(ValueError):
        apply_move(Program.empty(), rec.move)


def test_same_signature_renormalisation():
    rng = np.random.default_rng(5)
    params = random_params(rng)
    p = parse("and r0, r1")
    cur = ISA.opcode_index("and")
    members = [o for o in range(1, ISA.n_opcodes) if ISA.sig[o] == K.SIG_RR and o != cur]
    for target in members[:5]:
        move = Move(MoveKind.OPCODE_SAME_SIGNATURE, (0, target))
        subset_mass = sum(params.op_probs[o - 1] for o in members)
        want = math.log(params.kind_probs[0]) + math.log(params.op_probs[target - 1] / subset_mass)
        assert log_prob(params, p, move) == pytest.approx(want, abs=1e-12)


def test_full_instruction_uniform_logprob():
    p = parse("and r0, r1")
    u = uniform_params()
    rr = Move(MoveKind.FULL_INSTRUCTION, (4, ISA.opcode_index("xor"), 2, 3))
    ri = Move(MoveKind.FULL_INSTRUCTION, (4, ISA.opcode_index("xor", K.SIG_RI), 2, 0xFF))
    base = math.log(1 / 9) + math.log(1 / L) + math.log(1 / 36) + math.log(1 / 8)
    assert log_prob(u, p, rr) == pytest.approx(base + math.log(1 / 8), abs=1e-12)
    assert log_prob(u, p, ri) == pytest.approx(base + math.log(1 / 16), abs=1e-12)


def test_log_prob_rejects_invalid_moves():
    p = parse("and r0, r1")
    u = uniform_params()
    for move in (Move(MoveKind.DELETE, (3,)),                       # slot not live
                 Move(MoveKind.OPCODE_SAME_SIGNATURE, (0, ISA.opcode_index("add", K.SIG_RI))),
                 Move(MoveKind.INSERT, (0, 1, 0, 0)),               # slot occupied
                 Move(MoveKind.FULL_INSTRUCTION, (0, ISA.opcode_index("add", K.SIG_RI), 0, 5)),
                 Move(MoveKind.SWAP_ANY, (0, 12)),
                 Move(MoveKind.DELETE, (), False)):                 # delete is applicable here
        with pytest.raises(ValueError):
            log_prob(u, p, move)


# --- exactness ----------------------------------------------------------------------

def test_sampled_logprob_equals_log_prob():
    rng = np.random.default_rng(0)
    for trial in range(10_000):
        if trial % 100 == 0:
            params = uniform_params() if trial % 200 == 0 else random_params(rng, scale=2.0)
            p = random_program(rng, p_live=rng.random())
        rec = sample_move(params, p, rng)
        assert np.isfinite(rec.logprob) and rec.logprob <= 0
        assert log_prob(params, p, rec.move) == rec.logprob


def test_mini_enumeration_sums_to_one():
    rng = np.random.default_rng(1)
    progs = mini_programs(MINI)
    for params in (uniform_params(MINI), random_params(rng, MINI), random_params(rng, MINI, 3.0)):
        for p in progs[::7]:
            total = 0.0
            for move, prob in enumerate_moves(params, p):
                lp = log_prob(params, p, move)
                assert lp == pytest.approx(math.log(prob), abs=1e-12)
                total += math.exp(lp)
            assert abs(total - 1.0) < 1e-9


def test_default_isa_enumeration_sums_to_one():
    rng = np.random.default_rng(2)
    params = random_params(rng)
    for p in (Program.empty(), parse("and r0, r1\nmov r2, 5"), random_program(rng, p_live=1.0)):
        total = sum(math.exp(log_prob(params, p, m)) for m, _ in enumerate_moves(params, p))
        assert abs(total - 1.0) < 1e-9


@given(programs(MINI), st.integers(0, 2**31))
def test_samples_are_enumerated_outcomes(p, seed):
    rng = np.random.default_rng(seed)
    params = random_params(rng, MINI)
    known = {m for m, _ in enumerate_moves(params, p)}
    for _ in range(20):
        assert sample_move(params, p, rng).move in known


def test_vectorised_sampler_agrees():
    rng = np.random.default_rng(4)
    params = random_params(rng)
    p = random_program(rng)
    moves, lps = sample_moves(params, p, 500, np.random.default_rng(9))
    r2 = np.random.default_rng(9)
    for m, lp in zip(moves, lps):
        rec = sample_move(params, p, r2)
        assert np.array_equal(rec.move.to_array(), m) and rec.logprob == lp


# --- apply_move -------------------------------------------------------------------

def test_self_swap_is_identity():
    p = parse("and r0, r1\nxor r2, r3")
    for i in range(L):
        assert apply_move(p, Move(MoveKind.SWAP_ANY, (i, i))) == p


def test_delete_then_insert_restores():
    p = parse("and r0, r1\nadd r2, 7\nxor r2, r3")
    instr = tuple(p.code[1])
    q = apply_move(p, Move(MoveKind.DELETE, (1,)))
    assert q.live_length == 2 and q.code[1].tolist() == [0, 0, 0]
    assert apply_move(q, Move(MoveKind.INSERT, (1,) + instr)) == p


def test_rotate():
    p = parse("add r0, 1\nadd r1, 2\nadd r2, 3")
    a, b, c = (tuple(r) for r in p.code[:3].tolist())
    right = apply_move(p, Move(MoveKind.ROTATE, (0, 2)))
    assert [tuple(r) for r in right.code[:3].tolist()] == [c, a, b]
    left = apply_move(p, Move(MoveKind.ROTATE, (2, 0)))
    assert [tuple(r) for r in left.code[:3].tolist()] == [b, c, a]
    assert apply_move(left, Move(MoveKind.ROTATE, (0, 2))) == p


def test_other_kinds():
    p = parse("and r0, r1\nadd r2, 7")
    q = apply_move(p, Move(MoveKind.OPERAND_SWAP, (0,)))
    assert q.code[0].tolist() == [ISA.opcode_index("and"), 1, 0]
    q = apply_move(p, Move(MoveKind.OPERAND, (1, 1, 0xFF)))
    assert q.code[1].tolist() == [ISA.opcode_index("add", K.SIG_RI), 2, 0xFF]
    q = apply_move(p, Move(MoveKind.SWAP_LOCAL, (0,)))
    assert q.code[0].tolist() == p.code[1].tolist() and q.code[1].tolist() == p.code[0].tolist()
    q = apply_move(p, Move(MoveKind.OPCODE_SAME_SIGNATURE, (0, ISA.opcode_index("or"))))
    assert q.code[0].tolist() == [ISA.opcode_index("or"), 0, 1]


def test_apply_is_pure_and_valid_on_many_moves():
    rng = np.random.default_rng(7)
    n = 0
    while n < 100_000:
        params = random_params(rng, scale=1.5)
        p = random_program(rng, p_live=rng.random())
        before = p.code.copy()
        moves, _ = sample_moves(params, p, 500, rng)
        for arr in moves:
            move = Move.from_array(arr)
            if not move.applicable:
                continue
            q = apply_move(p, move)
            q.check()
            if move.kind == MoveKind.OPCODE_SAME_SIGNATURE:
                s = move.args[0]
                assert ISA.sig[q.code[s, 0]] == ISA.sig[p.code[s, 0]]
                assert q.code[s, 0] != p.code[s, 0]
            n += 1
        assert np.array_equal(p.code, before)


def test_inapplicable_kinds():
    full = Program(ISA, np.tile([ISA.opcode_index("add", K.SIG_RI), 0, 1], (L, 1)))
    rng = np.random.default_rng(0)
    assert not sample_move(forced(MoveKind.INSERT), full, rng).move.applicable
    assert not sample_move(forced(MoveKind.OPERAND_SWAP), full, rng).move.applicable
    mov_only = parse("mov r0, 1", MINI)      # the reg/imm class of the mini ISA has one opcode
    rec = sample_move(forced(MoveKind.OPCODE_SAME_SIGNATURE, MINI), mov_only, rng)
    assert not rec.move.applicable and rec.move.args == (0,)
    assert log_prob(forced(MoveKind.OPCODE_SAME_SIGNATURE, MINI), mov_only, rec.move) == 0.0


def test_move_array_round_trip():
    for m in (Move(MoveKind.INSERT, (3, 5, 1, 2)), Move(MoveKind.DELETE, (), False),
              Move(MoveKind.OPERAND, (0, 1, 0))):
        assert Move.from_array(m.to_array()) == m
