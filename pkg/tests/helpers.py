"""Shared strategies and slow-but-obvious reference implementations."""

import numpy as np
from hypothesis import strategies as st

from superopt import kernels as K
from superopt.isa import DEFAULT_ISA, Program

M32 = 0xFFFFFFFF

# "PASS criterion 3: ..." lines, echoed at the end of the session by conftest
ACCEPTANCE_LINES = []


def report(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    return ok


def _signed(v):
    return v - (1 << 32) if v >> 31 else v


# semantics written from the mnemonic, with plain Python integers
PY_ALU = {
    "mov": lambda d, s: s,
    "add": lambda d, s: (d + s) % 2**32,
    "sub": lambda d, s: (d - s) % 2**32,
    "and": lambda d, s: d & s,
    "or": lambda d, s: d | s,
    "xor": lambda d, s: d ^ s,
    "andn": lambda d, s: d & ~s & M32,
    "shl": lambda d, s: (d << (s % 32)) % 2**32,
    "shr": lambda d, s: d >> (s % 32),
    "sar": lambda d, s: (_signed(d) >> (s % 32)) % 2**32,
    "not": lambda d, s: M32 - s,
    "neg": lambda d, s: (2**32 - s) % 2**32,
    "inc": lambda d, s: (s + 1) % 2**32,
    "dec": lambda d, s: (s - 1) % 2**32,
    "setz": lambda d, s: int(s == 0),
    "setnz": lambda d, s: int(s != 0),
    "slt": lambda d, s: int(_signed(d) < _signed(s)),
    "sltu": lambda d, s: int(d < s),
    "mul": lambda d, s: (d * s) % 2**32,
    "mulhu": lambda d, s: (d * s) >> 32,
    "popcnt": lambda d, s: bin(s).count("1"),
    "lzcnt": lambda d, s: 32 - s.bit_length(),
    "min": lambda d, s: d if _signed(d) <= _signed(s) else s,
    "max": lambda d, s: d if _signed(d) >= _signed(s) else s,
    "cmovz": lambda d, s: s if d == 0 else d,
    "cmovnz": lambda d, s: s if d != 0 else d,
}


def py_execute(p: Program, state):
    """Reference interpreter; returns (registers, fault_slot or -1)."""
    isa = p.isa
    regs = [int(v) for v in state]
    for k, (op, a, b) in enumerate(p.code.tolist()):
        opc = isa.opcodes[op]
        if opc.signature == K.SIG_NONE:
            continue
        s = regs[b] if opc.signature == K.SIG_RR else b
        if isa.strict_shifts and opc.mnemonic in ("shl", "shr", "sar") and s >= 32:
            return regs, k
        regs[a] = PY_ALU[opc.mnemonic](regs[a], s)
    return regs, -1


@st.composite
def instructions(draw, isa=DEFAULT_ISA):
    op = draw(st.integers(1, isa.n_opcodes - 1))
    a = draw(st.integers(0, isa.n_regs - 1))
    if isa.sig[op] == K.SIG_RI:
        b = draw(st.one_of(st.sampled_from(isa.imm_pool), st.integers(0, M32)))
    else:
        b = draw(st.integers(0, isa.n_regs - 1))
    return (op, a, b)


@st.composite
def programs(draw, isa=DEFAULT_ISA, min_live=0, max_live=None):
    """Programs with live instructions scattered over the slots."""
    max_live = isa.n_slots if max_live is None else max_live
    n = draw(st.integers(min_live, max_live))
    slots = draw(st.permutations(range(isa.n_slots)))[:n]
    code = np.zeros((isa.n_slots, 3), dtype=np.int64)
    for s in slots:
        code[s] = draw(instructions(isa))
    return Program(isa, code)


def words():
    return st.one_of(st.integers(0, M32), st.sampled_from([0, 1, 31, 32, 0x80000000, M32]))


def states(isa=DEFAULT_ISA):
    return st.lists(words(), min_size=isa.n_regs, max_size=isa.n_regs)


def random_program(rng, isa=DEFAULT_ISA, p_live=0.6, pool_only=True):
    code = np.zeros((isa.n_slots, 3), dtype=np.int64)
    for k in range(isa.n_slots):
        if rng.random() < p_live:
            op = int(rng.integers(1, isa.n_opcodes))
            code[k, 0] = op
            code[k, 1] = rng.integers(isa.n_regs)
            if isa.sig[op] == K.SIG_RI:
                code[k, 2] = (isa.imm_pool[rng.integers(len(isa.imm_pool))] if pool_only
                              else rng.integers(0, 2**32))
            else:
                code[k, 2] = rng.integers(isa.n_regs)
    return Program(isa, code)


def enumerate_moves(params, program):
    """Every outcome of the hierarchical proposal with its probability.

    Built from the sampling tree: kind, then position(s) uniform over the
    applicable slots, then opcode (renormalised over the signature class
    minus the current opcode for same-signature draws) and operands uniform.
    Kinds with no applicable choice yield one inapplicable outcome.
    """
    from superopt.proposal import Move, MoveKind

    isa = program.isa
    L, R = isa.n_slots, isa.n_regs
    pool = list(isa.imm_pool)
    kp, op = params.kind_probs, params.op_probs
    ops = program.code[:, 0]
    live = [k for k in range(L) if ops[k] != 0]
    unused = [k for k in range(L) if ops[k] == 0]
    rr = [k for k in live if isa.sig[ops[k]] == K.SIG_RR]
    out = []

    def emit(kind, args, prob, applicable=True):
        out.append((Move(kind, tuple(args), applicable), prob))

    def operands(opcode):
        srcs = pool if isa.sig[opcode] == K.SIG_RI else range(R)
        return [(a, b, 1.0 / (R * len(srcs))) for a in range(R) for b in srcs]

    for kind in MoveKind:
        p = kp[kind]
        if kind in (MoveKind.OPCODE_SAME_SIGNATURE, MoveKind.OPERAND, MoveKind.DELETE):
            if not live:
                emit(kind, (), p, False)
                continue
            for s in live:
                ps = p / len(live)
                cur = int(ops[s])
                if kind == MoveKind.DELETE:
                    emit(kind, (s,), ps)
                elif kind == MoveKind.OPERAND:
                    for which in (0, 1):
                        vals = pool if which == 1 and isa.sig[cur] == K.SIG_RI else range(R)
                        for v in vals:
                            emit(kind, (s, which, v), ps / 2 / len(vals))
                else:
                    alts = [o for o in range(1, isa.n_opcodes)
                            if o != cur and isa.sig[o] == isa.sig[cur]]
                    if not alts:
                        emit(kind, (s,), ps, False)
                    mass = sum(op[o - 1] for o in alts)
                    for o in alts:
                        emit(kind, (s, o), ps * op[o - 1] / mass)
        elif kind in (MoveKind.FULL_INSTRUCTION, MoveKind.INSERT):
            slots = range(L) if kind == MoveKind.FULL_INSTRUCTION else unused
            if not slots:
                emit(kind, (), p, False)
                continue
            for s in slots:
                for o in range(1, isa.n_opcodes):
                    for a, b, pab in operands(o):
                        emit(kind, (s, o, a, b), p / len(slots) * op[o - 1] * pab)
        elif kind in (MoveKind.SWAP_ANY, MoveKind.ROTATE):
            for i in range(L):
                for j in range(L):
                    emit(kind, (i, j), p / L / L)
        elif kind == MoveKind.SWAP_LOCAL:
            if L < 2:
                emit(kind, (), p, False)
            for i in range(L - 1):
                emit(kind, (i,), p / (L - 1))
        elif kind == MoveKind.OPERAND_SWAP:
            if not rr:
                emit(kind, (), p, False)
            for s in rr:
                emit(kind, (s,), p / len(rr))
    return out


def mini_programs(isa):
    """Every program of an ISA whose immediates come from its pool."""
    import itertools

    instrs = [(0, 0, 0)]
    for o in range(1, isa.n_opcodes):
        srcs = isa.imm_pool if isa.sig[o] == K.SIG_RI else range(isa.n_regs)
        instrs += [(o, a, b) for a in range(isa.n_regs) for b in srcs]
    return [Program(isa, np.array(c)) for c in itertools.product(instrs, repeat=isa.n_slots)]


def exact_expected_score(params, start, tests, weights, beta, budget):
    """E[r] by enumerating every trace of ``budget`` steps (mini ISAs only)."""
    from superopt.cost import total_cost
    from superopt.mcmc import acceptance
    from superopt.proposal import apply_move

    cache = {}

    def cost(p):
        key = p.code.tobytes()
        if key not in cache:
            cache[key] = total_cost(p, tests, weights).total
        return cache[key]

    moves = {}

    def outcomes(p):
        key = p.code.tobytes()
        if key not in moves:
            moves[key] = [(m, pr, apply_move(p, m) if m.applicable else None)
                          for m, pr in enumerate_moves(params, p)]
        return moves[key]

    c0 = cost(start)

    def rec(p, cur, best, t):
        if t == budget:
            return best / c0
        total = 0.0
        for move, prob, q in outcomes(p):
            if q is None:
                total += prob * rec(p, cur, best, t + 1)
                continue
            cq = cost(q)
            a = acceptance(cq, cur, beta)
            if a > 0:
                total += prob * a * rec(q, cq, min(best, cq), t + 1)
            if a < 1:
                total += prob * (1 - a) * rec(p, cur, best, t + 1)
        return total

    return rec(start, c0, c0, 0)


def replay(batch, k):
    """Program before each step of run ``k``."""
    from superopt.proposal import Move, apply_move

    cur, out = batch.initial, []
    for t in range(batch.moves.shape[1]):
        out.append(cur)
        if batch.accepted[k, t]:
            cur = apply_move(cur, Move.from_array(batch.moves[k, t]))
    return out


def credited_steps(batches, credit="t-ge-i"):
    """Per batch, the (program, move, return) of every step with a non-zero return."""
    from superopt.learn import returns
    from superopt.proposal import Move

    out = []
    for b in batches:
        g = returns(b.cost_nodes, credit)
        steps = [(prog, Move.from_array(b.moves[k, t]), float(g[k, t]))
                 for k in range(len(b)) for t, prog in enumerate(replay(b, k)) if g[k, t]]
        out.append((steps, len(b)))
    return out


def surrogate(model, batches, feats, credit="t-ge-i", steps=None):
    """Mean over runs of sum_i G_i log q(move_i), recomputed through log_prob.

    Its gradient is the REINFORCE estimate, so finite differences of this
    function check the analytic one.
    """
    from superopt.learn import forward
    from superopt.proposal import log_prob

    steps = steps if steps is not None else credited_steps(batches, credit)
    total, n = 0.0, 0
    for (rows, runs), f in zip(steps, feats):
        params = forward(model, f)
        total += sum(g * log_prob(params, prog, move) for prog, move, g in rows)
        n += runs
    return total / n
