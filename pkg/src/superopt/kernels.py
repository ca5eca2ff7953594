"""Hot numeric kernels: interpreter, test-case cost, move proposal and the
Metropolis chain loop.

Everything here works on raw int64/float64 arrays so that it compiles under
numba.  Register values are held as int64 in ``[0, 2**32)`` and masked after
every operation; no intermediate ever exceeds 2**49, so the same code is exact
in plain Python too.

Program layout: ``code`` is an ``(L, 3)`` int64 array of ``(opcode, a, b)``
rows.  ``a`` is the destination register; ``b`` is the source register or the
immediate, depending on the opcode signature.  Opcode 0 is always UNUSED.

Move layout: ``move`` is an int64[6] ``(kind, p0, p1, p2, p3, applicable)``:

    OPCODE     (slot, new_opcode)
    OPERAND    (slot, operand_index, new_value)
    FULL       (slot, opcode, a, b)
    SWAP_ANY   (i, j)
    SWAP_LOCAL (i)            swaps i and i + 1
    ROTATE     (i, j)         i < j rotates right, i > j rotates left
    DELETE     (slot)
    INSERT     (slot, opcode, a, b)
    OP_SWAP    (slot)

Each Metropolis iteration consumes exactly ``N_UNIFORMS`` pre-drawn uniforms,
so both backends produce identical chains from the same uniform array.
"""

import math

import numpy as np

from ._jit import USE_NUMBA, njit

MASK32 = 0xFFFFFFFF
FAULT_BITS = 32
N_UNIFORMS = 7

SIG_NONE = 0
SIG_RR = 1
SIG_RI = 2

(SEM_UNUSED, SEM_MOV, SEM_ADD, SEM_SUB, SEM_AND, SEM_OR, SEM_XOR, SEM_ANDN,
 SEM_SHL, SEM_SHR, SEM_SAR, SEM_NOT, SEM_NEG, SEM_INC, SEM_DEC, SEM_SETZ,
 SEM_SETNZ, SEM_SLT, SEM_SLTU, SEM_MUL, SEM_MULHU, SEM_POPCNT, SEM_LZCNT,
 SEM_MIN, SEM_MAX, SEM_CMOVZ, SEM_CMOVNZ) = range(27)

N_KINDS = 9
(K_OPCODE, K_OPERAND, K_FULL, K_SWAP_ANY, K_SWAP_LOCAL, K_ROTATE, K_DELETE,
 K_INSERT, K_OP_SWAP) = range(N_KINDS)

# subset codes recorded for the opcode choice of a move
SUBSET_NONE = -1
SUBSET_FULL = -2


# --------------------------------------------------------------------------
# interpreter
# --------------------------------------------------------------------------

@njit
def popcount32(v):
    v = v - ((v >> 1) & 0x55555555)
    v = (v & 0x33333333) + ((v >> 2) & 0x33333333)
    v = (v + (v >> 4)) & 0x0F0F0F0F
    return ((v * 0x01010101) & MASK32) >> 24


@njit
def lzcnt32(v):
    if v == 0:
        return 32
    n = 0
    if v <= 0x0000FFFF:
        n += 16
        v = v << 16
    if v <= 0x00FFFFFF:
        n += 8
        v = v << 8
    if v <= 0x0FFFFFFF:
        n += 4
        v = v << 4
    if v <= 0x3FFFFFFF:
        n += 2
        v = v << 2
    if v <= 0x7FFFFFFF:
        n += 1
    return n


@njit
def _signed(v):
    if v >= 0x80000000:
        return v - 0x100000000
    return v


@njit
def _mul_lo(d, s):
    return ((d & 0xFFFF) * s + ((((d >> 16) * s) & 0xFFFF) << 16)) & MASK32


@njit
def _mul_hi(d, s):
    return (((d * (s & 0xFFFF)) >> 16) + d * (s >> 16)) >> 16


@njit
def alu(m, d, s):
    """Result of semantic op ``m`` on destination value ``d`` and source ``s``."""
    if m == SEM_MOV:
        return s
    if m == SEM_ADD:
        return (d + s) & MASK32
    if m == SEM_SUB:
        return (d - s) & MASK32
    if m == SEM_AND:
        return d & s
    if m == SEM_OR:
        return d | s
    if m == SEM_XOR:
        return d ^ s
    if m == SEM_ANDN:
        return d & (s ^ MASK32)
    if m == SEM_SHL:
        return (d << (s & 31)) & MASK32
    if m == SEM_SHR:
        return d >> (s & 31)
    if m == SEM_SAR:
        return (_signed(d) >> (s & 31)) & MASK32
    if m == SEM_NOT:
        return s ^ MASK32
    if m == SEM_NEG:
        return (-s) & MASK32
    if m == SEM_INC:
        return (s + 1) & MASK32
    if m == SEM_DEC:
        return (s - 1) & MASK32
    if m == SEM_SETZ:
        return 1 if s == 0 else 0
    if m == SEM_SETNZ:
        return 1 if s != 0 else 0
    if m == SEM_SLT:
        return 1 if _signed(d) < _signed(s) else 0
    if m == SEM_SLTU:
        return 1 if d < s else 0
    if m == SEM_MUL:
        return _mul_lo(d, s)
    if m == SEM_MULHU:
        return _mul_hi(d, s)
    if m == SEM_POPCNT:
        return popcount32(s)
    if m == SEM_LZCNT:
        return lzcnt32(s)
    if m == SEM_MIN:
        return d if _signed(d) <= _signed(s) else s
    if m == SEM_MAX:
        return d if _signed(d) >= _signed(s) else s
    if m == SEM_CMOVZ:
        return s if d == 0 else d
    if m == SEM_CMOVNZ:
        return s if d != 0 else d
    return d


@njit
def is_shift(m):
    return m == SEM_SHL or m == SEM_SHR or m == SEM_SAR


@njit
def run_program(code, sig, sem, regs, strict):
    """Execute ``code`` in place on ``regs``; return the faulting slot or -1."""
    for k in range(code.shape[0]):
        op = code[k, 0]
        m = sem[op]
        if m == SEM_UNUSED:
            continue
        a = code[k, 1]
        b = code[k, 2]
        if sig[op] == SIG_RR:
            s = regs[b]
        else:
            s = b
        if strict and s >= 32 and is_shift(m):
            return k
        regs[a] = alu(m, regs[a], s)
    return -1


@njit
def _eq_cost_loop(code, sig, sem, inputs, expected, mask, strict):
    n_tests, n_regs = inputs.shape
    regs = np.empty(n_regs, dtype=np.int64)
    total = 0
    for t in range(n_tests):
        for r in range(n_regs):
            regs[r] = inputs[t, r]
        if run_program(code, sig, sem, regs, strict) >= 0:
            for r in range(n_regs):
                if mask[t, r]:
                    total += FAULT_BITS
            continue
        for r in range(n_regs):
            if mask[t, r]:
                total += popcount32(regs[r] ^ expected[t, r])
    return total


# -- column-vectorised interpreter used when numba is disabled ---------------

def _popcount_vec(v):
    v = v - ((v >> 1) & 0x55555555)
    v = (v & 0x33333333) + ((v >> 2) & 0x33333333)
    v = (v + (v >> 4)) & 0x0F0F0F0F
    return ((v * 0x01010101) & MASK32) >> 24


def _lzcnt_vec(v):
    # frexp exponent == bit_length, exact for v < 2**53
    _, exp = np.frexp(v.astype(np.float64))
    return np.where(v == 0, 32, 32 - exp).astype(np.int64)


def _signed_vec(v):
    return np.where(v >= 0x80000000, v - 0x100000000, v)


def alu_vec(m, d, s):
    if m == SEM_MOV:
        return s.copy()
    if m == SEM_ADD:
        return (d + s) & MASK32
    if m == SEM_SUB:
        return (d - s) & MASK32
    if m == SEM_AND:
        return d & s
    if m == SEM_OR:
        return d | s
    if m == SEM_XOR:
        return d ^ s
    if m == SEM_ANDN:
        return d & (s ^ MASK32)
    if m == SEM_SHL:
        return (d << (s & 31)) & MASK32
    if m == SEM_SHR:
        return d >> (s & 31)
    if m == SEM_SAR:
        return (_signed_vec(d) >> (s & 31)) & MASK32
    if m == SEM_NOT:
        return s ^ MASK32
    if m == SEM_NEG:
        return (-s) & MASK32
    if m == SEM_INC:
        return (s + 1) & MASK32
    if m == SEM_DEC:
        return (s - 1) & MASK32
    if m == SEM_SETZ:
        return (s == 0).astype(np.int64)
    if m == SEM_SETNZ:
        return (s != 0).astype(np.int64)
    if m == SEM_SLT:
        return (_signed_vec(d) < _signed_vec(s)).astype(np.int64)
    if m == SEM_SLTU:
        return (d < s).astype(np.int64)
    if m == SEM_MUL:
        return ((d & 0xFFFF) * s + ((((d >> 16) * s) & 0xFFFF) << 16)) & MASK32
    if m == SEM_MULHU:
        return (((d * (s & 0xFFFF)) >> 16) + d * (s >> 16)) >> 16
    if m == SEM_POPCNT:
        return _popcount_vec(s)
    if m == SEM_LZCNT:
        return _lzcnt_vec(s)
    if m == SEM_MIN:
        return np.where(_signed_vec(d) <= _signed_vec(s), d, s)
    if m == SEM_MAX:
        return np.where(_signed_vec(d) >= _signed_vec(s), d, s)
    if m == SEM_CMOVZ:
        return np.where(d == 0, s, d)
    if m == SEM_CMOVNZ:
        return np.where(d != 0, s, d)
    return d.copy()


def run_program_vec(code, sig, sem, regs, strict):
    """Execute ``code`` on every row of ``regs`` (N, R) in place.

    Returns an int64[N] of faulting slots (-1 where the row completed).
    """
    n = regs.shape[0]
    fault = np.full(n, -1, dtype=np.int64)
    for k in range(code.shape[0]):
        op = int(code[k, 0])
        m = int(sem[op])
        if m == SEM_UNUSED:
            continue
        a = int(code[k, 1])
        b = int(code[k, 2])
        if sig[op] == SIG_RR:
            s = regs[:, b].copy()
        else:
            s = np.full(n, b, dtype=np.int64)
        if strict and m in (SEM_SHL, SEM_SHR, SEM_SAR):
            bad = (s >= 32) & (fault < 0)
            fault[bad] = k
        regs[:, a] = alu_vec(m, regs[:, a], s)
    return fault


def _eq_cost_vec(code, sig, sem, inputs, expected, mask, strict):
    regs = inputs.copy()
    fault = run_program_vec(code, sig, sem, regs, strict)
    bits = _popcount_vec(regs ^ expected) * mask
    per_test = bits.sum(axis=1)
    faulted = fault >= 0
    per_test[faulted] = FAULT_BITS * mask[faulted].sum(axis=1)
    return int(per_test.sum())


eq_cost_kernel = _eq_cost_loop if USE_NUMBA else _eq_cost_vec


@njit
def execute_batch_loop(code, sig, sem, states, strict):
    out = states.copy()
    faults = np.empty(states.shape[0], dtype=np.int64)
    for t in range(states.shape[0]):
        faults[t] = run_program(code, sig, sem, out[t], strict)
    return out, faults


def execute_batch_vec(code, sig, sem, states, strict):
    out = states.copy()
    faults = run_program_vec(code, sig, sem, out, strict)
    return out, faults


execute_batch_kernel = execute_batch_loop if USE_NUMBA else execute_batch_vec


@njit
def perf_kernel(code, lat):
    total = 0
    for k in range(code.shape[0]):
        total += lat[code[k, 0]]
    return total


# --------------------------------------------------------------------------
# move proposal
# --------------------------------------------------------------------------

@njit
def _pick(u, n):
    k = int(u * n)
    if k >= n:
        k = n - 1
    return k


@njit
def _categorical(cdf, u):
    n = cdf.shape[0]
    k = np.searchsorted(cdf, u * cdf[n - 1], side="right")
    if k >= n:
        k = n - 1
    return k


# slot classes for position sampling
SLOTS_ALL = 0
SLOTS_LIVE = 1
SLOTS_UNUSED = 2
SLOTS_LIVE_RR = 3


@njit
def _slot_ok(code, sig, k, which):
    s = sig[code[k, 0]]
    if which == SLOTS_LIVE:
        return s != SIG_NONE
    if which == SLOTS_UNUSED:
        return s == SIG_NONE
    if which == SLOTS_LIVE_RR:
        return s == SIG_RR
    return True


@njit
def _count_slots(code, sig, which):
    n = 0
    for k in range(code.shape[0]):
        if _slot_ok(code, sig, k, which):
            n += 1
    return n


@njit
def _nth_slot(code, sig, which, idx):
    seen = 0
    for k in range(code.shape[0]):
        if _slot_ok(code, sig, k, which):
            if seen == idx:
                return k
            seen += 1
    return -1


@njit
def _n_values(opsig, operand, n_regs, n_pool):
    if operand == 1 and opsig == SIG_RI:
        return n_pool
    return n_regs


@njit
def _sample_full_opcode(u, op_cdf, uniform):
    n = op_cdf.shape[0]
    if uniform:
        return _pick(u, n)
    return _categorical(op_cdf, u)


@njit
def _sample_same_sig(u, cur, op_p, cls_members, cls_size, cls_of, cls_mass, uniform):
    """Proposable index of a new opcode in ``cur``'s class, excluding ``cur``."""
    c = cls_of[cur]
    size = cls_size[c]
    n = size - 1
    if n <= 0:
        return -1
    if uniform:
        want = _pick(u, n)
        seen = 0
        for i in range(size):
            j = cls_members[c, i]
            if j == cur:
                continue
            if seen == want:
                return j
            seen += 1
        return -1
    target = u * (cls_mass[c] - op_p[cur])
    acc = 0.0
    last = -1
    for i in range(size):
        j = cls_members[c, i]
        if j == cur:
            continue
        if op_p[j] > 0.0:
            last = j
        acc += op_p[j]
        if acc > target and op_p[j] > 0.0:
            return j
    return last


@njit
def sample_move(code, u, kind_cdf, op_p, op_cdf, cls_mass, uniform,
                sig, prop, prop_of, cls_members, cls_size, cls_of,
                n_regs, pool, move):
    """Fill ``move`` from uniforms ``u`` (length N_UNIFORMS, u[6] unused here)."""
    L = code.shape[0]
    if uniform:
        kind = _pick(u[0], N_KINDS)
    else:
        kind = _categorical(kind_cdf, u[0])
    for i in range(6):
        move[i] = -1
    move[0] = kind
    move[5] = 0
    n_pool = pool.shape[0]

    if kind == K_OPCODE or kind == K_OPERAND or kind == K_DELETE:
        n = _count_slots(code, sig, SLOTS_LIVE)
        if n == 0:
            return
        slot = _nth_slot(code, sig, SLOTS_LIVE, _pick(u[1], n))
        move[1] = slot
        op = code[slot, 0]
        if kind == K_OPCODE:
            j = _sample_same_sig(u[3], prop_of[op], op_p, cls_members, cls_size,
                                 cls_of, cls_mass, uniform)
            if j < 0:
                return
            move[2] = prop[j]
        elif kind == K_OPERAND:
            operand = _pick(u[2], 2)
            nv = _n_values(sig[op], operand, n_regs, n_pool)
            v = _pick(u[4], nv)
            if operand == 1 and sig[op] == SIG_RI:
                v = pool[v]
            move[2] = operand
            move[3] = v
    elif kind == K_FULL or kind == K_INSERT:
        if kind == K_FULL:
            slot = _pick(u[1], L)
        else:
            n = _count_slots(code, sig, SLOTS_UNUSED)
            if n == 0:
                return
            slot = _nth_slot(code, sig, SLOTS_UNUSED, _pick(u[1], n))
        op = prop[_sample_full_opcode(u[3], op_cdf, uniform)]
        a = _pick(u[4], n_regs)
        if sig[op] == SIG_RI:
            b = pool[_pick(u[5], n_pool)]
        else:
            b = _pick(u[5], n_regs)
        move[1] = slot
        move[2] = op
        move[3] = a
        move[4] = b
    elif kind == K_SWAP_ANY or kind == K_ROTATE:
        move[1] = _pick(u[1], L)
        move[2] = _pick(u[2], L)
    elif kind == K_SWAP_LOCAL:
        if L < 2:
            return
        move[1] = _pick(u[1], L - 1)
    elif kind == K_OP_SWAP:
        n = _count_slots(code, sig, SLOTS_LIVE_RR)
        if n == 0:
            return
        move[1] = _nth_slot(code, sig, SLOTS_LIVE_RR, _pick(u[1], n))
    move[5] = 1


@njit
def move_logprob(code, move, kind_p, op_p, cls_mass, uniform,
                 sig, prop_of, cls_size, cls_of, n_regs, pool):
    """log q(move | code) plus the gradient slots of the opcode choice.

    Returns ``(logprob, opcode_index, subset, excluded)`` where
    ``opcode_index`` is the proposable index of the sampled opcode (-1 when no
    opcode was drawn), ``subset`` is SUBSET_NONE, SUBSET_FULL or the class id
    of a same-signature draw, and ``excluded`` the proposable index removed
    from that class (-1 otherwise).
    """
    L = code.shape[0]
    kind = move[0]
    n_pool = pool.shape[0]
    if uniform:
        lp = -math.log(N_KINDS)
    else:
        lp = math.log(kind_p[kind])
    op_idx = -1
    subset = SUBSET_NONE
    excluded = -1

    if kind == K_OPCODE or kind == K_OPERAND or kind == K_DELETE:
        n = _count_slots(code, sig, SLOTS_LIVE)
        if n == 0:
            return lp, op_idx, subset, excluded
        lp -= math.log(n)
        if move[5] == 0:
            return lp, op_idx, subset, excluded
        slot = move[1]
        op = code[slot, 0]
        if kind == K_OPCODE:
            cur = prop_of[op]
            j = prop_of[move[2]]
            c = cls_of[cur]
            if uniform:
                lp -= math.log(cls_size[c] - 1)
            else:
                lp += math.log(op_p[j] / (cls_mass[c] - op_p[cur]))
            op_idx = j
            subset = c
            excluded = cur
        elif kind == K_OPERAND:
            lp -= math.log(2.0)
            lp -= math.log(_n_values(sig[op], move[2], n_regs, n_pool))
    elif kind == K_FULL or kind == K_INSERT:
        if kind == K_FULL:
            lp -= math.log(L)
        else:
            n = _count_slots(code, sig, SLOTS_UNUSED)
            if n == 0:
                return lp, op_idx, subset, excluded
            lp -= math.log(n)
        op = move[2]
        j = prop_of[op]
        if uniform:
            lp -= math.log(op_p.shape[0])
        else:
            lp += math.log(op_p[j])
        lp -= math.log(n_regs)
        if sig[op] == SIG_RI:
            lp -= math.log(n_pool)
        else:
            lp -= math.log(n_regs)
        op_idx = j
        subset = SUBSET_FULL
    elif kind == K_SWAP_ANY or kind == K_ROTATE:
        lp -= 2.0 * math.log(L)
    elif kind == K_SWAP_LOCAL:
        if L >= 2:
            lp -= math.log(L - 1)
    elif kind == K_OP_SWAP:
        n = _count_slots(code, sig, SLOTS_LIVE_RR)
        if n > 0:
            lp -= math.log(n)
    return lp, op_idx, subset, excluded


@njit
def _swap_rows(out, i, j):
    for c in range(3):
        tmp = out[i, c]
        out[i, c] = out[j, c]
        out[j, c] = tmp


@njit
def apply_move(code, move, out):
    """Write the transformed program into ``out`` (``code`` is not modified)."""
    for k in range(code.shape[0]):
        for c in range(3):
            out[k, c] = code[k, c]
    kind = move[0]
    s = move[1]
    if kind == K_OPCODE:
        out[s, 0] = move[2]
    elif kind == K_OPERAND:
        out[s, 1 + move[2]] = move[3]
    elif kind == K_FULL or kind == K_INSERT:
        out[s, 0] = move[2]
        out[s, 1] = move[3]
        out[s, 2] = move[4]
    elif kind == K_SWAP_ANY:
        _swap_rows(out, s, move[2])
    elif kind == K_SWAP_LOCAL:
        _swap_rows(out, s, s + 1)
    elif kind == K_ROTATE:
        i = s
        j = move[2]
        if i < j:
            for k in range(j, i, -1):
                _swap_rows(out, k, k - 1)
        elif i > j:
            for k in range(j, i):
                _swap_rows(out, k, k + 1)
    elif kind == K_DELETE:
        out[s, 0] = 0
        out[s, 1] = 0
        out[s, 2] = 0
    elif kind == K_OP_SWAP:
        out[s, 1] = code[s, 2]
        out[s, 2] = code[s, 1]


@njit
def sample_moves(code, uniforms, kind_p, kind_cdf, op_p, op_cdf, cls_mass, uniform,
                 sig, prop, prop_of, cls_members, cls_size, cls_of, n_regs, pool):
    """Draw ``len(uniforms)`` independent moves from the same program."""
    n = uniforms.shape[0]
    moves = np.empty((n, 6), dtype=np.int64)
    logps = np.empty(n, dtype=np.float64)
    move = np.empty(6, dtype=np.int64)
    for i in range(n):
        sample_move(code, uniforms[i], kind_cdf, op_p, op_cdf, cls_mass, uniform,
                    sig, prop, prop_of, cls_members, cls_size, cls_of, n_regs, pool, move)
        lp, _, _, _ = move_logprob(code, move, kind_p, op_p, cls_mass, uniform,
                                   sig, prop_of, cls_size, cls_of, n_regs, pool)
        moves[i] = move
        logps[i] = lp
    return moves, logps


# --------------------------------------------------------------------------
# Metropolis
# --------------------------------------------------------------------------

@njit
def accept_probability(cost_new, cost_old, beta):
    d = cost_new - cost_old
    if d <= 0.0:
        return 1.0
    return math.exp(-beta * d)


@njit
def run_chains(code0, uniforms, kind_p, kind_cdf, op_p, op_cdf, cls_mass, uniform,
               sig, sem, lat, prop, prop_of, cls_members, cls_size, cls_of, n_regs, pool,
               inputs, expected, mask, strict, omega_e, omega_p, beta, require_correct,
               out_moves, out_logp, out_opidx, out_subset, out_excl,
               out_pcost, out_acc, out_node, out_best_run, out_best_code, out_best_cost):
    """Run ``uniforms.shape[0]`` independent chains of ``uniforms.shape[1]`` steps.

    Cost nodes use the post-decision state; inapplicable moves count as
    rejected proposals.  Returns the initial cost.
    """
    n_chains, budget = uniforms.shape[0], uniforms.shape[1]
    L = code0.shape[0]
    eq0 = eq_cost_kernel(code0, sig, sem, inputs, expected, mask, strict)
    c0 = omega_e * eq0 + omega_p * perf_kernel(code0, lat)
    cur = np.empty((L, 3), dtype=np.int64)
    cand = np.empty((L, 3), dtype=np.int64)
    move = np.empty(6, dtype=np.int64)
    for k in range(n_chains):
        for i in range(L):
            for c in range(3):
                cur[i, c] = code0[i, c]
                out_best_code[k, i, c] = code0[i, c]
        cur_cost = c0
        run_best = c0
        if require_correct and eq0 != 0:
            best_cost = np.inf
        else:
            best_cost = c0
        for t in range(budget):
            u = uniforms[k, t]
            sample_move(cur, u, kind_cdf, op_p, op_cdf, cls_mass, uniform,
                        sig, prop, prop_of, cls_members, cls_size, cls_of, n_regs, pool, move)
            lp, oi, sub, ex = move_logprob(cur, move, kind_p, op_p, cls_mass, uniform,
                                           sig, prop_of, cls_size, cls_of, n_regs, pool)
            for i in range(6):
                out_moves[k, t, i] = move[i]
            out_logp[k, t] = lp
            out_opidx[k, t] = oi
            out_subset[k, t] = sub
            out_excl[k, t] = ex
            accepted = False
            if move[5] == 1:
                apply_move(cur, move, cand)
                eqc = eq_cost_kernel(cand, sig, sem, inputs, expected, mask, strict)
                cost = omega_e * eqc + omega_p * perf_kernel(cand, lat)
                out_pcost[k, t] = cost
                if u[6] < accept_probability(cost, cur_cost, beta):
                    accepted = True
                    tmp = cur
                    cur = cand
                    cand = tmp
                    cur_cost = cost
                    if cost < best_cost and (eqc == 0 or not require_correct):
                        best_cost = cost
                        for i in range(L):
                            for c in range(3):
                                out_best_code[k, i, c] = cur[i, c]
            else:
                out_pcost[k, t] = np.nan
            out_acc[k, t] = accepted
            node = (cur_cost - run_best) / c0
            out_node[k, t] = node if node < 0.0 else 0.0
            if cur_cost < run_best:
                run_best = cur_cost
            out_best_run[k, t] = run_best
        if best_cost == np.inf:
            best_cost = c0
        out_best_cost[k] = best_cost
    return c0


@njit
def random_walk(code0, uniforms, kind_cdf, op_p, op_cdf, cls_mass, uniform,
                sig, prop, prop_of, cls_members, cls_size, cls_of, n_regs, pool,
                keep_live):
    """Constant-cost walk.  Every applicable move has acceptance 1; with
    ``keep_live`` moves changing the live length are treated as inapplicable.
    Returns the final program and the number of accepted moves."""
    L = code0.shape[0]
    cur = code0.copy()
    cand = np.empty((L, 3), dtype=np.int64)
    move = np.empty(6, dtype=np.int64)
    live = _count_slots(cur, sig, SLOTS_LIVE)
    n_acc = 0
    for t in range(uniforms.shape[0]):
        u = uniforms[t]
        sample_move(cur, u, kind_cdf, op_p, op_cdf, cls_mass, uniform,
                    sig, prop, prop_of, cls_members, cls_size, cls_of, n_regs, pool, move)
        if move[5] == 0:
            continue
        apply_move(cur, move, cand)
        new_live = _count_slots(cand, sig, SLOTS_LIVE)
        if keep_live and new_live != live:
            continue
        if u[6] < accept_probability(0.0, 0.0, 1.0):
            tmp = cur
            cur = cand
            cand = tmp
            live = new_live
            n_acc += 1
    return cur, n_acc


@njit
def harvest_chain(code0, uniforms, kind_cdf, op_p, op_cdf, cls_mass, uniform,
                  sig, sem, lat, prop, prop_of, cls_members, cls_size, cls_of, n_regs, pool,
                  inputs, expected, mask, strict, omega_e, omega_p, beta, out_codes):
    """Metropolis chain that records every accepted state with zero eq cost.

    Returns the number of rows written to ``out_codes``.
    """
    L = code0.shape[0]
    cur = code0.copy()
    cand = np.empty((L, 3), dtype=np.int64)
    move = np.empty(6, dtype=np.int64)
    eq0 = eq_cost_kernel(cur, sig, sem, inputs, expected, mask, strict)
    cur_cost = omega_e * eq0 + omega_p * perf_kernel(cur, lat)
    n_out = 0
    for t in range(uniforms.shape[0]):
        u = uniforms[t]
        sample_move(cur, u, kind_cdf, op_p, op_cdf, cls_mass, uniform,
                    sig, prop, prop_of, cls_members, cls_size, cls_of, n_regs, pool, move)
        if move[5] == 0:
            continue
        apply_move(cur, move, cand)
        eqc = eq_cost_kernel(cand, sig, sem, inputs, expected, mask, strict)
        cost = omega_e * eqc + omega_p * perf_kernel(cand, lat)
        if u[6] < accept_probability(cost, cur_cost, beta):
            tmp = cur
            cur = cand
            cand = tmp
            cur_cost = cost
            if eqc == 0:
                for i in range(L):
                    for c in range(3):
                        out_codes[n_out, i, c] = cur[i, c]
                n_out += 1
    return n_out
