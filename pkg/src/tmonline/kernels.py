"""Hot loops: per-datapoint feedback and batched class sums.

Every kernel has a numba implementation (``*_nb``) and a vectorized numpy
implementation (``*_np``). The public names ``train_sequence`` and
``class_sums`` are bound to one of them according to ``_jit.USE_NUMBA``.

Random draw layout for one bank update (``C`` active clauses, ``L`` literals),
starting at counter ``c``:

* ``c+1 .. c+C``           clause selection, one per clause
* ``c+C+1 .. c+C+C*L``     per-TA Type I draws, row-major (clause, literal)

A train step draws the target bank block, then (if another class is active)
one draw choosing the negative class, then the negative bank block. Draws are
reserved whether or not they are used, so the two backends stay in lockstep.
"""
import numpy as np

from ._jit import NUMBA_INSTALLED, USE_NUMBA, optional_njit
from .rng import uniform_at, uniforms_np


def draws_per_bank(n_clauses: int, n_literals: int) -> int:
    return n_clauses * (1 + n_literals)


# ---------------------------------------------------------------- numpy path


def effective_actions(states, and_mask, or_mask, half_states):
    """Include bits as seen downstream of the fault forcing logic."""
    return ((states >= half_states) & (and_mask != 0)) | (or_mask != 0)


def _bank_update_np(states, and_mask, or_mask, cls, is_target, x, n_clauses,
                    half_states, T, p_str, p_weak, seed, counter):
    C = n_clauses
    L = x.shape[0]
    bank = states[cls, :C]
    act = effective_actions(bank, and_mask[cls, :C], or_mask[cls, :C], half_states)
    xb = x.astype(bool)
    fire = ~np.any(act & ~xb, axis=1)
    v = int(fire[0::2].sum()) - int(fire[1::2].sum())
    vc = min(max(v, -T), T)
    p = (T - vc) / (2.0 * T) if is_target else (T + vc) / (2.0 * T)

    u = uniforms_np(seed, counter, C + C * L)
    selected = u[:C] < p
    positive = (np.arange(C) % 2) == 0
    type1 = selected & (positive == is_target)
    type2 = selected & (positive != is_target)
    if type1.any() or type2.any():
        ut = u[C:].reshape(C, L)
        fire_col = fire[:, None]
        strengthen = fire_col & xb
        inc1 = strengthen & (ut < p_str)
        dec1 = ~strengthen & (ut < p_weak)
        inc2 = fire_col & ~xb & ~act
        delta = np.where(type1[:, None], inc1.astype(np.int32) - dec1, 0)
        delta += np.where(type2[:, None], inc2, 0).astype(np.int32)
        states[cls, :C] = np.clip(bank + delta, 0, 2 * half_states - 1)
    return counter + C + C * L


def train_sequence_np(states, and_mask, or_mask, active_classes, n_clauses,
                      half_states, T, p_str, p_weak, lits, labels, seed, counter):
    """Apply one train step per row of ``lits``, in order. Returns the new counter."""
    seed = int(seed)
    counter = int(counter)
    active_classes = np.asarray(active_classes)
    na = active_classes.shape[0]
    for i in range(lits.shape[0]):
        x = lits[i]
        y = int(labels[i])
        counter = _bank_update_np(states, and_mask, or_mask, y, True, x, n_clauses,
                                  half_states, T, p_str, p_weak, seed, counter)
        if na > 1:
            u = uniforms_np(seed, counter, 1)[0]
            counter += 1
            others = active_classes[active_classes != y]
            neg = int(others[int(u * (na - 1))])
            counter = _bank_update_np(states, and_mask, or_mask, neg, False, x,
                                      n_clauses, half_states, T, p_str, p_weak,
                                      seed, counter)
    return counter


def class_sums_np(states, and_mask, or_mask, active_classes, n_clauses,
                  half_states, lits):
    """Inference-mode class sums, shape (n, num_classes_max); inactive columns are 0."""
    K, _, L = states.shape
    C = n_clauses
    n = lits.shape[0]
    sums = np.zeros((n, K), dtype=np.int64)
    if len(active_classes) == 0:
        return sums
    idx = np.asarray(active_classes)
    act = effective_actions(states[idx, :C], and_mask[idx, :C], or_mask[idx, :C],
                            half_states)
    flat = act.reshape(-1, L).astype(np.int32)
    violated = flat @ (1 - lits.astype(np.int32)).T
    fire = (violated == 0) & flat.any(axis=1)[:, None]
    sign = np.where(np.arange(C) % 2 == 0, 1, -1)
    fire = fire.reshape(len(idx), C, n)
    sums[:, idx] = np.einsum("kcn,c->nk", fire.astype(np.int64), sign)
    return sums


# ---------------------------------------------------------------- numba path


@optional_njit(cache=True)
def _bank_update_nb(states, and_mask, or_mask, cls, is_target, x, n_clauses,
                    half_states, T, p_str, p_weak, seed, counter):
    C = n_clauses
    L = x.shape[0]
    top = 2 * half_states - 1
    fire = np.empty(C, dtype=np.uint8)
    v = 0
    for j in range(C):
        out = 1
        for k in range(L):
            a = (states[cls, j, k] >= half_states and and_mask[cls, j, k] != 0) \
                or or_mask[cls, j, k] != 0
            if a and x[k] == 0:
                out = 0
                break
        fire[j] = out
        if j % 2 == 0:
            v += out
        else:
            v -= out
    if v > T:
        v = T
    elif v < -T:
        v = -T
    if is_target:
        p = (T - v) / (2.0 * T)
    else:
        p = (T + v) / (2.0 * T)

    for j in range(C):
        if not uniform_at(seed, counter + 1 + j) < p:
            continue
        positive = j % 2 == 0
        base = counter + C + j * L
        if positive == is_target:
            for k in range(L):
                u = uniform_at(seed, base + 1 + k)
                st = states[cls, j, k]
                if fire[j] == 1 and x[k] == 1:
                    if u < p_str and st < top:
                        states[cls, j, k] = st + 1
                elif u < p_weak and st > 0:
                    states[cls, j, k] = st - 1
        elif fire[j] == 1:
            for k in range(L):
                if x[k] == 0:
                    st = states[cls, j, k]
                    a = (st >= half_states and and_mask[cls, j, k] != 0) \
                        or or_mask[cls, j, k] != 0
                    if not a and st < top:
                        states[cls, j, k] = st + 1
    return counter + C + C * L


@optional_njit(cache=True)
def train_sequence_nb(states, and_mask, or_mask, active_classes, n_clauses,
                      half_states, T, p_str, p_weak, lits, labels, seed, counter):
    na = active_classes.shape[0]
    for i in range(lits.shape[0]):
        x = lits[i]
        y = labels[i]
        counter = _bank_update_nb(states, and_mask, or_mask, y, True, x, n_clauses,
                                  half_states, T, p_str, p_weak, seed, counter)
        if na > 1:
            counter += 1
            pick = int(uniform_at(seed, counter) * (na - 1))
            seen = 0
            neg = -1
            for c in active_classes:
                if c == y:
                    continue
                if seen == pick:
                    neg = c
                    break
                seen += 1
            counter = _bank_update_nb(states, and_mask, or_mask, neg, False, x,
                                      n_clauses, half_states, T, p_str, p_weak,
                                      seed, counter)
    return counter


@optional_njit(cache=True)
def class_sums_nb(states, and_mask, or_mask, active_classes, n_clauses,
                  half_states, lits):
    K = states.shape[0]
    L = states.shape[2]
    C = n_clauses
    n = lits.shape[0]
    sums = np.zeros((n, K), dtype=np.int64)
    act = np.zeros((K, C, L), dtype=np.uint8)
    nonempty = np.zeros((K, C), dtype=np.uint8)
    for c in active_classes:
        for j in range(C):
            for k in range(L):
                if (states[c, j, k] >= half_states and and_mask[c, j, k] != 0) \
                        or or_mask[c, j, k] != 0:
                    act[c, j, k] = 1
                    nonempty[c, j] = 1
    for i in range(n):
        for c in active_classes:
            v = 0
            for j in range(C):
                if nonempty[c, j] == 0:
                    continue
                out = 1
                for k in range(L):
                    if act[c, j, k] == 1 and lits[i, k] == 0:
                        out = 0
                        break
                if j % 2 == 0:
                    v += out
                else:
                    v -= out
            sums[i, c] = v
    return sums


# ---------------------------------------------------------------- dispatch


def _prep_nb(states, and_mask, or_mask, active_classes, lits):
    return (states, and_mask, or_mask,
            np.ascontiguousarray(active_classes, dtype=np.int64),
            np.ascontiguousarray(lits, dtype=np.uint8))


def train_sequence(states, and_mask, or_mask, active_classes, n_clauses,
                   half_states, T, p_str, p_weak, lits, labels, seed, counter,
                   backend=None):
    """Dispatching wrapper; ``backend`` is ``"numba"``, ``"numpy"`` or None (env default)."""
    if _use_numba(backend):
        states, and_mask, or_mask, active, lits = _prep_nb(
            states, and_mask, or_mask, active_classes, lits)
        return int(train_sequence_nb(
            states, and_mask, or_mask, active, int(n_clauses), int(half_states),
            int(T), float(p_str), float(p_weak), lits,
            np.ascontiguousarray(labels, dtype=np.int64), np.uint64(seed),
            int(counter)))
    return train_sequence_np(states, and_mask, or_mask, active_classes, n_clauses,
                             half_states, T, p_str, p_weak, lits, labels, seed,
                             counter)


def class_sums(states, and_mask, or_mask, active_classes, n_clauses, half_states,
               lits, backend=None):
    if _use_numba(backend):
        states, and_mask, or_mask, active, lits = _prep_nb(
            states, and_mask, or_mask, active_classes, lits)
        return class_sums_nb(states, and_mask, or_mask, active, int(n_clauses),
                             int(half_states), lits)
    return class_sums_np(states, and_mask, or_mask, active_classes, n_clauses,
                         half_states, lits)


def _use_numba(backend):
    if backend is None:
        return USE_NUMBA
    if backend == "numba":
        if not NUMBA_INSTALLED:
            raise RuntimeError("numba backend requested but numba is not installed")
        return True
    if backend == "numpy":
        return False
    raise ValueError(f"unknown backend {backend!r}")
