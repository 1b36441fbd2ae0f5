"""Hot loops: exact search, 2-opt, greedy successor assignment, cycle patching.

Every kernel exists twice: ``*_nb`` is compiled with numba, ``*_np`` is the
pure-numpy twin. Both walk candidates in the same order, break ties the same
way (first strict improvement wins, i.e. lowest index) and accumulate floating
point sums in the same order, so they return identical tours. The public
names at the bottom dispatch on :data:`tspnn._accel.USE_NUMBA`.

Tours are ``int64`` arrays of node indices; successor arrays ``succ`` map each
node to the next node of its cycle.
"""
from itertools import islice, permutations

import numpy as np

from ._accel import USE_NUMBA, njit

IMPROVE_EPS = 1e-10


# -- Held-Karp ----------------------------------------------------------------
# dp[S, j]: shortest path leaving node 0, visiting exactly the nodes of S
# (bit b <-> node b + 1) and ending at node j + 1.

@njit
def held_karp_nb(dist):
    n = dist.shape[0]
    m = n - 1
    full = (1 << m) - 1
    dp = np.full((1 << m, m), np.inf)
    parent = np.full((1 << m, m), -1, dtype=np.int8)
    for b in range(m):
        dp[1 << b, b] = dist[0, b + 1]
    for S in range(1, full + 1):
        for k in range(m):
            if not (S >> k) & 1:
                continue
            prev = S ^ (1 << k)
            if prev == 0:
                continue
            best = np.inf
            arg = -1
            for j in range(m):
                if (prev >> j) & 1:
                    c = dp[prev, j] + dist[j + 1, k + 1]
                    if c < best:
                        best = c
                        arg = j
            dp[S, k] = best
            parent[S, k] = arg
    best = np.inf
    last = -1
    for j in range(m):
        c = dp[full, j] + dist[j + 1, 0]
        if c < best:
            best = c
            last = j
    order = np.empty(n, dtype=np.int64)
    order[0] = 0
    S = full
    j = last
    for pos in range(n - 1, 0, -1):
        order[pos] = j + 1
        pj = parent[S, j]
        S ^= 1 << j
        j = pj
    return best, order


def held_karp_np(dist):
    n = dist.shape[0]
    m = n - 1
    full = (1 << m) - 1
    dp = np.full((1 << m, m), np.inf)
    parent = np.full((1 << m, m), -1, dtype=np.int8)
    bits = np.arange(m)
    dp[1 << bits, bits] = dist[0, bits + 1]
    masks = np.arange(1 << m)
    popcount = ((masks[:, None] >> bits) & 1).sum(axis=1)
    inner = dist[1:, 1:]
    for size in range(2, m + 1):
        layer = masks[popcount == size]
        for k in range(m):
            S = layer[(layer >> k) & 1 == 1]
            if len(S) == 0:
                continue
            cand = dp[S ^ (1 << k)] + inner[:, k]
            arg = np.argmin(cand, axis=1)
            dp[S, k] = cand[np.arange(len(S)), arg]
            parent[S, k] = arg
    closing = dp[full] + dist[1:, 0]
    last = int(np.argmin(closing))
    order = np.empty(n, dtype=np.int64)
    order[0] = 0
    S, j = full, last
    for pos in range(n - 1, 0, -1):
        order[pos] = j + 1
        pj = int(parent[S, j])
        S ^= 1 << j
        j = pj
    return float(closing[last]), order


# -- brute force --------------------------------------------------------------
# Enumerates permutations of 1..n-1 in lexicographic order, keeping only
# those with perm[0] < perm[-1] (one representative per direction).

@njit
def brute_force_nb(dist):
    n = dist.shape[0]
    m = n - 1
    perm = np.arange(1, n)
    best = np.inf
    best_order = np.zeros(n, dtype=np.int64)
    while True:
        if perm[0] < perm[m - 1]:
            acc = dist[0, perm[0]]
            for c in range(m - 1):
                acc += dist[perm[c], perm[c + 1]]
            acc += dist[perm[m - 1], 0]
            if acc < best:
                best = acc
                best_order[1:] = perm
        # next lexicographic permutation
        i = m - 2
        while i >= 0 and perm[i] >= perm[i + 1]:
            i -= 1
        if i < 0:
            break
        j = m - 1
        while perm[j] <= perm[i]:
            j -= 1
        perm[i], perm[j] = perm[j], perm[i]
        lo = i + 1
        hi = m - 1
        while lo < hi:
            perm[lo], perm[hi] = perm[hi], perm[lo]
            lo += 1
            hi -= 1
    return best, best_order


def brute_force_np(dist, chunk=200_000):
    n = dist.shape[0]
    best = np.inf
    best_order = np.zeros(n, dtype=np.int64)
    it = permutations(range(1, n))
    while True:
        block = np.array(list(islice(it, chunk)), dtype=np.int64)
        if len(block) == 0:
            break
        block = block[block[:, 0] < block[:, -1]]
        if len(block) == 0:
            continue
        acc = dist[0, block[:, 0]]
        for c in range(n - 2):
            acc = acc + dist[block[:, c], block[:, c + 1]]
        acc = acc + dist[block[:, -1], 0]
        k = int(np.argmin(acc))
        if acc[k] < best:
            best = float(acc[k])
            best_order[1:] = block[k]
    return best, best_order


# -- 2-opt ----------------------------------------------------------------------
# For each i, find the first j > i + 1 whose exchange shortens the tour,
# apply it and rescan the same i; sweep until a full pass finds nothing.

@njit
def two_opt_nb(tour, dist):
    t = tour.copy()
    n = t.shape[0]
    improved = True
    while improved:
        improved = False
        i = 0
        while i < n - 2:
            a = t[i]
            b = t[i + 1]
            found = -1
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                c = t[j]
                d = t[(j + 1) % n]
                delta = dist[a, c] + dist[b, d] - dist[a, b] - dist[c, d]
                if delta < -IMPROVE_EPS:
                    found = j
                    break
            if found >= 0:
                lo = i + 1
                hi = found
                while lo < hi:
                    t[lo], t[hi] = t[hi], t[lo]
                    lo += 1
                    hi -= 1
                improved = True
            else:
                i += 1
    return t


def two_opt_np(tour, dist):
    t = np.array(tour, dtype=np.int64)
    n = len(t)
    improved = True
    while improved:
        improved = False
        i = 0
        while i < n - 2:
            a, b = t[i], t[i + 1]
            js = np.arange(i + 2, n - 1 if i == 0 else n)
            if len(js):
                c = t[js]
                d = t[(js + 1) % n]
                delta = dist[a, c] + dist[b, d] - dist[a, b] - dist[c, d]
                hits = np.flatnonzero(delta < -IMPROVE_EPS)
            else:
                hits = js
            if len(hits):
                j = js[hits[0]]
                t[i + 1:j + 1] = t[i + 1:j + 1][::-1].copy()
                improved = True
            else:
                i += 1
    return t


# -- greedy successor assignment ------------------------------------------------
# Ordered pairs are visited by descending score; flat index order makes ties
# resolve lexicographically in (i, j). A node left without both successor and
# predecessor is closed on itself as a 1-cycle.

@njit
def greedy_assignment_nb(R):
    n = R.shape[0]
    flat = np.empty(n * n)
    for i in range(n):
        for j in range(n):
            flat[i * n + j] = -R[i, j]
    idx = np.argsort(flat, kind="mergesort")
    succ = np.full(n, -1, dtype=np.int64)
    has_pred = np.zeros(n, dtype=np.bool_)
    accepted = 0
    for q in idx:
        i = q // n
        j = q % n
        if i == j or succ[i] >= 0 or has_pred[j]:
            continue
        succ[i] = j
        has_pred[j] = True
        accepted += 1
        if accepted == n:
            break
    for i in range(n):
        if succ[i] < 0:
            succ[i] = i
    return succ


def greedy_assignment_np(R):
    n = R.shape[0]
    idx = np.argsort(-R.ravel(), kind="stable")
    succ = np.full(n, -1, dtype=np.int64)
    has_pred = np.zeros(n, dtype=bool)
    accepted = 0
    for q in idx:
        i, j = divmod(int(q), n)
        if i == j or succ[i] >= 0 or has_pred[j]:
            continue
        succ[i] = j
        has_pred[j] = True
        accepted += 1
        if accepted == n:
            break
    succ[succ < 0] = np.flatnonzero(succ < 0)
    return succ


# -- cycle-cover patching ---------------------------------------------------------

@njit
def cycle_labels_nb(succ):
    n = succ.shape[0]
    label = np.full(n, -1, dtype=np.int64)
    k = 0
    for s in range(n):
        if label[s] >= 0:
            continue
        v = s
        while label[v] < 0:
            label[v] = k
            v = succ[v]
        k += 1
    return label, k


def cycle_labels_np(succ):
    n = len(succ)
    label = np.full(n, -1, dtype=np.int64)
    k = 0
    for s in range(n):
        if label[s] >= 0:
            continue
        v = s
        while label[v] < 0:
            label[v] = k
            v = succ[v]
        k += 1
    return label, k


@njit
def patch_subtours_nb(succ, dist):
    s = succ.copy()
    n = s.shape[0]
    label, k = cycle_labels_nb(s)
    while k > 1:
        best = np.inf
        ba = -1
        bb = -1
        bopt = -1
        for a in range(n):
            a2 = s[a]
            for b in range(n):
                if label[a] == label[b]:
                    continue
                b2 = s[b]
                base = dist[a, a2] + dist[b, b2]
                d1 = dist[a, b2] + dist[b, a2] - base
                if d1 < best:
                    best = d1
                    ba = a
                    bb = b
                    bopt = 0
                d2 = dist[a, b] + dist[b2, a2] - base
                if d2 < best:
                    best = d2
                    ba = a
                    bb = b
                    bopt = 1
        _merge_nb(s, ba, bb, bopt)
        label, k = cycle_labels_nb(s)
    return s


@njit
def _merge_nb(s, a, b, opt):
    a2 = s[a]
    b2 = s[b]
    if opt == 0:
        s[a] = b2
        s[b] = a2
        return
    # walk b2 -> ... -> b, then relink it backwards between a and a2
    seq = [b2]
    v = s[b2]
    while seq[-1] != b:
        seq.append(v)
        v = s[v]
    s[a] = b
    for q in range(len(seq) - 1, 0, -1):
        s[seq[q]] = seq[q - 1]
    s[b2] = a2


def patch_subtours_np(succ, dist):
    s = np.array(succ, dtype=np.int64)
    n = len(s)
    label, k = cycle_labels_np(s)
    rows = np.arange(n)
    while k > 1:
        out = dist[rows, s]
        base = out[:, None] + out[None, :]
        # entry [a, b] of each candidate matrix scores relinking edges a->s[a], b->s[b]
        d1 = dist[:, s] + dist[rows[None, :], s[:, None]] - base
        d2 = dist + dist[s[None, :], s[:, None]] - base
        cand = np.stack([d1, d2], axis=-1)
        cand[label[:, None] == label[None, :]] = np.inf
        a, b, opt = np.unravel_index(int(np.argmin(cand)), cand.shape)
        _merge_np(s, int(a), int(b), int(opt))
        label, k = cycle_labels_np(s)
    return s


def _merge_np(s, a, b, opt):
    a2, b2 = s[a], s[b]
    if opt == 0:
        s[a], s[b] = b2, a2
        return
    seq = [b2]
    while seq[-1] != b:
        seq.append(s[seq[-1]])
    s[a] = b
    for q in range(len(seq) - 1, 0, -1):
        s[seq[q]] = seq[q - 1]
    s[b2] = a2


@njit
def succ_to_order_nb(succ):
    n = succ.shape[0]
    order = np.empty(n, dtype=np.int64)
    v = 0
    for p in range(n):
        order[p] = v
        v = succ[v]
    return order


def succ_to_order_np(succ):
    order = np.empty(len(succ), dtype=np.int64)
    v = 0
    for p in range(len(succ)):
        order[p] = v
        v = succ[v]
    return order


@njit
def decode_batch_nb(R, dist):
    """Greedy-assign and patch every ``R[m]``; returns orders and lengths."""
    M = R.shape[0]
    n = R.shape[1]
    orders = np.empty((M, n), dtype=np.int64)
    lengths = np.empty(M)
    for m in range(M):
        succ = patch_subtours_nb(greedy_assignment_nb(R[m]), dist)
        orders[m] = succ_to_order_nb(succ)
        acc = 0.0
        for p in range(n):
            acc += dist[orders[m, p], orders[m, (p + 1) % n]]
        lengths[m] = acc
    return orders, lengths


def decode_batch_np(R, dist):
    M, n = R.shape[0], R.shape[1]
    orders = np.empty((M, n), dtype=np.int64)
    lengths = np.empty(M)
    for m in range(M):
        succ = patch_subtours_np(greedy_assignment_np(R[m]), dist)
        orders[m] = succ_to_order_np(succ)
        acc = 0.0
        for p in range(n):
            acc += dist[orders[m, p], orders[m, (p + 1) % n]]
        lengths[m] = acc
    return orders, lengths


NUMBA_KERNELS = {
    "held_karp": held_karp_nb,
    "brute_force": brute_force_nb,
    "two_opt": two_opt_nb,
    "greedy_assignment": greedy_assignment_nb,
    "patch_subtours": patch_subtours_nb,
    "cycle_labels": cycle_labels_nb,
    "succ_to_order": succ_to_order_nb,
    "decode_batch": decode_batch_nb,
}
NUMPY_KERNELS = {
    "held_karp": held_karp_np,
    "brute_force": brute_force_np,
    "two_opt": two_opt_np,
    "greedy_assignment": greedy_assignment_np,
    "patch_subtours": patch_subtours_np,
    "cycle_labels": cycle_labels_np,
    "succ_to_order": succ_to_order_np,
    "decode_batch": decode_batch_np,
}

_active = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS

held_karp = _active["held_karp"]
brute_force = _active["brute_force"]
two_opt = _active["two_opt"]
greedy_assignment = _active["greedy_assignment"]
patch_subtours = _active["patch_subtours"]
cycle_labels = _active["cycle_labels"]
succ_to_order = _active["succ_to_order"]
decode_batch = _active["decode_batch"]
