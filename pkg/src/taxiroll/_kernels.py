"""Compiled inner loops for rollout lookahead simulation.

Everything here operates on dense int arrays (node ids mapped to 0..n-1) and
mirrors the reference semantics of :func:`taxiroll.fleet.step` and the
heuristic policies exactly; the test suite asserts bit-identical decisions
between this path and the pure-Python one.  With TAXIROLL_NO_JIT set the same
code runs interpreted.
"""
from __future__ import annotations

import numpy as np

from ._jit import njit

BASE_GREEDY = 0
BASE_IARA = 1


@njit
def _padded_benefit(cost2, na, nr, i, j, g, big, scale):
    """Benefit of padded cell (i, j): negated scaled cost, 0 for dummies."""
    if i < na and j < nr:
        c = cost2[i, j]
        if c < 0:
            c = big
        elif g > 1:
            c //= g
        return -c * scale
    return np.int64(0)


@njit
def auction_core(cost2, na, nr, prices, owner, task_of, queue):
    """Forward auction on the padded square problem.

    ``cost2[0:na, 0:nr]`` holds non-negative costs with -1 for infeasible
    pairs.  Writes ``task_of[i]`` = padded column owned by row i; callers
    post-filter dummy columns and infeasible pairs.  Costs are gcd-normalized
    first so uniformly scaled inputs choose the identical pairing, then
    multiplied by (n+1) so the unit bid increment plays the role of an
    epsilon below 1/n, which makes integer-cost results exactly optimal.
    """
    n = na if na > nr else nr
    g = 0
    max_c = 0
    for i in range(na):
        for j in range(nr):
            c = cost2[i, j]
            if c >= 0:
                a = g
                b = c
                while b != 0:
                    a, b = b, a % b
                g = a
                if c > max_c:
                    max_c = c
    if g > 1:
        max_c //= g
    big = (max_c + 1) * (n + 1)  # worse than any all-feasible matching
    scale = n + 1

    for j in range(n):
        prices[j] = 0
        owner[j] = -1
    for i in range(n):
        task_of[i] = -1
        queue[i] = i
    cap = queue.shape[0]
    head = 0
    tail = n % cap
    qlen = n

    while qlen > 0:
        i = queue[head]
        head = (head + 1) % cap
        qlen -= 1

        best_j = 0
        best_v = _padded_benefit(cost2, na, nr, i, 0, g, big, scale) - prices[0]
        second_v = np.int64(-(2**62))
        for j in range(1, n):
            v = _padded_benefit(cost2, na, nr, i, j, g, big, scale) - prices[j]
            if v > best_v:
                second_v = best_v
                best_v = v
                best_j = j
            elif v > second_v:
                second_v = v
        if n == 1:
            second_v = best_v

        prices[best_j] += best_v - second_v + 1
        old = owner[best_j]
        if old >= 0:
            task_of[old] = -1
            queue[tail] = old
            tail = (tail + 1) % cap
            qlen += 1
        owner[best_j] = i
        task_of[i] = best_j


@njit
def greedy_into(pos, rem, dest, opick, n_out, dist, nxt, apos, aflag):
    """Greedy decisions for every agent; occupied agents get forced hops.

    The outstanding arrays are (entry_time, req_id) ordered, so taking the
    first strict minimum reproduces the earliest-entry/lowest-id tie-break.
    """
    m = pos.shape[0]
    for l in range(m):
        if rem[l] > 0:
            apos[l] = nxt[pos[l], dest[l]]
            aflag[l] = 0
            continue
        target = -1
        best = 0
        for r in range(n_out):
            d = dist[pos[l], opick[r]]
            if d < 0:
                continue
            if target < 0 or d < best:
                target = r
                best = d
        if target < 0:
            apos[l] = pos[l]
            aflag[l] = 0
        elif best == 0:
            apos[l] = pos[l]
            aflag[l] = 1
        else:
            tp = opick[target]
            nx = nxt[pos[l], tp]
            apos[l] = nx
            aflag[l] = 1 if nx == tp else 0


@njit
def iara_into(
    pos, rem, dest, opick, n_out, dist, nxt, apos, aflag,
    avail_idx, cost2, prices, owner, task_of, queue,
):
    """Instantaneous-reassignment decisions (auction over available agents)."""
    m = pos.shape[0]
    na = 0
    for l in range(m):
        if rem[l] > 0:
            apos[l] = nxt[pos[l], dest[l]]
            aflag[l] = 0
        else:
            apos[l] = pos[l]
            aflag[l] = 0
            avail_idx[na] = l
            na += 1
    if na == 0 or n_out == 0:
        return
    for r in range(na):
        l = avail_idx[r]
        for q in range(n_out):
            cost2[r, q] = dist[pos[l], opick[q]]
    auction_core(cost2, na, n_out, prices, owner, task_of, queue)
    for r in range(na):
        l = avail_idx[r]
        j = task_of[r]
        if 0 <= j < n_out and cost2[r, j] >= 0:
            tp = opick[j]
            if pos[l] == tp:
                aflag[l] = 1
            else:
                nx = nxt[pos[l], tp]
                apos[l] = nx
                aflag[l] = 1 if nx == tp else 0


@njit
def lookahead_total(
    dist, nxt,
    pos0, rem0, dest0,
    opick0, odrop0, n_out0,
    fpos, fflag,
    fut_entry, fut_pick, fut_drop, fut_len,
    t_h, base_id, cost_scale,
):
    """Sum over all futures of the truncated trajectory cost after applying
    the composed first joint action and then the base policy for t_h-1 steps.

    Returns the exact integer total (stage costs of the t_h successor states
    per future, scaled by cost_scale); callers divide by the sample count.
    """
    S = fut_len.shape[0]
    m = pos0.shape[0]
    cap = n_out0 + fut_entry.shape[1] + 1
    nmax = m if m > cap else cap

    pos = np.empty(m, np.int32)
    rem = np.empty(m, np.int32)
    dest = np.empty(m, np.int32)
    occ0 = np.empty(m, np.int32)
    apos = np.empty(m, np.int32)
    aflag = np.empty(m, np.int32)
    opick = np.empty(cap, np.int32)
    odrop = np.empty(cap, np.int32)
    avail_idx = np.empty(m, np.int64)
    cost2 = np.empty((m, cap), np.int64)
    prices = np.empty(nmax, np.int64)
    owner = np.empty(nmax, np.int64)
    task_of = np.empty(nmax, np.int64)
    queue = np.empty(2 * nmax, np.int64)

    total = 0
    for s in range(S):
        for l in range(m):
            pos[l] = pos0[l]
            rem[l] = rem0[l]
            dest[l] = dest0[l]
        n_out = n_out0
        for r in range(n_out0):
            opick[r] = opick0[r]
            odrop[r] = odrop0[r]
        fp = 0
        for j in range(1, t_h + 1):
            if j == 1:
                for l in range(m):
                    apos[l] = fpos[l]
                    aflag[l] = fflag[l]
            elif base_id == BASE_GREEDY:
                greedy_into(pos, rem, dest, opick, n_out, dist, nxt, apos, aflag)
            else:
                iara_into(
                    pos, rem, dest, opick, n_out, dist, nxt, apos, aflag,
                    avail_idx, cost2, prices, owner, task_of, queue,
                )

            # transition, mirroring fleet.step phase by phase
            for l in range(m):
                occ0[l] = 1 if rem[l] > 0 else 0
            for l in range(m):
                if occ0[l] == 0:
                    pos[l] = apos[l]
            for l in range(m):
                if occ0[l] == 0 and aflag[l] == 1:
                    for r in range(n_out):
                        if opick[r] == pos[l]:
                            rem[l] = dist[pos[l], odrop[r]]
                            dest[l] = odrop[r]
                            for q in range(r, n_out - 1):
                                opick[q] = opick[q + 1]
                                odrop[q] = odrop[q + 1]
                            n_out -= 1
                            break
            for l in range(m):
                if occ0[l] == 1:
                    pos[l] = nxt[pos[l], dest[l]]
                    rem[l] -= 1
                    if rem[l] == 0:
                        dest[l] = -1
            while fp < fut_len[s] and fut_entry[s, fp] == j:
                opick[n_out] = fut_pick[s, fp]
                odrop[n_out] = fut_drop[s, fp]
                n_out += 1
                fp += 1
            total += n_out
    return total * cost_scale
