"""Compiled projection kernel.

Same backward dual pass as the pure solver, specialized to unit quadratic
pieces so every block equation is one exact piecewise-linear solve.  The
counter vector mirrors the pure path's dict; slot order is fixed:

    0 iterations, 1 inner_solves, 2 case1, 3 case2, 4 notfound_branch,
    5 comparisons, 6 merge_target_violations, 7 primal_ceiling_violations,
    8 rstar_fallbacks

Slots 6 and 7 are flags for conditions the pure path raises on; the caller
turns them back into exceptions.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _charge(counters, kinks, width):
    # sort + piece search + assembly scan, same formula as the pure path
    if kinks > 1:
        counters[5] += kinks * int(math.ceil(math.log2(kinks)))
    else:
        counters[5] += kinks
    counters[5] += max(1, int(math.ceil(math.log2(kinks + 1)))) + width


@njit(cache=True)
def _block_value(z2, caps, a, b, shift):
    # sum over [a, b) of H_i(-shift) with H_i(x) = clip(z_i + x/2, 0, beta_i)
    total = 0.0
    for i in range(a, b):
        t = z2[i] - shift
        if t > caps[i]:
            t = caps[i]
        if t < 0.0:
            t = 0.0
        total += t
    return 0.5 * total


@njit(cache=True)
def _extended_ok(z2, caps, A, lam_w, w, w_prev, r, L, degenerate_tol):
    # block (w_prev, w_r] balance test at the shift excluding positions <= r
    shift = 0.0
    for t in range(L - 1, r - 1, -1):
        shift += lam_w[t]
    stop = w[r - 1]
    val = _block_value(z2, caps, w_prev, stop, shift) - (A[stop] - A[w_prev])
    return val >= -degenerate_tol


@njit(cache=True)
def _solve_block(z2, caps, a, b, shift, target2, counters):
    """Smallest xi >= 0 with sum_{[a,b)} H_i(-shift - xi) = target2 / 2.

    Works in doubled units: each term is max(0, min(caps_i, z2_i - shift -
    xi)), linear with slope -1 on (t_i - caps_i, t_i) and flat elsewhere.
    Collect the positive kinks, sweep left to right, solve the bracketing
    piece in closed form.
    """
    width = b - a
    ev = np.empty(2 * width, np.float64)
    dl = np.empty(2 * width, np.float64)
    m = 0
    val0 = 0.0
    slope0 = 0.0
    for i in range(a, b):
        t = z2[i] - shift
        cap = caps[i]
        enter = t - cap
        term = t
        if term > cap:
            term = cap
        if term < 0.0:
            term = 0.0
        val0 += term
        if np.isfinite(enter) and enter > 0.0:
            ev[m] = enter
            dl[m] = -1.0
            m += 1
        if t > 0.0:
            ev[m] = t
            dl[m] = 1.0
            m += 1
        if t > 0.0 and enter <= 0.0:
            slope0 -= 1.0
    _charge(counters, m, width)
    f0 = val0 - target2
    if f0 <= 0.0:
        return 0.0
    order = np.argsort(ev[:m])
    prev_x = 0.0
    cur_val = f0
    cur_slope = slope0
    for k in range(m):
        x = ev[order[k]]
        val_at_x = cur_val + cur_slope * (x - prev_x)
        if val_at_x <= 0.0:
            return prev_x + cur_val / (-cur_slope)
        prev_x = x
        cur_val = val_at_x
        cur_slope += dl[order[k]]
    if cur_slope < 0.0:
        return prev_x + cur_val / (-cur_slope)
    raise ValueError("block equation has no sign change")


@njit(cache=True)
def project_kernel(z, alpha, beta, eq_tol, degenerate_tol):
    n = z.shape[0]
    counters = np.zeros(9, np.int64)
    ubar = np.empty(n)
    A = np.empty(n + 1)
    A[0] = 0.0
    for i in range(n):
        u = z[i]
        if u < 0.0:
            u = 0.0
        if u > beta[i]:
            u = beta[i]
        ubar[i] = u
        A[i + 1] = A[i] + alpha[i]

    # breakpoints: first nonnegative prefix gap, then running maxima with
    # ties included; the two cumulative sums accumulate separately so the
    # comparisons agree with the pure path bit for bit
    w = np.empty(n, np.int64)
    L = 0
    cy = 0.0
    ca = 0.0
    best = 0.0
    for k in range(n):
        cy += ubar[k]
        ca += alpha[k]
        dk = cy - ca
        if L == 0:
            if dk >= 0.0:
                w[L] = k + 1
                L += 1
                best = dk
        elif dk >= best:
            w[L] = k + 1
            L += 1
            best = dk
    counters[0] = L
    lam = np.zeros(n)
    if L == 0:
        return ubar, lam, counters

    z2 = 2.0 * z
    caps = 2.0 * beta
    lam_w = np.zeros(L)
    cands = np.empty(L, np.int64)
    for j in range(L, 0, -1):
        w_prev = 0
        if j >= 2:
            w_prev = w[j - 2]
        w_cur = w[j - 1]
        shift = 0.0
        for t in range(L - 1, j - 1, -1):
            shift += lam_w[t]
        val = _block_value(z2, caps, w_prev, w_cur, shift) - (A[w_cur] - A[w_prev])
        if val >= -degenerate_tol:
            counters[2] += 1
            xi = _solve_block(
                z2, caps, w_prev, w_cur, shift,
                2.0 * (A[w_cur] - A[w_prev]), counters,
            )
            counters[1] += 1
            lam_w[j - 1] = xi
        else:
            counters[3] += 1
            # merge targets: only positions with a positive multiplier; a
            # zeroed position is interior to a jointly solved block and the
            # loop invariants keep its extended sum negative, while along
            # positive positions the predicate is monotone in r
            m = 0
            for rr in range(j + 1, L + 1):
                if lam_w[rr - 1] > 0.0:
                    cands[m] = rr
                    m += 1
            r = -1
            if m > 0 and _extended_ok(
                z2, caps, A, lam_w, w, w_prev, cands[m - 1], L, degenerate_tol
            ):
                lo = 0
                hi = m - 1
                while lo < hi:
                    mid = (lo + hi) // 2
                    if _extended_ok(
                        z2, caps, A, lam_w, w, w_prev, cands[mid], L, degenerate_tol
                    ):
                        hi = mid
                    else:
                        lo = mid + 1
                if lo == 0 or not _extended_ok(
                    z2, caps, A, lam_w, w, w_prev, cands[lo - 1], L, degenerate_tol
                ):
                    r = cands[lo]
                else:
                    counters[8] += 1
                    for k in range(m):
                        if _extended_ok(
                            z2, caps, A, lam_w, w, w_prev, cands[k], L, degenerate_tol
                        ):
                            r = cands[k]
                            break
            if r == -1:
                # mirror the pure path: a rounding-scale deficit with no
                # viable merge target is a tie that roots at zero, a
                # larger one is a genuine failure
                if val >= -1e-10 * (1.0 + A[w_cur] + A[w_prev]):
                    lam_w[j - 1] = 0.0
                else:
                    counters[4] += 1
                    for t in range(j - 1, L):
                        lam_w[t] = 0.0
            else:
                if not lam_w[r - 1] > 0.0:
                    counters[6] = 1
                    break
                shift_r = 0.0
                for t in range(L - 1, r - 1, -1):
                    shift_r += lam_w[t]
                stop = w[r - 1]
                xi = _solve_block(
                    z2, caps, w_prev, stop, shift_r,
                    2.0 * (A[stop] - A[w_prev]), counters,
                )
                counters[1] += 1
                for t in range(j - 1, r - 1):
                    lam_w[t] = 0.0
                lam_w[r - 1] = xi

    for t in range(L):
        lam[w[t] - 1] = lam_w[t]
    y = np.empty(n)
    acc = 0.0
    for i in range(n - 1, -1, -1):
        acc += lam[i]
        v = z[i] - acc / 2.0
        if v < 0.0:
            v = 0.0
        if v > beta[i]:
            v = beta[i]
        y[i] = v
        if v > ubar[i] + 1e-10 * (1.0 + abs(ubar[i])):
            counters[7] = 1
    return y, lam, counters
