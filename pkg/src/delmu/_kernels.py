"""Hot loops shared by the solvers.

Everything here works on flattened flow vectors (flow ``f = i * J + j``) and
the per-node constraint matrix ``G`` (rows are node/direction pairs, entries
are ``1 / capacity``). Functions are compiled with numba unless
``DELMU_DISABLE_NUMBA`` is set, in which case they run as ordinary Python.
"""
import math

import numpy as np

from ._accel import njit

LINEAR = 0
SIGMOID = 1
POLYNOMIAL = 2
LOGARITHMIC = 3


@njit
def _sigmoid(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


@njit
def utility_k(kind, alpha, beta, r):
    if kind == LINEAR:
        return alpha * r + beta
    if kind == SIGMOID:
        return _sigmoid(alpha * (r - beta))
    if kind == POLYNOMIAL:
        return alpha * r ** beta
    arg = alpha * r + beta
    if arg <= 0.0:
        return -np.inf
    return math.log(arg)


@njit
def utility_d1(kind, alpha, beta, r):
    if kind == LINEAR:
        return alpha
    if kind == SIGMOID:
        s = _sigmoid(alpha * (r - beta))
        return alpha * s * (1.0 - s)
    if kind == POLYNOMIAL:
        return alpha * beta * r ** (beta - 1.0)
    return alpha / (alpha * r + beta)


@njit
def utility_d2(kind, alpha, beta, r):
    if kind == LINEAR:
        return 0.0
    if kind == SIGMOID:
        s = _sigmoid(alpha * (r - beta))
        return alpha * alpha * s * (1.0 - s) * (1.0 - 2.0 * s)
    if kind == POLYNOMIAL:
        return alpha * beta * (beta - 1.0) * r ** (beta - 2.0)
    a = alpha * r + beta
    return -alpha * alpha / (a * a)


@njit
def total_utility_k(r, kind, alpha, beta):
    total = 0.0
    for f in range(r.shape[0]):
        total += utility_k(kind[f], alpha[f], beta[f], r[f])
    return total


@njit
def greedy_fill(r, hi, usage, G, kind, alpha, beta, step, tol, gains_out):
    """Raise flows one step at a time, always taking the largest utility gain.

    ``r`` and ``usage`` are updated in place. Returns the number of committed
    steps; the gain of each is written to ``gains_out``.
    """
    F = r.shape[0]
    R = usage.shape[0]
    u = np.empty(F)
    for f in range(F):
        u[f] = utility_k(kind[f], alpha[f], beta[f], r[f])
    limit = 1.0 + tol
    n = 0
    while n < gains_out.shape[0]:
        best = -1
        best_gain = -np.inf
        best_inc = 0.0
        best_u = 0.0
        for f in range(F):
            inc = hi[f] - r[f]
            if inc > step:
                inc = step
            if inc <= 0.0:
                continue
            ok = True
            for k in range(R):
                g = G[k, f]
                if g != 0.0 and usage[k] + inc * g > limit:
                    ok = False
                    break
            if not ok:
                continue
            un = utility_k(kind[f], alpha[f], beta[f], r[f] + inc)
            gain = un - u[f]
            if gain > best_gain:
                best = f
                best_gain = gain
                best_inc = inc
                best_u = un
        if best < 0 or best_gain < 0.0:
            break
        if best_inc == hi[best] - r[best]:
            r[best] = hi[best]
        else:
            r[best] += best_inc
        u[best] = best_u
        for k in range(R):
            usage[k] += best_inc * G[k, best]
        gains_out[n] = best_gain
        n += 1
    return n


@njit
def shed_overload(r, lo, usage, G, kind, alpha, beta, step, tol, max_iter):
    """Cut flows on the most loaded node until every time fraction fits.

    Returns the number of cuts, or -1 when an overloaded node has no flow
    left above its minimum rate.
    """
    F = r.shape[0]
    R = usage.shape[0]
    limit = 1.0 + tol
    n = 0
    if R == 0:
        return 0
    while n < max_iter:
        worst = 0
        for k in range(1, R):
            if usage[k] > usage[worst]:
                worst = k
        if usage[worst] <= limit:
            return n
        best = -1
        best_loss = np.inf
        best_dec = 0.0
        for f in range(F):
            if G[worst, f] == 0.0:
                continue
            dec = r[f] - lo[f]
            if dec > step:
                dec = step
            if dec <= 0.0:
                continue
            loss = utility_k(kind[f], alpha[f], beta[f], r[f]) - utility_k(
                kind[f], alpha[f], beta[f], r[f] - dec
            )
            if loss < best_loss:
                best = f
                best_loss = loss
                best_dec = dec
        if best < 0:
            return -1
        if best_dec == r[best] - lo[best]:
            r[best] = lo[best]
        else:
            r[best] -= best_dec
        for k in range(R):
            usage[k] -= best_dec * G[k, best]
        n += 1
    return n


@njit
def brute_force_k(grid, counts, G, kind, alpha, beta, tol):
    """Depth-first enumeration of a per-flow grid with capacity pruning.

    ``grid[f, :counts[f]]`` holds the candidate rates of flow ``f`` in
    increasing order. Returns ``(best_index, best_value)``; ``best_index``
    is all ``-1`` when no grid point is feasible. The first maximiser in
    lexicographic order wins ties.
    """
    F = counts.shape[0]
    R = G.shape[0]
    limit = 1.0 + tol
    ug = np.empty(grid.shape)
    for f in range(F):
        for q in range(counts[f]):
            ug[f, q] = utility_k(kind[f], alpha[f], beta[f], grid[f, q])
    P = np.zeros((F + 1, R))
    for f in range(F):
        for k in range(R):
            P[0, k] += G[k, f] * grid[f, 0]
    V = np.zeros(F + 1)
    idx = np.zeros(F, dtype=np.int64)
    best_idx = -np.ones(F, dtype=np.int64)
    best_val = -np.inf
    f = 0
    while f >= 0:
        if idx[f] >= counts[f]:
            f -= 1
            if f >= 0:
                idx[f] += 1
            continue
        x = grid[f, idx[f]] - grid[f, 0]
        ok = True
        for k in range(R):
            P[f + 1, k] = P[f, k] + G[k, f] * x
            if P[f + 1, k] > limit:
                ok = False
        if not ok:
            # later grid values only add load
            idx[f] = counts[f]
            continue
        V[f + 1] = V[f] + ug[f, idx[f]]
        if f == F - 1:
            if V[F] > best_val:
                best_val = V[F]
                for q in range(F):
                    best_idx[q] = idx[q]
            idx[f] += 1
        else:
            f += 1
            idx[f] = 0
    return best_idx, best_val


@njit
def barrier_value(r, lo, hi, free, G, rows, kind, alpha, beta, mu):
    """Utility plus ``mu`` times the log-barrier of all strict constraints."""
    val = total_utility_k(r, kind, alpha, beta)
    bar = 0.0
    for f in range(r.shape[0]):
        if free[f]:
            a = r[f] - lo[f]
            b = hi[f] - r[f]
            if a <= 0.0 or b <= 0.0:
                return -np.inf
            bar += math.log(a) + math.log(b)
    for k in range(G.shape[0]):
        if rows[k]:
            s = 1.0
            for f in range(r.shape[0]):
                s -= G[k, f] * r[f]
            if s <= 0.0:
                return -np.inf
            bar += math.log(s)
    return val + mu * bar


@njit
def barrier_grad(r, lo, hi, free, G, rows, kind, alpha, beta, mu):
    F = r.shape[0]
    g = np.zeros(F)
    for f in range(F):
        if free[f]:
            g[f] = utility_d1(kind[f], alpha[f], beta[f], r[f])
            g[f] += mu * (1.0 / (r[f] - lo[f]) - 1.0 / (hi[f] - r[f]))
    for k in range(G.shape[0]):
        if rows[k]:
            s = 1.0
            for f in range(F):
                s -= G[k, f] * r[f]
            for f in range(F):
                if free[f]:
                    g[f] -= mu * G[k, f] / s
    return g


@njit
def _ascent_metric(r, lo, hi, free, G, rows, kind, alpha, beta, mu):
    """Positive-definite curvature model: barrier Hessian plus the concave
    part of the utility Hessian (convex sigmoid curvature is dropped)."""
    F = r.shape[0]
    M = np.zeros((F, F))
    for f in range(F):
        if free[f]:
            a = r[f] - lo[f]
            b = hi[f] - r[f]
            h = utility_d2(kind[f], alpha[f], beta[f], r[f])
            M[f, f] = mu * (1.0 / (a * a) + 1.0 / (b * b))
            if h < 0.0:
                M[f, f] -= h
        else:
            M[f, f] = 1.0
    for k in range(G.shape[0]):
        if rows[k]:
            s = 1.0
            for f in range(F):
                s -= G[k, f] * r[f]
            w = mu / (s * s)
            for f in range(F):
                if free[f] and G[k, f] != 0.0:
                    for q in range(F):
                        if free[q] and G[k, q] != 0.0:
                            M[f, q] += w * G[k, f] * G[k, q]
    return M


@njit
def _max_step(r, p, lo, hi, free, G, rows):
    t = np.inf
    F = r.shape[0]
    for f in range(F):
        if free[f]:
            if p[f] < 0.0:
                t = min(t, (r[f] - lo[f]) / -p[f])
            elif p[f] > 0.0:
                t = min(t, (hi[f] - r[f]) / p[f])
    for k in range(G.shape[0]):
        if rows[k]:
            s = 1.0
            ds = 0.0
            for f in range(F):
                s -= G[k, f] * r[f]
                ds += G[k, f] * p[f]
            if ds > 0.0:
                t = min(t, s / ds)
    return t


@njit
def barrier_ascent(r0, lo, hi, free, G, rows, kind, alpha, beta, mus, tol,
                   max_iter, armijo, shrink):
    """Barrier continuation over the weights ``mus``.

    Each stage climbs the barrier objective with metric-scaled gradient steps
    and Armijo backtracking; iterates stay strictly feasible. Returns the
    final point and the total number of accepted steps.
    """
    r = r0.copy()
    F = r.shape[0]
    steps = 0
    for stage in range(mus.shape[0]):
        mu = mus[stage]
        fval = barrier_value(r, lo, hi, free, G, rows, kind, alpha, beta, mu)
        for it in range(max_iter):
            g = barrier_grad(r, lo, hi, free, G, rows, kind, alpha, beta, mu)
            M = _ascent_metric(r, lo, hi, free, G, rows, kind, alpha, beta, mu)
            p = np.linalg.solve(M, g)
            for f in range(F):
                if not free[f]:
                    p[f] = 0.0
            slope = 0.0
            for f in range(F):
                slope += g[f] * p[f]
            if slope <= 0.0 or 0.5 * slope < tol:
                break
            t = min(1.0, 0.99 * _max_step(r, p, lo, hi, free, G, rows))
            accepted = False
            rn = r
            fn = fval
            while t > 1e-14:
                rn = r + t * p
                fn = barrier_value(rn, lo, hi, free, G, rows, kind, alpha, beta, mu)
                if fn >= fval + armijo * t * slope:
                    accepted = True
                    break
                t *= shrink
            if not accepted:
                break
            r = rn
            fval = fn
            steps += 1
    return r, steps

