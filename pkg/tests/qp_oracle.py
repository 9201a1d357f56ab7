"""Independent QP reference for the SVR dual: accelerated projected gradient."""

import numpy as np


def project(v, a, c):
    """Euclidean projection of ``v`` onto ``{0 <= z <= c, a'z = 0}`` with ``a`` in {+1, -1}.

    ``g(lam) = a' clip(v - lam * a, 0, c)`` is piecewise linear and nonincreasing;
    evaluate it at every breakpoint and interpolate the root.
    """
    knots = np.unique(np.concatenate([a * v, a * (v - c)]))
    z = np.clip(v[None, :] - knots[:, None] * a[None, :], 0.0, c)
    g = z @ a
    if g[0] <= 0:
        lam = knots[0]
    elif g[-1] >= 0:
        lam = knots[-1]
    else:
        k = int(np.flatnonzero(g <= 0)[0])
        l0, l1, g0, g1 = knots[k - 1], knots[k], g[k - 1], g[k]
        lam = l0 + (l1 - l0) * g0 / (g0 - g1)
    return np.clip(v - lam * a, 0.0, c)


def solve(K, y, c, eps, iters=20000, tol=1e-13):
    """Minimize ``0.5 x'Qx + q'x`` over the stacked dual; momentum restarts when it stops helping."""
    n = len(y)
    a = np.r_[np.ones(n), -np.ones(n)]
    Q = np.block([[K, -K], [-K, K]])
    q = np.r_[eps - y, eps + y]
    step = 1.0 / np.linalg.eigvalsh(Q)[-1]
    x = np.zeros(2 * n)
    z, t = x.copy(), 1.0
    for _ in range(iters):
        nxt = project(z - step * (Q @ z + q), a, c)
        if (z - nxt) @ (nxt - x) > 0:
            t = 1.0
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = nxt + ((t - 1) / t_next) * (nxt - x)
        done = np.max(np.abs(nxt - x)) < tol
        x, t = nxt, t_next
        if done:
            break
    return x, float(0.5 * x @ Q @ x + q @ x)
