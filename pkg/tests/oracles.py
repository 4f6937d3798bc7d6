"""Independent reference computations used by the tests.

Plain-Python scalar loops, deliberately sharing no code with the package.
"""
import itertools
import math

import numpy as np


def scalar_affinities(tags, beta, u_size=1.0, mode="relative_max"):
    """tags: list of (id, enh, inh). Returns (A+, A-) as nested lists."""
    n = len(tags)
    up = [[u_size - abs(tags[j][1] - tags[i][0]) for j in range(n)] for i in range(n)]
    um = [[u_size - abs(tags[j][2] - tags[i][0]) for j in range(n)] for i in range(n)]
    if mode == "paper_literal":
        ap = [[-beta * up[i][j] for j in range(n)] for i in range(n)]
        am = [[-beta * um[i][j] for j in range(n)] for i in range(n)]
    else:
        mp = max(max(r) for r in up)
        mm = max(max(r) for r in um)
        ap = [[beta * (up[i][j] - mp) for j in range(n)] for i in range(n)]
        am = [[beta * (um[i][j] - mm) for j in range(n)] for i in range(n)]
    return ap, am


def scalar_grn_step(tags, kinds, conc, beta, delta, u_size=1.0, mode="relative_max"):
    """One step: enhancing/inhibiting sums, clamped Euler update, renormalization."""
    n = len(tags)
    ap, am = scalar_affinities(tags, beta, u_size, mode)
    new = list(conc)
    for i in range(n):
        if kinds[i] == "input":
            continue
        g = 0.0
        h = 0.0
        for j in range(n):
            if kinds[j] == "output":
                continue
            g += conc[j] * math.exp(ap[i][j])
            h += conc[j] * math.exp(am[i][j])
        g /= n
        h /= n
        new[i] = max(0.0, conc[i] + delta * (g - h))
    total = sum(new[i] for i in range(n) if kinds[i] != "input")
    for i in range(n):
        if kinds[i] != "input":
            new[i] = new[i] / total
    return new


def central_differences(f, params, h=1e-5):
    """Gradient of scalar f() w.r.t. every entry of every array in ``params`` (mutated in place)."""
    out = []
    for p in params:
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gf = g.reshape(-1)
        for k in range(flat.size):
            old = flat[k]
            flat[k] = old + h
            fp = f()
            flat[k] = old - h
            fm = f()
            flat[k] = old
            gf[k] = (fp - fm) / (2 * h)
        out.append(g)
    return out


def max_relative_error(a, b, floor=1e-6):
    worst = 0.0
    for x, y in zip(a, b):
        err = np.abs(x - y) / np.maximum(np.maximum(np.abs(x), np.abs(y)), floor)
        if err.size:
            worst = max(worst, float(err.max()))
    return worst


def brute_force_regulator_cost(ra, rb, penalty=1.0):
    """Minimal total distance over every partial matching of two regulator tag lists."""
    def d(p, q):
        return sum(abs(x - y) for x, y in zip(p, q))
    small, large = (ra, rb) if len(ra) <= len(rb) else (rb, ra)
    best = math.inf
    for perm in itertools.permutations(range(len(large)), len(small)):
        cost = sum(d(small[i], large[j]) for i, j in enumerate(perm))
        best = min(best, cost)
    return best + penalty * (len(large) - len(small))
