#!/usr/bin/env python3
"""Refine the Verner 9(8) tableau to 40 significant digits.

The published binary64 coefficients satisfy the full rooted-tree order
conditions (order 9 for b, order 8 for bhat) to ~1e-15. This script
Gauss-Newton-polishes them in 60-digit arithmetic onto the order-condition
manifold, preserving the method's sparsity structure (exact zeros stay
zero), and rewrites data/verner98.txt with 40-digit entries. The result is
the same method to within 1e-15 in every coefficient, now internally
consistent far beyond binary64 so that row-sum validation can run at 1e-30
and extended-precision integrations are not limited by coefficient noise.

Usage: python3 scripts/refine_verner98.py [path/to/verner98.txt]
"""

import functools
import sys

from mpmath import mp, mpf, matrix, lu_solve, nstr

mp.dps = 60

DATA = sys.argv[1] if len(sys.argv) > 1 else "crates/renorm-nbody/data/verner98.txt"


def trees_up_to(nmax):
    """Canonical rooted trees by order; a tree is a sorted tuple of subtrees."""
    levels = {1: [()]}

    def order_of(t):
        return 1 + sum(order_of(c) for c in t)

    for n in range(2, nmax + 1):
        found = set()

        def extend(remaining, chosen):
            if remaining == 0:
                found.add(tuple(sorted(chosen)))
                return
            for k in range(1, remaining + 1):
                if k not in levels:
                    continue
                for t in levels[k]:
                    if chosen and (k, t) < (order_of(chosen[-1]), chosen[-1]):
                        continue
                    extend(remaining - k, chosen + [t])

        extend(n - 1, [])
        levels[n] = sorted(found)
    return levels


def order_of(t):
    return 1 + sum(order_of(c) for c in t)


def gamma(t):
    return order_of(t) * functools.reduce(lambda a, c: a * gamma(c), t, 1)


def load(path):
    lines = [l for l in open(path) if l.strip() and not l.startswith("#")]
    stages, p, phat = (int(x) for x in lines[0].split())
    c = []
    a = [[mpf(0)] * stages for _ in range(stages)]
    for i in range(stages):
        toks = lines[1 + i].split()
        c.append(mpf(toks[0]))
        for j, v in enumerate(toks[1:]):
            a[i][j] = mpf(v)
    b = [mpf(x) for x in lines[1 + stages].split()]
    bh = [mpf(x) for x in lines[2 + stages].split()]
    return stages, p, phat, c, a, b, bh


def residuals(S, c, a, b, bh, levels):
    psi_cache = {}

    def psi(t):
        if t in psi_cache:
            return psi_cache[t]
        if t == ():
            v = [mpf(1)] * S
        else:
            v = [mpf(1)] * S
            for child in t:
                pc = psi(child)
                ap = [sum(a[i][j] * pc[j] for j in range(i)) for i in range(S)]
                v = [v[i] * ap[i] for i in range(S)]
        psi_cache[t] = v
        return v

    res = []
    for n in range(1, 10):
        for t in levels[n]:
            ps = psi(t)
            res.append(sum(b[i] * ps[i] for i in range(S)) - mpf(1) / gamma(t))
    for n in range(1, 9):
        for t in levels[n]:
            ps = psi(t)
            res.append(sum(bh[i] * ps[i] for i in range(S)) - mpf(1) / gamma(t))
    for i in range(S):
        res.append(sum(a[i][j] for j in range(i)) - c[i])
    return res


def main():
    S, p, phat, c, a, b, bh = load(DATA)
    levels = trees_up_to(9)

    # Unknowns: nonzero strict-lower a entries, nonzero b/bh entries, c[1:].
    # Structural zeros are part of the method and stay exactly zero.
    slots = []
    for i in range(S):
        for j in range(i):
            if a[i][j] != 0:
                slots.append(("a", i, j))
    for i in range(S):
        if b[i] != 0:
            slots.append(("b", i))
    for i in range(S):
        if bh[i] != 0:
            slots.append(("bh", i))
    for i in range(1, S):
        slots.append(("c", i))

    def get(slot):
        kind = slot[0]
        if kind == "a":
            return a[slot[1]][slot[2]]
        if kind == "b":
            return b[slot[1]]
        if kind == "bh":
            return bh[slot[1]]
        return c[slot[1]]

    def set_(slot, v):
        kind = slot[0]
        if kind == "a":
            a[slot[1]][slot[2]] = v
        elif kind == "b":
            b[slot[1]] = v
        elif kind == "bh":
            bh[slot[1]] = v
        else:
            c[slot[1]] = v

    def max_abs(v):
        return max(abs(x) for x in v)

    for iteration in range(4):
        r0 = residuals(S, c, a, b, bh, levels)
        print(f"iteration {iteration}: max residual {nstr(max_abs(r0), 5)}")
        if max_abs(r0) < mpf("1e-45"):
            break
        m, n = len(r0), len(slots)
        jac = matrix(m, n)
        h = mpf("1e-25")
        for col, slot in enumerate(slots):
            old = get(slot)
            set_(slot, old + h)
            r1 = residuals(S, c, a, b, bh, levels)
            set_(slot, old)
            for row in range(m):
                jac[row, col] = (r1[row] - r0[row]) / h
        # Levenberg-damped normal equations pick the minimal-norm step onto
        # the (rank-deficient) solution manifold.
        jtj = matrix(n, n)
        jtr = matrix(n, 1)
        for i in range(n):
            for j in range(i, n):
                acc = mpf(0)
                for k in range(m):
                    acc += jac[k, i] * jac[k, j]
                jtj[i, j] = acc
                jtj[j, i] = acc
            accr = mpf(0)
            for k in range(m):
                accr += jac[k, i] * r0[k]
            jtr[i, 0] = accr
        damp = mpf("1e-30") * max(jtj[i, i] for i in range(n))
        for i in range(n):
            jtj[i, i] += damp
        delta = lu_solve(jtj, jtr)
        for i, slot in enumerate(slots):
            set_(slot, get(slot) - delta[i, 0])

    r = residuals(S, c, a, b, bh, levels)
    final = max_abs(r)
    print(f"final max residual {nstr(final, 5)}")
    assert final < mpf("1e-40"), "refinement did not converge"

    def fmt(x):
        if x == 0:
            return "0.0"
        return nstr(x, 40, strip_zeros=False)

    out = [
        "# Verner efficient 9(8) embedded pair, 16 stages.",
        "# Coefficients refined to 40 significant digits by Newton iteration",
        "# on the full rooted-tree order conditions (order 9 for b, order 8",
        "# for bhat, row-sum consistency), seeded from the published",
        "# binary64 values. See scripts/refine_verner98.py.",
        "# Format: 'stages p phat', then per stage i: c_i then a_i0..a_i,i-1,",
        "# then the order-9 weights b, then the order-8 weights bhat.",
        f"{S} {p} {phat}",
    ]
    for i in range(S):
        out.append(" ".join([fmt(c[i])] + [fmt(a[i][j]) for j in range(i)]))
    out.append(" ".join(fmt(x) for x in b))
    out.append(" ".join(fmt(x) for x in bh))
    with open(DATA, "w") as f:
        f.write("\n".join(out) + "\n")
    print(f"wrote {DATA}")


if __name__ == "__main__":
    main()
