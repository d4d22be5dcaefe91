"""Exact closure oracle: trigonometric polynomials over GF(p).

``f = c_0 + sum_k c_k cos(kx) + s_k sin(kx)`` with coefficients mod a
prime; products use product-to-sum identities only, so a rank over GF(p)
equal to the member count certifies the rational rank.
"""

from __future__ import annotations

from itertools import combinations_with_replacement

import numpy as np

PRIME = 1_000_003
INV2 = (PRIME + 1) // 2


def trig_mul(a, b):
    (ac, as_), (bc, bs) = a, b
    n = len(ac) + len(bc) - 1
    oc, os_ = np.zeros(n, dtype=np.int64), np.zeros(n, dtype=np.int64)
    i, j = np.meshgrid(np.arange(len(ac)), np.arange(len(bc)), indexing="ij")
    plus, minus, sgn = (i + j).ravel(), np.abs(i - j).ravel(), np.sign(i - j).ravel()

    def half(x):
        return (x.ravel() % PRIME) * INV2 % PRIME

    cc = half(np.outer(ac, bc))
    np.add.at(oc, plus, cc)
    np.add.at(oc, minus, cc)
    ss = half(np.outer(as_, bs))
    np.add.at(oc, minus, ss)
    np.add.at(oc, plus, PRIME - ss)
    sc = half(np.outer(as_, bc))  # sin(i x) cos(j x)
    np.add.at(os_, plus, sc)
    np.add.at(os_, minus, (sgn * sc) % PRIME)
    cs = half(np.outer(ac, bs))  # cos(i x) sin(j x)
    np.add.at(os_, plus, cs)
    np.add.at(os_, minus, (-sgn * cs) % PRIME)
    return oc % PRIME, os_ % PRIME


def trig_truncate(a, M):
    """Coordinates of the truncation in the basis ordering (up to scaling)."""
    ac, as_ = a
    out = np.zeros(M, dtype=np.int64)
    for i in range(M):
        k = (i + 1) // 2
        src = ac if (i == 0 or i % 2 == 1) else as_
        out[i] = src[k] if k < len(src) else 0
    return out % PRIME


def trig_from_coords(v):
    K = (len(v)) // 2 + 1
    c, s = np.zeros(K, dtype=np.int64), np.zeros(K, dtype=np.int64)
    for i, x in enumerate(v):
        k = (i + 1) // 2
        (c if (i == 0 or i % 2 == 1) else s)[k] = x
    return c, s


def rank_mod_p(rows):
    A = np.array(rows, dtype=np.int64) % PRIME
    if A.size == 0:
        return 0
    r = 0
    for col in range(A.shape[1]):
        piv = next((i for i in range(r, A.shape[0]) if A[i, col]), None)
        if piv is None:
            continue
        A[[r, piv]] = A[[piv, r]]
        A[r] = A[r] * pow(int(A[r, col]), PRIME - 2, PRIME) % PRIME
        for i in range(A.shape[0]):
            if i != r and A[i, col]:
                A[i] = (A[i] - A[i, col] * A[r]) % PRIME
        r += 1
        if r == A.shape[0]:
            break
    return r


def trig_closure(gens, M, depth):
    members = [trig_truncate(g, M) for g in gens]
    fresh_from = 0
    for _ in range(depth - 1):
        n = len(members)
        for c in combinations_with_replacement(range(n), 3):
            if c[-1] < fresh_from:
                continue
            prod = trig_mul(trig_mul(trig_from_coords(members[c[0]]), trig_from_coords(members[c[1]])),
                            trig_from_coords(members[c[2]]))
            v = trig_truncate(prod, M)
            if rank_mod_p(members + [v]) > rank_mod_p(members):
                members.append(v)
        fresh_from = n
    return members


GEN_1 = (np.array([1]), np.array([0]))
GEN_COS = (np.array([0, 1]), np.array([0, 0]))
GEN_SIN = (np.array([0, 0]), np.array([0, 1]))
