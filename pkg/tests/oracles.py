"""Slow, obviously-correct reference implementations used by the tests."""

from math import prod


def negacyclic_schoolbook(a, b, q):
    """c = a * b mod (X^N + 1, q) by the O(N^2) definition."""
    n = len(a)
    c = [0] * n
    for i in range(n):
        for j in range(n):
            k = i + j
            if k < n:
                c[k] += a[i] * b[j]
            else:
                c[k - n] -= a[i] * b[j]
    return [x % q for x in c]


def crt(residues, moduli):
    """Integer in [0, Q) with the given residues."""
    Q = prod(moduli)
    x = 0
    for r, q in zip(residues, moduli):
        m = Q // q
        x += int(r) * m * pow(m, -1, q)
    return x % Q


def centered(x, Q):
    x %= Q
    return x - Q if x > Q // 2 else x


def automorph_reference(coeffs, g):
    n = len(coeffs)
    out = [0] * n
    for i, c in enumerate(coeffs):
        k = i * g % (2 * n)
        if k < n:
            out[k] += c
        else:
            out[k - n] -= c
    return out
