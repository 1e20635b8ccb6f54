"""Negacyclic RNS polynomial arithmetic over Z_q[X]/(X^N + 1).

A polynomial is stored as a ``(k, N)`` int64 array of residues, one row per
prime of its basis.  Every prime satisfies ``q = 1 (mod 2N)`` so each row has
a negacyclic NTT.  Primes are limited to 50 bits: modular products are formed
with the floating-point quotient trick, which needs the quotient estimate to
be accurate to better than one unit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from sympy import isprime, primitive_root

MAX_PRIME_BITS = 50


@dataclass(frozen=True)
class NttPrime:
    value: int
    bit_size: int
    root: int  # primitive 2N-th root of unity


def _bit_reverse(n_bits: int) -> np.ndarray:
    idx = np.arange(1 << n_bits)
    rev = np.zeros_like(idx)
    for b in range(n_bits):
        rev |= ((idx >> b) & 1) << (n_bits - 1 - b)
    return rev


@lru_cache(maxsize=256)
def ntt_prime(q: int, N: int) -> NttPrime:
    """Wrap an NTT-friendly prime with its minimal primitive 2N-th root."""
    if N < 2 or N & (N - 1):
        raise ValueError(f"degree {N} is not a power of two")
    if (q - 1) % (2 * N) or not isprime(q):
        raise ValueError(f"{q} is not a prime congruent to 1 mod {2 * N}")
    g = primitive_root(q)
    root = pow(g, (q - 1) // (2 * N), q)
    # the smallest root among the odd powers keeps tables canonical
    root = min(pow(root, k, q) for k in range(1, 2 * N, 2))
    return NttPrime(q, q.bit_length(), root)


def find_primes(bit_sizes, N: int) -> tuple[NttPrime, ...]:
    """One distinct prime per requested bit size, largest first within a size."""
    taken: set[int] = set()
    out = []
    for bits in bit_sizes:
        if not 2 <= bits <= MAX_PRIME_BITS:
            raise ValueError(f"prime bit size {bits} outside [2, {MAX_PRIME_BITS}]")
        step = 2 * N
        q = ((1 << bits) - 1) // step * step + 1
        while q >= 1 << (bits - 1):
            if q not in taken and isprime(q):
                break
            q -= step
        else:
            raise ValueError(f"no {bits}-bit prime = 1 mod {step} left")
        taken.add(q)
        out.append(ntt_prime(q, N))
    return tuple(out)


def mulmod(a, b, q, qinv):
    """(a * b) mod q elementwise for 0 <= a, b < q < 2**50.

    ``q`` and ``qinv`` (float64 of 1/q) must broadcast against ``a``.
    """
    quo = np.rint(a.astype(np.float64) * b.astype(np.float64) * qinv).astype(np.int64)
    r = a * b - quo * q  # exact: the true remainder fits, int64 arithmetic wraps
    r += np.where(r < 0, q, 0)
    r -= np.where(r >= q, q, 0)
    return r


class _Tables:
    """Stacked NTT tables for one basis (tuple of primes) at degree N."""

    def __init__(self, N: int, moduli: tuple[int, ...]):
        self.N = N
        self.moduli = moduli
        k = len(moduli)
        logn = N.bit_length() - 1
        rev = _bit_reverse(logn)
        self.q = np.array(moduli, dtype=np.int64).reshape(k, 1)
        self.qinv = 1.0 / self.q.astype(np.float64)
        self.psi_rev = np.empty((k, N), dtype=np.int64)
        self.psi_inv_rev = np.empty((k, N), dtype=np.int64)
        self.n_inv = np.empty((k, 1), dtype=np.int64)
        for i, q in enumerate(moduli):
            psi = ntt_prime(q, N).root
            psi_inv = pow(psi, -1, q)
            pw = _powers(psi, N, q)
            pw_inv = _powers(psi_inv, N, q)
            self.psi_rev[i] = pw[rev]
            self.psi_inv_rev[i] = pw_inv[rev]
            self.n_inv[i, 0] = pow(N, -1, q)

    def forward(self, a: np.ndarray) -> np.ndarray:
        k, N = a.shape
        q3 = self.q.reshape(k, 1, 1)
        qi3 = self.qinv.reshape(k, 1, 1)
        t, m = N, 1
        while m < N:
            t //= 2
            blk = a.reshape(k, m, 2, t)
            u = blk[:, :, 0, :]
            v = mulmod(blk[:, :, 1, :], self.psi_rev[:, m:2 * m].reshape(k, m, 1), q3, qi3)
            hi = u + v
            hi -= np.where(hi >= q3, q3, 0)
            lo = u - v
            lo += np.where(lo < 0, q3, 0)
            a = np.stack([hi, lo], axis=2).reshape(k, N)
            m *= 2
        return a

    def inverse(self, a: np.ndarray) -> np.ndarray:
        k, N = a.shape
        q3 = self.q.reshape(k, 1, 1)
        qi3 = self.qinv.reshape(k, 1, 1)
        t, m = 1, N
        while m > 1:
            h = m // 2
            blk = a.reshape(k, h, 2, t)
            u = blk[:, :, 0, :]
            v = blk[:, :, 1, :]
            hi = u + v
            hi -= np.where(hi >= q3, q3, 0)
            lo = u - v
            lo += np.where(lo < 0, q3, 0)
            lo = mulmod(lo, self.psi_inv_rev[:, h:2 * h].reshape(k, h, 1), q3, qi3)
            a = np.stack([hi, lo], axis=2).reshape(k, N)
            t *= 2
            m = h
        return mulmod(a, self.n_inv, self.q, self.qinv)


def _powers(base: int, n: int, q: int) -> np.ndarray:
    out = np.empty(n, dtype=np.int64)
    x = 1
    for i in range(n):
        out[i] = x
        x = x * base % q
    return out


@lru_cache(maxsize=64)
def tables(N: int, moduli: tuple[int, ...]) -> _Tables:
    return _Tables(N, moduli)


@dataclass(frozen=True, eq=False)
class RnsPoly:
    """Residues of one polynomial over the basis ``moduli``.

    ``level`` counts the primes above the first, so a poly over the first
    ``l + 1`` primes of a chain sits at level ``l``.
    """

    residues: np.ndarray
    moduli: tuple[int, ...]
    ntt_form: bool = False

    def __post_init__(self):
        self.residues.setflags(write=False)

    @property
    def degree(self) -> int:
        return self.residues.shape[1]

    @property
    def level(self) -> int:
        return len(self.moduli) - 1

    @property
    def tables(self) -> _Tables:
        return tables(self.degree, self.moduli)

    def rows(self, idx) -> "RnsPoly":
        """Restrict to a subset of the basis (valid in either domain)."""
        idx = list(idx)
        return RnsPoly(self.residues[idx].copy(), tuple(self.moduli[i] for i in idx), self.ntt_form)

    def __eq__(self, other):
        if not isinstance(other, RnsPoly):
            return NotImplemented
        return (self.moduli == other.moduli and self.ntt_form == other.ntt_form
                and np.array_equal(self.residues, other.residues))

    def __add__(self, other):
        return poly_add(self, other)

    def __sub__(self, other):
        return poly_sub(self, other)

    def __neg__(self):
        return poly_neg(self)

    def __mul__(self, other):
        return poly_mul(self, other)


def _check_degree(N: int):
    if N < 2 or N & (N - 1):
        raise ValueError(f"degree {N} is not a power of two")


def from_ints(coeffs, moduli, ntt_form: bool = False) -> RnsPoly:
    """Reduce signed integer coefficients (int64 or Python ints) into a basis."""
    moduli = tuple(int(q) for q in moduli)
    coeffs = np.asarray(coeffs)
    _check_degree(coeffs.shape[-1])
    if coeffs.dtype == object:
        res = np.array([[int(c) % q for c in coeffs] for q in moduli], dtype=np.int64)
    else:
        res = np.stack([coeffs.astype(np.int64) % q for q in moduli])
    return RnsPoly(res, moduli, ntt_form)


def zeros(N: int, moduli, ntt_form: bool = False) -> RnsPoly:
    _check_degree(N)
    moduli = tuple(moduli)
    return RnsPoly(np.zeros((len(moduli), N), dtype=np.int64), moduli, ntt_form)


def ntt_forward(p: RnsPoly) -> RnsPoly:
    if p.ntt_form:
        raise ValueError("polynomial is already in NTT form")
    _check_degree(p.degree)
    return RnsPoly(p.tables.forward(p.residues), p.moduli, True)


def ntt_inverse(p: RnsPoly) -> RnsPoly:
    if not p.ntt_form:
        raise ValueError("polynomial is in coefficient form")
    _check_degree(p.degree)
    return RnsPoly(p.tables.inverse(p.residues), p.moduli, False)


def _match(a: RnsPoly, b: RnsPoly):
    if a.degree != b.degree:
        raise ValueError(f"degree mismatch: {a.degree} vs {b.degree}")
    if a.moduli != b.moduli:
        raise ValueError(f"basis mismatch: level {a.level} vs {b.level}")
    if a.ntt_form != b.ntt_form:
        raise ValueError("domain mismatch: one operand is in NTT form")


def poly_add(a: RnsPoly, b: RnsPoly) -> RnsPoly:
    _match(a, b)
    q = a.tables.q
    r = a.residues + b.residues
    r -= np.where(r >= q, q, 0)
    return RnsPoly(r, a.moduli, a.ntt_form)


def poly_sub(a: RnsPoly, b: RnsPoly) -> RnsPoly:
    _match(a, b)
    q = a.tables.q
    r = a.residues - b.residues
    r += np.where(r < 0, q, 0)
    return RnsPoly(r, a.moduli, a.ntt_form)


def poly_neg(a: RnsPoly) -> RnsPoly:
    q = a.tables.q
    r = np.where(a.residues == 0, 0, q - a.residues)
    return RnsPoly(r, a.moduli, a.ntt_form)


def poly_mul(a: RnsPoly, b: RnsPoly) -> RnsPoly:
    """Negacyclic product; NTT-form inputs are multiplied pointwise."""
    _match(a, b)
    if a.ntt_form:
        t = a.tables
        return RnsPoly(mulmod(a.residues, b.residues, t.q, t.qinv), a.moduli, True)
    return ntt_inverse(poly_mul(ntt_forward(a), ntt_forward(b)))


def mul_scalar(a: RnsPoly, c: int) -> RnsPoly:
    t = a.tables
    cs = np.array([c % q for q in a.moduli], dtype=np.int64).reshape(-1, 1)
    return RnsPoly(mulmod(a.residues, cs, t.q, t.qinv), a.moduli, a.ntt_form)


def drop_last_prime(p: RnsPoly, rounding: bool = True) -> RnsPoly:
    """Divide by the last prime of the basis and drop it.

    With ``rounding`` the result is round(c / q_last), otherwise floor, where
    c is the representative of each coefficient in [0, Q).
    """
    if p.level < 1:
        raise ValueError("cannot drop a prime at level 0")
    if p.ntt_form:
        raise ValueError("drop_last_prime needs coefficient form")
    ql = p.moduli[-1]
    last = p.residues[-1]
    if rounding:
        last = np.where(last > ql // 2, last - ql, last)  # centred residue
    rest = p.moduli[:-1]
    t = tables(p.degree, rest)
    r = p.residues[:-1] - last % t.q
    r += np.where(r < 0, t.q, 0)
    inv = np.array([pow(ql, -1, q) for q in rest], dtype=np.int64).reshape(-1, 1)
    return RnsPoly(mulmod(r, inv, t.q, t.qinv), rest, False)


@lru_cache(maxsize=128)
def _automorphism_map(N: int, g: int):
    idx = np.arange(N) * g % (2 * N)
    return idx % N, idx >= N


def automorphism(p: RnsPoly, g: int) -> RnsPoly:
    """Apply X -> X^g (g odd) in coefficient form."""
    if p.ntt_form:
        raise ValueError("automorphism needs coefficient form")
    if g % 2 == 0:
        raise ValueError("Galois element must be odd")
    dest, flip = _automorphism_map(p.degree, g % (2 * p.degree))
    q = p.tables.q
    vals = np.where(flip & (p.residues != 0), q - p.residues, p.residues)
    out = np.empty_like(vals)
    out[:, dest] = vals
    return RnsPoly(out, p.moduli, False)


def to_centered(p: RnsPoly) -> np.ndarray:
    """CRT-reconstruct coefficients into (-Q/2, Q/2].

    Returns int64 for a single prime and an object array of Python ints
    otherwise.
    """
    if p.ntt_form:
        p = ntt_inverse(p)
    q0 = p.moduli[0]
    if p.level == 0:
        r = p.residues[0]
        return np.where(r > q0 // 2, r - q0, r)
    x = p.residues[0].astype(object)
    M = q0
    for q, row in zip(p.moduli[1:], p.residues[1:]):
        inv = pow(M % q, -1, q)
        t = ((row.astype(object) - x) % q) * inv % q
        x = x + t * M
        M *= q
    half = M // 2
    return np.where(x > half, x - M, x)


def lift(coeffs: np.ndarray, moduli) -> RnsPoly:
    """Reduce small signed int64 coefficients into every prime of a basis."""
    moduli = tuple(moduli)
    q = np.array(moduli, dtype=np.int64).reshape(-1, 1)
    return RnsPoly(coeffs[None, :] % q, moduli, False)


# -- sampling -----------------------------------------------------------------

def sample_uniform(N: int, moduli, rng: np.random.Generator) -> RnsPoly:
    moduli = tuple(moduli)
    q = np.array(moduli, dtype=np.int64).reshape(-1, 1)
    return RnsPoly(rng.integers(0, q, size=(len(moduli), N), dtype=np.int64), moduli, False)


def sample_ternary_coeffs(N: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(-1, 2, size=N, dtype=np.int64)


def sample_gaussian_coeffs(N: int, rng: np.random.Generator, sigma: float = 3.2) -> np.ndarray:
    """Rounded Gaussian, resampled beyond 6 sigma."""
    x = np.rint(rng.normal(0.0, sigma, size=N))
    bound = 6 * sigma
    bad = np.abs(x) > bound
    while bad.any():
        x[bad] = np.rint(rng.normal(0.0, sigma, size=int(bad.sum())))
        bad = np.abs(x) > bound
    return x.astype(np.int64)


def sample_ternary(N: int, moduli, rng: np.random.Generator) -> RnsPoly:
    return lift(sample_ternary_coeffs(N, rng), moduli)


def sample_gaussian(N: int, moduli, rng: np.random.Generator, sigma: float = 3.2) -> RnsPoly:
    return lift(sample_gaussian_coeffs(N, rng, sigma), moduli)


def expand_uniform(seed: bytes, N: int, moduli) -> RnsPoly:
    """Deterministically expand a seed into a uniform NTT-form polynomial.

    SHAKE-256 output is read as little-endian uint64 and reduced per prime;
    the reduction bias is below 2**-14 for 50-bit primes.
    """
    moduli = tuple(moduli)
    k = len(moduli)
    raw = hashlib.shake_256(seed).digest(8 * k * N)
    words = np.frombuffer(raw, dtype="<u8").reshape(k, N)
    q = np.array(moduli, dtype=np.uint64).reshape(-1, 1)
    return RnsPoly((words % q).astype(np.int64), moduli, True)
