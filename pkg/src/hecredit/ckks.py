"""Approximate homomorphic encryption over real vectors (CKKS family).

The coefficient chain ``q_0, ..., q_{L-2}, P`` keeps its last prime ``P`` as a
special prime used only inside key switching, so ciphertexts live on the first
``L - 1`` primes.  With the (40, 20, 40) chain a fresh ciphertext sits at level
1 and one rescale by the 20-bit prime brings a product of two 2**20-scaled
values back to roughly 2**20.

Key switching (rotations) decomposes the ciphertext per RNS prime, splits
wide residues into balanced sub-digits and divides the result by ``P``.  No
relinearisation keys exist: the circuits here never multiply two ciphertexts.
"""

from __future__ import annotations

import hashlib
import io
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import ring
from .ring import RnsPoly

MAGIC = b"HEV1"
KIND_PUBLIC, KIND_CIPHERTEXT, KIND_SECRET = 1, 2, 3
DEFAULT_FLOOD_SIGMA = 2.0 ** -13  # per-slot std of post-decryption noise, message units


class CkksError(ValueError):
    pass


class ScaleMismatchError(CkksError):
    pass


class LevelMismatchError(CkksError):
    pass


class MissingGaloisKeyError(CkksError):
    pass


class SerializationError(CkksError):
    pass


@dataclass(frozen=True)
class SecurityParams:
    poly_degree: int = 4096
    coeff_bit_sizes: tuple[int, ...] = (40, 20, 40)
    scale: int = 2 ** 20
    rotation_steps: tuple[int, ...] = (1, 2, 4, 8, 16)
    sigma: float = 3.2

    def __post_init__(self):
        N = self.poly_degree
        if N < 8 or N & (N - 1):
            raise CkksError(f"poly_degree {N} must be a power of two >= 8")
        if len(self.coeff_bit_sizes) < 2:
            raise CkksError("need at least one data prime and the special prime")
        if self.scale < 2 or self.scale & (self.scale - 1):
            raise CkksError(f"scale {self.scale} must be a power of two")
        if self.scale.bit_length() - 1 >= self.coeff_bit_sizes[0]:
            raise CkksError("scale leaves no headroom under the first prime")
        for k in self.rotation_steps:
            if not 0 < k < N // 2:
                raise CkksError(f"rotation step {k} outside (0, {N // 2})")
        object.__setattr__(self, "coeff_bit_sizes", tuple(self.coeff_bit_sizes))
        object.__setattr__(self, "rotation_steps", tuple(sorted(set(self.rotation_steps))))

    @property
    def slot_count(self) -> int:
        return self.poly_degree // 2

    @property
    def moduli(self) -> tuple[int, ...]:
        return _chain(self.poly_degree, self.coeff_bit_sizes)


TABLE1_PARAMS = SecurityParams()
HIGH_SECURITY_PARAMS = SecurityParams(8192, (40, 21, 21, 21, 21, 21, 40), 2 ** 21)


@lru_cache(maxsize=16)
def _chain(N: int, bits: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(p.value for p in ring.find_primes(bits, N))


@dataclass(frozen=True, eq=False)
class PublicKey:
    b: RnsPoly  # NTT form over the data primes
    a: RnsPoly
    seed: bytes


@dataclass(frozen=True, eq=False)
class GaloisKey:
    step: int
    galois_elt: int
    b: tuple[RnsPoly, ...]  # one per key-switching digit, NTT form over the full chain
    a: tuple[RnsPoly, ...]
    seeds: tuple[bytes, ...]


@dataclass(frozen=True, eq=False)
class PublicContext:
    params: SecurityParams
    pk: PublicKey
    galois_keys: dict = field(default_factory=dict)

    @property
    def moduli(self) -> tuple[int, ...]:
        return self.params.moduli

    @property
    def data_moduli(self) -> tuple[int, ...]:
        return self.params.moduli[:-1]

    @property
    def top_level(self) -> int:
        return len(self.params.moduli) - 2


@dataclass(frozen=True, eq=False)
class PrivateContext:
    public: PublicContext
    sk: RnsPoly  # NTT form over the full chain

    @property
    def params(self) -> SecurityParams:
        return self.public.params

    @property
    def moduli(self):
        return self.public.moduli

    @property
    def data_moduli(self):
        return self.public.data_moduli

    @property
    def top_level(self) -> int:
        return self.public.top_level


@dataclass(frozen=True, eq=False)
class EncodedPlaintext:
    poly: RnsPoly  # coefficient form
    scale: Fraction

    @property
    def level(self) -> int:
        return self.poly.level

    @property
    def slot_count(self) -> int:
        return self.poly.degree // 2


@dataclass(frozen=True, eq=False)
class Ciphertext:
    c0: RnsPoly
    c1: RnsPoly
    scale: Fraction

    @property
    def level(self) -> int:
        return self.c0.level

    @property
    def degree(self) -> int:
        return self.c0.degree


def _rng(rng):
    return rng if rng is not None else np.random.default_rng()


# -- keys ---------------------------------------------------------------------

def keygen(params: SecurityParams, rng: np.random.Generator | None = None) -> PrivateContext:
    rng = _rng(rng)
    N = params.poly_degree
    moduli = params.moduli
    data = moduli[:-1]
    P = moduli[-1]
    s_coeffs = ring.sample_ternary_coeffs(N, rng)
    s = ring.ntt_forward(ring.lift(s_coeffs, moduli))
    s_data = s.rows(range(len(data)))

    seed = rng.bytes(32)
    a = ring.expand_uniform(seed, N, data)
    e = ring.ntt_forward(ring.sample_gaussian(N, data, rng, params.sigma))
    pk = PublicKey(e - a * s_data, a, seed)

    galois = {}
    layout = digit_layout(params)
    for step in params.rotation_steps:
        g = pow(5, step, 2 * N)
        s_rot = ring.ntt_forward(ring.lift(_automorph_coeffs(s_coeffs, g), moduli))
        bs, as_, seeds = [], [], []
        for j, t, w in layout:
            qj = data[j]
            factor = P * pow(2, w * t, qj) % qj
            kseed = rng.bytes(32)
            aj = ring.expand_uniform(kseed, N, moduli)
            ej = ring.ntt_forward(ring.sample_gaussian(N, moduli, rng, params.sigma))
            bj = (ej - aj * s).residues.copy()
            v = bj[j] + ring.mulmod(s_rot.residues[j], np.int64(factor), qj, 1.0 / qj)
            bj[j] = v - np.where(v >= qj, qj, 0)
            bs.append(RnsPoly(bj, moduli, True))
            as_.append(aj)
            seeds.append(kseed)
        galois[step] = GaloisKey(step, g, tuple(bs), tuple(as_), tuple(seeds))
    return PrivateContext(PublicContext(params, pk, galois), s)


def digit_layout(params: SecurityParams) -> list[tuple[int, int, int]]:
    """Key-switching digits as (prime index, position, width in bits).

    Each data prime's residue is split into balanced digits about half as
    wide as the special prime, which keeps digit * noise / P near one unit.
    """
    half = (params.coeff_bit_sizes[-1] + 1) // 2
    out = []
    for j, bits in enumerate(params.coeff_bit_sizes[:-1]):
        n = max(1, round(bits / half))
        w = -(-bits // n)
        out.extend((j, t, w) for t in range(n))
    return out


def _automorph_coeffs(c: np.ndarray, g: int) -> np.ndarray:
    N = len(c)
    idx = np.arange(N) * g % (2 * N)
    out = np.empty_like(c)
    out[idx % N] = np.where(idx >= N, -c, c)
    return out


# -- encoding -----------------------------------------------------------------

@lru_cache(maxsize=8)
def _embedding(N: int):
    zeta = np.exp(1j * np.pi * np.arange(N) / N)
    n = N // 2
    rot = np.array([pow(5, j, 2 * N) for j in range(n)])
    slot_idx = (rot - 1) // 2
    conj_idx = (2 * N - rot - 1) // 2
    return zeta, slot_idx, conj_idx


def _as_ctx_params(ctx) -> SecurityParams:
    if isinstance(ctx, SecurityParams):
        return ctx
    return ctx.params


def encode(values, ctx, *, level: int | None = None, scale=None) -> EncodedPlaintext:
    """Encode up to N/2 reals; unused slots are zero."""
    params = _as_ctx_params(ctx)
    N = params.poly_degree
    m = np.asarray(values, dtype=np.float64).ravel()
    if m.size > N // 2:
        raise CkksError(f"{m.size} values exceed the {N // 2} slots")
    if not np.all(np.isfinite(m)):
        raise CkksError("values must be finite")
    data = params.moduli[:-1]
    level = len(data) - 1 if level is None else level
    if not 0 <= level < len(data):
        raise LevelMismatchError(f"level {level} outside the chain")
    scale = Fraction(params.scale if scale is None else scale)
    if scale <= 0:
        raise CkksError("scale must be positive")
    zeta, slot_idx, conj_idx = _embedding(N)
    vals = np.zeros(N, dtype=np.complex128)
    vals[slot_idx[: m.size]] = m
    vals[conj_idx[: m.size]] = m
    coeffs = (np.fft.fft(vals) / N * np.conj(zeta)).real * float(scale)
    coeffs = np.rint(coeffs)
    if np.max(np.abs(coeffs), initial=0.0) >= 2.0 ** 62:
        raise CkksError("encoded coefficients overflow; lower the scale or values")
    poly = ring.lift(coeffs.astype(np.int64), data[: level + 1])
    return EncodedPlaintext(poly, scale)


def decode(pt: EncodedPlaintext, ctx=None) -> np.ndarray:
    N = pt.poly.degree
    coeffs = ring.to_centered(pt.poly).astype(np.float64)
    zeta, slot_idx, _ = _embedding(N)
    vals = N * np.fft.ifft(coeffs * zeta)
    return vals[slot_idx].real / float(pt.scale)


# -- encryption ---------------------------------------------------------------

def encrypt(pt: EncodedPlaintext, pctx: PublicContext, rng=None) -> Ciphertext:
    """Public-key encryption at the top level."""
    rng = _rng(rng)
    if pt.level != pctx.top_level:
        raise LevelMismatchError("plaintext must be encoded at the top level")
    N = pt.poly.degree
    data = pctx.data_moduli
    sigma = pctx.params.sigma
    u = ring.ntt_forward(ring.sample_ternary(N, data, rng))
    c0 = ring.ntt_inverse(pctx.pk.b * u)
    c1 = ring.ntt_inverse(pctx.pk.a * u)
    c0 = c0 + ring.sample_gaussian(N, data, rng, sigma) + pt.poly
    c1 = c1 + ring.sample_gaussian(N, data, rng, sigma)
    return Ciphertext(c0, c1, pt.scale)


def encrypt_symmetric(pt: EncodedPlaintext, prctx: PrivateContext, rng=None) -> Ciphertext:
    """Secret-key encryption; fresh noise is a single Gaussian term."""
    rng = _rng(rng)
    if pt.level != prctx.top_level:
        raise LevelMismatchError("plaintext must be encoded at the top level")
    N = pt.poly.degree
    data = prctx.data_moduli
    s = prctx.sk.rows(range(len(data)))
    a = ring.sample_uniform(N, data, rng)
    e = ring.sample_gaussian(N, data, rng, prctx.params.sigma)
    c0 = pt.poly + e - ring.ntt_inverse(ring.ntt_forward(a) * s)
    return Ciphertext(c0, a, pt.scale)


def decrypt(ct: Ciphertext, prctx: PrivateContext, flood: bool = True,
            rng=None, flood_sigma: float = DEFAULT_FLOOD_SIGMA) -> EncodedPlaintext:
    """c0 + c1*s, optionally followed by fresh Gaussian noise.

    ``flood_sigma`` is the per-slot standard deviation in message units.
    """
    if ct.degree != prctx.params.poly_degree or ct.c0.moduli != prctx.data_moduli[: ct.level + 1]:
        raise CkksError("ciphertext does not belong to this context")
    s = prctx.sk.rows(range(ct.level + 1))
    m = ct.c0 + ring.ntt_inverse(ring.ntt_forward(ct.c1) * s)
    if flood:
        N = ct.degree
        sigma_c = flood_sigma * float(ct.scale) * math.sqrt(2.0 / N)
        m = m + ring.sample_gaussian(N, m.moduli, _rng(rng), sigma_c)
    return EncodedPlaintext(m, ct.scale)


# -- evaluation ---------------------------------------------------------------

def _same(a: Ciphertext, level: int, scale: Fraction):
    if a.level != level:
        raise LevelMismatchError(f"level mismatch: {a.level} vs {level}")
    if a.scale != scale:
        raise ScaleMismatchError(f"scale mismatch: {float(a.scale)} vs {float(scale)}")


def add_ct(a: Ciphertext, b: Ciphertext) -> Ciphertext:
    _same(a, b.level, b.scale)
    return Ciphertext(a.c0 + b.c0, a.c1 + b.c1, a.scale)


def add_plain(a: Ciphertext, p: EncodedPlaintext) -> Ciphertext:
    _same(a, p.level, p.scale)
    return Ciphertext(a.c0 + p.poly, a.c1, a.scale)


def mul_plain(a: Ciphertext, p: EncodedPlaintext) -> Ciphertext:
    if a.level != p.level:
        raise LevelMismatchError(f"level mismatch: {a.level} vs {p.level}")
    pn = ring.ntt_forward(p.poly)
    c0 = ring.ntt_inverse(ring.ntt_forward(a.c0) * pn)
    c1 = ring.ntt_inverse(ring.ntt_forward(a.c1) * pn)
    return Ciphertext(c0, c1, a.scale * p.scale)


def rescale(a: Ciphertext) -> Ciphertext:
    if a.level < 1:
        raise LevelMismatchError("ciphertext is at the bottom of the chain")
    q = a.c0.moduli[-1]
    return Ciphertext(ring.drop_last_prime(a.c0), ring.drop_last_prime(a.c1), a.scale / q)


def _balanced_digits(x: np.ndarray, w: int, n: int):
    half = 1 << (w - 1)
    mask = (1 << w) - 1
    for t in range(n):
        if t == n - 1:
            yield x
        else:
            d = ((x + half) & mask) - half
            yield d
            x = (x - d) >> w


def _key_switch(c: RnsPoly, key: GaloisKey, params: SecurityParams) -> tuple[RnsPoly, RnsPoly]:
    moduli = params.moduli
    level = c.level
    L = len(moduli)
    idx = list(range(level + 1)) + [L - 1]
    ext = tuple(moduli[i] for i in idx)
    t = ring.tables(c.degree, ext)
    qcol = t.q
    layout = digit_layout(params)
    acc0 = np.zeros((len(ext), c.degree), dtype=np.int64)
    acc1 = np.zeros_like(acc0)
    for j in range(level + 1):
        qj = c.moduli[j]
        x = c.residues[j]
        x = np.where(x > qj // 2, x - qj, x)
        entries = [e for e in layout if e[0] == j]
        first = layout.index(entries[0])
        for k, d in enumerate(_balanced_digits(x, entries[0][2], len(entries)), start=first):
            dn = t.forward(d[None, :] % qcol)
            acc0 += ring.mulmod(dn, key.b[k].residues[idx], qcol, t.qinv)
            acc0 -= np.where(acc0 >= qcol, qcol, 0)
            acc1 += ring.mulmod(dn, key.a[k].residues[idx], qcol, t.qinv)
            acc1 -= np.where(acc1 >= qcol, qcol, 0)
    r0 = ring.drop_last_prime(RnsPoly(t.inverse(acc0), ext, False))
    r1 = ring.drop_last_prime(RnsPoly(t.inverse(acc1), ext, False))
    return r0, r1


def rotate(a: Ciphertext, k: int, pctx: PublicContext) -> Ciphertext:
    """Cyclic left shift of the N/2 slots by ``k`` (k must have a Galois key)."""
    key = pctx.galois_keys.get(k)
    if key is None:
        raise MissingGaloisKeyError(f"no Galois key for rotation step {k}")
    c0 = ring.automorphism(a.c0, key.galois_elt)
    c1 = ring.automorphism(a.c1, key.galois_elt)
    d0, d1 = _key_switch(c1, key, pctx.params)
    return Ciphertext(c0 + d0, d1, a.scale)


def sum_slots(a: Ciphertext, width: int, pctx: PublicContext) -> Ciphertext:
    """Slot 0 of the result holds the sum of slots 0..width-1.

    Slots from ``width`` up to the next power of two must be zero.
    """
    if width < 1:
        raise CkksError("width must be positive")
    step = 1
    while step < width:
        if step not in pctx.galois_keys:
            raise MissingGaloisKeyError(f"sum over {width} slots needs rotation step {step}")
        a = add_ct(a, rotate(a, step, pctx))
        step *= 2
    return a


# -- serialization ------------------------------------------------------------

class _Writer:
    def __init__(self):
        self.buf = io.BytesIO()

    def pack(self, fmt, *vals):
        self.buf.write(struct.pack("<" + fmt, *vals))

    def raw(self, b: bytes):
        self.buf.write(b)

    def bigint(self, x: int):
        b = x.to_bytes((x.bit_length() + 7) // 8 or 1, "little")
        self.pack("H", len(b))
        self.raw(b)

    def section(self, payload: bytes):
        self.pack("I", len(payload))
        self.raw(payload)

    def poly(self, p: RnsPoly):
        self.pack("BBI", int(p.ntt_form), len(p.moduli), p.degree)
        for q in p.moduli:
            self.pack("Q", q)
        self.raw(p.residues.astype("<u8").tobytes())

    def value(self) -> bytes:
        return self.buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if n < 0 or self.pos + n > len(self.data):
            raise SerializationError("truncated stream")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        size = struct.calcsize("<" + fmt)
        return struct.unpack("<" + fmt, self.take(size))

    def bigint(self) -> int:
        (n,) = self.unpack("H")
        return int.from_bytes(self.take(n), "little")

    def section(self) -> "_Reader":
        (n,) = self.unpack("I")
        return _Reader(self.take(n))

    def poly(self, expect_moduli=None, expect_n=None) -> RnsPoly:
        form, k, N = self.unpack("BBI")
        if form > 1 or k == 0:
            raise SerializationError("malformed polynomial header")
        moduli = self.unpack("Q" * k)
        if expect_moduli is not None and tuple(moduli) != tuple(expect_moduli):
            raise SerializationError("polynomial basis inconsistent with parameters")
        if expect_n is not None and N != expect_n:
            raise SerializationError("polynomial degree inconsistent with parameters")
        raw = self.take(8 * k * N)
        res = np.frombuffer(raw, dtype="<u8").reshape(k, N)
        if (res >= np.array(moduli, dtype=np.uint64).reshape(-1, 1)).any():
            raise SerializationError("residue out of range")
        return RnsPoly(res.astype(np.int64), tuple(moduli), bool(form))

    def done(self):
        if self.pos != len(self.data):
            raise SerializationError("trailing bytes")


def _write_params(w: _Writer, p: SecurityParams):
    s = _Writer()
    s.pack("IB", p.poly_degree, len(p.coeff_bit_sizes))
    s.pack("B" * len(p.coeff_bit_sizes), *p.coeff_bit_sizes)
    s.pack("B", p.scale.bit_length() - 1)
    s.pack("B", len(p.rotation_steps))
    s.pack("i" * len(p.rotation_steps), *p.rotation_steps)
    s.pack("d", p.sigma)
    s.pack("Q" * len(p.moduli), *p.moduli)
    w.section(s.value())


def _read_params(r: _Reader) -> SecurityParams:
    s = r.section()
    N, nb = s.unpack("IB")
    bits = s.unpack("B" * nb)
    (scale_log,) = s.unpack("B")
    (ns,) = s.unpack("B")
    steps = s.unpack("i" * ns)
    (sigma,) = s.unpack("d")
    moduli = s.unpack("Q" * nb)
    s.done()
    if scale_log > 62 or N > 1 << 17:
        raise SerializationError("parameters out of range")
    try:
        params = SecurityParams(N, tuple(bits), 1 << scale_log, tuple(steps), sigma)
        expected = params.moduli
    except ValueError as exc:
        raise SerializationError(f"invalid parameters: {exc}") from exc
    if tuple(moduli) != expected:
        raise SerializationError("modulus chain inconsistent with parameters")
    return params


def _header(kind: int) -> _Writer:
    w = _Writer()
    w.raw(MAGIC)
    w.pack("B", kind)
    return w


def _open(data: bytes, kind: int) -> _Reader:
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise SerializationError("expected bytes")
    r = _Reader(bytes(data))
    if bytes(r.take(4)) != MAGIC:
        raise SerializationError("bad magic")
    (k,) = r.unpack("B")
    if k != kind:
        raise SerializationError(f"expected object kind {kind}, found {k}")
    return r


def serialize_public(pctx: PublicContext) -> bytes:
    w = _header(KIND_PUBLIC)
    _write_params(w, pctx.params)
    pk = _Writer()
    pk.raw(pctx.pk.seed)
    pk.poly(pctx.pk.b)
    w.section(pk.value())
    w.pack("B", len(pctx.galois_keys))
    for step in sorted(pctx.galois_keys):
        key = pctx.galois_keys[step]
        g = _Writer()
        g.pack("iIB", key.step, key.galois_elt, len(key.b))
        for seed, b in zip(key.seeds, key.b):
            g.raw(seed)
            g.poly(b)
        w.section(g.value())
    return w.value()


def deserialize_public(data: bytes) -> PublicContext:
    try:
        return _deserialize_public(data)
    except SerializationError:
        raise
    except (struct.error, ValueError, OverflowError) as exc:
        raise SerializationError(str(exc)) from exc


def _deserialize_public(data: bytes) -> PublicContext:
    r = _open(data, KIND_PUBLIC)
    params = _read_params(r)
    N = params.poly_degree
    moduli = params.moduli
    data_mod = moduli[:-1]
    s = r.section()
    seed = bytes(s.take(32))
    b = s.poly(data_mod, N)
    s.done()
    if not b.ntt_form:
        raise SerializationError("public key must be in NTT form")
    pk = PublicKey(b, ring.expand_uniform(seed, N, data_mod), seed)
    (n,) = r.unpack("B")
    galois = {}
    for _ in range(n):
        g = r.section()
        step, elt, nd = g.unpack("iIB")
        if step not in params.rotation_steps or step in galois:
            raise SerializationError(f"unexpected Galois key for step {step}")
        if elt != pow(5, step, 2 * N) or nd != len(digit_layout(params)):
            raise SerializationError("Galois key header inconsistent with parameters")
        seeds, bs, as_ = [], [], []
        for _ in range(nd):
            kseed = bytes(g.take(32))
            kb = g.poly(moduli, N)
            if not kb.ntt_form:
                raise SerializationError("Galois key must be in NTT form")
            seeds.append(kseed)
            bs.append(kb)
            as_.append(ring.expand_uniform(kseed, N, moduli))
        g.done()
        galois[step] = GaloisKey(step, elt, tuple(bs), tuple(as_), tuple(seeds))
    r.done()
    return PublicContext(params, pk, galois)


def context_fingerprint(params: SecurityParams) -> bytes:
    h = hashlib.sha256(struct.pack("<I", params.poly_degree))
    for q in params.moduli:
        h.update(struct.pack("<Q", q))
    return h.digest()[:8]


def serialize_ct(ct: Ciphertext, pctx: PublicContext | PrivateContext) -> bytes:
    w = _header(KIND_CIPHERTEXT)
    w.raw(context_fingerprint(pctx.params))
    w.bigint(ct.scale.numerator)
    w.bigint(ct.scale.denominator)
    w.poly(ct.c0)
    w.poly(ct.c1)
    return w.value()


def deserialize_ct(data: bytes, pctx: PublicContext | PrivateContext) -> Ciphertext:
    try:
        r = _open(data, KIND_CIPHERTEXT)
        if bytes(r.take(8)) != context_fingerprint(pctx.params):
            raise SerializationError("ciphertext was made under different parameters")
        num = r.bigint()
        den = r.bigint()
        if num == 0 or den == 0:
            raise SerializationError("invalid scale")
        N = pctx.params.poly_degree
        c0 = r.poly(expect_n=N)
        c1 = r.poly(c0.moduli, N)
        r.done()
        data_mod = pctx.params.moduli[:-1]
        if c0.moduli != data_mod[: len(c0.moduli)] or c0.ntt_form or c1.ntt_form:
            raise SerializationError("ciphertext basis inconsistent with parameters")
        return Ciphertext(c0, c1, Fraction(num, den))
    except SerializationError:
        raise
    except (struct.error, ValueError, OverflowError) as exc:
        raise SerializationError(str(exc)) from exc


def serialize_secret_key(prctx: PrivateContext) -> bytes:
    """Secret key in coefficient form; for key backup, never for transport."""
    w = _header(KIND_SECRET)
    _write_params(w, prctx.params)
    w.poly(ring.ntt_inverse(prctx.sk))
    return w.value()
