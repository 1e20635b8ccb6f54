import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sympy import isprime

from hecredit import ring
from oracles import automorph_reference, centered, crt, negacyclic_schoolbook

SMALL = {8: (17, 97, 113), 16: (97, 193, 353)}


def test_find_primes_are_ntt_friendly():
    N = 4096
    primes = ring.find_primes((40, 20, 40), N)
    values = [p.value for p in primes]
    assert len(set(values)) == 3
    for p, bits in zip(primes, (40, 20, 40)):
        assert isprime(p.value)
        assert p.value.bit_length() == bits
        assert p.value % (2 * N) == 1
        # primitive 2N-th root: order exactly 2N
        assert pow(p.root, N, p.value) == p.value - 1


def test_table_one_chain_is_stable():
    primes = ring.find_primes((40, 20, 40), 4096)
    assert [p.value for p in primes] == [1099511480321, 1032193, 1099511390209]


@pytest.mark.parametrize("bad", [(1,), (51,), (60,)])
def test_find_primes_rejects_sizes(bad):
    with pytest.raises(ValueError):
        ring.find_primes(bad, 16)


def test_ntt_prime_validates():
    with pytest.raises(ValueError):
        ring.ntt_prime(19, 8)  # 19 != 1 mod 16
    with pytest.raises(ValueError):
        ring.ntt_prime(17, 12)


@given(st.lists(st.integers(0, 2**50 - 1), min_size=1, max_size=30), st.data())
def test_mulmod_matches_python_ints(xs, data):
    q = data.draw(st.sampled_from([1099511480321, 1032193, 1125899906826241, 97]))
    a = np.array([x % q for x in xs], dtype=np.int64)
    b = np.array([data.draw(st.integers(0, q - 1)) for _ in xs], dtype=np.int64)
    got = ring.mulmod(a, b, np.int64(q), 1.0 / q)
    assert got.tolist() == [int(x) * int(y) % q for x, y in zip(a, b)]


@pytest.mark.parametrize("N", [8, 16])
def test_poly_mul_matches_schoolbook(N):
    rng = np.random.default_rng(N)
    moduli = SMALL[N]
    for _ in range(50):
        a = rng.integers(-10**6, 10**6, N)
        b = rng.integers(-10**6, 10**6, N)
        pa, pb = ring.from_ints(a, moduli), ring.from_ints(b, moduli)
        got = ring.poly_mul(pa, pb)
        for row, q in zip(got.residues, moduli):
            assert row.tolist() == negacyclic_schoolbook([int(x) for x in a], [int(x) for x in b], q)


@given(st.integers(0, 2**32 - 1))
def test_poly_mul_large_degree_matches_schoolbook_on_sparse(seed):
    # sparse operands keep the reference cheap at a realistic degree
    N = 1024
    rng = np.random.default_rng(seed)
    moduli = tuple(p.value for p in ring.find_primes((40, 20), N))
    a = np.zeros(N, dtype=np.int64)
    b = np.zeros(N, dtype=np.int64)
    a[rng.integers(0, N, 6)] = rng.integers(-1000, 1000, 6)
    b[rng.integers(0, N, 6)] = rng.integers(-1000, 1000, 6)
    got = ring.poly_mul(ring.from_ints(a, moduli), ring.from_ints(b, moduli))
    ref = [0] * N
    for i in np.nonzero(a)[0]:
        for j in np.nonzero(b)[0]:
            k = i + j
            if k < N:
                ref[k] += int(a[i]) * int(b[j])
            else:
                ref[k - N] -= int(a[i]) * int(b[j])
    for row, q in zip(got.residues, moduli):
        assert row.tolist() == [x % q for x in ref]


@given(st.integers(0, 2**32 - 1), st.sampled_from([8, 64, 4096]))
def test_ntt_round_trip(seed, N):
    moduli = SMALL.get(N) or tuple(p.value for p in ring.find_primes((40, 20, 40), N))
    p = ring.sample_uniform(N, moduli, np.random.default_rng(seed))
    back = ring.ntt_inverse(ring.ntt_forward(p))
    assert np.array_equal(back.residues, p.residues)
    assert not back.ntt_form


def test_ntt_is_evaluation_at_odd_root_powers():
    N, q = 8, 17
    pr = ring.ntt_prime(q, N)
    rng = np.random.default_rng(0)
    a = rng.integers(0, q, N)
    got = sorted(ring.ntt_forward(ring.from_ints(a, (q,))).residues[0].tolist())
    evals = sorted(sum(int(c) * pow(pr.root, (2 * k + 1) * i, q) for i, c in enumerate(a)) % q for k in range(N))
    assert got == evals


@given(st.lists(st.integers(-2**70, 2**70), min_size=16, max_size=16),
       st.lists(st.integers(-2**70, 2**70), min_size=16, max_size=16))
def test_add_sub_neg_match_crt(a, b):
    moduli = SMALL[16]
    Q = 97 * 193 * 353
    pa, pb = ring.from_ints(np.array(a, dtype=object), moduli), ring.from_ints(np.array(b, dtype=object), moduli)
    for op, ref in ((ring.poly_add, lambda x, y: x + y), (ring.poly_sub, lambda x, y: x - y)):
        got = op(pa, pb)
        for i in range(16):
            assert crt(got.residues[:, i], moduli) == ref(a[i], b[i]) % Q
    neg = ring.poly_neg(pa)
    assert [crt(neg.residues[:, i], moduli) for i in range(16)] == [(-x) % Q for x in a]


def test_to_centered_matches_crt():
    rng = np.random.default_rng(3)
    moduli = tuple(p.value for p in ring.find_primes((40, 20, 40), 16))
    Q = int(np.prod([int(q) for q in moduli], dtype=object))
    vals = [int(v) for v in rng.integers(-2**62, 2**62, 16)]
    vals[0] = Q // 2
    vals[1] = -(Q // 2)
    p = ring.from_ints(np.array(vals, dtype=object), moduli)
    assert [int(v) for v in ring.to_centered(p)] == [centered(v, Q) for v in vals]


@given(st.lists(st.integers(-2**80, 2**80), min_size=16, max_size=16), st.booleans())
def test_drop_last_prime_matches_bigint_division(vals, rounding):
    moduli = tuple(p.value for p in ring.find_primes((40, 20, 40), 16))
    Q = moduli[0] * moduli[1] * moduli[2]
    ql = moduli[-1]
    p = ring.from_ints(np.array(vals, dtype=object), moduli)
    got = ring.drop_last_prime(p, rounding)
    Q2 = moduli[0] * moduli[1]
    for i, v in enumerate(vals):
        c = v % Q
        if rounding:
            cl = c % ql
            cl = cl - ql if cl > ql // 2 else cl
            want = (c - cl) // ql
        else:
            want = c // ql
        assert crt(got.residues[:, i], moduli[:2]) == want % Q2


def test_drop_last_prime_rejects_level_zero_and_ntt():
    p = ring.zeros(16, (97,))
    with pytest.raises(ValueError):
        ring.drop_last_prime(p)
    with pytest.raises(ValueError):
        ring.drop_last_prime(ring.ntt_forward(ring.zeros(16, SMALL[16])))


@given(st.integers(0, 2**32 - 1), st.sampled_from([3, 5, 25, 31]))
def test_automorphism_matches_reference(seed, g):
    moduli = SMALL[16]
    coeffs = np.random.default_rng(seed).integers(-500, 500, 16)
    got = ring.automorphism(ring.from_ints(coeffs, moduli), g)
    ref = automorph_reference([int(c) for c in coeffs], g)
    for row, q in zip(got.residues, moduli):
        assert row.tolist() == [x % q for x in ref]


def test_automorphism_is_ring_homomorphism():
    moduli = SMALL[16]
    rng = np.random.default_rng(5)
    a = ring.from_ints(rng.integers(-50, 50, 16), moduli)
    b = ring.from_ints(rng.integers(-50, 50, 16), moduli)
    lhs = ring.automorphism(ring.poly_mul(a, b), 5)
    rhs = ring.poly_mul(ring.automorphism(a, 5), ring.automorphism(b, 5))
    assert lhs == rhs


def test_mismatched_operands_raise():
    a = ring.zeros(16, SMALL[16])
    with pytest.raises(ValueError):
        ring.poly_add(a, ring.zeros(8, SMALL[8]))
    with pytest.raises(ValueError):
        ring.poly_add(a, ring.zeros(16, SMALL[16][:2]))
    with pytest.raises(ValueError):
        ring.poly_add(a, ring.ntt_forward(a))
    with pytest.raises(ValueError):
        ring.zeros(12, (97,))


def test_residues_are_read_only():
    p = ring.zeros(16, SMALL[16])
    with pytest.raises(ValueError):
        p.residues[0, 0] = 1


def test_mul_scalar_matches_ints():
    moduli = SMALL[8]
    a = np.arange(8) - 3
    got = ring.mul_scalar(ring.from_ints(a, moduli), -7)
    assert got == ring.from_ints(a * -7, moduli)


def test_expand_uniform_is_deterministic_and_reduced():
    moduli = tuple(p.value for p in ring.find_primes((40, 20), 256))
    a = ring.expand_uniform(b"s" * 32, 256, moduli)
    b = ring.expand_uniform(b"s" * 32, 256, moduli)
    c = ring.expand_uniform(b"t" * 32, 256, moduli)
    assert a == b and not a == c
    assert a.ntt_form
    for row, q in zip(a.residues, moduli):
        assert row.min() >= 0 and row.max() < q


def test_gaussian_sampler_is_bounded_and_scaled():
    x = ring.sample_gaussian_coeffs(1 << 16, np.random.default_rng(0), 3.2)
    assert np.abs(x).max() <= 6 * 3.2
    assert abs(x.std() - 3.2) < 0.1
    t = ring.sample_ternary_coeffs(1 << 12, np.random.default_rng(1))
    assert set(np.unique(t).tolist()) == {-1, 0, 1}
