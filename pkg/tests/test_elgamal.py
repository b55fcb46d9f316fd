import os
import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timecapsule.dl_solver import SolverConfig, solve
from timecapsule.elgamal import (
    BLINDING_BYTES,
    Ciphertext,
    Plaintext,
    chunk_bits,
    decode_plaintext,
    decrypt,
    decrypt_chunk,
    decrypt_many,
    encode_plaintext,
    encrypt,
    encrypt_chunk,
    ephemeral_exponent,
)
from timecapsule.errors import DecodeError, DomainError
from timecapsule.puzzle import Puzzle, PuzzleSolution, build_difficulty_table, gen_puz

TABLE = build_difficulty_table([12, 20, 24])
SEED = bytes(range(32))
PUZ24 = gen_puz(24, SEED, TABLE)
SOL24 = solve(PUZ24, SolverConfig(algo="bsgs")).solution


def test_hand_checked_chunk():
    puz = Puzzle(23, 5, 8, 5)
    assert encrypt_chunk(9, 3, puz) == (10, 8)
    assert decrypt_chunk(10, 8, puz, 6) == 9


def test_chunk_width():
    assert chunk_bits(PUZ24.p) == 8
    assert chunk_bits(TABLE[20].p) == 8
    assert chunk_bits((1 << 39) + 1) == 24
    assert chunk_bits(TABLE[12].p) == 8
    assert chunk_bits(257) == 7


def test_encode_requires_p_at_least_256():
    with pytest.raises(DomainError):
        encode_plaintext(Plaintext(b"", bytes(32)), 251)


def test_empty_message_zero_blinding_chunks():
    chunks = encode_plaintext(Plaintext(b"", bytes(BLINDING_BYTES)), PUZ24.p)
    assert chunks == [1] * (4 + BLINDING_BYTES)


def test_encode_decode_roundtrip_many():
    rng = random.Random(8)
    for p in (TABLE[12].p, TABLE[20].p, PUZ24.p, (1 << 40) + 1, (1 << 61) - 1):
        for _ in range(200):
            pt = Plaintext(rng.randbytes(rng.randrange(0, 90)), rng.randbytes(32))
            chunks = encode_plaintext(pt, p)
            assert all(1 <= c < p for c in chunks)
            assert decode_plaintext(chunks, p) == pt


def test_encrypt_deterministic():
    pt = Plaintext(b"bid: 42", bytes(range(32)))
    assert encrypt(pt, PUZ24, SEED).to_bytes() == encrypt(pt, PUZ24, SEED).to_bytes()
    assert encrypt(pt, PUZ24, SEED) != encrypt(pt, PUZ24, bytes(32))


def test_encrypt_decrypt_roundtrip_24_bits():
    rng = random.Random(9)
    for _ in range(500):
        pt = Plaintext(rng.randbytes(rng.randrange(0, 40)), rng.randbytes(32))
        ct = encrypt(pt, PUZ24, SEED)
        assert all(1 <= c1 < PUZ24.p and 1 <= c2 < PUZ24.p for c1, c2 in ct.chunks)
        assert decrypt(ct, PUZ24, SOL24) == pt


def test_ephemeral_exponents_in_range_and_distinct():
    pt = Plaintext(b"x", bytes(32))
    ks = [ephemeral_exponent(pt, PUZ24, SEED, j) for j in range(50)]
    assert all(1 <= k < PUZ24.p - 1 for k in ks)
    assert len(set(ks)) == 50


def test_chunk_independence_with_fixed_k():
    base = encode_plaintext(Plaintext(b"hello world", bytes(32)), PUZ24.p)
    changed = list(base)
    changed[5] = changed[5] % 200 + 2
    ks = list(range(3, 3 + len(base)))
    a = [encrypt_chunk(v, k, PUZ24) for v, k in zip(base, ks)]
    b = [encrypt_chunk(v, k, PUZ24) for v, k in zip(changed, ks)]
    assert [i for i in range(len(a)) if a[i] != b[i]] == [5]


def test_wrong_key_never_crashes():
    rng = random.Random(10)
    pt = Plaintext(b"secret", bytes(32))
    ct = encrypt(pt, PUZ24, SEED)
    for _ in range(300):
        a = rng.randrange(1, PUZ24.p - 1)
        if a == SOL24.a:
            continue
        try:
            out = decrypt(ct, PUZ24, PuzzleSolution(a))
        except DecodeError:
            continue
        assert out != pt


def test_decode_rejects_malformed():
    p = PUZ24.p
    good = encode_plaintext(Plaintext(b"abc", bytes(32)), p)
    with pytest.raises(DecodeError):
        decode_plaintext(good[:-1], p)  # blinding truncated
    with pytest.raises(DecodeError):
        decode_plaintext([0] + good[1:], p)
    bad_len = encode_plaintext(Plaintext(b"abc", bytes(32)), p)
    bad_len[3] = 0xFF + 1  # length prefix now far too large
    with pytest.raises(DecodeError):
        decode_plaintext(bad_len, p)
    with pytest.raises(DecodeError):
        decode_plaintext([], p)
    with pytest.raises(DecodeError):
        decrypt(Ciphertext(((0, 5),)), PUZ24, SOL24)


def test_padding_must_be_exact():
    p = (1 << 40) + 15  # 24-bit chunks, so padding is possible
    pt = Plaintext(b"ab", bytes(32))
    chunks = encode_plaintext(pt, p)
    raw_len = 4 + 2 + 32
    assert len(chunks) * 3 > raw_len  # some padding present
    tampered = list(chunks)
    tampered[-1] += 1  # non-zero padding byte
    with pytest.raises(DecodeError):
        decode_plaintext(tampered, p)
    with pytest.raises(DecodeError):
        decode_plaintext(chunks + [1], p)  # a whole extra chunk of zero padding


def test_ciphertext_wire_format():
    ct = Ciphertext(((1, 256), (65535, 2)))
    raw = ct.to_bytes()
    assert raw == struct.pack(">I", 2) + b"\x00\x01\x01" + b"\x00\x02\x01\x00" + b"\x00\x02\xff\xff" + b"\x00\x01\x02"
    assert Ciphertext.from_bytes(raw) == ct
    with pytest.raises(DecodeError):
        Ciphertext.from_bytes(raw + b"\x00")
    with pytest.raises(DecodeError):
        Ciphertext.from_bytes(raw[:-1])
    with pytest.raises(DecodeError):
        Ciphertext.from_bytes(struct.pack(">I", 1) + b"\x00\x02\x00\x05\x00\x01\x01")


def test_blinding_length_enforced():
    with pytest.raises(ValueError):
        Plaintext(b"m", b"short")


@settings(max_examples=100, deadline=None)
@given(st.binary(max_size=120), st.binary(min_size=32, max_size=32))
def test_roundtrip_property(message, blinding):
    pt = Plaintext(message, blinding)
    assert decrypt(encrypt(pt, PUZ24, SEED), PUZ24, SOL24) == pt


def test_distinct_blinding_hides_equal_messages():
    a = encrypt(Plaintext(b"same", os.urandom(32)), PUZ24, SEED)
    b = encrypt(Plaintext(b"same", os.urandom(32)), PUZ24, SEED)
    assert a != b


def test_decrypt_many_matches_decrypt():
    rng = random.Random(11)
    pts = [Plaintext(rng.randbytes(rng.randrange(0, 30)), rng.randbytes(32)) for _ in range(40)]
    cts = [encrypt(pt, PUZ24, SEED) for pt in pts]
    assert decrypt_many(cts, PUZ24, SOL24) == [decrypt(ct, PUZ24, SOL24) for ct in cts] == pts
    # a short list takes the scalar path and must agree
    assert decrypt_many(cts[:1], PUZ24, SOL24) == pts[:1]


def test_decrypt_many_large_group_and_bad_entries():
    table = build_difficulty_table([40])
    puz = gen_puz(40, SEED, table)
    a = 987654321
    puz = Puzzle(puz.p, puz.g, pow(puz.g, a, puz.p), 40)
    sol = PuzzleSolution(a)
    pts = [Plaintext(b"x" * i, bytes([i]) * 32) for i in range(5)]
    cts = [encrypt(pt, puz, SEED) for pt in pts]
    cts[2] = Ciphertext(((0, 1),) + cts[2].chunks[1:])  # outside the group
    cts[3] = Ciphertext(cts[3].chunks[:-1])  # truncated
    assert decrypt_many(cts, puz, sol) == [pts[0], pts[1], None, None, pts[4]]
    assert decrypt_many([], puz, sol) == []
