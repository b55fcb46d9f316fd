"""ElGamal over Z*_p with reproducible ciphertexts.

Encryption must be reproducible: a verifier re-encrypts every revealed
(message, blinding) pair and compares hashes with what participants signed.
The ephemeral exponent for each chunk is therefore derived from the seed, the
plaintext and the chunk index; the random 256-bit blinding value keeps the
ciphertext unguessable before the puzzle is solved.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .crypto_suite import DEFAULT_SUITE, CryptoSuite
from .errors import DecodeError, DomainError
from .numtheory import int_from_bytes, int_to_bytes
from .prng import prng_int
from .puzzle import Puzzle, PuzzleSolution

BLINDING_BYTES = 32
_EPH_TAG = b"MPTC1-eph"


@dataclass(frozen=True)
class Plaintext:
    message: bytes
    blinding: bytes

    def __post_init__(self) -> None:
        if len(self.blinding) != BLINDING_BYTES:
            raise ValueError(f"blinding must be {BLINDING_BYTES} bytes")


@dataclass(frozen=True)
class Ciphertext:
    chunks: tuple[tuple[int, int], ...]

    def to_bytes(self) -> bytes:
        out = [struct.pack(">I", len(self.chunks))]
        for c1, c2 in self.chunks:
            out.append(_pack_int(c1))
            out.append(_pack_int(c2))
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Ciphertext":
        ct, rest = cls.read_from(data)
        if rest:
            raise DecodeError(f"{len(rest)} trailing bytes after ciphertext")
        return ct

    @classmethod
    def read_from(cls, data: bytes) -> tuple["Ciphertext", bytes]:
        if len(data) < 4:
            raise DecodeError("ciphertext too short")
        (count,) = struct.unpack_from(">I", data)
        pos = 4
        chunks = []
        for _ in range(count):
            c1, pos = _unpack_int(data, pos)
            c2, pos = _unpack_int(data, pos)
            chunks.append((c1, c2))
        return cls(tuple(chunks)), data[pos:]


def _pack_int(n: int) -> bytes:
    raw = int_to_bytes(n)
    return struct.pack(">H", len(raw)) + raw


def _unpack_int(data: bytes, pos: int) -> tuple[int, int]:
    if pos + 2 > len(data):
        raise DecodeError("truncated integer length")
    (n,) = struct.unpack_from(">H", data, pos)
    pos += 2
    if pos + n > len(data):
        raise DecodeError("truncated integer")
    raw = data[pos : pos + n]
    if raw[:1] == b"\x00":
        raise DecodeError("non-canonical integer encoding")
    return int_from_bytes(raw), pos + n


def chunk_bits(p: int) -> int:
    """Plaintext bits per group element.

    lambda_m - 16 for large groups, but never fewer than 8 bits (or
    lambda_m - 2 in tiny groups).  Any width <= lambda_m - 2 keeps chunk + 1
    below p because p has its top bit set.
    """
    lam = p.bit_length()
    if lam - 16 >= 8:
        return lam - 16
    return min(8, lam - 2)


def encode_plaintext(pt: Plaintext, p: int) -> list[int]:
    if p < 1 << 8:
        raise DomainError("p must be at least 2^8")
    w = chunk_bits(p)
    raw = struct.pack(">I", len(pt.message)) + pt.message + pt.blinding
    while (len(raw) * 8) % w:
        raw += b"\x00"
    total = len(raw) * 8
    value = int.from_bytes(raw, "big")
    mask = (1 << w) - 1
    return [((value >> (total - (k + 1) * w)) & mask) + 1 for k in range(total // w)]


def decode_plaintext(chunks: Sequence[int], p: int) -> Plaintext:
    w = chunk_bits(p)
    if chunks and not (1 <= min(chunks) and max(chunks) <= 1 << w):
        raise DecodeError("chunk out of range")
    total = len(chunks) * w
    if total % 8:
        raise DecodeError("chunk stream is not byte aligned")
    if w == 8:  # lambda_m 10 through 24
        raw = bytes([c - 1 for c in chunks])
    else:
        value = 0
        for c in chunks:
            value = (value << w) | (c - 1)
        raw = value.to_bytes(total // 8, "big")
    if len(raw) < 4 + BLINDING_BYTES:
        raise DecodeError("plaintext too short")
    (mlen,) = struct.unpack_from(">I", raw)
    end = 4 + mlen + BLINDING_BYTES
    if end > len(raw):
        raise DecodeError("length prefix exceeds plaintext")
    pad = raw[end:]
    expected = 0
    while ((end + expected) * 8) % w:
        expected += 1
    if any(pad) or len(pad) != expected:
        raise DecodeError("bad padding")
    return Plaintext(raw[4 : 4 + mlen], raw[4 + mlen : end])


def ephemeral_exponent(
    pt: Plaintext, puz: Puzzle, seed: bytes, index: int, suite: CryptoSuite = DEFAULT_SUITE
) -> int:
    n = puz.p - 1
    width = puz.p.bit_length() + 64
    retry = 0
    while True:
        key = suite.hash(
            _EPH_TAG
            + bytes(seed)
            + struct.pack(">I", len(pt.message))
            + pt.message
            + pt.blinding
            + struct.pack(">II", index, retry)
        )
        k = prng_int(key, 0, width) % n
        if k:
            return k
        retry += 1


def encrypt_chunk(value: int, k: int, puz: Puzzle) -> tuple[int, int]:
    return pow(puz.g, k, puz.p), value * pow(puz.b, k, puz.p) % puz.p


def encrypt(pt: Plaintext, puz: Puzzle, seed: bytes, suite: CryptoSuite = DEFAULT_SUITE) -> Ciphertext:
    values = encode_plaintext(pt, puz.p)
    return Ciphertext(
        tuple(
            encrypt_chunk(v, ephemeral_exponent(pt, puz, seed, j, suite), puz)
            for j, v in enumerate(values)
        )
    )


def decrypt_chunk(c1: int, c2: int, puz: Puzzle, a: int) -> int:
    shared = pow(c1, a, puz.p)
    return c2 * pow(shared, -1, puz.p) % puz.p


def decrypt(ct: Ciphertext, puz: Puzzle, sol: PuzzleSolution) -> Plaintext:
    p = puz.p
    values = []
    for c1, c2 in ct.chunks:
        if not (1 <= c1 < p and 1 <= c2 < p):
            raise DecodeError("ciphertext element outside the group")
        values.append(decrypt_chunk(c1, c2, puz, sol.a))
    return decode_plaintext(values, p)


_VECTOR_P_LIMIT = 1 << 32  # x*x stays below 2^64 in uint64 arithmetic


def _unmask_all(c1s: list[int], c2s: list[int], p: int, a: int) -> list[int]:
    """c2 * (c1^a)^-1 for every pair, as c2 * c1^(p-1-a) since c1^(p-1) = 1."""
    e = p - 1 - a
    if p >= _VECTOR_P_LIMIT or len(c1s) < 64:
        return [c2 * pow(c1, e, p) % p for c1, c2 in zip(c1s, c2s)]
    base = np.array(c1s, dtype=np.uint64)
    acc = np.array(c2s, dtype=np.uint64)
    mod = np.uint64(p)
    while e:
        if e & 1:
            acc = acc * base % mod
        e >>= 1
        if e:
            base = base * base % mod
    return acc.tolist()


def decrypt_many(
    cts: Sequence[Ciphertext], puz: Puzzle, sol: PuzzleSolution
) -> list[Plaintext | None]:
    """Decrypt a whole list of ciphertexts under one key; None marks an undecodable one.

    All chunks go through one vectorised exponentiation, which keeps the
    per-participant cost of a reveal small next to the puzzle solve.
    """
    p = puz.p
    spans: list[tuple[int, int] | None] = []
    c1s: list[int] = []
    c2s: list[int] = []
    for ct in cts:
        firsts, seconds = zip(*ct.chunks) if ct.chunks else ((), ())
        if firsts and not (1 <= min(firsts) and max(firsts) < p and 1 <= min(seconds) and max(seconds) < p):
            spans.append(None)
            continue
        spans.append((len(c1s), len(c1s) + len(firsts)))
        c1s.extend(firsts)
        c2s.extend(seconds)
    values = _unmask_all(c1s, c2s, p, sol.a)
    out: list[Plaintext | None] = []
    for span in spans:
        if span is None:
            out.append(None)
            continue
        try:
            out.append(decode_plaintext(values[span[0] : span[1]], p))
        except DecodeError:
            out.append(None)
    return out
