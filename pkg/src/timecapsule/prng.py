"""Seekable pseudo-random bit stream keyed by a 32-byte seed.

The stream is the ChaCha20 keystream under the seed with an all-zero nonce.
Bit ``k`` of the stream is bit ``7 - k % 8`` of keystream byte ``k // 8``
(most significant bit first), so reads at arbitrary offsets are cheap.
"""

from __future__ import annotations

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms

from .errors import StreamCapExceeded

SEED_BYTES = 32
STREAM_CAP_BITS = 1 << 32
_BLOCK = 64
_REFILL_BYTES = 4096


def check_seed(seed: bytes) -> bytes:
    seed = bytes(seed)
    if len(seed) != SEED_BYTES:
        raise ValueError(f"seed must be {SEED_BYTES} bytes, got {len(seed)}")
    return seed


def _keystream(seed: bytes, byte_offset: int, n_bytes: int) -> bytes:
    block, skip = divmod(byte_offset, _BLOCK)
    # cryptography's 16-byte nonce is a little-endian 32-bit block counter
    # followed by the 96-bit nonce (RFC 7539 layout)
    nonce = block.to_bytes(4, "little") + bytes(12)
    enc = Cipher(algorithms.ChaCha20(seed, nonce), mode=None).encryptor()
    return enc.update(bytes(skip + n_bytes))[skip:]


def _check_range(first_bit: int, bit_count: int) -> None:
    if first_bit < 0 or bit_count < 0:
        raise ValueError("first_bit and bit_count must be non-negative")
    if first_bit + bit_count > STREAM_CAP_BITS:
        raise StreamCapExceeded(
            f"read of {bit_count} bits at {first_bit} exceeds the {STREAM_CAP_BITS}-bit cap"
        )


def prng_int(seed: bytes, first_bit: int, bit_count: int) -> int:
    """Bits ``[first_bit, first_bit + bit_count)`` read as a big-endian integer."""
    seed = check_seed(seed)
    _check_range(first_bit, bit_count)
    if bit_count == 0:
        return 0
    start = first_bit // 8
    end = (first_bit + bit_count + 7) // 8
    chunk = int.from_bytes(_keystream(seed, start, end - start), "big")
    tail = end * 8 - (first_bit + bit_count)
    return (chunk >> tail) & ((1 << bit_count) - 1)


def prng_bits(seed: bytes, first_bit: int, bit_count: int) -> str:
    """The same bits as :func:`prng_int`, as a ``'0'``/``'1'`` string."""
    if bit_count == 0:
        _check_range(first_bit, 0)
        return ""
    return format(prng_int(seed, first_bit, bit_count), f"0{bit_count}b")


class BitStreamCursor:
    """Sequential reader over the stream; buffers keystream between reads."""

    def __init__(self, seed: bytes, position: int = 0):
        self.seed = check_seed(seed)
        self.position = position
        self._buf = b""
        self._buf_start = 0  # byte offset of _buf[0]

    def read(self, n_bits: int) -> int:
        _check_range(self.position, n_bits)
        if n_bits == 0:
            return 0
        start = self.position // 8
        end = (self.position + n_bits + 7) // 8
        if start < self._buf_start or end > self._buf_start + len(self._buf):
            want = max(end - start, _REFILL_BYTES)
            want = min(want, STREAM_CAP_BITS // 8 - start)
            self._buf = _keystream(self.seed, start, want)
            self._buf_start = start
        lo = start - self._buf_start
        chunk = int.from_bytes(self._buf[lo : lo + end - start], "big")
        tail = end * 8 - (self.position + n_bits)
        self.position += n_bits
        return (chunk >> tail) & ((1 << n_bits) - 1)

    def __repr__(self) -> str:
        return f"BitStreamCursor(seed={self.seed.hex()[:16]}..., position={self.position})"
