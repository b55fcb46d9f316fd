"""Modular arithmetic, primality and rejection sampling over Python ints."""

from __future__ import annotations

import random
from typing import Callable, Protocol

from .errors import DomainError, SamplingExhausted

MR_ROUNDS = 40

_SMALL_PRIMES = (
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
    73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151,
    157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229, 233,
)
# Bases 2..41 decide primality exactly below this bound.
_DETERMINISTIC_LIMIT = 3317044064679887385961981
_DETERMINISTIC_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


class BitSource(Protocol):
    position: int

    def read(self, n_bits: int) -> int: ...


def mod_pow(base: int, exp: int, modulus: int) -> int:
    if modulus < 2:
        raise DomainError(f"modulus must be >= 2, got {modulus}")
    if exp < 0:
        raise DomainError("negative exponents are not supported")
    return pow(base, exp, modulus)


def int_to_bytes(n: int) -> bytes:
    """Big-endian, minimal length; zero encodes as b""."""
    if n < 0:
        raise DomainError("negative integers have no canonical encoding")
    return n.to_bytes((n.bit_length() + 7) // 8, "big")


def int_from_bytes(data: bytes) -> int:
    return int.from_bytes(data, "big")


def _mr_witness(n: int, d: int, s: int, a: int) -> bool:
    """True if ``a`` proves ``n`` composite."""
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return False
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return False
    return True


def miller_rabin(n: int, rounds: int = MR_ROUNDS) -> bool:
    """Miller-Rabin with ``rounds`` bases.

    Bases are drawn from a generator seeded by ``n`` itself, so the verdict is
    reproducible across runs; below ~3.3e24 a fixed base set is used, which is
    exact.
    """
    if rounds < 1:
        raise DomainError("rounds must be >= 1")
    if n < 2:
        return False
    for sp in _SMALL_PRIMES:
        if n == sp:
            return True
        if n % sp == 0:
            return False
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    if n < _DETERMINISTIC_LIMIT:
        bases = _DETERMINISTIC_BASES
    else:
        rng = random.Random(n)
        bases = tuple(rng.randrange(2, n - 1) for _ in range(rounds))
    return not any(_mr_witness(n, d, s, a) for a in bases)


def is_safe_prime(p: int, rounds: int = MR_ROUNDS) -> bool:
    # checking q first is cheaper on average: half of all odd p have even q
    if p < 5 or p % 2 == 0:
        return False
    return miller_rabin((p - 1) // 2, rounds) and miller_rabin(p, rounds)


def is_group_generator(p: int, g: int, *, check_prime: bool = True) -> bool:
    """Whether ``g`` generates the full multiplicative group mod safe prime ``p``.

    The group has order 2q, so g is a generator iff neither g^2 nor g^q is 1.
    """
    if check_prime and not is_safe_prime(p):
        raise DomainError(f"{p} is not a safe prime")
    if not 2 <= g <= p - 1:
        return False
    q = (p - 1) // 2
    return pow(g, 2, p) != 1 and pow(g, q, p) != 1


def default_max_iterations(width_bits: int) -> int:
    return 64 * width_bits * width_bits


def iteration_sample(
    stream: BitSource,
    width_bits: int,
    accept: Callable[[int], bool],
    max_iterations: int | None = None,
) -> tuple[int, int]:
    """Read ``width_bits`` chunks until ``accept`` holds; return (value, bits used).

    Rejection sampling of this kind yields a uniform draw over the accepted
    set whenever the chunks themselves are uniform.
    """
    if width_bits < 1:
        raise DomainError("width_bits must be positive")
    cap = default_max_iterations(width_bits) if max_iterations is None else max_iterations
    consumed = 0
    for _ in range(cap):
        value = stream.read(width_bits)
        consumed += width_bits
        if accept(value):
            return value, consumed
    raise SamplingExhausted(f"no accepted {width_bits}-bit value after {cap} draws")
