"""Commit-protocol messages and their canonical payload encodings."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import ClassVar, Sequence, Union

from ..elgamal import Ciphertext
from ..errors import DecodeError
from ..merkle import MerkleProof

DIGEST = 32


@dataclass(frozen=True)
class CommitEntry:
    digest: bytes
    index: int

    def to_bytes(self) -> bytes:
        return self.digest + struct.pack(">Q", self.index)


def commitment_payload(entries: Sequence[CommitEntry], seed: bytes) -> bytes:
    """The bytes every participant signs: seed, entry count, then entries.

    The suite prepends its ``MPTC1 || suite_id`` domain tag when signing.
    """
    return bytes(seed) + struct.pack(">I", len(entries)) + b"".join(e.to_bytes() for e in entries)


def _read_entries(data: bytes, pos: int) -> tuple[tuple[CommitEntry, ...], int]:
    if pos + 4 > len(data):
        raise DecodeError("truncated commitment list")
    (count,) = struct.unpack_from(">I", data, pos)
    pos += 4
    if pos + count * (DIGEST + 8) > len(data):
        raise DecodeError("truncated commitment list entries")
    entries = []
    for _ in range(count):
        digest = data[pos : pos + DIGEST]
        (index,) = struct.unpack_from(">Q", data, pos + DIGEST)
        entries.append(CommitEntry(digest, index))
        pos += DIGEST + 8
    return tuple(entries), pos


def _take(data: bytes, pos: int, n: int, what: str) -> tuple[bytes, int]:
    if pos + n > len(data):
        raise DecodeError(f"truncated {what}")
    return data[pos : pos + n], pos + n


def _done(data: bytes, pos: int, what: str) -> None:
    if pos != len(data):
        raise DecodeError(f"{len(data) - pos} trailing bytes in {what}")


@dataclass(frozen=True)
class NonceMsg:
    TYPE: ClassVar[int] = 0x01
    index: int
    nonce: bytes

    def payload(self) -> bytes:
        return struct.pack(">Q", self.index) + self.nonce

    @classmethod
    def parse(cls, data: bytes) -> "NonceMsg":
        raw, pos = _take(data, 0, 8, "nonce index")
        nonce, pos = _take(data, pos, DIGEST, "nonce")
        _done(data, pos, "nonce message")
        return cls(struct.unpack(">Q", raw)[0], nonce)


@dataclass(frozen=True)
class SeedProofMsg:
    TYPE: ClassVar[int] = 0x02
    seed: bytes
    proof: MerkleProof

    def payload(self) -> bytes:
        return self.seed + self.proof.to_bytes()

    @classmethod
    def parse(cls, data: bytes) -> "SeedProofMsg":
        seed, pos = _take(data, 0, DIGEST, "seed")
        proof, rest = MerkleProof.read_from(data[pos:], DIGEST)
        if rest:
            raise DecodeError("trailing bytes after seed proof")
        return cls(seed, proof)


@dataclass(frozen=True)
class CommitHashMsg:
    TYPE: ClassVar[int] = 0x03
    digest: bytes
    index: int

    def payload(self) -> bytes:
        return self.digest + struct.pack(">Q", self.index)

    @classmethod
    def parse(cls, data: bytes) -> "CommitHashMsg":
        digest, pos = _take(data, 0, DIGEST, "commitment digest")
        raw, pos = _take(data, pos, 8, "commitment index")
        _done(data, pos, "commitment message")
        return cls(digest, struct.unpack(">Q", raw)[0])


@dataclass(frozen=True)
class CommitListMsg:
    TYPE: ClassVar[int] = 0x04
    entries: tuple[CommitEntry, ...]

    def payload(self) -> bytes:
        return struct.pack(">I", len(self.entries)) + b"".join(e.to_bytes() for e in self.entries)

    @classmethod
    def parse(cls, data: bytes) -> "CommitListMsg":
        entries, pos = _read_entries(data, 0)
        _done(data, pos, "commitment list")
        return cls(entries)


@dataclass(frozen=True)
class SignedCiphertextMsg:
    TYPE: ClassVar[int] = 0x05
    index: int
    signature: bytes
    ciphertext: Ciphertext

    def payload(self) -> bytes:
        return (
            struct.pack(">QH", self.index, len(self.signature))
            + self.signature
            + self.ciphertext.to_bytes()
        )

    @classmethod
    def parse(cls, data: bytes) -> "SignedCiphertextMsg":
        raw, pos = _take(data, 0, 10, "signed ciphertext header")
        index, siglen = struct.unpack(">QH", raw)
        sig, pos = _take(data, pos, siglen, "signature")
        ct = Ciphertext.from_bytes(data[pos:])
        return cls(index, sig, ct)


@dataclass(frozen=True)
class AbortMsg:
    TYPE: ClassVar[int] = 0x06
    reason: str
    index: int = 0

    def payload(self) -> bytes:
        raw = self.reason.encode("utf-8")
        return struct.pack(">QH", self.index, len(raw)) + raw

    @classmethod
    def parse(cls, data: bytes) -> "AbortMsg":
        raw, pos = _take(data, 0, 10, "abort header")
        index, n = struct.unpack(">QH", raw)
        text, pos = _take(data, pos, n, "abort reason")
        _done(data, pos, "abort message")
        try:
            return cls(text.decode("utf-8"), index)
        except UnicodeDecodeError:
            raise DecodeError("abort reason is not utf-8") from None


Message = Union[NonceMsg, SeedProofMsg, CommitHashMsg, CommitListMsg, SignedCiphertextMsg, AbortMsg]
MESSAGE_TYPES: dict[int, type] = {
    cls.TYPE: cls
    for cls in (NonceMsg, SeedProofMsg, CommitHashMsg, CommitListMsg, SignedCiphertextMsg, AbortMsg)
}
# Capsule-Chain sessions reuse the same bodies under 0x10..0x15.
CHAIN_TYPE_OFFSET = 0x0F
