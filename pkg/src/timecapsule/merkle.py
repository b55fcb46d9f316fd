"""Merkle tree with domain-separated hashing and odd-node promotion.

Leaves hash as ``H(0x00 || leaf)`` and internal nodes as
``H(0x01 || left || right)``.  When a level has an odd node count the last
node moves up unchanged.  Leaves are kept in the order given.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Sequence

from .crypto_suite import DEFAULT_SUITE
from .errors import DecodeError, DomainError

HashFn = Callable[[bytes], bytes]

LEFT = 0  # sibling sits to the left of the running hash
RIGHT = 1


def _leaf_hash(hash_fn: HashFn, leaf: bytes) -> bytes:
    return hash_fn(b"\x00" + bytes(leaf))


def _node_hash(hash_fn: HashFn, left: bytes, right: bytes) -> bytes:
    return hash_fn(b"\x01" + left + right)


@dataclass(frozen=True)
class MerkleTree:
    levels: tuple[tuple[bytes, ...], ...]  # levels[0] are the leaf digests

    @property
    def leaves(self) -> tuple[bytes, ...]:
        return self.levels[0]

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    def __len__(self) -> int:
        return len(self.levels[0])


@dataclass(frozen=True)
class MerkleProof:
    leaf_index: int
    path: tuple[tuple[bytes, int], ...]  # (sibling digest, LEFT | RIGHT)

    def to_bytes(self) -> bytes:
        out = [struct.pack(">IH", self.leaf_index, len(self.path))]
        for sibling, side in self.path:
            out.append(bytes([side]) + sibling)
        return b"".join(out)

    @classmethod
    def read_from(cls, data: bytes, digest_size: int = 32) -> tuple["MerkleProof", bytes]:
        if len(data) < 6:
            raise DecodeError("truncated Merkle proof header")
        index, n = struct.unpack_from(">IH", data)
        pos = 6
        path = []
        for _ in range(n):
            if pos + 1 + digest_size > len(data):
                raise DecodeError("truncated Merkle proof path")
            side = data[pos]
            if side not in (LEFT, RIGHT):
                raise DecodeError(f"bad proof side byte {side}")
            path.append((data[pos + 1 : pos + 1 + digest_size], side))
            pos += 1 + digest_size
        return cls(index, tuple(path)), data[pos:]

    @classmethod
    def from_bytes(cls, data: bytes, digest_size: int = 32) -> "MerkleProof":
        proof, rest = cls.read_from(data, digest_size)
        if rest:
            raise DecodeError("trailing bytes after Merkle proof")
        return proof


def build(leaves: Sequence[bytes], hash_fn: HashFn = DEFAULT_SUITE.hash) -> MerkleTree:
    if not leaves:
        raise DomainError("a Merkle tree needs at least one leaf")
    level = tuple(_leaf_hash(hash_fn, leaf) for leaf in leaves)
    levels = [level]
    while len(level) > 1:
        nxt = [_node_hash(hash_fn, level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = tuple(nxt)
        levels.append(level)
    return MerkleTree(tuple(levels))


def prove(tree: MerkleTree, index: int) -> MerkleProof:
    if not 0 <= index < len(tree):
        raise IndexError(f"leaf index {index} out of range for {len(tree)} leaves")
    path = []
    pos = index
    for level in tree.levels[:-1]:
        if pos % 2:
            path.append((level[pos - 1], LEFT))
        elif pos + 1 < len(level):
            path.append((level[pos + 1], RIGHT))
        # else: promoted, no sibling at this level
        pos //= 2
    return MerkleProof(index, tuple(path))


def verify_mp(root: bytes, proof: MerkleProof, leaf: bytes, hash_fn: HashFn = DEFAULT_SUITE.hash) -> bool:
    acc = _leaf_hash(hash_fn, leaf)
    for sibling, side in proof.path:
        if side == LEFT:
            acc = _node_hash(hash_fn, sibling, acc)
        elif side == RIGHT:
            acc = _node_hash(hash_fn, acc, sibling)
        else:
            return False
    return acc == bytes(root)
