"""Capsule-Chain: one block of frontrunning-resistant proof of work.

The miner plays coordinator and its users play participants.  Each user's
nonce is the hash of its transaction, and the first leaf of the seed tree
is the hash of the block metadata.  The puzzle therefore binds both the
block contents and its parents, and it is generated fresh per block with
the precomputation-resistant generator.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Sequence

from .crypto_suite import KeyPair, PkiRegistry
from .dl_solver import SolveReport, SolverConfig
from .elgamal import Ciphertext
from .errors import BlockInvalidated, ConfigError, DecodeError
from .merkle import MerkleTree, build
from .mptc.driver import run_commit
from .mptc.messages import CommitEntry, commitment_payload
from .mptc.reveal import (
    KIND_BLOCK,
    RevealedEntry,
    RevealOutput,
    VerifyResult,
    _fail,
    _header,
    _pack_bigint,
    _pack_entries,
    _pack_signatures,
    _Reader,
    reveal,
    verify_output_report,
)
from .mptc.sessions import ParticipantSession, ProtocolParams
from .puzzle import Puzzle, PuzzleSolution

DIGEST = 32


@dataclass(frozen=True)
class Metadata:
    parent_refs: tuple[bytes, ...]
    miner_id: bytes
    height: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "parent_refs", tuple(bytes(r) for r in self.parent_refs))
        if any(len(r) != DIGEST for r in self.parent_refs):
            raise ValueError("parent references must be 32-byte digests")
        if not 0 <= self.height < 1 << 64:
            raise ValueError("height must fit in 64 bits")
        if len(self.miner_id) > 0xFFFF:
            raise ValueError("miner id too long")

    def to_bytes(self) -> bytes:
        return (
            struct.pack(">H", len(self.parent_refs))
            + b"".join(self.parent_refs)
            + struct.pack(">H", len(self.miner_id))
            + bytes(self.miner_id)
            + struct.pack(">Q", self.height)
        )

    @classmethod
    def read_from(cls, r: _Reader) -> "Metadata":
        (count,) = r.unpack(">H")
        refs = tuple(r.take(DIGEST) for _ in range(count))
        (n,) = r.unpack(">H")
        miner = r.take(n)
        (height,) = r.unpack(">Q")
        return cls(refs, miner, height)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Metadata":
        r = _Reader(data)
        meta = cls.read_from(r)
        r.finish()
        return meta

    def digest(self, suite) -> bytes:
        return suite.hash(self.to_bytes())


@dataclass(frozen=True)
class ChainUser:
    """A user submitting one transaction to the miner.

    ``blinding`` fixes r for reproducible runs.  ``encrypted_message`` makes
    the user encrypt something other than the transaction its nonce hashes,
    which is how tests model a cheating user.
    """

    index: int
    keypair: KeyPair
    message: bytes
    blinding: bytes | None = None
    encrypted_message: bytes | None = None


@dataclass(frozen=True)
class ChainCommitResult:
    seed: bytes
    tree: MerkleTree
    puzzle: Puzzle
    ciphertexts: tuple[tuple[Ciphertext, int], ...]  # L_C
    signatures: tuple[bytes, ...]  # L_s
    seed_order: tuple[int, ...]  # L_seed
    commitments: tuple[CommitEntry, ...]  # L_H
    nonces: dict[int, bytes] = field(default_factory=dict)

    @property
    def signed_payload(self) -> bytes:
        return commitment_payload(self.commitments, self.seed)


def chain_params(lambda_m: int, n_users: int = 0, **kwargs) -> ProtocolParams:
    return ProtocolParams(n_users, lambda_m, puzzle_mode="pcr", **kwargs)


def _require_pcr(params: ProtocolParams) -> None:
    if params.puzzle_mode != "pcr":
        raise ConfigError("Capsule-Chain blocks use the precomputation-resistant puzzle mode")


def _registry_for(users: Sequence[ChainUser]) -> PkiRegistry:
    return PkiRegistry({u.index: u.keypair.public_key for u in users})


def chain_commit_protocol(
    metadata: Metadata,
    users: Sequence[ChainUser],
    params: ProtocolParams,
    pki: PkiRegistry | None = None,
) -> ChainCommitResult:
    """Run the chain variant of the commit protocol in memory.

    ``params.n_participants`` is ignored in favour of ``len(users)``; a block
    includes however many users showed up.  With no users the seed tree has
    the metadata leaf alone.
    """
    _require_pcr(params)
    suite = params.suite
    meta_leaf = metadata.digest(suite)
    if not users:
        tree = build([meta_leaf], suite.hash)
        return ChainCommitResult(tree.root, tree, params.puzzle(tree.root), (), (), (), ())

    session_params = ProtocolParams(
        len(users),
        params.lambda_m,
        puzzle_mode="pcr",
        list_policy=params.list_policy,
        suite=suite,
        timeout_secs=params.timeout_secs,
    )
    sessions = [
        ParticipantSession(
            session_params,
            u.index,
            u.keypair,
            u.message,
            chain=True,
            blinding=u.blinding,
            encrypted_message=u.encrypted_message,
        )
        for u in users
    ]
    res = run_commit(session_params, pki or _registry_for(users), sessions, metadata_leaf=meta_leaf)
    return ChainCommitResult(
        seed=res.seed,
        tree=res.tree,
        puzzle=res.puzzle,
        ciphertexts=res.ciphertexts,
        signatures=res.signatures,
        seed_order=res.seed_order,
        commitments=res.commitments,
        nonces=res.nonces,
    )


@dataclass(frozen=True)
class Block:
    metadata: Metadata
    sk_tl: PuzzleSolution
    signatures: tuple[bytes, ...]  # L_s
    seed_order: tuple[int, ...]  # L_seed
    messages: tuple[RevealedEntry, ...]  # L_m
    lambda_m: int
    suite_id: str = "sha-256+ed25519"
    report: SolveReport | None = field(default=None, compare=False, repr=False)

    def to_bytes(self) -> bytes:
        return (
            _header(KIND_BLOCK, self.lambda_m, "pcr", self.suite_id)
            + self.metadata.to_bytes()
            + _pack_bigint(self.sk_tl.a)
            + _pack_signatures(self.signatures)
            + struct.pack(">I", len(self.seed_order))
            + b"".join(struct.pack(">Q", i) for i in self.seed_order)
            + _pack_entries(self.messages)
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "Block":
        r = _Reader(data)
        lambda_m, mode, suite_id = r.header(KIND_BLOCK)
        if mode != "pcr":
            raise DecodeError("block records must use the pcr puzzle mode")
        metadata = Metadata.read_from(r)
        a = r.bigint()
        sigs = r.signatures()
        (count,) = r.unpack(">I")
        order = tuple(r.unpack(">Q")[0] for _ in range(count))
        entries = r.entries()
        r.finish()
        return cls(metadata, PuzzleSolution(a), sigs, order, entries, lambda_m, suite_id)


def create_block(
    metadata: Metadata,
    users: Sequence[ChainUser],
    params: ProtocolParams,
    solver_config: SolverConfig | None = None,
    pki: PkiRegistry | None = None,
) -> Block:
    """Build one block: commit, solve the puzzle, open every transaction.

    Raises BlockInvalidated if some user's opened transaction does not hash
    to the nonce it committed.  The exception carries that user's signature
    over the commitment list, which is public proof of the misbehaviour.
    """
    res = chain_commit_protocol(metadata, users, params, pki)
    out = reveal(res.seed, res.signatures, res.ciphertexts, params, solver_config)
    suite = params.suite
    for j, entry in enumerate(out.messages):
        if not entry.decodable:
            reason = "ciphertext does not decode"
        elif suite.hash(entry.message or b"") != res.nonces[entry.index]:
            reason = "opened transaction does not match the committed nonce"
        else:
            continue
        raise BlockInvalidated(entry.index, res.signatures[j], res.signed_payload, reason)
    return Block(
        metadata=metadata,
        sk_tl=out.sk_tl,
        signatures=out.signatures,
        seed_order=res.seed_order,
        messages=out.messages,
        lambda_m=params.lambda_m,
        suite_id=suite.config.suite_id,
        report=out.report,
    )


def block_seed(block: Block, suite) -> bytes | None:
    """Rebuild the seed tree root, or None if the block cannot be rebuilt."""
    by_index = {e.index: e for e in block.messages}
    if len(by_index) != len(block.messages) or sorted(block.seed_order) != sorted(by_index):
        return None
    leaves = [block.metadata.digest(suite)]
    for i in block.seed_order:
        entry = by_index[i]
        if entry.message is None:
            return None
        leaves.append(suite.hash(entry.message))
    return build(leaves, suite.hash).root


def verify_block_report(block: Block, params: ProtocolParams, pki: PkiRegistry) -> VerifyResult:
    if params.puzzle_mode != "pcr":
        return _fail("params", "blocks are verified in pcr mode")
    if len(set(block.seed_order)) != len(block.seed_order):
        return _fail("seed_order", "L_seed repeats an index")
    if sorted(block.seed_order) != sorted(e.index for e in block.messages):
        return _fail("seed_order", "L_seed is not a permutation of the block's users")
    seed = block_seed(block, params.suite)
    if seed is None:
        return _fail("seed_order", "seed tree cannot be rebuilt from the block")
    out = RevealOutput(
        seed=seed,
        sk_tl=block.sk_tl,
        signatures=block.signatures,
        messages=block.messages,
        lambda_m=block.lambda_m,
        puzzle_mode="pcr",
        suite_id=block.suite_id,
    )
    return verify_output_report(params, out, pki, expect_n=False)


def verify_block(block: Block, params: ProtocolParams, pki: PkiRegistry) -> bool:
    return verify_block_report(block, params, pki).ok


def linearity_check(blocks: Sequence[Block], params: ProtocolParams) -> bool:
    """True iff every block derives a different puzzle.

    A block whose seed cannot be rebuilt makes the check fail.
    """
    seen: set[tuple[int, int, int]] = set()
    for block in blocks:
        seed = block_seed(block, params.suite)
        if seed is None:
            return False
        puz = params.puzzle(seed)
        key = (puz.p, puz.g, puz.b)
        if key in seen:
            return False
        seen.add(key)
    return True
