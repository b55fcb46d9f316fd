"""Participant and coordinator state machines for the commit phase.

Both machines are transport-agnostic: they take one decoded message at a time
and return what should be sent next.  The in-memory driver and the TCP server
in :mod:`timecapsule.net` feed them identically.
"""

from __future__ import annotations

import enum
import secrets
import time
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

from ..crypto_suite import DEFAULT_SUITE, CryptoSuite, KeyPair, PkiRegistry
from ..elgamal import BLINDING_BYTES, Ciphertext, Plaintext, encrypt
from ..merkle import MerkleTree, build, prove, verify_mp
from ..puzzle import DifficultyTable, Puzzle, PuzzleMode, build_difficulty_table, derive_puzzle
from .messages import (
    DIGEST,
    AbortMsg,
    CommitEntry,
    CommitHashMsg,
    CommitListMsg,
    Message,
    NonceMsg,
    SeedProofMsg,
    SignedCiphertextMsg,
    commitment_payload,
)

ListPolicy = Literal["arrival", "lex"]
DEFAULT_TIMEOUT_SECS = 30.0


@dataclass(frozen=True)
class ProtocolParams:
    n_participants: int
    lambda_m: int
    puzzle_mode: PuzzleMode = "table"
    table: DifficultyTable | None = field(default=None, compare=False)
    list_policy: ListPolicy = "arrival"
    suite: CryptoSuite = field(default=DEFAULT_SUITE, compare=False)
    timeout_secs: float = DEFAULT_TIMEOUT_SECS

    def __post_init__(self) -> None:
        if self.n_participants < 0:
            raise ValueError("n_participants must be >= 0")
        if self.list_policy not in ("arrival", "lex"):
            raise ValueError(f"unknown list policy {self.list_policy!r}")
        if self.puzzle_mode not in ("table", "pcr"):
            raise ValueError(f"unknown puzzle mode {self.puzzle_mode!r}")
        if self.puzzle_mode == "table":
            if self.table is None:
                # the canonical table is a pure function of lambda_m
                object.__setattr__(self, "table", build_difficulty_table([self.lambda_m]))
            else:
                self.table[self.lambda_m]  # raises UnknownDifficulty

    @property
    def lambda_h(self) -> int:
        return self.suite.config.hash_output_bits

    def puzzle(self, seed: bytes) -> Puzzle:
        return derive_puzzle(self.lambda_m, seed, self.puzzle_mode, self.table)


def order_pairs(pairs: Sequence[tuple[bytes, int]], policy: ListPolicy) -> list[tuple[bytes, int]]:
    """Apply the list policy to (value, index) pairs given in arrival order."""
    if policy == "lex":
        return sorted(pairs)
    return list(pairs)


class AbortReason(str, enum.Enum):
    BAD_SEED_PROOF = "BadSeedProof"
    COMMITMENT_MISSING = "CommitmentMissing"
    PROTOCOL_VIOLATION = "ProtocolViolation"
    TIMEOUT = "Timeout"
    PARTICIPANT_ABORTED = "ParticipantAborted"


class RejectReason(str, enum.Enum):
    BAD_SIGNATURE = "BadSignature"
    COMMITMENT_MISMATCH = "CommitmentMismatch"
    DUPLICATE_INDEX = "DuplicateIndex"
    UNKNOWN_INDEX = "UnknownIndex"
    UNEXPECTED_MESSAGE = "UnexpectedMessage"
    MALFORMED = "Malformed"


class ParticipantPhase(enum.Enum):
    START = "start"
    AWAIT_SEED = "await_seed"
    AWAIT_LIST = "await_list"
    DONE = "done"
    ABORTED = "aborted"


class ParticipantSession:
    """One participant's view of the commit protocol.

    ``chain=True`` switches to the Capsule-Chain variant: the nonce is the
    hash of the message and the Merkle proof is checked against that.
    ``nonce`` and ``blinding`` are fixed-randomness hooks for tests.
    ``encrypted_message`` lets adversarial tests encrypt something other than
    the message the nonce was derived from.
    """

    def __init__(
        self,
        params: ProtocolParams,
        index: int,
        keypair: KeyPair,
        message: bytes,
        *,
        chain: bool = False,
        nonce: bytes | None = None,
        blinding: bytes | None = None,
        encrypted_message: bytes | None = None,
    ):
        self.params = params
        self.suite = params.suite
        self.index = index
        self.keypair = keypair
        self.message = bytes(message)
        self.chain = chain
        if chain:
            self.nonce = self.suite.hash(self.message)
        else:
            self.nonce = nonce if nonce is not None else secrets.token_bytes(DIGEST)
        self._blinding = blinding
        self._encrypted_message = self.message if encrypted_message is None else encrypted_message
        self.phase = ParticipantPhase.START
        self.abort_reason: AbortReason | None = None
        self.seed: bytes | None = None
        self.puzzle: Puzzle | None = None
        self.plaintext: Plaintext | None = None
        self.ciphertext: Ciphertext | None = None
        self.digest: bytes | None = None
        self.signature: bytes | None = None

    def start(self) -> Message:
        if self.phase is not ParticipantPhase.START:
            return self.abort(AbortReason.PROTOCOL_VIOLATION)
        self.phase = ParticipantPhase.AWAIT_SEED
        return NonceMsg(self.index, self.nonce)

    def abort(self, reason: AbortReason) -> AbortMsg:
        """Abort for good; later calls keep returning the first reason."""
        if self.phase is not ParticipantPhase.ABORTED:
            self.phase = ParticipantPhase.ABORTED
            self.abort_reason = reason
        assert self.abort_reason is not None
        return AbortMsg(self.abort_reason.value, self.index)

    def handle(self, msg: Message | None) -> Message | None:
        """Process one incoming message; return the reply (if any).

        On any failed check the session aborts for good and every later call
        returns the same :class:`AbortMsg`.
        """
        if self.phase is ParticipantPhase.ABORTED:
            return self.abort(AbortReason.PROTOCOL_VIOLATION)
        if msg is None:
            return self.start()
        if isinstance(msg, AbortMsg):
            return self.abort(AbortReason.PROTOCOL_VIOLATION)
        if self.phase is ParticipantPhase.AWAIT_SEED and isinstance(msg, SeedProofMsg):
            return self._on_seed(msg)
        if self.phase is ParticipantPhase.AWAIT_LIST and isinstance(msg, CommitListMsg):
            return self._on_list(msg)
        return self.abort(AbortReason.PROTOCOL_VIOLATION)

    def _on_seed(self, msg: SeedProofMsg) -> Message:
        if not verify_mp(msg.seed, msg.proof, self.nonce, self.suite.hash):
            return self.abort(AbortReason.BAD_SEED_PROOF)
        self.seed = msg.seed
        self.puzzle = self.params.puzzle(msg.seed)
        blinding = self._blinding if self._blinding is not None else secrets.token_bytes(BLINDING_BYTES)
        self.plaintext = Plaintext(self._encrypted_message, blinding)
        self.ciphertext = encrypt(self.plaintext, self.puzzle, msg.seed, self.suite)
        self.digest = self.suite.hash(self.ciphertext.to_bytes())
        self.phase = ParticipantPhase.AWAIT_LIST
        return CommitHashMsg(self.digest, self.index)

    def _on_list(self, msg: CommitListMsg) -> Message:
        mine = [e for e in msg.entries if e.digest == self.digest]
        if len(mine) != 1 or mine[0].index != self.index:
            return self.abort(AbortReason.COMMITMENT_MISSING)
        assert self.seed is not None and self.ciphertext is not None
        self.signature = self.suite.sign(
            self.keypair.secret_key, commitment_payload(msg.entries, self.seed)
        )
        self.phase = ParticipantPhase.DONE
        return SignedCiphertextMsg(self.index, self.signature, self.ciphertext)


def participant_step(session: ParticipantSession, incoming: Message | None) -> Message | None:
    return session.handle(incoming)


class CoordinatorPhase(enum.Enum):
    AWAIT_NONCES = "await_nonces"
    AWAIT_COMMITS = "await_commits"
    AWAIT_CIPHERTEXTS = "await_ciphertexts"
    DONE = "done"
    ABORTED = "aborted"


@dataclass
class CoordinatorStep:
    outgoing: list[tuple[int, Message]] = field(default_factory=list)
    rejected: tuple[int, RejectReason] | None = None
    complete: bool = False


@dataclass
class CommitResult:
    seed: bytes
    puzzle: Puzzle
    tree: MerkleTree
    commitments: tuple[CommitEntry, ...]  # L_H
    signatures: tuple[bytes, ...]  # L_s
    ciphertexts: tuple[tuple[Ciphertext, int], ...]  # L_C
    seed_order: tuple[int, ...]  # participant index per tree leaf (L_seed)
    nonces: dict[int, bytes]
    seed_fixed_at: float

    @property
    def signed_payload(self) -> bytes:
        return commitment_payload(self.commitments, self.seed)


class CoordinatorSession:
    """The coordinator side of one commit session with N participants.

    ``metadata_leaf`` (Capsule-Chain) is placed as the first leaf of the seed
    tree ahead of the participants' nonces.
    """

    def __init__(
        self,
        params: ProtocolParams,
        pki: PkiRegistry,
        *,
        metadata_leaf: bytes | None = None,
        clock: Callable[[], float] = time.monotonic,
    ):
        if params.n_participants < 1:
            raise ValueError("a coordinator session needs at least one participant")
        self.params = params
        self.suite = params.suite
        self.pki = pki
        self.metadata_leaf = metadata_leaf
        self.clock = clock
        self.phase = CoordinatorPhase.AWAIT_NONCES
        self.phase_started = clock()
        self.abort_reason: str | None = None
        self.admitted: set[int] = set()
        self.rejections: list[tuple[int, RejectReason]] = []

        self._nonces: dict[int, bytes] = {}
        self._nonce_arrival: list[tuple[bytes, int]] = []
        self._commits: dict[int, bytes] = {}
        self._commit_arrival: list[tuple[bytes, int]] = []
        self.seed: bytes | None = None
        self.seed_fixed_at: float | None = None
        self.tree: MerkleTree | None = None
        self.puzzle: Puzzle | None = None
        self.seed_order: tuple[int, ...] = ()
        self.commitments: tuple[CommitEntry, ...] = ()
        self._slot: dict[int, int] = {}
        self._signatures: list[bytes | None] = []
        self._ciphertexts: list[tuple[Ciphertext, int] | None] = []

    @property
    def n(self) -> int:
        return self.params.n_participants

    @property
    def deadline(self) -> float:
        return self.phase_started + self.params.timeout_secs

    def _enter(self, phase: CoordinatorPhase) -> None:
        self.phase = phase
        self.phase_started = self.clock()

    def abort(self, reason: str) -> None:
        if self.phase not in (CoordinatorPhase.DONE, CoordinatorPhase.ABORTED):
            self.phase = CoordinatorPhase.ABORTED
            self.abort_reason = reason

    def expire(self, now: float | None = None) -> bool:
        """Abort if the current phase has outlived the timeout."""
        now = self.clock() if now is None else now
        if self.phase in (CoordinatorPhase.DONE, CoordinatorPhase.ABORTED):
            return False
        if now >= self.deadline:
            self.abort(f"{AbortReason.TIMEOUT.value} in {self.phase.value}")
            return True
        return False

    def admit(self, index: int) -> RejectReason | None:
        """Register a connection for ``index``; one connection per index."""
        if index not in self.pki:
            return RejectReason.UNKNOWN_INDEX
        if index in self.admitted:
            return RejectReason.DUPLICATE_INDEX
        if len(self.admitted) >= self.n:
            return RejectReason.UNEXPECTED_MESSAGE
        self.admitted.add(index)
        return None

    def _reject(self, index: int, reason: RejectReason) -> CoordinatorStep:
        self.rejections.append((index, reason))
        return CoordinatorStep(rejected=(index, reason))

    def handle(self, index: int, msg: Message) -> CoordinatorStep:
        """Process one message received on participant ``index``'s channel."""
        if self.phase in (CoordinatorPhase.DONE, CoordinatorPhase.ABORTED):
            return self._reject(index, RejectReason.UNEXPECTED_MESSAGE)
        if isinstance(msg, AbortMsg):
            self.abort(f"{AbortReason.PARTICIPANT_ABORTED.value}: {index}: {msg.reason}")
            return CoordinatorStep()
        if getattr(msg, "index", index) != index:
            return self._reject(index, RejectReason.MALFORMED)
        if self.phase is CoordinatorPhase.AWAIT_NONCES and isinstance(msg, NonceMsg):
            return self._on_nonce(index, msg)
        if self.phase is CoordinatorPhase.AWAIT_COMMITS and isinstance(msg, CommitHashMsg):
            return self._on_commit(index, msg)
        if self.phase is CoordinatorPhase.AWAIT_CIPHERTEXTS and isinstance(msg, SignedCiphertextMsg):
            return self._on_ciphertext(index, msg)
        return self._reject(index, RejectReason.UNEXPECTED_MESSAGE)

    def _on_nonce(self, index: int, msg: NonceMsg) -> CoordinatorStep:
        if index not in self.pki:
            return self._reject(index, RejectReason.UNKNOWN_INDEX)
        if index in self._nonces:
            return self._reject(index, RejectReason.DUPLICATE_INDEX)
        if len(msg.nonce) != DIGEST:
            return self._reject(index, RejectReason.MALFORMED)
        self._nonces[index] = msg.nonce
        self._nonce_arrival.append((msg.nonce, index))
        if len(self._nonces) < self.n:
            return CoordinatorStep()

        ordered = order_pairs(self._nonce_arrival, self.params.list_policy)
        self.seed_order = tuple(i for _, i in ordered)
        leaves = [nonce for nonce, _ in ordered]
        offset = 0
        if self.metadata_leaf is not None:
            leaves.insert(0, self.metadata_leaf)
            offset = 1
        self.tree = build(leaves, self.suite.hash)
        self.seed = self.tree.root
        self.seed_fixed_at = self.clock()
        self.puzzle = self.params.puzzle(self.seed)
        out: list[tuple[int, Message]] = [
            (i, SeedProofMsg(self.seed, prove(self.tree, pos + offset)))
            for pos, i in enumerate(self.seed_order)
        ]
        self._enter(CoordinatorPhase.AWAIT_COMMITS)
        return CoordinatorStep(outgoing=out)

    def _on_commit(self, index: int, msg: CommitHashMsg) -> CoordinatorStep:
        if index not in self._nonces:
            return self._reject(index, RejectReason.UNKNOWN_INDEX)
        if index in self._commits:
            return self._reject(index, RejectReason.DUPLICATE_INDEX)
        if len(msg.digest) != DIGEST:
            return self._reject(index, RejectReason.MALFORMED)
        self._commits[index] = msg.digest
        self._commit_arrival.append((msg.digest, index))
        if len(self._commits) < self.n:
            return CoordinatorStep()

        ordered = order_pairs(self._commit_arrival, self.params.list_policy)
        self.commitments = tuple(CommitEntry(d, i) for d, i in ordered)
        self._slot = {e.index: j for j, e in enumerate(self.commitments)}
        self._signatures = [None] * self.n
        self._ciphertexts = [None] * self.n
        listing = CommitListMsg(self.commitments)
        self._enter(CoordinatorPhase.AWAIT_CIPHERTEXTS)
        return CoordinatorStep(outgoing=[(e.index, listing) for e in self.commitments])

    def _on_ciphertext(self, index: int, msg: SignedCiphertextMsg) -> CoordinatorStep:
        j = self._slot.get(index)
        if j is None:
            return self._reject(index, RejectReason.UNKNOWN_INDEX)
        if self._signatures[j] is not None:
            return self._reject(index, RejectReason.DUPLICATE_INDEX)
        assert self.seed is not None
        payload = commitment_payload(self.commitments, self.seed)
        if not self.suite.verify_sig(self.pki.lookup(index), payload, msg.signature):
            return self._reject(index, RejectReason.BAD_SIGNATURE)
        if self.commitments[j] != CommitEntry(self.suite.hash(msg.ciphertext.to_bytes()), index):
            return self._reject(index, RejectReason.COMMITMENT_MISMATCH)
        self._signatures[j] = msg.signature
        self._ciphertexts[j] = (msg.ciphertext, index)
        if any(s is None for s in self._signatures):
            return CoordinatorStep()
        self._enter(CoordinatorPhase.DONE)
        return CoordinatorStep(complete=True)

    def result(self) -> CommitResult:
        if self.phase is not CoordinatorPhase.DONE:
            raise RuntimeError(f"commit phase not complete (phase={self.phase.value})")
        assert self.seed is not None and self.puzzle is not None and self.tree is not None
        assert self.seed_fixed_at is not None
        return CommitResult(
            seed=self.seed,
            puzzle=self.puzzle,
            tree=self.tree,
            commitments=self.commitments,
            signatures=tuple(s for s in self._signatures if s is not None),
            ciphertexts=tuple(c for c in self._ciphertexts if c is not None),
            seed_order=self.seed_order,
            nonces=dict(self._nonces),
            seed_fixed_at=self.seed_fixed_at,
        )


def coordinator_step(session: CoordinatorSession, index: int, incoming: Message) -> CoordinatorStep:
    return session.handle(index, incoming)
