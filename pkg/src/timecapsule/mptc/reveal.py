"""Opening a committed session and checking a published result."""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass, field
from typing import Sequence

from ..crypto_suite import PkiRegistry
from ..dl_solver import SolveReport, SolverConfig, solve
from ..elgamal import BLINDING_BYTES, Ciphertext, Plaintext, decrypt_many, encrypt
from ..errors import DecodeError
from ..numtheory import int_from_bytes, int_to_bytes
from ..puzzle import PuzzleSolution, verify_puzzle_solution
from .messages import CommitEntry, commitment_payload
from .sessions import ProtocolParams

MAGIC = b"MPTC1"
FILE_VERSION = 1
KIND_REVEAL = 0x01
KIND_BLOCK = 0x02
_UNDECODABLE = 0xFFFFFFFF
_MODES = {"table": 0, "pcr": 1}


@dataclass(frozen=True)
class RevealedEntry:
    """One slot of L_m.  ``message`` is None when the ciphertext did not decode."""

    index: int
    message: bytes | None
    blinding: bytes | None

    @property
    def decodable(self) -> bool:
        return self.message is not None and self.blinding is not None


@dataclass(frozen=True)
class RevealOutput:
    seed: bytes
    sk_tl: PuzzleSolution
    signatures: tuple[bytes, ...]
    messages: tuple[RevealedEntry, ...]
    lambda_m: int
    puzzle_mode: str = "table"
    suite_id: str = "sha-256+ed25519"
    report: SolveReport | None = field(default=None, compare=False, repr=False)

    def to_bytes(self) -> bytes:
        return (
            _header(KIND_REVEAL, self.lambda_m, self.puzzle_mode, self.suite_id)
            + self.seed
            + _pack_bigint(self.sk_tl.a)
            + _pack_signatures(self.signatures)
            + _pack_entries(self.messages)
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "RevealOutput":
        r = _Reader(data)
        lambda_m, mode, suite_id = r.header(KIND_REVEAL)
        seed = r.take(32)
        a = r.bigint()
        sigs = r.signatures()
        entries = r.entries()
        r.finish()
        return cls(seed, PuzzleSolution(a), sigs, entries, lambda_m, mode, suite_id)


def _header(kind: int, lambda_m: int, mode: str, suite_id: str) -> bytes:
    sid = suite_id.encode("ascii")
    return MAGIC + bytes([kind, FILE_VERSION]) + struct.pack(">HBB", lambda_m, _MODES[mode], len(sid)) + sid


def _pack_bigint(n: int) -> bytes:
    raw = int_to_bytes(n)
    return struct.pack(">H", len(raw)) + raw


def _pack_signatures(sigs: Sequence[bytes]) -> bytes:
    return struct.pack(">I", len(sigs)) + b"".join(struct.pack(">H", len(s)) + s for s in sigs)


def _pack_entries(entries: Sequence[RevealedEntry]) -> bytes:
    out = [struct.pack(">I", len(entries))]
    for e in entries:
        if e.decodable:
            assert e.message is not None and e.blinding is not None
            out.append(struct.pack(">Q", e.index) + e.blinding + struct.pack(">I", len(e.message)) + e.message)
        else:
            out.append(struct.pack(">Q", e.index) + bytes(BLINDING_BYTES) + struct.pack(">I", _UNDECODABLE))
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = bytes(data)
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise DecodeError("truncated file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def header(self, kind: int) -> tuple[int, str, str]:
        if self.take(5) != MAGIC:
            raise DecodeError("bad magic")
        got_kind, version = self.take(2)
        if got_kind != kind:
            raise DecodeError(f"expected record kind {kind}, found {got_kind}")
        if version != FILE_VERSION:
            raise DecodeError(f"unsupported file version {version}")
        lambda_m, mode_id, sid_len = self.unpack(">HBB")
        modes = {v: k for k, v in _MODES.items()}
        if mode_id not in modes:
            raise DecodeError(f"unknown puzzle mode id {mode_id}")
        return lambda_m, modes[mode_id], self.take(sid_len).decode("ascii")

    def bigint(self) -> int:
        (n,) = self.unpack(">H")
        return int_from_bytes(self.take(n))

    def signatures(self) -> tuple[bytes, ...]:
        (count,) = self.unpack(">I")
        out = []
        for _ in range(count):
            (n,) = self.unpack(">H")
            out.append(self.take(n))
        return tuple(out)

    def entries(self) -> tuple[RevealedEntry, ...]:
        (count,) = self.unpack(">I")
        out = []
        for _ in range(count):
            (index,) = self.unpack(">Q")
            blinding = self.take(BLINDING_BYTES)
            (mlen,) = self.unpack(">I")
            if mlen == _UNDECODABLE:
                out.append(RevealedEntry(index, None, None))
            else:
                out.append(RevealedEntry(index, self.take(mlen), blinding))
        return tuple(out)

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise DecodeError(f"{len(self.data) - self.pos} trailing bytes")


def reveal(
    seed: bytes,
    signatures: Sequence[bytes],
    ciphertexts: Sequence[tuple[Ciphertext, int]],
    params: ProtocolParams,
    solver_config: SolverConfig | None = None,
) -> RevealOutput:
    """Solve the puzzle derived from ``seed`` and decrypt every ciphertext in order.

    A ciphertext that does not decode is kept as an undecodable slot; the
    output then fails verification, which is the caller's signal that some
    participant committed garbage.
    """
    puzzle = params.puzzle(seed)
    report = solve(puzzle, solver_config)
    opened = decrypt_many([ct for ct, _ in ciphertexts], puzzle, report.solution)
    entries = [
        RevealedEntry(index, None, None) if pt is None else RevealedEntry(index, pt.message, pt.blinding)
        for (_, index), pt in zip(ciphertexts, opened)
    ]
    return RevealOutput(
        seed=seed,
        sk_tl=report.solution,
        signatures=tuple(signatures),
        messages=tuple(entries),
        lambda_m=params.lambda_m,
        puzzle_mode=params.puzzle_mode,
        suite_id=params.suite.config.suite_id,
        report=report,
    )


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    failed_check: str | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _fail(check: str, detail: str = "") -> VerifyResult:
    return VerifyResult(False, check, detail)


def verify_output_report(
    params: ProtocolParams,
    out: RevealOutput,
    pki: PkiRegistry,
    *,
    expect_n: bool = True,
) -> VerifyResult:
    """Check a reveal output and name the first failing check, if any."""
    suite = params.suite
    if out.lambda_m != params.lambda_m or out.puzzle_mode != params.puzzle_mode:
        return _fail("params", "lambda_m or puzzle mode differ from the verifier's parameters")
    if out.suite_id != suite.config.suite_id:
        return _fail("params", f"suite {out.suite_id!r} is not {suite.config.suite_id!r}")
    if len(out.seed) != suite.digest_size:
        return _fail("seed", "seed has the wrong length")
    n = len(out.messages)
    if len(out.signatures) != n:
        return _fail("entry_count", f"{len(out.signatures)} signatures for {n} messages")
    if expect_n and n != params.n_participants:
        return _fail("entry_count", f"{n} entries, expected {params.n_participants}")
    if len({e.index for e in out.messages}) != n:
        return _fail("entry_count", "duplicate participant index")

    puzzle = params.puzzle(out.seed)
    if not verify_puzzle_solution(puzzle, out.sk_tl):
        return _fail("puzzle_solution", "Sk_TL does not solve the puzzle derived from seed")

    commitments = []
    for j, entry in enumerate(out.messages):
        if not entry.decodable:
            return _fail(f"message[{j}]", f"participant {entry.index} committed an undecodable ciphertext")
        assert entry.message is not None and entry.blinding is not None
        try:
            pt = Plaintext(entry.message, entry.blinding)
        except ValueError as exc:
            return _fail(f"message[{j}]", str(exc))
        ct = encrypt(pt, puzzle, out.seed, suite)
        commitments.append(CommitEntry(suite.hash(ct.to_bytes()), entry.index))

    payload = commitment_payload(commitments, out.seed)
    for j, (entry, sig) in enumerate(zip(out.messages, out.signatures)):
        try:
            pk = pki.lookup(entry.index)
        except KeyError:
            return _fail(f"pki[{j}]", f"participant {entry.index} is not registered")
        if not suite.verify_sig(pk, payload, sig):
            return _fail(f"signature[{j}]", f"signature of participant {entry.index} does not match")
    return VerifyResult(True)


def verify_output(params: ProtocolParams, out: RevealOutput, pki: PkiRegistry) -> bool:
    return verify_output_report(params, out, pki).ok


def timed_reveal(
    seed: bytes,
    signatures: Sequence[bytes],
    ciphertexts: Sequence[tuple[Ciphertext, int]],
    params: ProtocolParams,
    solver_config: SolverConfig | None = None,
) -> tuple[RevealOutput, float]:
    t0 = time.perf_counter()
    out = reveal(seed, signatures, ciphertexts, params, solver_config)
    return out, time.perf_counter() - t0
