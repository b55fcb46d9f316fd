"""Shared builders for tests that need real output files on disk."""

from __future__ import annotations

import dataclasses
from pathlib import Path

from conftest import fixed_keypair, registry_for
from timecapsule.crypto_suite import write_keypair
from timecapsule.mptc import ParticipantSession, ProtocolParams, RevealOutput, reveal, run_commit


def write_keys(key_dir: Path, indices) -> dict:
    pairs = {i: fixed_keypair(i) for i in indices}
    for i, pair in pairs.items():
        write_keypair(key_dir, i, pair)
    return pairs


def make_reveal_file(path: Path, key_dir: Path, n: int = 3, lambda_m: int = 16, mode: str = "table") -> bytes:
    indices = list(range(1, n + 1))
    pairs = write_keys(key_dir, indices)
    params = ProtocolParams(n, lambda_m, puzzle_mode=mode)
    parts = [ParticipantSession(params, i, pairs[i], b"bid %d" % i) for i in indices]
    res = run_commit(params, registry_for(pairs, indices), parts)
    raw = reveal(res.seed, res.signatures, res.ciphertexts, params).to_bytes()
    path.write_bytes(raw)
    return raw


def corrupt_first_signature(raw: bytes) -> bytes:
    out = RevealOutput.from_bytes(raw)
    sig = out.signatures[0]
    bad = bytes([sig[0] ^ 1]) + sig[1:]
    return dataclasses.replace(out, signatures=(bad,) + out.signatures[1:]).to_bytes()
