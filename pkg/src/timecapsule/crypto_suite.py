"""Hash, signature and PKI primitives.

Everything protocol-level goes through a :class:`CryptoSuite` so the hash and
signature scheme can be swapped by id.  The default suite is SHA-256 with
Ed25519; Ed25519 signatures are deterministic, which keeps reveal outputs
byte-reproducible.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

PROTOCOL_TAG = b"MPTC1"

_HASHES: dict[str, Callable[[bytes], bytes]] = {
    "sha-256": lambda data: hashlib.sha256(data).digest(),
    "sha3-256": lambda data: hashlib.sha3_256(data).digest(),
    "blake2s-256": lambda data: hashlib.blake2s(data).digest(),
}


@dataclass(frozen=True)
class SuiteConfig:
    suite_id: str = "sha-256+ed25519"
    hash_id: str = "sha-256"
    hash_output_bits: int = 256
    sig_scheme_id: str = "ed25519"

    def __post_init__(self) -> None:
        if self.hash_id not in _HASHES:
            raise KeyError(f"unknown hash id {self.hash_id!r}")
        if self.sig_scheme_id != "ed25519":
            raise KeyError(f"unknown signature scheme {self.sig_scheme_id!r}")
        if self.hash_output_bits != 256:
            raise ValueError("only 256-bit hash outputs are supported")
        if not self.suite_id.isascii():
            raise ValueError("suite_id must be ascii")


@dataclass(frozen=True)
class KeyPair:
    secret_key: bytes
    public_key: bytes

    def __repr__(self) -> str:
        return f"KeyPair(public_key={self.public_key.hex()})"


class CryptoSuite:
    """A concrete hash + signature pairing identified by ``config.suite_id``."""

    def __init__(self, config: SuiteConfig | None = None):
        self.config = config or SuiteConfig()
        self._hash = _HASHES[self.config.hash_id]
        self.domain = PROTOCOL_TAG + self.config.suite_id.encode("ascii")

    @property
    def digest_size(self) -> int:
        return self.config.hash_output_bits // 8

    def hash(self, data: bytes) -> bytes:
        return self._hash(bytes(data))

    def keygen(self) -> KeyPair:
        sk = Ed25519PrivateKey.generate()
        return self._pair(sk)

    def keypair_from_secret(self, secret_key: bytes) -> KeyPair:
        return self._pair(_load_secret(secret_key))

    def sign(self, sk: bytes, msg: bytes) -> bytes:
        return _load_secret(sk).sign(self.domain + msg)

    def verify_sig(self, pk: bytes, msg: bytes, sig: bytes) -> bool:
        try:
            key = Ed25519PublicKey.from_public_bytes(bytes(pk))
            key.verify(bytes(sig), self.domain + bytes(msg))
        except (InvalidSignature, ValueError, TypeError):
            return False
        return True

    @staticmethod
    def _pair(sk: Ed25519PrivateKey) -> KeyPair:
        from cryptography.hazmat.primitives import serialization as ser

        raw_sk = sk.private_bytes(ser.Encoding.Raw, ser.PrivateFormat.Raw, ser.NoEncryption())
        raw_pk = sk.public_key().public_bytes(ser.Encoding.Raw, ser.PublicFormat.Raw)
        return KeyPair(secret_key=raw_sk, public_key=raw_pk)


def _load_secret(sk: bytes) -> Ed25519PrivateKey:
    try:
        return Ed25519PrivateKey.from_private_bytes(bytes(sk))
    except (ValueError, TypeError) as exc:
        raise KeyError(f"malformed secret key: {exc}") from None


DEFAULT_SUITE = CryptoSuite()


def hash_bytes(data: bytes) -> bytes:
    return DEFAULT_SUITE.hash(data)


def sign(sk: bytes, msg: bytes) -> bytes:
    return DEFAULT_SUITE.sign(sk, msg)


def verify_sig(pk: bytes, msg: bytes, sig: bytes) -> bool:
    return DEFAULT_SUITE.verify_sig(pk, msg, sig)


@dataclass
class PkiRegistry:
    """Participant index -> public key.  Indices start at 1."""

    entries: dict[int, bytes] = field(default_factory=dict)

    def register(self, index: int, public_key: bytes) -> None:
        if index < 1:
            raise ValueError(f"participant index must be >= 1, got {index}")
        if index in self.entries:
            raise ValueError(f"index {index} already registered")
        self.entries[index] = bytes(public_key)

    def lookup(self, index: int) -> bytes:
        try:
            return self.entries[index]
        except KeyError:
            raise KeyError(f"participant {index} is not registered") from None

    def __contains__(self, index: object) -> bool:
        return index in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, bytes]) -> "PkiRegistry":
        reg = cls()
        for idx, pk in sorted(mapping.items()):
            reg.register(int(idx), pk)
        return reg

    @classmethod
    def load(cls, key_dir: str | Path) -> "PkiRegistry":
        """Read every ``<index>.pub`` file (lowercase hex) in ``key_dir``."""
        reg = cls()
        for path in sorted(Path(key_dir).glob("*.pub")):
            if not path.stem.isdigit():
                continue
            reg.register(int(path.stem), bytes.fromhex(path.read_text().strip()))
        return reg


def write_keypair(key_dir: str | Path, index: int, pair: KeyPair) -> None:
    key_dir = Path(key_dir)
    key_dir.mkdir(parents=True, exist_ok=True)
    (key_dir / f"{index}.pub").write_text(pair.public_key.hex() + "\n")
    secret = key_dir / f"{index}.key"
    secret.write_text(pair.secret_key.hex() + "\n")
    secret.chmod(0o600)


def load_keypair(key_dir: str | Path, index: int, suite: CryptoSuite = DEFAULT_SUITE) -> KeyPair:
    path = Path(key_dir) / f"{index}.key"
    try:
        raw = bytes.fromhex(path.read_text().strip())
    except ValueError:
        raise KeyError(f"{path} does not contain hex") from None
    return suite.keypair_from_secret(raw)
