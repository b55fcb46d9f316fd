import hashlib
import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timecapsule.crypto_suite import (
    DEFAULT_SUITE,
    CryptoSuite,
    PkiRegistry,
    SuiteConfig,
    hash_bytes,
    load_keypair,
    write_keypair,
)

EMPTY_SHA256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


def test_hash_empty_golden():
    assert hash_bytes(b"").hex() == EMPTY_SHA256


def test_hash_deterministic_and_fixed_length():
    for n in (0, 1, 55, 64, 4096):
        data = os.urandom(n)
        assert DEFAULT_SUITE.hash(data) == DEFAULT_SUITE.hash(data)
        assert len(DEFAULT_SUITE.hash(data)) == 32 == DEFAULT_SUITE.digest_size


def test_hash_extension_changes_digest():
    for _ in range(10_000):
        x = os.urandom(16)
        assert DEFAULT_SUITE.hash(x) != DEFAULT_SUITE.hash(x + b"\x00")


def test_sign_roundtrip_many():
    for _ in range(1000):
        pair = DEFAULT_SUITE.keygen()
        msg = os.urandom(40)
        assert DEFAULT_SUITE.verify_sig(pair.public_key, msg, DEFAULT_SUITE.sign(pair.secret_key, msg))


def test_signature_binding_and_rejections():
    pair, other = DEFAULT_SUITE.keygen(), DEFAULT_SUITE.keygen()
    sig = DEFAULT_SUITE.sign(pair.secret_key, b"m")
    assert DEFAULT_SUITE.sign(pair.secret_key, b"m") == sig  # deterministic
    assert not DEFAULT_SUITE.verify_sig(pair.public_key, b"m\x01", sig)
    assert not DEFAULT_SUITE.verify_sig(other.public_key, b"m", sig)
    flipped = bytes([sig[0] ^ 1]) + sig[1:]
    assert not DEFAULT_SUITE.verify_sig(pair.public_key, b"m", flipped)
    assert not DEFAULT_SUITE.verify_sig(pair.public_key, b"m", b"")
    assert not DEFAULT_SUITE.verify_sig(b"short", b"m", sig)


def test_signed_payload_is_domain_separated():
    # a raw Ed25519 signature over the bare message must not verify
    from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

    pair = DEFAULT_SUITE.keygen()
    raw = Ed25519PrivateKey.from_private_bytes(pair.secret_key).sign(b"payload")
    assert not DEFAULT_SUITE.verify_sig(pair.public_key, b"payload", raw)


def test_malformed_secret_key_is_key_error():
    with pytest.raises(KeyError):
        DEFAULT_SUITE.sign(b"\x01\x02", b"m")


def test_other_hash_suites():
    for hid, fn in (("sha3-256", hashlib.sha3_256), ("blake2s-256", hashlib.blake2s)):
        suite = CryptoSuite(SuiteConfig(suite_id=f"{hid}+ed25519", hash_id=hid))
        assert suite.hash(b"abc") == fn(b"abc").digest()


def test_suite_id_separates_signatures():
    other = CryptoSuite(SuiteConfig(suite_id="sha-256+ed25519-alt"))
    pair = DEFAULT_SUITE.keygen()
    sig = DEFAULT_SUITE.sign(pair.secret_key, b"m")
    assert not other.verify_sig(pair.public_key, b"m", sig)


def test_pki_registry():
    reg = PkiRegistry()
    reg.register(1, b"a" * 32)
    assert reg.lookup(1) == b"a" * 32
    assert 1 in reg and 2 not in reg
    with pytest.raises(KeyError):
        reg.lookup(2)
    with pytest.raises(ValueError):
        reg.register(1, b"b" * 32)
    with pytest.raises(ValueError):
        reg.register(0, b"b" * 32)


def test_pki_lookup_is_pure():
    reg = PkiRegistry.from_mapping({2: b"x" * 32, 1: b"y" * 32})
    assert [reg.lookup(1), reg.lookup(2)] == [reg.lookup(1), reg.lookup(2)]
    assert PkiRegistry.from_mapping({1: b"y" * 32, 2: b"x" * 32}) == reg


def test_key_directory_roundtrip(tmp_path):
    pairs = {i: DEFAULT_SUITE.keygen() for i in (1, 2, 5)}
    for i, pair in pairs.items():
        write_keypair(tmp_path, i, pair)
    (tmp_path / "notes.pub").write_text("ignored")
    reg = PkiRegistry.load(tmp_path)
    assert sorted(reg.entries) == [1, 2, 5]
    for i, pair in pairs.items():
        assert reg.lookup(i) == pair.public_key
        assert load_keypair(tmp_path, i) == pair
        assert (tmp_path / f"{i}.pub").read_text().strip() == pair.public_key.hex()
    assert oct((tmp_path / "1.key").stat().st_mode & 0o777) == "0o600"


@settings(max_examples=50, deadline=None)
@given(st.binary(max_size=256))
def test_sign_verify_property(msg):
    pair = DEFAULT_SUITE.keypair_from_secret(b"\x07" * 32)
    assert DEFAULT_SUITE.verify_sig(pair.public_key, msg, DEFAULT_SUITE.sign(pair.secret_key, msg))
