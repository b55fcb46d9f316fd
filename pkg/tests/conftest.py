from __future__ import annotations

import pytest

from timecapsule.crypto_suite import DEFAULT_SUITE, PkiRegistry

# criterion number -> (passed, detail); filled in by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def fixed_keypair(index: int):
    return DEFAULT_SUITE.keypair_from_secret(bytes([index % 256]) * 31 + bytes([index // 256]))


@pytest.fixture(scope="session")
def keypairs():
    return {i: fixed_keypair(i) for i in range(1, 61)}


def registry_for(pairs, indices) -> PkiRegistry:
    return PkiRegistry.from_mapping({i: pairs[i].public_key for i in indices})


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
