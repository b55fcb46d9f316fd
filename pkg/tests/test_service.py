import pytest
from fastapi.testclient import TestClient

from helpers import corrupt_first_signature, make_reveal_file
from timecapsule.crypto_suite import PkiRegistry
from timecapsule.service.app import app

client = TestClient(app)


def test_health():
    res = client.get("/health")
    assert res.status_code == 200 and res.json()["status"] == "ok"


def test_puzzle_golden():
    res = client.post("/puzzle", json={"lambda_m": 16, "seed": "00" * 32, "mode": "table"})
    assert res.status_code == 200
    body = res.json()
    assert (body["p"], body["g"], body["b"]) == (32843, 2, 30392)
    res = client.post("/puzzle", json={"lambda_m": 16, "seed": "00" * 32, "mode": "pcr"})
    assert (res.json()["p"], res.json()["g"], res.json()["b"]) == (65147, 4999, 43403)


def test_solve():
    res = client.post("/solve", json={"p": 23, "g": 5, "b": 8, "algo": "bsgs"})
    assert res.status_code == 200 and res.json()["a"] == 6


@pytest.mark.parametrize(
    "body",
    [
        {"p": 21, "g": 5, "b": 8},  # not prime
        {"p": 23, "g": 4, "b": 8},  # not a generator
        {"p": 23, "g": 5, "b": 23},  # b out of range
        {"p": 23, "g": 5, "b": 8, "algo": "magic"},
        {"p": (1 << 60) + 33, "g": 5, "b": 8},  # too large to solve here
    ],
)
def test_solve_rejects_bad_input(body):
    assert client.post("/solve", json=body).status_code in (400, 422)


def test_calibrate_with_rate():
    res = client.post("/calibrate", json={"tau_seconds": 1, "algo": "naive", "rate_ops_per_sec": 1e6})
    assert res.status_code == 200 and res.json()["lambda_m"] == 22


def test_verify_true_false_and_decode(tmp_path):
    raw = make_reveal_file(tmp_path / "out.bin", tmp_path / "keys", n=2)
    keys = {i: pk.hex() for i, pk in PkiRegistry.load(tmp_path / "keys").entries.items()}
    res = client.post("/verify", json={"output": raw.hex(), "public_keys": keys})
    assert res.json() == {"ok": True, "failed_check": None, "detail": ""}
    bad = corrupt_first_signature(raw)
    res = client.post("/verify", json={"output": bad.hex(), "public_keys": keys})
    assert res.json()["ok"] is False and res.json()["failed_check"] == "signature[0]"
    res = client.post("/verify", json={"output": raw[:-1].hex(), "public_keys": keys})
    assert res.json()["failed_check"] == "decode"
    res = client.post("/verify", json={"output": raw.hex(), "public_keys": keys, "n_participants": 3})
    assert res.json()["failed_check"] == "entry_count"


def test_verify_block_decode_error():
    res = client.post("/verify-block", json={"block": "00", "public_keys": {}})
    assert res.json()["failed_check"] == "decode"
