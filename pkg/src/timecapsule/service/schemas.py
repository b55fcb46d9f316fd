"""Request and response bodies for the HTTP service.

Byte strings travel as lowercase hex.  Group elements are plain JSON
integers since every supported lambda_m fits comfortably in a double-free
Python int on both ends.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator

Mode = Literal["table", "pcr"]
Algo = Literal["naive", "bsgs", "rho"]

# Solving is brute force; refuse work that would pin the server for hours.
MAX_SOLVE_BITS = 48


def _check_hex(value: str) -> str:
    try:
        bytes.fromhex(value)
    except ValueError:
        raise ValueError("expected an even-length hex string") from None
    return value.lower()


class Health(BaseModel):
    status: str = "ok"
    version: str


class PuzzleRequest(BaseModel):
    lambda_m: int = Field(ge=8, le=MAX_SOLVE_BITS)
    seed: str = Field(description="32-byte seed, hex")
    mode: Mode = "table"

    _hex = field_validator("seed")(_check_hex)


class PuzzleResponse(BaseModel):
    p: int
    g: int
    b: int
    lambda_m: int
    mode: Mode


class SolveRequest(BaseModel):
    p: int = Field(gt=4)
    g: int = Field(gt=1)
    b: int = Field(gt=0)
    algo: Algo = "naive"
    workers: int = Field(default=1, ge=1, le=64)

    @field_validator("p")
    @classmethod
    def _small_enough(cls, p: int) -> int:
        if p.bit_length() > MAX_SOLVE_BITS:
            raise ValueError(f"p has more than {MAX_SOLVE_BITS} bits")
        return p


class SolveResponse(BaseModel):
    a: int
    ops_performed: int
    wall_seconds: float
    algo: Algo


class CalibrateRequest(BaseModel):
    tau_seconds: float = Field(ge=0)
    algo: Algo = "naive"
    rate_ops_per_sec: Optional[float] = Field(default=None, gt=0)


class CalibrateResponse(BaseModel):
    lambda_m: int
    tau_seconds: float
    algo: Algo
    rate_ops_per_sec: float
    expected_seconds: float


class VerifyRequest(BaseModel):
    output: str = Field(description="reveal output file, hex")
    public_keys: dict[int, str]
    n_participants: Optional[int] = Field(default=None, ge=1)

    _hex = field_validator("output")(_check_hex)


class VerifyBlockRequest(BaseModel):
    block: str = Field(description="block file, hex")
    public_keys: dict[int, str]

    _hex = field_validator("block")(_check_hex)


class VerifyResponse(BaseModel):
    ok: bool
    failed_check: Optional[str] = None
    detail: str = ""
