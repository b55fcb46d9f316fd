"""Deterministic discrete-log puzzles derived from a seed.

Two generators are provided.  :func:`gen_puz` takes (p, g) from a fixed
difficulty table and samples only ``b``.  :func:`pcr_gen_puz` samples all three
values from the seed's stream, so no per-group precomputation carries over from
one puzzle to the next.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Literal

from .errors import DomainError, TableRangeError, UnknownDifficulty
from .numtheory import (
    is_group_generator,
    is_safe_prime,
    iteration_sample,
)
from .prng import BitStreamCursor, check_seed

PuzzleMode = Literal["table", "pcr"]
SolverAlgo = Literal["naive", "bsgs", "rho"]
SOLVER_ALGOS: tuple[str, ...] = ("naive", "bsgs", "rho")


@dataclass(frozen=True)
class Puzzle:
    p: int
    g: int
    b: int
    lambda_m: int
    mode: PuzzleMode = "table"

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.p, self.g, self.b)


@dataclass(frozen=True)
class PuzzleSolution:
    a: int


@dataclass(frozen=True)
class GroupParams:
    p: int
    g: int


@dataclass
class DifficultyTable:
    rows: dict[int, GroupParams] = field(default_factory=dict)

    def __getitem__(self, lambda_m: int) -> GroupParams:
        try:
            return self.rows[lambda_m]
        except KeyError:
            raise UnknownDifficulty(f"no difficulty table row for lambda_m={lambda_m}") from None

    def __contains__(self, lambda_m: object) -> bool:
        return lambda_m in self.rows

    def lambdas(self) -> list[int]:
        return sorted(self.rows)

    def dumps(self) -> str:
        lines = ["# lambda_m p_hex g_hex"]
        for lam in self.lambdas():
            row = self.rows[lam]
            lines.append(f"{lam} {row.p:x} {row.g:x}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "DifficultyTable":
        rows: dict[int, GroupParams] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 'lambda_m p_hex g_hex'")
            lam, p, g = int(parts[0]), int(parts[1], 16), int(parts[2], 16)
            if lam in rows:
                raise ValueError(f"line {lineno}: duplicate row for lambda_m={lam}")
            rows[lam] = GroupParams(p, g)
        return cls(rows)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "DifficultyTable":
        return cls.loads(Path(path).read_text())

    def validate(self) -> None:
        for lam, row in self.rows.items():
            if not (1 << (lam - 1)) <= row.p < (1 << lam):
                raise DomainError(f"row {lam}: p has the wrong bit length")
            if not is_safe_prime(row.p):
                raise DomainError(f"row {lam}: p is not a safe prime")
            if not is_group_generator(row.p, row.g, check_prime=False):
                raise DomainError(f"row {lam}: g does not generate the group")


@lru_cache(maxsize=None)
def _table_row(lambda_m: int) -> GroupParams:
    if lambda_m < 3:
        raise DomainError("lambda_m must be >= 3")
    p = 1 << (lambda_m - 1)
    while not is_safe_prime(p):
        p += 1
    g = 2
    while not is_group_generator(p, g, check_prime=False):
        g += 1
    return GroupParams(p, g)


def build_difficulty_table(lambda_set: Iterable[int]) -> DifficultyTable:
    """Smallest safe prime >= 2^(lambda_m-1) and its smallest generator, per row."""
    return DifficultyTable({lam: _table_row(lam) for lam in sorted(set(lambda_set))})


CANONICAL_LAMBDAS = range(8, 65)


def canonical_table() -> DifficultyTable:
    """The table used when none is configured: rows for lambda_m 8..64."""
    return build_difficulty_table(CANONICAL_LAMBDAS)


def _b_sample(cursor: BitStreamCursor, p: int, lambda_m: int) -> int:
    b, _ = iteration_sample(cursor, lambda_m, lambda v: 2 <= v <= p - 1)
    return b


def gen_puz(lambda_m: int, seed: bytes, table: DifficultyTable) -> Puzzle:
    row = table[lambda_m]
    cursor = BitStreamCursor(check_seed(seed))
    b = _b_sample(cursor, row.p, lambda_m)
    return Puzzle(row.p, row.g, b, lambda_m, "table")


@dataclass(frozen=True)
class PcrTrace:
    puzzle: Puzzle
    prime_candidates: int
    generator_candidates: int
    b_candidates: int
    bits_consumed: int


def pcr_gen_puz_trace(lambda_m: int, seed: bytes) -> PcrTrace:
    """Run the precomputation-resistant search and report candidate counts."""
    if lambda_m < 8:
        raise DomainError("lambda_m must be >= 8 for PCR puzzles")
    cursor = BitStreamCursor(check_seed(seed))
    top = 1 << (lambda_m - 1)

    p_width = lambda_m - 1
    p_low, p_bits = iteration_sample(cursor, p_width, lambda v: is_safe_prime(top + v))
    p = top + p_low

    g, g_bits = iteration_sample(
        cursor, lambda_m, lambda v: is_group_generator(p, v, check_prime=False)
    )
    b, b_bits = iteration_sample(cursor, lambda_m, lambda v: 2 <= v <= p - 1)
    return PcrTrace(
        puzzle=Puzzle(p, g, b, lambda_m, "pcr"),
        prime_candidates=p_bits // p_width,
        generator_candidates=g_bits // lambda_m,
        b_candidates=b_bits // lambda_m,
        bits_consumed=cursor.position,
    )


def pcr_gen_puz(lambda_m: int, seed: bytes) -> Puzzle:
    return pcr_gen_puz_trace(lambda_m, seed).puzzle


def derive_puzzle(
    lambda_m: int, seed: bytes, mode: PuzzleMode, table: DifficultyTable | None = None
) -> Puzzle:
    if mode == "pcr":
        return pcr_gen_puz(lambda_m, seed)
    if mode == "table":
        if table is None:
            raise UnknownDifficulty("table mode needs a difficulty table")
        return gen_puz(lambda_m, seed, table)
    raise ValueError(f"unknown puzzle mode {mode!r}")


def verify_puzzle_solution(puz: Puzzle, sol: PuzzleSolution) -> bool:
    a = sol.a
    if not isinstance(a, int) or not 1 <= a <= puz.p - 1:
        return False
    return pow(puz.g, a, puz.p) == puz.b


# Expected group operations to solve a puzzle, with group order ~ 2^(lambda_m-1).
# Models, not guarantees: naive scans half the group on average, BSGS builds
# sqrt(n) baby steps and takes up to sqrt(n) giant steps, rho walks about
# sqrt(pi*n/2) ~ 1.25 sqrt(n) steps before a collision.
_COST_COEFF = {"naive": None, "bsgs": 2.0, "rho": 1.25}


def expected_ops(lambda_m: int, algo: str) -> float:
    if algo not in _COST_COEFF:
        raise ValueError(f"unknown solver algorithm {algo!r}")
    n = 2.0 ** (lambda_m - 1)
    if algo == "naive":
        return n / 2
    return _COST_COEFF[algo] * math.sqrt(n)


@dataclass(frozen=True)
class CalibrationTarget:
    tau_seconds: float
    solver_algo: str
    measured_rate_ops_per_sec: float


def calibrate(target: CalibrationTarget, table: DifficultyTable) -> int:
    """Smallest table lambda_m whose expected solve time reaches ``tau``."""
    if target.measured_rate_ops_per_sec <= 0:
        raise DomainError("measured rate must be positive")
    if target.tau_seconds < 0:
        raise DomainError("tau must be non-negative")
    for lam in table.lambdas():
        if expected_ops(lam, target.solver_algo) / target.measured_rate_ops_per_sec >= target.tau_seconds:
            return lam
    raise TableRangeError(
        f"no lambda_m in the table reaches tau={target.tau_seconds}s "
        f"at {target.measured_rate_ops_per_sec:g} ops/s with {target.solver_algo}"
    )

