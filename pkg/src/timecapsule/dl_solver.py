"""Discrete-log solvers used to open a puzzle.

All three solvers work in the full group Z*_p of order p - 1 = 2q.  Because the
puzzle generator is a full-group generator, the exponent is unique in
[1, p - 1] and every solver returns the same value.
"""

from __future__ import annotations

import math
import random
import threading
import time
from dataclasses import dataclass
from typing import Callable, Mapping

from .errors import ConfigError, ResourceError
from .puzzle import SOLVER_ALGOS, Puzzle, PuzzleSolution, verify_puzzle_solution

ProgressCallback = Callable[[int], None]

# An r-adding walk with r >= 20 behaves close to a random mapping; the classic
# 3-partition walk needs ~35% more steps in these groups.
RHO_PARTITIONS = 32
RHO_DP_FRACTION = 64  # a point is distinguished with probability ~64/sqrt(n)
RHO_MAX_TRAIL_FACTOR = 20


@dataclass
class SolverConfig:
    algo: str = "naive"
    workers: int = 1
    progress_interval_ops: int = 0
    progress: ProgressCallback | None = None
    rng_seed: int | None = None
    max_table_entries: int = 1 << 26

    def __post_init__(self) -> None:
        if self.algo not in SOLVER_ALGOS:
            raise ConfigError(f"unknown solver algorithm {self.algo!r}; choose from {SOLVER_ALGOS}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.progress_interval_ops < 0:
            raise ConfigError("progress_interval_ops must be >= 0")

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "SolverConfig":
        try:
            return cls(
                algo=str(values.get("algo", "naive")),
                workers=int(values.get("workers", 1)),
                progress_interval_ops=int(values.get("progress_interval_ops", 0)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class SolveReport:
    solution: PuzzleSolution
    ops_performed: int
    wall_seconds: float


class _Progress:
    def __init__(self, config: SolverConfig | None):
        self.cb = config.progress if config else None
        self.every = config.progress_interval_ops if config else 0
        self.next_at = self.every

    def tick(self, ops: int) -> None:
        if self.cb is not None and self.every and ops >= self.next_at:
            self.cb(ops)
            self.next_at = ops - ops % self.every + self.every


def solve_naive(puz: Puzzle, config: SolverConfig | None = None) -> SolveReport:
    """Linear scan over exponents with one multiplication per step."""
    start = time.perf_counter()
    p, g, b = puz.p, puz.g, puz.b
    progress = _Progress(config)
    x = g % p
    if progress.cb is None or not progress.every:
        for i in range(1, p):
            if x == b:
                return SolveReport(PuzzleSolution(i), i, time.perf_counter() - start)
            x = x * g % p
    else:
        for i in range(1, p):
            if x == b:
                return SolveReport(PuzzleSolution(i), i, time.perf_counter() - start)
            x = x * g % p
            if i >= progress.next_at:
                progress.tick(i)
    raise ValueError("no solution: g does not generate b")


def solve_bsgs(puz: Puzzle, config: SolverConfig | None = None) -> SolveReport:
    start = time.perf_counter()
    p, g, b = puz.p, puz.g, puz.b
    n = p - 1
    m = math.isqrt(n - 1) + 1  # ceil(sqrt(n))
    cap = config.max_table_entries if config else SolverConfig().max_table_entries
    if m > cap:
        raise ResourceError(f"baby-step table needs {m} entries, cap is {cap}")
    progress = _Progress(config)

    table: dict[int, int] = {}
    x = 1
    for j in range(m):
        table.setdefault(x, j)
        x = x * g % p
    ops = m
    factor = pow(g, n - m, p)  # g^-m
    y = b
    for i in range(m + 1):
        j = table.get(y)
        if j is not None:
            a = (i * m + j) % n or n
            return SolveReport(PuzzleSolution(a), ops, time.perf_counter() - start)
        y = y * factor % p
        ops += 1
        progress.tick(ops)
    raise ValueError("no solution: g does not generate b")


def _solve_congruence(coef: int, rhs: int, n: int, check: Callable[[int], bool]) -> int | None:
    """Find x with coef*x = rhs (mod n) that also passes ``check``."""
    d = math.gcd(coef, n)
    if d == n or rhs % d:
        return None
    # d in {1, 2, q} for n = 2q; anything large gives too many candidates
    if d > 1 << 16:
        return None
    nd = n // d
    x0 = (rhs // d) * pow(coef // d, -1, nd) % nd
    for k in range(d):
        x = x0 + k * nd
        if check(x):
            return x
    return None


class _RhoShared:
    def __init__(self) -> None:
        self.lock = threading.Lock()
        self.found = threading.Event()
        self.points: dict[int, tuple[int, int]] = {}
        self.answer: int | None = None
        self.ops = 0


def _rho_worker(
    puz: Puzzle,
    mults: list[tuple[int, int, int]],
    dp_mod: int,
    max_trail: int,
    rng: random.Random,
    shared: _RhoShared,
    progress: _Progress | None,
) -> None:
    p, g, h = puz.p, puz.g, puz.b
    n = p - 1
    r = len(mults)

    def is_answer(x: int) -> bool:
        return 1 <= x <= n and pow(g, x, p) == h

    while not shared.found.is_set():
        a, bexp = rng.randrange(n), rng.randrange(n)
        x = pow(g, a, p) * pow(h, bexp, p) % p
        steps = 1  # the trail start counts as one operation
        while (x // r) % dp_mod and steps < max_trail:
            m, da, db = mults[x % r]
            x = x * m % p
            a += da
            bexp += db
            steps += 1
        with shared.lock:
            shared.ops += steps
            if progress is not None:
                progress.tick(shared.ops)
        if steps >= max_trail:
            continue  # probably stuck in a cycle without a distinguished point
        a %= n
        bexp %= n
        with shared.lock:
            prev = shared.points.setdefault(x, (a, bexp))
        if prev == (a, bexp):
            continue
        pa, pb = prev
        # g^a h^b = g^pa h^pb  =>  (b - pb) * log(h) = pa - a  (mod n)
        sol = _solve_congruence((bexp - pb) % n, (pa - a) % n, n, is_answer)
        if sol is not None:
            with shared.lock:
                if shared.answer is None:
                    shared.answer = sol
            shared.found.set()
            return


def solve_rho(puz: Puzzle, config: SolverConfig | None = None) -> SolveReport:
    """Pollard rho with an r-adding walk and distinguished points.

    Each worker starts fresh trails from random exponents and stops a trail at
    the first distinguished point; two trails meeting at the same point give a
    linear relation for the logarithm.  ``ops_performed`` counts walk steps
    plus one per trail start.
    """
    config = config or SolverConfig(algo="rho")
    start = time.perf_counter()
    p, g, h = puz.p, puz.g, puz.b
    n = p - 1
    if h == g:
        return SolveReport(PuzzleSolution(1), 0, time.perf_counter() - start)
    if h == 1:
        # log is n itself, which the congruence step never proposes
        return SolveReport(PuzzleSolution(n), 0, time.perf_counter() - start)

    master = random.Random(config.rng_seed)
    mults = []
    for _ in range(RHO_PARTITIONS):
        da, db = master.randrange(n), master.randrange(n)
        mults.append((pow(g, da, p) * pow(h, db, p) % p, da, db))
    dp_mod = max(4, round(math.sqrt(n) / RHO_DP_FRACTION))
    max_trail = RHO_MAX_TRAIL_FACTOR * dp_mod + 64
    shared = _RhoShared()
    progress = _Progress(config) if config.progress else None
    rngs = [random.Random(master.getrandbits(64)) for _ in range(config.workers)]

    if config.workers == 1:
        _rho_worker(puz, mults, dp_mod, max_trail, rngs[0], shared, progress)
    else:
        threads = [
            threading.Thread(
                target=_rho_worker,
                args=(puz, mults, dp_mod, max_trail, rng, shared, progress),
                daemon=True,
            )
            for rng in rngs
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    assert shared.answer is not None
    return SolveReport(PuzzleSolution(shared.answer), shared.ops, time.perf_counter() - start)


_SOLVERS = {"naive": solve_naive, "bsgs": solve_bsgs, "rho": solve_rho}


def solve(puz: Puzzle, config: SolverConfig | None = None) -> SolveReport:
    config = config or SolverConfig()
    try:
        solver = _SOLVERS[config.algo]
    except KeyError:
        raise ConfigError(f"unknown solver algorithm {config.algo!r}") from None
    report = solver(puz, config)
    if not verify_puzzle_solution(puz, report.solution):
        raise AssertionError(f"{config.algo} returned a wrong logarithm")
    return report


def measure_rate(algo: str = "naive", lambda_m: int = 24, seconds: float = 0.5) -> float:
    """Rough group operations per second for ``algo``'s inner loop."""
    from .puzzle import build_difficulty_table

    row = build_difficulty_table([lambda_m])[lambda_m]
    p, g = row.p, row.g
    x, ops = g, 0
    deadline = time.perf_counter() + seconds
    t0 = time.perf_counter()
    while time.perf_counter() < deadline:
        for _ in range(10_000):
            x = x * g % p
        ops += 10_000
    rate = ops / (time.perf_counter() - t0)
    if algo == "naive":
        return rate
    # bsgs and rho pay a dict operation per step on top of the multiplication
    return rate / 2.5
