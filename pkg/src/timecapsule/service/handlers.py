"""Plain functions behind each endpoint.

The HTTP app and the local CLI both call these, so a command gives the same
answer whether or not it goes through the server.
"""

from __future__ import annotations

from ..capsule_chain import Block, chain_params, verify_block_report
from ..crypto_suite import PkiRegistry
from ..dl_solver import SolverConfig, measure_rate, solve as run_solver
from ..errors import DecodeError, DomainError
from ..mptc.reveal import RevealOutput, verify_output_report
from ..mptc.sessions import ProtocolParams
from ..numtheory import is_group_generator, is_safe_prime
from ..puzzle import CalibrationTarget, DifficultyTable, Puzzle, calibrate as pick_lambda, canonical_table
from ..puzzle import derive_puzzle, expected_ops
from .schemas import (
    CalibrateRequest,
    CalibrateResponse,
    PuzzleRequest,
    PuzzleResponse,
    SolveRequest,
    SolveResponse,
    VerifyBlockRequest,
    VerifyRequest,
    VerifyResponse,
)


def puzzle(req: PuzzleRequest, table: DifficultyTable | None = None) -> PuzzleResponse:
    seed = bytes.fromhex(req.seed)
    if len(seed) != 32:
        raise DomainError("seed must be 32 bytes")
    if req.mode == "table" and table is None:
        table = canonical_table()
    puz = derive_puzzle(req.lambda_m, seed, req.mode, table)
    return PuzzleResponse(p=puz.p, g=puz.g, b=puz.b, lambda_m=puz.lambda_m, mode=puz.mode)


def solve(req: SolveRequest) -> SolveResponse:
    if not is_safe_prime(req.p):
        raise DomainError("p is not a safe prime")
    if not 2 <= req.g <= req.p - 1 or not is_group_generator(req.p, req.g, check_prime=False):
        raise DomainError("g does not generate Z*_p")
    if not 1 <= req.b <= req.p - 1:
        raise DomainError("b must lie in [1, p-1]")
    puz = Puzzle(req.p, req.g, req.b, req.p.bit_length())
    report = run_solver(puz, SolverConfig(algo=req.algo, workers=req.workers))
    return SolveResponse(
        a=report.solution.a,
        ops_performed=report.ops_performed,
        wall_seconds=report.wall_seconds,
        algo=req.algo,
    )


def calibrate(req: CalibrateRequest, table: DifficultyTable | None = None) -> CalibrateResponse:
    rate = req.rate_ops_per_sec or measure_rate(req.algo)
    lam = pick_lambda(CalibrationTarget(req.tau_seconds, req.algo, rate), table or canonical_table())
    return CalibrateResponse(
        lambda_m=lam,
        tau_seconds=req.tau_seconds,
        algo=req.algo,
        rate_ops_per_sec=rate,
        expected_seconds=expected_ops(lam, req.algo) / rate,
    )


def _registry(keys: dict[int, str]) -> PkiRegistry:
    return PkiRegistry.from_mapping({int(i): bytes.fromhex(pk) for i, pk in keys.items()})


def verify(req: VerifyRequest, table: DifficultyTable | None = None) -> VerifyResponse:
    """Check a reveal output.  Parameters come from the file's own header."""
    try:
        out = RevealOutput.from_bytes(bytes.fromhex(req.output))
    except DecodeError as exc:
        return VerifyResponse(ok=False, failed_check="decode", detail=str(exc))
    n = req.n_participants or max(1, len(out.messages))
    try:
        params = ProtocolParams(n, out.lambda_m, puzzle_mode=out.puzzle_mode, table=table)  # type: ignore[arg-type]
    except (KeyError, ValueError) as exc:
        return VerifyResponse(ok=False, failed_check="params", detail=str(exc))
    res = verify_output_report(params, out, _registry(req.public_keys))
    return VerifyResponse(ok=res.ok, failed_check=res.failed_check, detail=res.detail)


def verify_block(req: VerifyBlockRequest) -> VerifyResponse:
    try:
        block = Block.from_bytes(bytes.fromhex(req.block))
    except (DecodeError, ValueError) as exc:
        return VerifyResponse(ok=False, failed_check="decode", detail=str(exc))
    params = chain_params(block.lambda_m)
    res = verify_block_report(block, params, _registry(req.public_keys))
    return VerifyResponse(ok=res.ok, failed_check=res.failed_check, detail=res.detail)
