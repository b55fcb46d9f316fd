"""Command line entry point.

Exit codes: 0 success or TRUE, 1 FALSE verification, 2 usage error,
3 protocol abort.  ``--json`` switches every report to JSON lines.
Commands that the HTTP service also offers take ``--server URL`` to run
there instead of locally.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any, Callable, Sequence

from . import __version__
from .errors import ConfigError, ProtocolAborted, TimeCapsuleError

EXIT_OK = 0
EXIT_FALSE = 1
EXIT_USAGE = 2
EXIT_ABORT = 3


class UsageError(Exception):
    pass


class Reporter:
    """Human-readable ``key: value`` lines, or one JSON object per record."""

    def __init__(self, as_json: bool, stream=None):
        self.as_json = as_json
        self.stream = stream or sys.stdout

    def record(self, kind: str, headline: str | None = None, *, brief: bool = False, **fields: Any) -> None:
        """``brief`` prints only the headline in human mode."""
        if self.as_json:
            print(json.dumps({"record": kind, **fields}, sort_keys=True), file=self.stream)
        else:
            if headline:
                print(headline, file=self.stream)
            if not brief:
                for key, value in fields.items():
                    print(f"  {key}: {value}", file=self.stream)
        self.stream.flush()


# Config files and argument plumbing

def read_config_file(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment.  Keys use flag names."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        values[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return values


def parse_message(spec: str) -> bytes:
    """``@path`` reads a file, anything else is hex."""
    if spec.startswith("@"):
        try:
            return Path(spec[1:]).read_bytes()
        except OSError as exc:
            raise UsageError(f"cannot read message file: {exc}") from None
    try:
        return bytes.fromhex(spec)
    except ValueError:
        raise UsageError("--message must be hex or @file") from None


def _hex_bytes(n: int | None = None) -> Callable[[str], bytes]:
    def conv(text: str) -> bytes:
        try:
            raw = bytes.fromhex(text)
        except ValueError:
            raise argparse.ArgumentTypeError("expected hex") from None
        if n is not None and len(raw) != n:
            raise argparse.ArgumentTypeError(f"expected {n} bytes of hex")
        return raw

    return conv


def _int_hex(text: str) -> int:
    try:
        return int(text, 16)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a hex integer: {text!r}") from None


def _load_table(path: str | None):
    from .puzzle import DifficultyTable

    if path is None:
        return None
    try:
        table = DifficultyTable.load(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot load table {path}: {exc}") from None
    return table


def _params(args, n: int):
    from .mptc.sessions import ProtocolParams

    try:
        return ProtocolParams(
            n,
            args.lambda_m,
            puzzle_mode=args.mode,
            table=_load_table(args.table),
            list_policy=args.list_policy,
            timeout_secs=args.timeout_secs,
        )
    except KeyError as exc:
        raise UsageError(f"lambda_m={args.lambda_m} is not in the table ({exc})") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _pki(key_dir: str):
    from .crypto_suite import PkiRegistry

    if not Path(key_dir).is_dir():
        raise UsageError(f"key directory {key_dir} does not exist")
    return PkiRegistry.load(key_dir)


def _solver(args):
    from .dl_solver import SolverConfig

    return SolverConfig(algo=args.algo, workers=args.workers)


def _remote(args, path: str, body: dict) -> dict:
    import httpx

    url = args.server.rstrip("/") + path
    try:
        resp = httpx.post(url, json=body, timeout=None)
    except httpx.HTTPError as exc:
        raise UsageError(f"cannot reach {url}: {exc}") from None
    if resp.status_code != 200:
        raise UsageError(f"{url} answered {resp.status_code}: {resp.text}")
    return resp.json()


def _keys_json(key_dir: str) -> dict[int, str]:
    return {i: pk.hex() for i, pk in _pki(key_dir).entries.items()}


# Subcommands

def cmd_keygen(args, out: Reporter) -> int:
    from .crypto_suite import DEFAULT_SUITE, write_keypair

    first = args.first_index
    for i in range(first, first + args.count):
        if (Path(args.keys) / f"{i}.key").exists() and not args.force:
            raise UsageError(f"{args.keys}/{i}.key exists; pass --force to overwrite")
        pair = DEFAULT_SUITE.keygen()
        write_keypair(args.keys, i, pair)
        out.record("keygen", f"participant {i}", index=i, public_key=pair.public_key.hex())
    return EXIT_OK


def cmd_calibrate(args, out: Reporter) -> int:
    from .service import handlers
    from .service.schemas import CalibrateRequest, CalibrateResponse

    req = CalibrateRequest(tau_seconds=args.tau, algo=args.algo, rate_ops_per_sec=args.rate)
    if args.server:
        res = CalibrateResponse(**_remote(args, "/calibrate", req.model_dump()))
    else:
        res = handlers.calibrate(req, _load_table(args.table))
    out.record(
        "calibrate",
        f"λm={res.lambda_m}",
        lambda_m=res.lambda_m,
        tau_seconds=res.tau_seconds,
        algo=res.algo,
        rate_ops_per_sec=res.rate_ops_per_sec,
        expected_seconds=res.expected_seconds,
    )
    return EXIT_OK


def cmd_solve(args, out: Reporter) -> int:
    from .service import handlers
    from .service.schemas import PuzzleRequest, PuzzleResponse, SolveRequest, SolveResponse

    if args.p is not None:
        if args.g is None or args.b is None:
            raise UsageError("--p needs --g and --b")
        p, g, b = args.p, args.g, args.b
    elif args.lambda_m is not None and args.seed is not None:
        preq = PuzzleRequest(lambda_m=args.lambda_m, seed=args.seed.hex(), mode=args.mode)
        if args.server:
            pres = PuzzleResponse(**_remote(args, "/puzzle", preq.model_dump()))
        else:
            pres = handlers.puzzle(preq, _load_table(args.table))
        p, g, b = pres.p, pres.g, pres.b
    else:
        raise UsageError("give either --p/--g/--b or --lambda-m with --seed")

    req = SolveRequest(p=p, g=g, b=b, algo=args.algo, workers=args.workers)
    if args.server:
        res = SolveResponse(**_remote(args, "/solve", req.model_dump()))
    else:
        res = handlers.solve(req)
    out.record(
        "solve",
        f"a={res.a:x}",
        p=f"{p:x}",
        g=f"{g:x}",
        b=f"{b:x}",
        a=f"{res.a:x}",
        algo=res.algo,
        ops=res.ops_performed,
        seconds=round(res.wall_seconds, 6),
    )
    return EXIT_OK


def _verdict(out: Reporter, kind: str, res) -> int:
    if res.ok:
        out.record(kind, "TRUE", brief=True, ok=True)
        return EXIT_OK
    out.record(kind, f"FALSE {res.failed_check}", ok=False, failed_check=res.failed_check, detail=res.detail)
    return EXIT_FALSE


def _read_file(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def cmd_verify(args, out: Reporter) -> int:
    from .service import handlers
    from .service.schemas import VerifyRequest, VerifyResponse

    if args.output_file is None:
        raise UsageError("verify needs --output-file")
    req = VerifyRequest(
        output=_read_file(args.output_file).hex(),
        public_keys=_keys_json(args.keys),
        n_participants=args.n,
    )
    if args.server:
        if args.table:
            raise UsageError("--table is not sent to the server; it always uses the canonical table")
        res = VerifyResponse(**_remote(args, "/verify", req.model_dump()))
    else:
        res = handlers.verify(req, _load_table(args.table))
    return _verdict(out, "verify", res)


def cmd_verify_block(args, out: Reporter) -> int:
    from .service import handlers
    from .service.schemas import VerifyBlockRequest, VerifyResponse

    path = args.block_file or args.output_file
    if path is None:
        raise UsageError("verify-block needs --block-file")
    req = VerifyBlockRequest(block=_read_file(path).hex(), public_keys=_keys_json(args.keys))
    if args.server:
        res = VerifyResponse(**_remote(args, "/verify-block", req.model_dump()))
    else:
        res = handlers.verify_block(req)
    return _verdict(out, "verify-block", res)


def cmd_coordinator(args, out: Reporter) -> int:
    from .mptc.reveal import reveal
    from .net import parse_address, run_coordinator_server

    params = _params(args, args.n)
    pki = _pki(args.keys)
    solver = _solver(args)
    host, port = parse_address(args.bind)

    def on_event(kind: str, info: dict) -> None:
        if kind in ("listening", "admitted", "rejected", "seed_fixed", "aborted"):
            text = " ".join(f"{k}={v}" for k, v in info.items())
            out.record("event", f"[{kind}] {text}", brief=True, event=kind, **info)

    outcome = run_coordinator_server(params, pki, f"{host}:{port}", on_event=on_event)
    if outcome.result is None:
        out.record("abort", f"session aborted: {outcome.abort_reason}", reason=outcome.abort_reason)
        return EXIT_ABORT
    res = outcome.result
    revealed = reveal(res.seed, res.signatures, res.ciphertexts, params, solver)
    delay = time.monotonic() - res.seed_fixed_at
    if args.output_file:
        Path(args.output_file).write_bytes(revealed.to_bytes())
    report = revealed.report
    out.record(
        "reveal",
        "revealed",
        seed=res.seed.hex(),
        sk_tl=revealed.sk_tl.a,
        entries=len(revealed.messages),
        ops=report.ops_performed if report else None,
        solve_seconds=round(report.wall_seconds, 6) if report else None,
        seconds_since_seed=round(delay, 6),
        output_file=args.output_file,
    )
    return EXIT_OK


def cmd_participant(args, out: Reporter) -> int:
    from .crypto_suite import load_keypair
    from .mptc.sessions import ParticipantSession
    from .net import run_participant_client

    if args.index is None or args.message is None:
        raise UsageError("participant needs --index and --message")
    params = _params(args, args.n)
    try:
        pair = load_keypair(args.keys, args.index)
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot load key for participant {args.index}: {exc}") from None
    session = ParticipantSession(params, args.index, pair, parse_message(args.message))
    try:
        outcome = run_participant_client(session, args.connect)
    except OSError as exc:
        out.record("abort", f"connection failed: {exc}", reason=str(exc))
        return EXIT_ABORT
    if not outcome.done:
        out.record("abort", f"aborted: {outcome.abort_reason}", reason=outcome.abort_reason)
        return EXIT_ABORT
    out.record("participant", "done", index=args.index, seed=session.seed.hex() if session.seed else None)
    return EXIT_OK


def _demo_keypair(key_dir: str | None, index: int):
    """Reuse ``<index>.key`` from ``key_dir`` if present, else make and store one."""
    from .crypto_suite import DEFAULT_SUITE, load_keypair, write_keypair

    if key_dir is None:
        return DEFAULT_SUITE.keygen()
    if (Path(key_dir) / f"{index}.key").exists():
        return load_keypair(key_dir, index)
    pair = DEFAULT_SUITE.keygen()
    write_keypair(key_dir, index, pair)
    return pair


def cmd_chain_demo(args, out: Reporter) -> int:
    from .capsule_chain import ChainUser, Metadata, chain_params, create_block, verify_block
    from .crypto_suite import DEFAULT_SUITE, PkiRegistry
    from .errors import BlockInvalidated

    if args.users < 0:
        raise UsageError("--users must be >= 0")
    meta_raw = args.metadata if args.metadata is not None else b""
    metadata = Metadata((DEFAULT_SUITE.hash(meta_raw),), b"chain-demo", args.height)
    users = [
        ChainUser(i, _demo_keypair(args.keys, i), f"transaction {i}".encode())
        for i in range(1, args.users + 1)
    ]
    pki = PkiRegistry.from_mapping({u.index: u.keypair.public_key for u in users})
    try:
        params = chain_params(args.lambda_m, list_policy=args.list_policy)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        block = create_block(metadata, users, params, _solver(args), pki)
    except BlockInvalidated as exc:
        out.record("abort", str(exc), index=exc.index, evidence=exc.evidence.hex())
        return EXIT_ABORT
    ok = verify_block(block, params, pki)
    if args.output_file:
        Path(args.output_file).write_bytes(block.to_bytes())
    report = block.report
    out.record(
        "chain-demo",
        "TRUE" if ok else "FALSE",
        verify_block=ok,
        users=len(users),
        lambda_m=args.lambda_m,
        sk_tl=block.sk_tl.a,
        ops=report.ops_performed if report else None,
        seconds=round(report.wall_seconds, 6) if report else None,
    )
    return EXIT_OK if ok else EXIT_FALSE


def cmd_serve(args, out: Reporter) -> int:
    import uvicorn

    from .net import parse_address

    host, port = parse_address(args.bind or os.environ.get("MPTC_HTTP_BIND") or "127.0.0.1:8000")
    uvicorn.run("timecapsule.service.app:app", host=host, port=port, log_level="info")
    return EXIT_OK


# Parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="JSON-lines output")
    common.add_argument("--config", help="key=value file with flag defaults")
    common.add_argument("-v", "--verbose", action="store_true")

    remote = argparse.ArgumentParser(add_help=False)
    remote.add_argument("--server", help="run on a timecapsule HTTP service at this URL")

    proto = argparse.ArgumentParser(add_help=False)
    proto.add_argument("--lambda-m", type=int, required=False, default=20)
    proto.add_argument("--n", type=int, default=None, help="number of participants")
    proto.add_argument("--mode", choices=("table", "pcr"), default="table")
    proto.add_argument("--table", help="difficulty table file")
    proto.add_argument("--list-policy", choices=("arrival", "lex"), default="arrival")
    proto.add_argument("--timeout-secs", type=float, default=30.0)
    proto.add_argument("--keys", default="keys", help="key directory")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--algo", choices=("naive", "bsgs", "rho"), default="naive")
    solver.add_argument("--workers", type=int, default=1)

    parser = argparse.ArgumentParser(prog="timecapsule", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", parents=[common], help="write participant key pairs")
    p.add_argument("--keys", default="keys")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--first-index", type=int, default=1)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("coordinator", parents=[common, proto, solver], help="run a commit session and reveal")
    p.add_argument("--bind", help="host:port (default $MPTC_BIND or 127.0.0.1:7431)")
    p.add_argument("--output-file")
    p.set_defaults(func=cmd_coordinator)

    p = sub.add_parser("participant", parents=[common, proto], help="commit one message")
    p.add_argument("--connect", help="host:port (default $MPTC_BIND or 127.0.0.1:7431)")
    p.add_argument("--index", type=int)
    p.add_argument("--message", help="hex, or @file")
    p.set_defaults(func=cmd_participant)

    p = sub.add_parser("calibrate", parents=[common, remote], help="pick lambda_m for a target delay")
    p.add_argument("--tau", type=float, required=True, help="target delay in seconds")
    p.add_argument("--algo", choices=("naive", "bsgs", "rho"), default="naive")
    p.add_argument("--rate", type=float, help="ops/second; measured if omitted")
    p.add_argument("--table")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("solve-dl", parents=[common, remote, solver], help="solve one puzzle")
    p.add_argument("--p", type=_int_hex, help="hex")
    p.add_argument("--g", type=_int_hex, help="hex")
    p.add_argument("--b", type=_int_hex, help="hex")
    p.add_argument("--lambda-m", type=int)
    p.add_argument("--seed", type=_hex_bytes(32), help="32-byte seed, hex")
    p.add_argument("--mode", choices=("table", "pcr"), default="table")
    p.add_argument("--table")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", parents=[common, remote], help="check a reveal output file")
    p.add_argument("--output-file")
    p.add_argument("--keys", default="keys")
    p.add_argument("--table")
    p.add_argument("--n", type=int, help="expected number of participants")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("verify-block", parents=[common, remote], help="check a Capsule-Chain block file")
    p.add_argument("--block-file")
    p.add_argument("--output-file", help=argparse.SUPPRESS)
    p.add_argument("--keys", default="keys")
    p.set_defaults(func=cmd_verify_block)

    p = sub.add_parser("chain-demo", parents=[common, solver], help="build and verify one block in-process")
    p.add_argument("--users", type=int, default=3)
    p.add_argument("--lambda-m", type=int, default=20)
    p.add_argument("--metadata", type=_hex_bytes(), help="parent reference bytes, hex")
    p.add_argument("--height", type=int, default=1)
    p.add_argument("--keys", help="take user keys from (or save them to) this directory")
    p.add_argument("--list-policy", choices=("arrival", "lex"), default="arrival")
    p.add_argument("--output-file")
    p.set_defaults(func=cmd_chain_demo)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    p.add_argument("--bind", help="host:port (default 127.0.0.1:8000)")
    p.set_defaults(func=cmd_serve)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    values = read_config_file(args.config)
    known = vars(args)
    unknown = sorted(k for k in values if k not in known)
    if unknown:
        raise UsageError(f"unknown keys in {args.config}: {', '.join(unknown)}")
    sub = parser._subparsers._group_actions[0].choices[args.command]  # type: ignore[union-attr]
    # file values become flags so they go through each flag's type check
    return parser.parse_args(list(argv) + _defaults_as_flags(sub, values, argv))


def _defaults_as_flags(sub: argparse.ArgumentParser, values: dict[str, str], argv: Sequence[str]) -> list[str]:
    extra: list[str] = []
    given = {a.split("=", 1)[0] for a in argv if a.startswith("--")}
    for action in sub._actions:
        if action.dest not in values or not action.option_strings:
            continue
        flag = action.option_strings[-1]
        if flag in given:
            continue
        if action.nargs == 0:
            if values[action.dest].lower() in ("1", "true", "yes", "on"):
                extra.append(flag)
        else:
            extra += [flag, values[action.dest]]
    return extra


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if hasattr(sys.stdout, "reconfigure"):
        sys.stdout.reconfigure(errors="backslashreplace")
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, OSError) as exc:
        print(f"timecapsule: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
    out = Reporter(args.json)
    if getattr(args, "n", 0) is None and args.command in ("coordinator", "participant"):
        print("timecapsule: --n is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, out)
    except (UsageError, ConfigError) as exc:
        print(f"timecapsule: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProtocolAborted as exc:
        out.record("abort", f"aborted: {exc}", reason=str(exc))
        return EXIT_ABORT
    except (TimeCapsuleError, ValueError) as exc:
        print(f"timecapsule: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
