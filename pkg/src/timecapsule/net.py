"""Framing and asyncio transport for the commit protocol.

A frame is ``length(4, big-endian) || version || type || session_id(16) ||
payload`` where ``length`` counts every byte after the length field.  One
TCP connection carries one participant's side of one session.
"""

from __future__ import annotations

import asyncio
import hashlib
import logging
import os
import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .crypto_suite import PkiRegistry
from .errors import DecodeError, FrameError, ProtocolAborted, VersionError
from .mptc.messages import CHAIN_TYPE_OFFSET, MESSAGE_TYPES, AbortMsg, Message, NonceMsg, SeedProofMsg
from .mptc.sessions import (
    AbortReason,
    CommitResult,
    CoordinatorPhase,
    CoordinatorSession,
    ParticipantPhase,
    ParticipantSession,
    ProtocolParams,
)

log = logging.getLogger(__name__)

WIRE_VERSION = 0x01
SESSION_ID_BYTES = 16
HEADER_BYTES = 2 + SESSION_ID_BYTES
MAX_FRAME_BYTES = 16 << 20
DEFAULT_PORT = 7431
DEFAULT_HOST = "127.0.0.1"
BIND_ENV = "MPTC_BIND"


@dataclass(frozen=True)
class WireMessage:
    version: int
    msg_type: int
    session_id: bytes
    payload: bytes


def encode_message(wire: WireMessage) -> bytes:
    if len(wire.session_id) != SESSION_ID_BYTES:
        raise FrameError("session id must be 16 bytes")
    body = bytes([wire.version, wire.msg_type]) + wire.session_id + wire.payload
    return struct.pack(">I", len(body)) + body


def decode_message(data: bytes) -> WireMessage:
    """Decode exactly one frame; extra or missing bytes are a FrameError."""
    if len(data) < 4:
        raise FrameError("truncated frame length")
    (length,) = struct.unpack_from(">I", data)
    if length < HEADER_BYTES:
        raise FrameError(f"frame length {length} is shorter than the header")
    if len(data) - 4 < length:
        raise FrameError(f"truncated frame: {len(data) - 4} of {length} bytes")
    if len(data) - 4 > length:
        raise FrameError("trailing bytes after frame")
    return _decode_body(data[4:])


def _decode_body(body: bytes) -> WireMessage:
    version, msg_type = body[0], body[1]
    if version != WIRE_VERSION:
        raise VersionError(f"unsupported wire version {version:#04x}")
    return WireMessage(version, msg_type, body[2:HEADER_BYTES], body[HEADER_BYTES:])


def wrap(msg: Message, session_id: bytes, *, chain: bool = False) -> WireMessage:
    msg_type = msg.TYPE + (CHAIN_TYPE_OFFSET if chain else 0)
    return WireMessage(WIRE_VERSION, msg_type, session_id, msg.payload())


def unwrap(wire: WireMessage, *, chain: bool = False) -> Message:
    """Parse the payload.  Unknown types and bad bodies raise DecodeError."""
    msg_type = wire.msg_type - (CHAIN_TYPE_OFFSET if chain else 0)
    cls = MESSAGE_TYPES.get(msg_type)
    if cls is None:
        family = "chain" if chain else "base"
        raise DecodeError(f"message type {wire.msg_type:#04x} is not a {family} protocol message")
    return cls.parse(wire.payload)


def default_session_id(params: ProtocolParams, tag: bytes = b"") -> bytes:
    """Session id both sides can derive from shared parameters.

    Peers configured with different parameters then fail at the first frame
    instead of deep inside the protocol.
    """
    desc = (
        f"{params.n_participants}|{params.lambda_m}|{params.puzzle_mode}|"
        f"{params.list_policy}|{params.suite.config.suite_id}"
    ).encode()
    return hashlib.sha256(b"MPTC1-session|" + desc + b"|" + tag).digest()[:SESSION_ID_BYTES]


def parse_address(address: str | None, default_host: str = DEFAULT_HOST) -> tuple[str, int]:
    """``host:port``, ``:port`` or ``host``; falls back to $MPTC_BIND, then port 7431."""
    address = address or os.environ.get(BIND_ENV) or f"{default_host}:{DEFAULT_PORT}"
    host, sep, port = address.rpartition(":")
    if not sep:
        return address, DEFAULT_PORT
    try:
        return host or default_host, int(port)
    except ValueError:
        raise ValueError(f"bad port in address {address!r}") from None


async def read_frame(reader: asyncio.StreamReader) -> WireMessage | None:
    """Read one frame; None on a clean EOF between frames."""
    try:
        head = await reader.readexactly(4)
    except asyncio.IncompleteReadError as exc:
        if exc.partial:
            raise FrameError("connection closed inside a frame length") from None
        return None
    (length,) = struct.unpack(">I", head)
    if length < HEADER_BYTES or length > MAX_FRAME_BYTES:
        raise FrameError(f"bad frame length {length}")
    try:
        body = await reader.readexactly(length)
    except asyncio.IncompleteReadError:
        raise FrameError("connection closed inside a frame") from None
    return _decode_body(body)


async def write_frame(writer: asyncio.StreamWriter, wire: WireMessage) -> None:
    writer.write(encode_message(wire))
    await writer.drain()


def _close(writer: asyncio.StreamWriter) -> None:
    if not writer.is_closing():
        writer.close()


# Coordinator side

@dataclass
class ServerOutcome:
    result: CommitResult | None
    abort_reason: str | None = None
    rejections: list[tuple[int, str]] = field(default_factory=list)

    def unwrap(self) -> CommitResult:
        if self.result is None:
            raise ProtocolAborted(self.abort_reason or "session did not complete")
        return self.result


EventCallback = Callable[[str, dict], None]


class _Conn:
    def __init__(self, writer: asyncio.StreamWriter):
        self.writer = writer
        self.index: int | None = None


class CoordinatorServer:
    """Accepts N participant connections and runs one commit session.

    Connection handlers only parse frames and queue them.  A single consumer
    task owns the CoordinatorSession, so protocol state changes one event at
    a time.  The first frame on a connection must be a NONCE; its index is
    the connection's identity for the rest of the session.
    """

    def __init__(
        self,
        params: ProtocolParams,
        pki: PkiRegistry,
        *,
        session_id: bytes | None = None,
        metadata_leaf: bytes | None = None,
        chain: bool = False,
        on_event: EventCallback | None = None,
    ):
        self.params = params
        self.session = CoordinatorSession(params, pki, metadata_leaf=metadata_leaf)
        self.session_id = session_id or default_session_id(params, b"chain" if chain else b"")
        self.chain = chain
        self.on_event = on_event
        self._queue: asyncio.Queue = asyncio.Queue()
        self._conns: dict[int, _Conn] = {}
        self._server: asyncio.AbstractServer | None = None
        self.port: int | None = None

    def _emit(self, kind: str, **info) -> None:
        log.debug("%s %s", kind, info)
        if self.on_event is not None:
            self.on_event(kind, info)

    async def start(self, host: str, port: int) -> int:
        self._server = await asyncio.start_server(self._handle_conn, host, port)
        self.port = self._server.sockets[0].getsockname()[1]
        self._emit("listening", host=host, port=self.port)
        return self.port

    async def _handle_conn(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        conn = _Conn(writer)
        try:
            while True:
                try:
                    wire = await read_frame(reader)
                    if wire is None:
                        break
                    if wire.session_id != self.session_id:
                        raise FrameError("session id mismatch")
                    msg = unwrap(wire, chain=self.chain)
                except DecodeError as exc:
                    await self._queue.put(("bad_frame", conn, str(exc)))
                    break
                await self._queue.put(("message", conn, msg))
        except (ConnectionError, OSError) as exc:
            self._emit("io_error", error=str(exc))
        finally:
            await self._queue.put(("closed", conn, None))

    async def _send(self, index: int, msg: Message) -> None:
        conn = self._conns.get(index)
        if conn is None or conn.writer.is_closing():
            return
        try:
            await write_frame(conn.writer, wrap(msg, self.session_id, chain=self.chain))
        except (ConnectionError, OSError) as exc:
            self._emit("io_error", index=index, error=str(exc))

    async def _refuse(self, conn: _Conn, reason: str, index: int = 0) -> None:
        try:
            await write_frame(conn.writer, wrap(AbortMsg(reason, index), self.session_id, chain=self.chain))
        except (ConnectionError, OSError):
            pass
        _close(conn.writer)

    async def _on_message(self, conn: _Conn, msg: Message) -> None:
        s = self.session
        if conn.index is None:
            if not isinstance(msg, NonceMsg):
                await self._refuse(conn, "UnexpectedMessage")
                return
            reason = s.admit(msg.index)
            if reason is not None:
                self._emit("rejected", index=msg.index, reason=reason.value)
                s.rejections.append((msg.index, reason))
                await self._refuse(conn, reason.value, msg.index)
                return
            conn.index = msg.index
            self._conns[msg.index] = conn
            self._emit("admitted", index=msg.index)
        step = s.handle(conn.index, msg)
        if step.rejected is not None:
            i, why = step.rejected
            self._emit("rejected", index=i, reason=why.value)
            await self._refuse(conn, why.value, i)
        for dest, out in step.outgoing:
            await self._send(dest, out)
        if step.outgoing and isinstance(step.outgoing[0][1], SeedProofMsg):
            self._emit("seed_fixed", seed=step.outgoing[0][1].seed.hex())

    async def serve(self) -> ServerOutcome:
        s = self.session
        try:
            while s.phase not in (CoordinatorPhase.DONE, CoordinatorPhase.ABORTED):
                timeout = max(0.0, s.deadline - s.clock())
                try:
                    kind, conn, item = await asyncio.wait_for(self._queue.get(), timeout)
                except asyncio.TimeoutError:
                    s.expire()
                    continue
                if kind == "message":
                    await self._on_message(conn, item)
                elif kind == "bad_frame":
                    self._emit("bad_frame", index=conn.index, error=item)
                    await self._refuse(conn, f"Malformed: {item}", conn.index or 0)
                elif kind == "closed" and conn.index is not None:
                    if self._conns.get(conn.index) is conn:
                        del self._conns[conn.index]
                    self._emit("disconnected", index=conn.index)
                s.expire()
        finally:
            await self._shutdown()
        rejections = [(i, r.value) for i, r in s.rejections]
        if s.phase is CoordinatorPhase.DONE:
            self._emit("complete")
            return ServerOutcome(s.result(), None, rejections)
        self._emit("aborted", reason=s.abort_reason)
        return ServerOutcome(None, s.abort_reason, rejections)

    async def _shutdown(self) -> None:
        s = self.session
        if s.phase is CoordinatorPhase.ABORTED:
            for index in list(self._conns):
                await self._send(index, AbortMsg(s.abort_reason or "aborted", index))
        for conn in self._conns.values():
            _close(conn.writer)
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()


async def serve_session(
    params: ProtocolParams,
    pki: PkiRegistry,
    host: str,
    port: int,
    *,
    session_id: bytes | None = None,
    metadata_leaf: bytes | None = None,
    chain: bool = False,
    on_event: EventCallback | None = None,
    ready: Callable[[int], None] | None = None,
) -> ServerOutcome:
    server = CoordinatorServer(
        params, pki, session_id=session_id, metadata_leaf=metadata_leaf, chain=chain, on_event=on_event
    )
    bound = await server.start(host, port)
    if ready is not None:
        ready(bound)
    return await server.serve()


def run_coordinator_server(
    params: ProtocolParams,
    pki: PkiRegistry,
    bind_address: str | None = None,
    **kwargs,
) -> ServerOutcome:
    host, port = parse_address(bind_address)
    return asyncio.run(serve_session(params, pki, host, port, **kwargs))


# Participant side

@dataclass(frozen=True)
class ClientOutcome:
    done: bool
    abort_reason: str | None = None


async def participant_client(
    session: ParticipantSession,
    host: str,
    port: int,
    *,
    session_id: bytes | None = None,
) -> ClientOutcome:
    """Run one participant over a TCP connection until done or aborted.

    A frame carrying a different session id raises FrameError: the peer is
    in some other session and nothing it says can be trusted.
    """
    chain = session.chain
    sid = session_id or default_session_id(session.params, b"chain" if chain else b"")
    reader, writer = await asyncio.open_connection(host, port)
    try:
        await write_frame(writer, wrap(session.start(), sid, chain=chain))
        while session.phase is not ParticipantPhase.DONE:
            wire = await read_frame(reader)
            if wire is None:
                session.abort(AbortReason.PROTOCOL_VIOLATION)
                return ClientOutcome(False, "ProtocolViolation: coordinator closed the connection")
            if wire.session_id != sid:
                raise FrameError("session id mismatch")
            try:
                msg = unwrap(wire, chain=chain)
            except DecodeError as exc:
                reply = session.abort(AbortReason.PROTOCOL_VIOLATION)
                await write_frame(writer, wrap(reply, sid, chain=chain))
                return ClientOutcome(False, f"ProtocolViolation: {exc}")
            if isinstance(msg, AbortMsg):
                session.abort(AbortReason.PARTICIPANT_ABORTED)
                return ClientOutcome(False, f"coordinator aborted: {msg.reason}")
            reply = session.handle(msg)
            if reply is not None:
                await write_frame(writer, wrap(reply, sid, chain=chain))
            if isinstance(reply, AbortMsg):
                return ClientOutcome(False, reply.reason)
        return ClientOutcome(True)
    finally:
        _close(writer)
        try:
            await writer.wait_closed()
        except (ConnectionError, OSError):
            pass


def run_participant_client(
    session: ParticipantSession,
    connect_address: str | None = None,
    *,
    session_id: bytes | None = None,
) -> ClientOutcome:
    host, port = parse_address(connect_address)
    return asyncio.run(participant_client(session, host, port, session_id=session_id))


async def _loopback(
    params: ProtocolParams,
    pki: PkiRegistry,
    participants: Sequence[ParticipantSession],
    metadata_leaf: bytes | None,
) -> tuple[ServerOutcome, list[ClientOutcome]]:
    chain = any(p.chain for p in participants)
    server = CoordinatorServer(params, pki, metadata_leaf=metadata_leaf, chain=chain)
    port = await server.start(DEFAULT_HOST, 0)
    serving = asyncio.create_task(server.serve())
    clients = await asyncio.gather(*(participant_client(p, DEFAULT_HOST, port) for p in participants))
    return await serving, list(clients)


def run_loopback_session(
    params: ProtocolParams,
    pki: PkiRegistry,
    participants: Sequence[ParticipantSession],
    *,
    metadata_leaf: bytes | None = None,
) -> CommitResult:
    """Run a whole commit session over 127.0.0.1 sockets in one process."""
    outcome, clients = asyncio.run(_loopback(params, pki, participants, metadata_leaf))
    for c in clients:
        if not c.done:
            raise ProtocolAborted(f"participant aborted: {c.abort_reason}")
    return outcome.unwrap()
