"""In-memory message pump that runs a whole commit session in one thread."""

from __future__ import annotations

from collections import deque
from typing import Sequence

from ..crypto_suite import PkiRegistry
from ..errors import ProtocolAborted
from .messages import AbortMsg, Message
from .sessions import CommitResult, CoordinatorPhase, CoordinatorSession, ParticipantSession


def run_commit(
    params,
    pki: PkiRegistry,
    participants: Sequence[ParticipantSession],
    *,
    metadata_leaf: bytes | None = None,
) -> CommitResult:
    """Drive ``participants`` and a fresh coordinator to completion.

    Messages are delivered FIFO, so participant order in ``participants`` is
    the arrival order seen by the coordinator.  Raises ProtocolAborted if any
    side aborts or the session stalls.
    """
    coord = CoordinatorSession(params, pki, metadata_leaf=metadata_leaf)
    by_index = {}
    for p in participants:
        reason = coord.admit(p.index)
        if reason is not None:
            raise ProtocolAborted(f"participant {p.index} not admitted: {reason.value}")
        by_index[p.index] = p

    inbox: deque[tuple[int, Message]] = deque((p.index, p.start()) for p in participants)
    while inbox:
        index, msg = inbox.popleft()
        step = coord.handle(index, msg)
        if coord.phase is CoordinatorPhase.ABORTED:
            raise ProtocolAborted(coord.abort_reason or "coordinator aborted")
        if step.rejected is not None:
            i, why = step.rejected
            raise ProtocolAborted(f"coordinator rejected participant {i}: {why.value}")
        for dest, out in step.outgoing:
            reply = by_index[dest].handle(out)
            if isinstance(reply, AbortMsg):
                raise ProtocolAborted(f"participant {dest} aborted: {reply.reason}")
            if reply is not None:
                inbox.append((dest, reply))
        if step.complete:
            return coord.result()
    raise ProtocolAborted(f"session stalled in phase {coord.phase.value}")
