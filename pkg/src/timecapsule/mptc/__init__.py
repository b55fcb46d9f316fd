"""The multi-party timed commitment protocol: commit, reveal, verify."""

from .driver import run_commit
from .messages import (
    AbortMsg,
    CommitEntry,
    CommitHashMsg,
    CommitListMsg,
    Message,
    NonceMsg,
    SeedProofMsg,
    SignedCiphertextMsg,
    commitment_payload,
)
from .reveal import RevealedEntry, RevealOutput, VerifyResult, reveal, verify_output, verify_output_report
from .sessions import (
    AbortReason,
    CommitResult,
    CoordinatorPhase,
    CoordinatorSession,
    CoordinatorStep,
    ParticipantPhase,
    ParticipantSession,
    ProtocolParams,
    RejectReason,
    coordinator_step,
    participant_step,
)

__all__ = [
    "AbortMsg",
    "AbortReason",
    "CommitEntry",
    "CommitHashMsg",
    "CommitListMsg",
    "CommitResult",
    "CoordinatorPhase",
    "CoordinatorSession",
    "CoordinatorStep",
    "Message",
    "NonceMsg",
    "ParticipantPhase",
    "ParticipantSession",
    "ProtocolParams",
    "RejectReason",
    "RevealOutput",
    "RevealedEntry",
    "SeedProofMsg",
    "SignedCiphertextMsg",
    "VerifyResult",
    "commitment_payload",
    "coordinator_step",
    "participant_step",
    "reveal",
    "run_commit",
    "verify_output",
    "verify_output_report",
]
