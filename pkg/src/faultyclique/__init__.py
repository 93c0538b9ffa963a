"""Crash-fault-tolerant Congested Clique simulation toolkit.

The package turns synchronous all-to-all message-passing algorithms into
layered circuits, runs them under a lockstep network simulator with crash
faults, and keeps every intermediate state recoverable through erasure-coded
checkpoints. Matrix-multiplication workloads (semiring and bilinear-tensor
based) and an experiment CLI are included.
"""

from .engine import (
    CapViolationError,
    Engine,
    ModelViolationError,
    ProtocolError,
    RoundLedger,
    SimConfig,
    make_adversary,
)
from .protocol import (
    AttemptState,
    BingoCard,
    Checkpoint,
    OutputStore,
    RunResult,
    build_epoch_plan,
    decode_output,
    plan_attempt,
    run_faulty,
    run_faulty_sublinear,
    run_nonfaulty,
)

__version__ = "0.1.0"

__all__ = [
    "CapViolationError",
    "Engine",
    "ModelViolationError",
    "ProtocolError",
    "RoundLedger",
    "SimConfig",
    "make_adversary",
    "AttemptState",
    "BingoCard",
    "Checkpoint",
    "OutputStore",
    "RunResult",
    "build_epoch_plan",
    "decode_output",
    "plan_attempt",
    "run_faulty",
    "run_faulty_sublinear",
    "run_nonfaulty",
    "__version__",
]
