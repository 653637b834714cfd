from __future__ import annotations

from enum import IntEnum


class FaultReason(IntEnum):
    """Stop causes; the values are the reason word of the exception message."""

    EXPLICIT_STOP = 0
    ILLEGAL_OPCODE = 1
    IP_OUT_OF_RANGE = 2
    SP_OUT_OF_RANGE = 3
    DIVIDE_BY_ZERO = 4
    END_ON_INPUT = 5
    NO_THREAD_AVAILABLE = 6
    ILLEGAL_ROUTE = 7


class ThreadFault(RuntimeError):
    def __init__(self, reason: FaultReason, detail: str = "") -> None:
        message = reason.name.lower().replace("_", " ")
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)
        self.reason = reason
