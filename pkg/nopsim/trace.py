"""Instruction and token traces written to standard error.

Line formats (one record per line, stable for golden comparisons):

    nop 8 u0 t0 ip ff00 op IN sp 3fbf tos 00000000
    nop 8 out u0t0p3 DATA 00000041
    nop 8 in link1 END

Bit k of the trace and intern masks selects unit k // 8, thread k % 8. The
extern mask selects links (bits 0..3), peripheral lines (bits 4..11) and the
router configuration block (bit 12).
"""

from __future__ import annotations

import logging
import sys
from typing import Callable, Optional, TextIO

from nopsim.isa.ports import THREADS
from nopsim.switch.tokens import Token

TRACE_LOGGER = "nopsim.trace"
ALL_THREADS = 0xFFFFFFFF
ALL_EXTERN = 0x1FFF
EXTERN_FIRST_LINE_BIT = 4
EXTERN_CONFIG_BIT = 12


def configure_trace_logger(stream: Optional[TextIO] = None) -> logging.Logger:
    trace_logger = logging.getLogger(TRACE_LOGGER)
    if not trace_logger.handlers:
        handler = logging.StreamHandler(stream or sys.stderr)
        handler.setFormatter(logging.Formatter("%(message)s"))
        trace_logger.addHandler(handler)
    trace_logger.setLevel(logging.INFO)
    trace_logger.propagate = False
    return trace_logger


def thread_bit(unit: int, thread: int) -> int:
    return 1 << (unit * THREADS + thread)


def line_bit(line: int) -> int:
    return 1 << (EXTERN_FIRST_LINE_BIT + line)


def link_bit(link: int) -> int:
    return 1 << link


class Tracer:
    def __init__(
        self,
        processor_id: int,
        trace_mask: int = 0,
        intern_mask: int = 0,
        extern_mask: int = 0,
        emit: Optional[Callable[[str], None]] = None,
    ) -> None:
        self.processor_id = processor_id
        self.trace_mask = trace_mask
        self.intern_mask = intern_mask
        self.extern_mask = extern_mask
        if emit is None:
            trace_logger = logging.getLogger(TRACE_LOGGER)
            emit = trace_logger.info
        self._emit = emit

    @property
    def enabled(self) -> bool:
        return bool(self.trace_mask or self.intern_mask or self.extern_mask)

    def wants_instruction(self, unit: int, thread: int) -> bool:
        return bool(self.trace_mask & thread_bit(unit, thread))

    def wants_intern(self, unit: int, thread: int) -> bool:
        return bool(self.intern_mask & thread_bit(unit, thread))

    def wants_extern(self, bit: int) -> bool:
        return bool(self.extern_mask & bit)

    def instruction(self, unit: int, thread: int, ip: int, mnemonic: str, sp: int, tos: Optional[int]) -> None:
        top = "--------" if tos is None else f"{tos:08x}"
        self._emit(f"nop {self.processor_id} u{unit} t{thread} ip {ip:04x} op {mnemonic} sp {sp:04x} tos {top}")

    def token(self, direction: str, endpoint: str, token: Token) -> None:
        self._emit(f"nop {self.processor_id} {direction} {endpoint} {token}")
