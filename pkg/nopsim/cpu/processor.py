"""One simulated processor: four processing units, one switch, one clock."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from nopsim.asm.bootrom import boot_rom_words
from nopsim.cpu.faults import FaultReason, ThreadFault
from nopsim.cpu.memory import BOOT_ROM_BASE, MEMORY_WORDS, Memory
from nopsim.cpu.thread import ROM_FIRST_IP, StepResult, ThreadContext, ThreadState, step
from nopsim.isa.opcodes import decode
from nopsim.isa.ports import COMMAND_MASK, EXTERNAL_LINKS, FIRST_PROCESSOR_ID, THREADS, UNITS, pack_port
from nopsim.isa.words import WORD_MASK
from nopsim.switch.peripheral import PeripheralLine
from nopsim.switch.switch import CommSwitch
from nopsim.trace import Tracer
from nopsim.util.yaml_emit import HexWord

logger = logging.getLogger(__name__)

BreakHandler = Callable[[Dict[str, Any]], None]
_FREE_STATES = (ThreadState.UNSTARTED, ThreadState.STOPPED)
_ACTIVE_STATES = (ThreadState.RUNNING, ThreadState.BLOCKED)


class HaltReason(Enum):
    QUIESCENT = "quiescent"
    MAX_ROUNDS = "max_rounds"
    INTERRUPTED = "interrupted"


@dataclass(frozen=True)
class RoundReport:
    executed: int
    moved: int
    time: int

    @property
    def idle(self) -> bool:
        return self.executed == 0 and self.moved == 0


def thread_snapshot(unit: int, ctx: ThreadContext, memory: Memory) -> Dict[str, Any]:
    tos = ctx.top_of_stack(memory)
    return {
        "unit": unit,
        "thread": ctx.number,
        "state": ctx.state.value,
        "ip": HexWord(ctx.ip),
        "sp": HexWord(ctx.sp),
        "tos": None if tos is None else HexWord(tos),
        "lc0": ctx.lc0,
        "lc1": ctx.lc1,
        "ld0": ctx.ld0,
        "ld1": ctx.ld1,
        "exc": HexWord(ctx.exc),
        "cycles": ctx.cycles,
        "stop_reason": None if ctx.stop_reason is None else ctx.stop_reason.name,
        "blocked_on": ctx.blocked_on,
    }


class ProcessingUnit:
    """Memory plus eight thread slots; also the `ThreadHost` its threads see."""

    def __init__(self, processor: "Processor", unit_number: int) -> None:
        self._processor = processor
        self.unit_number = unit_number
        self.memory = Memory()
        self.threads = [ThreadContext(number) for number in range(THREADS)]
        self._channels = [processor.switch.channels_for(unit_number, number) for number in range(THREADS)]

    @property
    def processor_id(self) -> int:
        return self._processor.processor_id

    @property
    def debug(self) -> bool:
        return self._processor.debug

    @property
    def time(self) -> int:
        return self._processor.time

    def free_thread_count(self) -> int:
        return sum(1 for ctx in self.threads if ctx.state in _FREE_STATES)

    def total_cycles(self) -> int:
        return sum(ctx.cycles for ctx in self.threads) & WORD_MASK

    def start_thread(self, ip: int, lc0: int, lc1: int, ld0: int, ld1: int, exc: int) -> int:
        for ctx in self.threads:
            if ctx.state in _FREE_STATES:
                self._processor.switch.drop_exception(self.unit_number, ctx.number)
                ctx.start(ip, lc0, lc1, ld0, ld1, exc)
                logger.debug("Unit %d started thread %d at ip 0x%04X.", self.unit_number, ctx.number, ctx.ip)
                return ctx.number
        raise ThreadFault(FaultReason.NO_THREAD_AVAILABLE)

    def reset(self) -> None:
        self.memory = Memory()
        self.memory.install_rom(boot_rom_words())
        self.threads = [ThreadContext(number) for number in range(THREADS)]
        self.threads[0].start(ROM_FIRST_IP, 0, MEMORY_WORDS, 0, BOOT_ROM_BASE, 0)

    def run_round(self) -> int:
        """Give every running or blocked thread one attempt; returns instructions completed."""
        executed = 0
        tracer = self._processor.tracer
        for ctx in self.threads:
            if ctx.state not in _ACTIVE_STATES:
                continue
            ip = ctx.ip
            result = step(ctx, self.memory, self._channels[ctx.number], self)
            if result is StepResult.BLOCKED:
                continue
            executed += 1
            if tracer is not None and tracer.wants_instruction(self.unit_number, ctx.number):
                mnemonic = decode(self.memory.read(ip >> 2), ip & 3).mnemonic
                tracer.instruction(self.unit_number, ctx.number, ip, mnemonic, ctx.sp, ctx.top_of_stack(self.memory))
            if result is StepResult.STOPPED:
                self._processor.thread_stopped(self, ctx)
            elif result is StepResult.BREAK:
                self._processor.on_break(self, ctx)
        return executed


class Processor:
    def __init__(
        self,
        processor_id: int = FIRST_PROCESSOR_ID,
        lines: Optional[Sequence[PeripheralLine]] = None,
        tracer: Optional[Tracer] = None,
        debug: bool = False,
        break_handler: Optional[BreakHandler] = None,
    ) -> None:
        if not 0 <= processor_id <= COMMAND_MASK:
            raise ValueError(f"Processor id {processor_id} does not fit 22 bits.")
        self.processor_id = processor_id
        self.tracer = tracer
        self.debug = debug
        self.break_handler = break_handler
        self.switch = CommSwitch(processor_id, lines, tracer)
        self.units = [ProcessingUnit(self, number) for number in range(UNITS)]
        self.time = 0
        self.rounds = 0
        self.reset()

    def reset(self) -> None:
        self.time = 0
        self.rounds = 0
        for unit in self.units:
            unit.reset()

    def thread(self, unit: int, thread: int) -> ThreadContext:
        return self.units[unit].threads[thread]

    def deliver_init(self, words: Sequence[int], unit: int = 0) -> None:
        """Queue a boot message (start position, code words, END) for a unit's thread 0 port 0."""
        self.switch.inject_message(("init", unit), f"init u{unit}", pack_port(0, unit, 0, 0).raw, words)

    # thread life cycle

    def thread_stopped(self, unit: ProcessingUnit, ctx: ThreadContext) -> None:
        reason = ctx.stop_reason or FaultReason.EXPLICIT_STOP
        if reason is FaultReason.EXPLICIT_STOP:
            logger.debug("Unit %d thread %d stopped at ip 0x%04X.", unit.unit_number, ctx.number, ctx.ip)
        else:
            logger.info(
                "Processor %d unit %d thread %d faulted: %s at ip 0x%04X.",
                self.processor_id,
                unit.unit_number,
                ctx.number,
                reason.name,
                ctx.ip,
            )
        self.switch.release_thread(unit.unit_number, ctx.number)
        self.emit_exception(unit.unit_number, ctx)

    def emit_exception(self, unit: int, ctx: ThreadContext) -> None:
        if ctx.exc == 0:
            return
        reason = ctx.stop_reason or FaultReason.EXPLICIT_STOP
        words = [pack_port(self.processor_id, unit, ctx.number, 0).raw, int(reason), ctx.ip]
        self.switch.send_exception(unit, ctx.number, ctx.exc, words)

    def on_break(self, unit: ProcessingUnit, ctx: ThreadContext) -> None:
        ctx.state = ThreadState.STALLED
        try:
            if self.break_handler is not None:
                self.break_handler(thread_snapshot(unit.unit_number, ctx, unit.memory))
        finally:
            ctx.state = ThreadState.RUNNING

    # scheduling

    def run_round(self) -> RoundReport:
        executed = sum(unit.run_round() for unit in self.units)
        moved = self.switch.pump()
        self.time = (self.time + 1) & WORD_MASK
        self.rounds += 1
        return RoundReport(executed, moved, self.time)

    def pending_timeouts(self) -> bool:
        return any(
            ctx.state is ThreadState.BLOCKED and ctx.blocked_on == "timeout"
            for unit in self.units
            for ctx in unit.threads
        )

    def expects_more(self) -> bool:
        """True while something outside the simulation may still wake it up."""
        return self.switch.awaiting_input() or self.switch.links_open()

    def run(self, max_rounds: Optional[int] = None, idle_wait: float = 0.005) -> HaltReason:
        while True:
            if max_rounds is not None and self.rounds >= max_rounds:
                return HaltReason.MAX_ROUNDS
            report = self.run_round()
            if not report.idle or self.pending_timeouts():
                continue
            if self.expects_more():
                self.switch.wait_for_activity(idle_wait)
                continue
            return HaltReason.QUIESCENT

    # inspection

    def all_threads(self) -> List[Tuple[int, ThreadContext]]:
        return [(unit.unit_number, ctx) for unit in self.units for ctx in unit.threads]

    def faulted_threads(self) -> List[Tuple[int, ThreadContext]]:
        return [
            (unit, ctx)
            for unit, ctx in self.all_threads()
            if ctx.state is ThreadState.STOPPED and ctx.stop_reason not in (None, FaultReason.EXPLICIT_STOP)
        ]

    def blocked_threads(self) -> List[Tuple[int, ThreadContext]]:
        return [(unit, ctx) for unit, ctx in self.all_threads() if ctx.state is ThreadState.BLOCKED]

    def deadlock_report(self) -> List[str]:
        lines = []
        for unit, ctx in self.blocked_threads():
            lines.append(f"u{unit} t{ctx.number} ip {ctx.ip:04x} blocked on {ctx.blocked_on or 'unknown'}")
        return lines

    def halt_report(self, halt: HaltReason) -> Dict[str, Any]:
        threads = [
            thread_snapshot(unit, ctx, self.units[unit].memory)
            for unit, ctx in self.all_threads()
            if ctx.state is not ThreadState.UNSTARTED
        ]
        return {
            "processor_id": self.processor_id,
            "halt": halt.value,
            "time": self.time,
            "rounds": self.rounds,
            "faulted": len(self.faulted_threads()),
            "threads": threads,
        }

    def close(self) -> None:
        for index in range(EXTERNAL_LINKS):
            endpoint = self.switch.link(index)
            close = getattr(endpoint, "close", None)
            if close is not None:
                close()
        self.switch.close()
