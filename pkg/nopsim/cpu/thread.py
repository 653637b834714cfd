"""Per-thread stack machine: registers, event table and instruction dispatch.

A thread only ever touches its unit's memory through the limits held in its
context, and the outside world through two narrow interfaces: `Channels`
(the thread's 32 channel ports, supplied by the communication switch) and
`ThreadHost` (unit services such as START, NOW and the cycle counters).

Blocking is cooperative. An instruction that cannot complete leaves ip and
sp untouched, returns `StepResult.BLOCKED` and is re-executed from scratch on
the next poll.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterator, Optional, Protocol, Tuple, Union

from nopsim.cpu import alu
from nopsim.cpu.faults import FaultReason, ThreadFault
from nopsim.cpu.memory import BOOT_ROM_BASE, MEMORY_WORDS, Memory
from nopsim.isa.opcodes import Op, Opcode, OpcodeKind, decode, imm_value
from nopsim.isa.ports import PORTS, pack_port
from nopsim.isa.words import FALSE, TRUE, to_signed, to_word
from nopsim.switch.tokens import Token, TokenKind

IP_MASK = 0xFFFF
POOL_OFFSET = 64
ROM_FIRST_IP = BOOT_ROM_BASE * 4
ROM_END_IP = MEMORY_WORDS * 4


class ThreadState(Enum):
    UNSTARTED = "unstarted"
    RUNNING = "running"
    BLOCKED = "blocked"
    STALLED = "stalled"
    STOPPED = "stopped"


class StepResult(Enum):
    CONTINUE = "continue"
    BLOCKED = "blocked"
    STOPPED = "stopped"
    BREAK = "break"


@dataclass
class EventVectors:
    out: Optional[int] = None
    inp: Optional[int] = None
    end: Optional[int] = None


class EventTable:
    def __init__(self) -> None:
        self._entries: Dict[int, EventVectors] = {}

    def clear(self) -> None:
        self._entries.clear()

    def _entry(self, port: int) -> EventVectors:
        return self._entries.setdefault(port % PORTS, EventVectors())

    def set_out(self, port: int, vector: int) -> None:
        self._entry(port).out = vector

    def set_in(self, port: int, vector: int) -> None:
        entry = self._entry(port)
        entry.inp = vector
        entry.end = vector

    def set_end(self, port: int, vector: int) -> None:
        self._entry(port).end = vector

    def get(self, port: int) -> EventVectors:
        return self._entries.get(port % PORTS, EventVectors())

    def configured(self) -> Iterator[Tuple[int, EventVectors]]:
        for port in sorted(self._entries):
            yield port, self._entries[port]

    def __bool__(self) -> bool:
        return any(v.out is not None or v.inp is not None or v.end is not None for v in self._entries.values())


@dataclass
class ThreadContext:
    number: int
    ip: int = 0
    sp: int = 0
    lc0: int = 0
    lc1: int = 0
    ld0: int = 0
    ld1: int = 0
    exc: int = 0
    state: ThreadState = ThreadState.UNSTARTED
    cycles: int = 0
    events: EventTable = field(default_factory=EventTable)
    stop_reason: Optional[FaultReason] = None
    blocked_on: Optional[str] = None

    @property
    def cp(self) -> int:
        return self.lc0 + POOL_OFFSET

    @property
    def dp(self) -> int:
        return self.ld0 + POOL_OFFSET

    @property
    def started(self) -> bool:
        return self.state not in (ThreadState.UNSTARTED, ThreadState.STOPPED)

    def start(self, ip: int, lc0: int, lc1: int, ld0: int, ld1: int, exc: int) -> None:
        self.ip = ip & IP_MASK
        self.lc0, self.lc1 = lc0, lc1
        self.ld0, self.ld1 = ld0, ld1
        self.sp = ld1
        self.exc = exc
        self.cycles = 0
        self.events.clear()
        self.stop_reason = None
        self.blocked_on = None
        self.state = ThreadState.RUNNING

    def ip_in_range(self, ip: int) -> bool:
        return self.lc0 * 4 <= ip < self.lc1 * 4 or ROM_FIRST_IP <= ip < ROM_END_IP

    def sp_in_range(self, sp: int) -> bool:
        return self.ld0 <= sp <= self.ld1

    def top_of_stack(self, mem: Memory) -> Optional[int]:
        if self.ld0 <= self.sp < min(self.ld1, mem.size):
            return mem.read(self.sp)
        return None


class Channels(Protocol):
    def get_dest(self, port: int) -> int: ...

    def set_dest(self, port: int, dest: int) -> None: ...

    def submit(self, port: int, token: Token) -> bool: ...

    def peek(self, port: int) -> Optional[Token]: ...

    def take(self, port: int) -> Token: ...

    def can_send(self, port: int) -> bool: ...


class ThreadHost(Protocol):
    processor_id: int
    unit_number: int
    debug: bool

    @property
    def time(self) -> int: ...

    def free_thread_count(self) -> int: ...

    def total_cycles(self) -> int: ...

    def start_thread(self, ip: int, lc0: int, lc1: int, ld0: int, ld1: int, exc: int) -> int: ...


class _Signal(Enum):
    BLOCK = "block"
    STOP = "stop"


_Outcome = Union[int, _Signal]


class _Execution:
    """One attempt at executing the opcode at ctx.ip; sp is committed only on success."""

    def __init__(self, ctx: ThreadContext, mem: Memory, chan: Channels, host: ThreadHost) -> None:
        self.ctx = ctx
        self.mem = mem
        self.chan = chan
        self.host = host
        self.ip = ctx.ip
        self.sp = ctx.sp
        self.hit_break = False

    # stack and memory access

    def pop(self) -> int:
        if self.sp >= self.ctx.ld1:
            raise ThreadFault(FaultReason.SP_OUT_OF_RANGE, "stack underflow")
        value = self.mem.read(self.sp)
        self.sp += 1
        return value

    def peek(self) -> int:
        if self.sp >= self.ctx.ld1:
            raise ThreadFault(FaultReason.SP_OUT_OF_RANGE, "stack underflow")
        return self.mem.read(self.sp)

    def push(self, value: int) -> None:
        if self.sp - 1 < self.ctx.ld0:
            raise ThreadFault(FaultReason.SP_OUT_OF_RANGE, "stack overflow")
        self.sp -= 1
        self.mem.write(self.sp, value)

    def _check_data(self, address: int) -> int:
        if not self.ctx.ld0 <= address < self.ctx.ld1:
            raise ThreadFault(FaultReason.SP_OUT_OF_RANGE, f"data access at 0x{address:X} outside limits")
        return address

    def data_address(self, index: int) -> int:
        return self._check_data(to_word(index + self.ctx.dp))

    def stack_address(self, index: int) -> int:
        return self._check_data(self.sp + to_signed(index))

    def relative(self, offset: int) -> int:
        return (self.ip + to_signed(offset)) & IP_MASK

    def next_ip(self) -> int:
        return (self.ip + 1) & IP_MASK

    def local_port(self) -> int:
        return self.pop() % PORTS

    # arithmetic

    def _binary(self, fn: Callable[[int, int], int]) -> _Outcome:
        a = self.pop()
        b = self.pop()
        self.push(fn(b, a))
        return self.next_ip()

    def _unary(self, fn: Callable[[int], int]) -> _Outcome:
        self.push(fn(self.pop()))
        return self.next_ip()

    def op_add(self) -> _Outcome:
        return self._binary(alu.add)

    def op_sub(self) -> _Outcome:
        return self._binary(alu.sub)

    def op_mul(self) -> _Outcome:
        return self._binary(alu.mul)

    def op_and(self) -> _Outcome:
        return self._binary(lambda b, a: b & a)

    def op_or(self) -> _Outcome:
        return self._binary(lambda b, a: b | a)

    def op_xor(self) -> _Outcome:
        return self._binary(lambda b, a: b ^ a)

    def op_uless(self) -> _Outcome:
        return self._binary(alu.uless)

    def op_sless(self) -> _Outcome:
        return self._binary(alu.sless)

    def op_combine(self) -> _Outcome:
        return self._binary(alu.combine)

    def op_sign(self) -> _Outcome:
        return self._unary(alu.sign)

    def op_zero(self) -> _Outcome:
        return self._unary(alu.zero)

    def _divide(self, fn: Callable[[int, int], Tuple[int, int]]) -> _Outcome:
        a = self.pop()
        if a == 0:
            raise ThreadFault(FaultReason.DIVIDE_BY_ZERO)
        b = self.pop()
        q, r = fn(b, a)
        self.push(q)
        self.push(r)
        return self.next_ip()

    def op_udiv(self) -> _Outcome:
        return self._divide(alu.udiv)

    def op_sdiv(self) -> _Outcome:
        return self._divide(alu.sdiv)

    # bit fields

    def op_swap(self) -> _Outcome:
        mask = self.pop() & 0x1F
        self.push(alu.swap_bits(self.pop(), mask))
        return self.next_ip()

    def _funnel(self, fn: Callable[[int, int, int], int]) -> _Outcome:
        a = self.pop()
        b = self.pop()
        c = self.pop()
        self.push(fn(c, b, a))
        return self.next_ip()

    def op_left(self) -> _Outcome:
        return self._funnel(alu.shift_left)

    def op_right(self) -> _Outcome:
        return self._funnel(alu.shift_right)

    def op_log2(self) -> _Outcome:
        return self._unary(alu.log2)

    def op_count(self) -> _Outcome:
        return self._unary(alu.count)

    # stack

    def op_pop(self) -> _Outcome:
        self.sp += 1
        return self.next_ip()

    def op_dup(self) -> _Outcome:
        self.push(self.peek())
        return self.next_ip()

    def op_exch(self) -> _Outcome:
        a = self.pop()
        b = self.pop()
        self.push(a)
        self.push(b)
        return self.next_ip()

    def op_ldx(self) -> _Outcome:
        address = self.stack_address(self.pop())
        self.push(self.mem.read(address))
        return self.next_ip()

    def op_stx(self) -> _Outcome:
        a = self.pop()
        b = self.pop()
        self.mem.write(self.stack_address(a), b)
        return self.next_ip()

    def op_ldax(self) -> _Outcome:
        a = self.pop()
        self.push(to_word(to_signed(a) + self.sp - self.ctx.dp))
        return self.next_ip()

    def op_popn(self) -> _Outcome:
        a = self.pop()
        self.sp += to_signed(a)
        return self.next_ip()

    # memory

    def op_ldc(self) -> _Outcome:
        a = self.pop()
        ctx = self.ctx
        if a + ctx.cp >= ctx.lc1:
            address = self._check_data(to_word(a - (ctx.lc1 - ctx.lc0) + ctx.dp))
        else:
            address = a + ctx.cp
        self.push(self.mem.read(address))
        return self.next_ip()

    def op_ld(self) -> _Outcome:
        self.push(self.mem.read(self.data_address(self.pop())))
        return self.next_ip()

    def op_st(self) -> _Outcome:
        address = self.data_address(self.pop())
        self.mem.write(address, self.pop())
        return self.next_ip()

    def op_ldinc(self) -> _Outcome:
        address = self.data_address(self.pop())
        value = self.mem.read(address)
        self.push(value)
        self.mem.write(address, to_word(value + 1))
        return self.next_ip()

    def op_decld(self) -> _Outcome:
        address = self.data_address(self.pop())
        value = to_word(self.mem.read(address) - 1)
        self.push(value)
        self.mem.write(address, value)
        return self.next_ip()

    # flow

    def op_nop(self) -> _Outcome:
        return self.next_ip()

    def op_ujp(self) -> _Outcome:
        return self.relative(self.pop())

    def op_fjp(self) -> _Outcome:
        a = self.pop()
        b = self.pop()
        return self.relative(a) if b == 0 else self.next_ip()

    def op_call(self) -> _Outcome:
        a = self.pop()
        self.push(to_word(self.ip + 1 - 4 * self.ctx.lc0))
        return self.relative(a)

    def op_jump(self) -> _Outcome:
        return (self.pop() + 4 * self.ctx.lc0) & IP_MASK

    def op_stop(self) -> _Outcome:
        return _Signal.STOP

    def op_break(self) -> _Outcome:
        self.hit_break = self.host.debug
        return self.next_ip()

    def op_port(self) -> _Outcome:
        port = self.pop() % PORTS
        self.push(pack_port(self.host.processor_id, self.host.unit_number, self.ctx.number, port).raw)
        return self.next_ip()

    def op_now(self) -> _Outcome:
        self.push(to_word(self.host.time))
        return self.next_ip()

    def op_threads(self) -> _Outcome:
        self.push(self.host.free_thread_count())
        return self.next_ip()

    def op_thrcyc(self) -> _Outcome:
        self.push(to_word(self.ctx.cycles))
        return self.next_ip()

    def op_cycles(self) -> _Outcome:
        self.push(to_word(self.host.total_cycles()))
        return self.next_ip()

    def op_start(self) -> _Outcome:
        if self.host.free_thread_count() == 0:
            raise ThreadFault(FaultReason.NO_THREAD_AVAILABLE)
        exc = self.pop()
        ld1 = self.pop()
        ld0 = self.pop()
        b = self.pop()
        lc1 = self.pop()
        lc0 = self.pop()
        number = self.host.start_thread(to_word((b + lc0) * 4), lc0, lc1, ld0, ld1, exc)
        self.push(pack_port(self.host.processor_id, self.host.unit_number, number, 0).raw)
        return self.next_ip()

    # channels

    def op_getport(self) -> _Outcome:
        self.push(self.chan.get_dest(self.local_port()))
        return self.next_ip()

    def op_setport(self) -> _Outcome:
        port = self.local_port()
        self.chan.set_dest(port, self.pop())
        return self.next_ip()

    def _send(self, port: int, token: Token) -> _Outcome:
        if not self.chan.submit(port, token):
            self.ctx.blocked_on = f"output port {port}"
            return _Signal.BLOCK
        return self.next_ip()

    def op_out(self) -> _Outcome:
        port = self.local_port()
        return self._send(port, Token.data(self.pop()))

    def op_outend(self) -> _Outcome:
        return self._send(self.local_port(), Token.end())

    def op_outpause(self) -> _Outcome:
        return self._send(self.local_port(), Token.pause())

    def op_in(self) -> _Outcome:
        port = self.local_port()
        if self.chan.peek(port) is None:
            self.ctx.blocked_on = f"input port {port}"
            return _Signal.BLOCK
        token = self.chan.take(port)
        if token.kind is TokenKind.END:
            raise ThreadFault(FaultReason.END_ON_INPUT, f"port {port}")
        self.push(token.value)
        return self.next_ip()

    def op_inmore(self) -> _Outcome:
        port = self.local_port()
        token = self.chan.peek(port)
        if token is None:
            self.ctx.blocked_on = f"input port {port}"
            return _Signal.BLOCK
        if token.kind is TokenKind.END:
            self.chan.take(port)
            self.push(FALSE)
        else:
            self.push(TRUE)
        return self.next_ip()

    # events

    def _vector(self) -> Tuple[int, int]:
        port = self.local_port()
        offset = self.pop()
        return port, (offset + self.ip) & IP_MASK

    def op_evclear(self) -> _Outcome:
        self.ctx.events.clear()
        return self.next_ip()

    def op_evout(self) -> _Outcome:
        self.ctx.events.set_out(*self._vector())
        return self.next_ip()

    def op_evin(self) -> _Outcome:
        self.ctx.events.set_in(*self._vector())
        return self.next_ip()

    def op_evend(self) -> _Outcome:
        self.ctx.events.set_end(*self._vector())
        return self.next_ip()

    def _fired_event(self) -> Optional[int]:
        for port, vectors in self.ctx.events.configured():
            if vectors.out is not None and self.chan.can_send(port):
                return vectors.out
            token = self.chan.peek(port)
            if vectors.end is not None and token is not None and token.kind is TokenKind.END:
                return vectors.end
            if vectors.inp is not None and token is not None:
                return vectors.inp
        return None

    def op_wait(self) -> _Outcome:
        vector = self._fired_event()
        if vector is None:
            self.ctx.blocked_on = "events" if self.ctx.events else "events (none configured)"
            return _Signal.BLOCK
        return vector

    def op_waittmo(self) -> _Outcome:
        deadline = self.pop()
        if to_signed(to_word(self.host.time - deadline)) >= 0:
            return self.next_ip()
        vector = self._fired_event()
        if vector is None:
            self.ctx.blocked_on = "timeout"
            return _Signal.BLOCK
        return vector

    def execute(self, opcode: Opcode) -> _Outcome:
        if opcode.kind is OpcodeKind.IMMEDIATE:
            self.push(imm_value(opcode))
            return self.next_ip()
        if opcode.kind is OpcodeKind.ILLEGAL:
            raise ThreadFault(FaultReason.ILLEGAL_OPCODE, f"byte 0x{opcode.byte:02X}")
        return _DISPATCH[opcode.operation](self)


_DISPATCH: Dict[Op, Callable[[_Execution], _Outcome]] = {op: getattr(_Execution, f"op_{op.name.lower()}") for op in Op}


def _stop(ctx: ThreadContext, reason: FaultReason) -> StepResult:
    ctx.state = ThreadState.STOPPED
    ctx.stop_reason = reason
    ctx.blocked_on = None
    return StepResult.STOPPED


def step(ctx: ThreadContext, mem: Memory, chan: Channels, host: ThreadHost) -> StepResult:
    """Execute (or retry) the instruction at ctx.ip."""
    if ctx.state not in (ThreadState.RUNNING, ThreadState.BLOCKED):
        raise ValueError(f"Thread {ctx.number} is {ctx.state.value}; only running threads step.")

    execution = _Execution(ctx, mem, chan, host)
    try:
        if not ctx.ip_in_range(ctx.ip):
            raise ThreadFault(FaultReason.IP_OUT_OF_RANGE, f"ip 0x{ctx.ip:04X}")
        outcome = execution.execute(decode(mem.read(ctx.ip >> 2), ctx.ip & 3))
    except ThreadFault as fault:
        return _stop(ctx, fault.reason)

    if outcome is _Signal.BLOCK:
        ctx.state = ThreadState.BLOCKED
        return StepResult.BLOCKED

    ctx.blocked_on = None
    ctx.state = ThreadState.RUNNING
    ctx.sp = execution.sp
    if outcome is _Signal.STOP:
        ctx.cycles += 1
        return _stop(ctx, FaultReason.EXPLICIT_STOP)

    if not ctx.sp_in_range(ctx.sp):
        return _stop(ctx, FaultReason.SP_OUT_OF_RANGE)
    ctx.ip = outcome
    if not ctx.ip_in_range(ctx.ip):
        return _stop(ctx, FaultReason.IP_OUT_OF_RANGE)
    ctx.cycles += 1
    return StepResult.BREAK if execution.hit_break else StepResult.CONTINUE
