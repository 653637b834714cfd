from __future__ import annotations

from collections import defaultdict, deque
from typing import Any, Deque, Dict, List, Optional, Sequence, Set, Tuple

from nopsim.asm.assembler import assemble
from nopsim.cpu.memory import Memory
from nopsim.cpu.thread import StepResult, ThreadContext, ThreadState, step
from nopsim.switch.tokens import Token

CODE_BASE = 0x100
DATA_BASE = 0x1000
DATA_WORDS = 0x100


class FakeChannels:
    """Channel ports without a switch: sends are recorded, inputs are preloaded."""

    def __init__(self) -> None:
        self.dests: Dict[int, int] = {}
        self.inbox: Dict[int, Deque[Token]] = defaultdict(deque)
        self.sent: List[Tuple[int, Token]] = []
        self.accepting = True
        self.writable: Set[int] = set()

    def get_dest(self, port: int) -> int:
        return self.dests.get(port, 0)

    def set_dest(self, port: int, dest: int) -> None:
        self.dests[port] = dest

    def submit(self, port: int, token: Token) -> bool:
        if not self.accepting:
            return False
        self.sent.append((port, token))
        return True

    def peek(self, port: int) -> Optional[Token]:
        inbox = self.inbox[port]
        return inbox[0] if inbox else None

    def take(self, port: int) -> Token:
        return self.inbox[port].popleft()

    def can_send(self, port: int) -> bool:
        return port in self.writable


class FakeHost:
    def __init__(self, processor_id: int = 8, unit_number: int = 0, free_threads: int = 7) -> None:
        self.processor_id = processor_id
        self.unit_number = unit_number
        self.debug = False
        self.time = 0
        self.free_threads = free_threads
        self.cycles = 0
        self.next_thread = 3
        self.started: List[Tuple[int, int, int, int, int, int]] = []

    def free_thread_count(self) -> int:
        return self.free_threads

    def total_cycles(self) -> int:
        return self.cycles

    def start_thread(self, ip: int, lc0: int, lc1: int, ld0: int, ld1: int, exc: int) -> int:
        self.started.append((ip, lc0, lc1, ld0, ld1, exc))
        return self.next_thread


class Machine:
    """A single thread over its own memory, stepped directly."""

    def __init__(
        self,
        code: Sequence[int],
        lc0: int = CODE_BASE,
        lc1: Optional[int] = None,
        ld0: int = DATA_BASE,
        ld1: int = DATA_BASE + DATA_WORDS,
    ) -> None:
        self.memory = Memory()
        self.memory.load(lc0, code)
        self.ctx = ThreadContext(1)
        self.ctx.start(lc0 * 4, lc0, lc0 + len(code) if lc1 is None else lc1, ld0, ld1, 0)
        self.chan = FakeChannels()
        self.host = FakeHost()

    @classmethod
    def from_source(cls, source: str, **limits: Any) -> "Machine":
        lc0 = limits.get("lc0", CODE_BASE)
        return cls(assemble(source, origin=lc0).words, **limits)

    def step(self) -> StepResult:
        return step(self.ctx, self.memory, self.chan, self.host)

    def run(self, limit: int = 10_000) -> StepResult:
        """Step until the thread stops, blocks, or the step limit is reached."""
        result = StepResult.CONTINUE
        for _ in range(limit):
            result = self.step()
            if result in (StepResult.STOPPED, StepResult.BLOCKED):
                return result
        return result

    @property
    def stopped(self) -> bool:
        return self.ctx.state is ThreadState.STOPPED

    def stack(self) -> List[int]:
        """Stack contents, bottom first."""
        return [self.memory.read(address) for address in range(self.ctx.ld1 - 1, self.ctx.sp - 1, -1)]

    def preload_stack(self, values: Sequence[int]) -> None:
        for value in values:
            self.ctx.sp -= 1
            self.memory.write(self.ctx.sp, value)
