"""Per-processor communication switch.

Every sender (a thread's channel port, a link, a peripheral line, the
exception outbox of a thread, the init injector) is identified by a source
key. The first token of a message resolves the destination and claims the
target sink; the claim holds until END (delivered) or PAUSE (not delivered)
and is what keeps two messages from interleaving at one receiver.
"""

from __future__ import annotations

import logging
import selectors
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, Dict, Iterable, List, Optional, Protocol, Sequence, Tuple

from nopsim.cpu.faults import FaultReason, ThreadFault
from nopsim.isa.ports import (
    COMMAND_MASK,
    EXTERNAL_LINKS,
    PERIPHERAL_LINES,
    PORTS,
    THREADS,
    UNITS,
    GlobalPort,
    IllegalRouteError,
    RouteKind,
    classify_route,
)
from nopsim.link.transport import LinkError
from nopsim.link.wire import Frame, FrameTag
from nopsim.switch.peripheral import PeripheralLine
from nopsim.switch.tokens import Token, TokenKind
from nopsim.trace import EXTERN_CONFIG_BIT, Tracer, line_bit, link_bit

logger = logging.getLogger(__name__)

INBOX_CAPACITY = 1
CONFIG_RECORD_WORDS = 3
CONFIG_ROUTE = 0
CONFIG_LINE_DESTINATION = 1

SourceKey = Tuple[object, ...]


def port_key(unit: int, thread: int, port: int) -> SourceKey:
    return ("port", unit, thread, port)


class LinkEndpoint(Protocol):
    @property
    def is_open(self) -> bool: ...

    def can_send(self) -> bool: ...

    def send_frame(self, frame: Frame) -> None: ...

    def receive_frames(self) -> List[Frame]: ...

    def fileno(self) -> int: ...


class _Sink:
    label = ""
    extern_bit = 0

    def __init__(self) -> None:
        self.claimed_by: Optional[SourceKey] = None

    def can_accept(self, token: Token) -> bool:
        return True

    def open(self, header: int) -> None:
        pass

    def deliver(self, token: Token) -> None:
        raise NotImplementedError


class ChannelPort(_Sink):
    """Thread-side port: stored destination plus a bounded inbox."""

    def __init__(self, unit: int, thread: int, port: int, capacity: int = INBOX_CAPACITY) -> None:
        super().__init__()
        self.unit = unit
        self.thread = thread
        self.port = port
        self.capacity = capacity
        self.dest = 0
        self.inbox: Deque[Token] = deque()
        self.label = f"u{unit}t{thread}p{port}"

    def can_accept(self, token: Token) -> bool:
        return token.kind is TokenKind.PAUSE or len(self.inbox) < self.capacity

    def deliver(self, token: Token) -> None:
        if token.kind is not TokenKind.PAUSE:
            self.inbox.append(token)


class _LineSink(_Sink):
    def __init__(self, line: PeripheralLine) -> None:
        super().__init__()
        self.line = line
        self.label = f"line{line.index}"
        self.extern_bit = line_bit(line.index)

    def deliver(self, token: Token) -> None:
        if token.kind is not TokenKind.PAUSE:
            self.line.write(token)


class _ConfigSink(_Sink):
    label = "config"
    extern_bit = 1 << EXTERN_CONFIG_BIT

    def __init__(self, apply: Callable[[Sequence[int]], None]) -> None:
        super().__init__()
        self._apply = apply
        self._words: List[int] = []

    def deliver(self, token: Token) -> None:
        if token.kind is TokenKind.DATA:
            self._words.append(token.value)
        elif token.kind is TokenKind.END:
            words, self._words = self._words, []
            self._apply(words)


class _LinkSink(_Sink):
    def __init__(self, index: int) -> None:
        super().__init__()
        self.index = index
        self.endpoint: Optional[LinkEndpoint] = None
        self.label = f"link{index}"
        self.extern_bit = link_bit(index)

    def can_accept(self, token: Token) -> bool:
        return self.endpoint is not None and self.endpoint.is_open and self.endpoint.can_send()

    def open(self, header: int) -> None:
        assert self.endpoint is not None
        self.endpoint.send_frame(Frame.header(header))

    def deliver(self, token: Token) -> None:
        assert self.endpoint is not None
        self.endpoint.send_frame(Frame.from_token(token))


@dataclass
class _QueuedSource:
    key: SourceKey
    label: str
    pending: Deque[Tuple[int, Token]] = field(default_factory=deque)
    persistent: bool = False


class CommSwitch:
    def __init__(
        self,
        processor_id: int,
        lines: Optional[Sequence[PeripheralLine]] = None,
        tracer: Optional[Tracer] = None,
        inbox_capacity: int = INBOX_CAPACITY,
    ) -> None:
        self.processor_id = processor_id
        self.tracer = tracer
        self.ports = [
            [[ChannelPort(u, t, p, inbox_capacity) for p in range(PORTS)] for t in range(THREADS)] for u in range(UNITS)
        ]
        self.lines: List[PeripheralLine] = list(lines) if lines is not None else [PeripheralLine(i) for i in range(PERIPHERAL_LINES)]
        if len(self.lines) != PERIPHERAL_LINES:
            raise ValueError(f"Expected {PERIPHERAL_LINES} peripheral lines, got {len(self.lines)}.")
        self._line_sinks = [_LineSink(line) for line in self.lines]
        self._config_sink = _ConfigSink(self.apply_config)
        self._link_sinks = [_LinkSink(index) for index in range(EXTERNAL_LINKS)]
        self._link_segment_dest: List[Optional[int]] = [None] * EXTERNAL_LINKS
        self.routes: Dict[int, int] = {}
        self._paths: Dict[SourceKey, _Sink] = {}
        self._sources: Dict[SourceKey, _QueuedSource] = {}

    # wiring

    def port(self, unit: int, thread: int, port: int) -> ChannelPort:
        return self.ports[unit][thread][port]

    def channels_for(self, unit: int, thread: int) -> "ThreadChannels":
        return ThreadChannels(self, unit, thread)

    def attach_link(self, index: int, endpoint: Optional[LinkEndpoint]) -> None:
        self._link_sinks[index].endpoint = endpoint

    def link(self, index: int) -> Optional[LinkEndpoint]:
        return self._link_sinks[index].endpoint

    def set_route(self, processor_id: int, link: int) -> None:
        self.routes[processor_id & COMMAND_MASK] = link % EXTERNAL_LINKS
        logger.debug("Processor %d: route to %d via link %d.", self.processor_id, processor_id, link % EXTERNAL_LINKS)

    # routing and path arbitration

    def resolve(self, destination: int) -> Tuple[_Sink, int]:
        """Map a destination word to its sink and the HEADER word a link sink would carry."""
        target = GlobalPort(destination)
        route = classify_route(target)
        if route.kind is RouteKind.LOCAL_UNIT:
            return self.port(target.unit, target.thread, target.port), destination
        if route.kind is RouteKind.PERIPHERAL_LINE:
            return self._line_sinks[route.index or 0], destination
        if route.kind is RouteKind.ROUTER_CONFIG:
            return self._config_sink, destination
        if route.kind is RouteKind.EXTERNAL_LINK:
            return self._link_sinks[route.index or 0], target.local_part
        if route.index == self.processor_id:
            return self.port(target.unit, target.thread, target.port), destination
        link = self.routes.get(route.index or 0)
        if link is None:
            raise IllegalRouteError(destination, f"no route to processor {route.index}")
        return self._link_sinks[link], destination

    def path_of(self, source: SourceKey) -> Optional[str]:
        sink = self._paths.get(source)
        return None if sink is None else sink.label

    def submit(self, source: SourceKey, destination: int, token: Token) -> bool:
        """Offer one token from `source`; False means rejected (retry later)."""
        sink = self._paths.get(source)
        if sink is None:
            if token.kind is TokenKind.PAUSE:
                return True
            sink, header = self.resolve(destination)
            if sink.claimed_by is not None and sink.claimed_by != source:
                return False
            if not sink.can_accept(token):
                return False
            sink.claimed_by = source
            self._paths[source] = sink
            sink.open(header)
        elif not sink.can_accept(token):
            return False

        sink.deliver(token)
        if token.closes_path:
            sink.claimed_by = None
            del self._paths[source]
        self._trace_transfer(source, sink, token)
        return True

    def can_send(self, source: SourceKey, destination: int) -> bool:
        if source in self._sources:
            return False
        sink = self._paths.get(source)
        if sink is None:
            try:
                sink, _ = self.resolve(destination)
            except IllegalRouteError:
                return True
            if sink.claimed_by is not None and sink.claimed_by != source:
                return False
        return sink.can_accept(Token.data(0))

    def _trace_transfer(self, source: SourceKey, sink: _Sink, token: Token) -> None:
        tracer = self.tracer
        if tracer is None or not tracer.enabled:
            return
        if source[0] == "port":
            _, unit, thread, port = source
            if tracer.wants_intern(unit, thread):  # type: ignore[arg-type]
                tracer.token("out", f"u{unit}t{thread}p{port}", token)
        if isinstance(sink, ChannelPort):
            if token.kind is not TokenKind.PAUSE and tracer.wants_intern(sink.unit, sink.thread):
                tracer.token("in", sink.label, token)
        elif tracer.wants_extern(sink.extern_bit):
            tracer.token("out", sink.label, token)

    # queued sources: exception outboxes, init injector, finalisers, links

    def inject(self, source: SourceKey, label: str, destination: int, tokens: Iterable[Token]) -> None:
        queued = self._sources.get(source)
        if queued is None:
            queued = self._sources[source] = _QueuedSource(source, label)
        queued.pending.extend((destination, token) for token in tokens)

    def inject_message(self, source: SourceKey, label: str, destination: int, words: Iterable[int]) -> None:
        tokens = [Token.data(word) for word in words]
        tokens.append(Token.end())
        self.inject(source, label, destination, tokens)

    def send_exception(self, unit: int, thread: int, destination: int, words: Sequence[int]) -> None:
        self.inject_message(("exc", unit, thread), f"exception u{unit}t{thread}", destination, words)

    def drop_exception(self, unit: int, thread: int) -> bool:
        """Forget an undelivered exception message; True when one was pending."""
        key: SourceKey = ("exc", unit, thread)
        queued = self._sources.pop(key, None)
        if queued is None:
            return False
        sink = self._paths.pop(key, None)
        if sink is not None:
            # Part of the message is already out; close it so the receiver is released.
            if sink.can_accept(Token.end()):
                sink.deliver(Token.end())
            sink.claimed_by = None
        logger.warning("Dropped undelivered exception message of unit %d thread %d.", unit, thread)
        return True

    def release_thread(self, unit: int, thread: int) -> None:
        """Close every message a stopped thread left open with a trailing END."""
        for port in range(PORTS):
            key = port_key(unit, thread, port)
            if key in self._paths and key not in self._sources:
                logger.debug("Finalising open message of u%dt%dp%d.", unit, thread, port)
                self.inject(key, f"finaliser u{unit}t{thread}p{port}", 0, [Token.end()])

    def finalising(self, source: SourceKey) -> bool:
        return source in self._sources

    def has_queued_tokens(self) -> bool:
        return any(queued.pending for queued in self._sources.values())

    def _drain(self, queued: _QueuedSource) -> int:
        moved = 0
        while queued.pending:
            destination, token = queued.pending[0]
            try:
                accepted = self.submit(queued.key, destination, token)
            except IllegalRouteError as exc:
                logger.warning("Discarding message from %s: %s", queued.label, exc)
                self._discard_segment(queued)
                continue
            if not accepted:
                break
            queued.pending.popleft()
            moved += 1
        if not queued.pending and not queued.persistent:
            del self._sources[queued.key]
        return moved

    @staticmethod
    def _discard_segment(queued: _QueuedSource) -> None:
        while queued.pending:
            _, token = queued.pending.popleft()
            if token.closes_path:
                return

    # links

    def _link_source(self, index: int) -> _QueuedSource:
        key: SourceKey = ("link", index)
        queued = self._sources.get(key)
        if queued is None:
            queued = self._sources[key] = _QueuedSource(key, f"link{index}", persistent=True)
        return queued

    def receive_frame(self, index: int, frame: Frame) -> None:
        if frame.tag is FrameTag.HEADER:
            if self._link_segment_dest[index] is not None:
                logger.warning("Link %d: HEADER inside an open segment; previous segment abandoned.", index)
            self._link_segment_dest[index] = frame.value
            return
        destination = self._link_segment_dest[index]
        if destination is None:
            logger.warning("Link %d: %s frame outside a segment dropped.", index, frame.tag.name)
            return
        token = frame.to_token()
        if self.tracer is not None and self.tracer.wants_extern(link_bit(index)):
            self.tracer.token("in", f"link{index}", token)
        self._link_source(index).pending.append((destination, token))
        if token.closes_path:
            self._link_segment_dest[index] = None

    def link_segment_open(self, index: int) -> bool:
        return self._link_segment_dest[index] is not None

    def poll_links(self) -> None:
        for sink in self._link_sinks:
            endpoint = sink.endpoint
            if endpoint is None or not endpoint.is_open:
                continue
            for frame in endpoint.receive_frames():
                self.receive_frame(sink.index, frame)
            if not endpoint.is_open and self.link_segment_open(sink.index):
                raise LinkError(f"Link {sink.index} closed in the middle of a message.")

    def links_open(self) -> bool:
        return any(s.endpoint is not None and s.endpoint.is_open for s in self._link_sinks)

    # configuration block

    def apply_config(self, words: Sequence[int]) -> None:
        whole = len(words) - len(words) % CONFIG_RECORD_WORDS
        for offset in range(0, whole, CONFIG_RECORD_WORDS):
            kind, key, value = words[offset : offset + CONFIG_RECORD_WORDS]
            if kind == CONFIG_ROUTE:
                self.set_route(key, value & 0x3)
            elif kind == CONFIG_LINE_DESTINATION:
                self.lines[key & 0x7].inbound_dest = value
                logger.debug("Processor %d: line %d now sends to 0x%08X.", self.processor_id, key & 0x7, value)
            else:
                logger.warning("Ignoring router config record of unknown type %d.", kind)
        if whole != len(words):
            logger.warning("Ignoring %d trailing router config words.", len(words) - whole)

    # peripherals

    def peripheral_pump(self) -> int:
        moved = 0
        for line in self.lines:
            key: SourceKey = ("line", line.index)
            while True:
                token = line.next_token()
                if token is None or line.inbound_dest is None:
                    break
                try:
                    accepted = self.submit(key, line.inbound_dest, token)
                except IllegalRouteError as exc:
                    logger.error("Peripheral line %d: %s; input held.", line.index, exc)
                    line.inbound_dest = None
                    break
                if not accepted:
                    break
                if self.tracer is not None and self.tracer.wants_extern(line_bit(line.index)):
                    self.tracer.token("in", f"line{line.index}", token)
                line.consume(token)
                moved += 1
        return moved

    def awaiting_input(self) -> bool:
        return any(line.awaiting_input() for line in self.lines)

    # round boundary

    def pump(self) -> int:
        """Move queued link, exception and peripheral traffic; returns tokens moved."""
        self.poll_links()
        moved = 0
        for queued in list(self._sources.values()):
            moved += self._drain(queued)
        moved += self.peripheral_pump()
        return moved

    def wait_for_activity(self, timeout: float) -> None:
        endpoints = [s.endpoint for s in self._link_sinks if s.endpoint is not None and s.endpoint.is_open]
        if not endpoints:
            time.sleep(timeout)
            return
        with selectors.DefaultSelector() as selector:
            for endpoint in endpoints:
                selector.register(endpoint.fileno(), selectors.EVENT_READ)
            selector.select(timeout)

    def close(self) -> None:
        for line in self.lines:
            line.close()


class ThreadChannels:
    """The 32 channel ports of one thread, as its instructions see them."""

    def __init__(self, switch: CommSwitch, unit: int, thread: int) -> None:
        self._switch = switch
        self.unit = unit
        self.thread = thread

    def _port(self, port: int) -> ChannelPort:
        return self._switch.port(self.unit, self.thread, port % PORTS)

    def get_dest(self, port: int) -> int:
        return self._port(port).dest

    def set_dest(self, port: int, dest: int) -> None:
        self._port(port).dest = dest

    def submit(self, port: int, token: Token) -> bool:
        key = port_key(self.unit, self.thread, port % PORTS)
        if self._switch.finalising(key):
            return False
        try:
            return self._switch.submit(key, self._port(port).dest, token)
        except IllegalRouteError as exc:
            raise ThreadFault(FaultReason.ILLEGAL_ROUTE, str(exc)) from exc

    def peek(self, port: int) -> Optional[Token]:
        inbox = self._port(port).inbox
        return inbox[0] if inbox else None

    def take(self, port: int) -> Token:
        return self._port(port).inbox.popleft()

    def can_send(self, port: int) -> bool:
        return self._switch.can_send(port_key(self.unit, self.thread, port % PORTS), self._port(port).dest)
