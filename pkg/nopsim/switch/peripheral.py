"""Peripheral lines: the byte-stream side of the communication switch.

Line 0 reads standard input, line 1 writes standard output and lines 2..7
are bound to files in command-line order. Each DATA word sent to a line
writes its low byte; each byte read from a line becomes DATA(byte) addressed
to the line's inbound destination, followed by a single END at end of file.
"""

from __future__ import annotations

import logging
import queue
import threading
from pathlib import Path
from typing import BinaryIO, List, Optional, Sequence, Tuple

from nopsim.isa.ports import PERIPHERAL_LINES
from nopsim.switch.tokens import Token, TokenKind

logger = logging.getLogger(__name__)

READ_CHUNK = 4096
STDIN_LINE = 0
STDOUT_LINE = 1
FIRST_FILE_LINE = 2


class ByteSource:
    """Inbound bytes of one line.

    Reading starts only when `start()` is called, so a line without a
    destination leaves its stream untouched. Threaded sources read on a daemon
    thread and hand chunks over through a queue; others read synchronously on
    `poll()`, which is what regular files and in-memory streams want.
    """

    def __init__(self, stream: BinaryIO, threaded: bool = False, chunk_size: int = READ_CHUNK) -> None:
        self._stream = stream
        self._threaded = threaded
        self._chunk_size = chunk_size
        self._queue: "queue.Queue[bytes]" = queue.Queue()
        self._reader: Optional[threading.Thread] = None
        self._started = False
        self._eof = False

    @property
    def started(self) -> bool:
        return self._started

    @property
    def exhausted(self) -> bool:
        return self._eof

    def start(self) -> None:
        if self._started:
            return
        self._started = True
        if self._threaded:
            self._reader = threading.Thread(target=self._read_loop, name="nopsim-line-reader", daemon=True)
            self._reader.start()

    def _read_chunk(self) -> bytes:
        read1 = getattr(self._stream, "read1", None)
        try:
            if read1 is not None:
                return read1(self._chunk_size)
            return self._stream.read(self._chunk_size) or b""
        except (OSError, ValueError) as exc:
            logger.warning("Peripheral read failed, treating as end of input: %s", exc)
            return b""

    def _read_loop(self) -> None:
        while True:
            chunk = self._read_chunk()
            self._queue.put(chunk)
            if not chunk:
                return

    def close(self) -> None:
        self._stream.close()

    def poll(self) -> bytes:
        """Return whatever bytes are available now; sets `exhausted` at end of input."""
        if not self._started or self._eof:
            return b""
        if not self._threaded:
            chunk = self._read_chunk()
            if not chunk:
                self._eof = True
            return chunk
        collected = bytearray()
        while True:
            try:
                chunk = self._queue.get_nowait()
            except queue.Empty:
                break
            if not chunk:
                self._eof = True
                break
            collected.extend(chunk)
        return bytes(collected)


class PeripheralLine:
    def __init__(
        self,
        index: int,
        source: Optional[ByteSource] = None,
        sink: Optional[BinaryIO] = None,
        label: str = "",
    ) -> None:
        self.index = index
        self.source = source
        self.sink = sink
        self.label = label or f"line{index}"
        self.inbound_dest: Optional[int] = None
        self._pending = bytearray()
        self._end_sent = False
        self.owns_streams = False

    def awaiting_input(self) -> bool:
        """True while bytes may still arrive from outside the simulation."""
        return (
            self.inbound_dest is not None
            and self.source is not None
            and not self.source.exhausted
            and not self._pending
        )

    def next_token(self) -> Optional[Token]:
        """Peek the next inbound token without consuming it."""
        if self.inbound_dest is None or self._end_sent or self.source is None:
            return None
        self.source.start()
        if not self._pending:
            self._pending.extend(self.source.poll())
        if self._pending:
            return Token.data(self._pending[0])
        if self.source.exhausted:
            return Token.end()
        return None

    def consume(self, token: Token) -> None:
        if token.kind is TokenKind.END:
            self._end_sent = True
        else:
            del self._pending[0]

    def write(self, token: Token) -> None:
        if self.sink is None:
            if token.kind is TokenKind.DATA:
                logger.warning("Discarding byte 0x%02X sent to unbound peripheral line %d.", token.value & 0xFF, self.index)
            return
        if token.kind is TokenKind.DATA:
            self.sink.write(bytes([token.value & 0xFF]))
        elif token.kind is TokenKind.END:
            self.flush()

    def flush(self) -> None:
        if self.sink is not None:
            self.sink.flush()

    def close(self) -> None:
        try:
            self.flush()
        except (OSError, ValueError):
            pass
        if self.owns_streams:
            if self.sink is not None:
                self.sink.close()
            if self.source is not None:
                self.source.close()


def _open_file_binding(path: Path) -> Tuple[BinaryIO, BinaryIO]:
    # Writes append after the existing content, reads start at the beginning.
    # The writer opens first so a missing file is created.
    writer = path.open("ab")
    try:
        reader = path.open("rb")
    except OSError:
        writer.close()
        raise
    return reader, writer


def standard_lines(
    stdin: Optional[BinaryIO],
    stdout: Optional[BinaryIO],
    files: Sequence[Path] = (),
    threaded_stdin: bool = True,
) -> List[PeripheralLine]:
    """Build the eight peripheral lines; unbound lines neither read nor write."""
    if len(files) > PERIPHERAL_LINES - FIRST_FILE_LINE:
        raise ValueError(f"At most {PERIPHERAL_LINES - FIRST_FILE_LINE} files can be bound to peripheral lines.")

    lines = [PeripheralLine(index) for index in range(PERIPHERAL_LINES)]
    if stdin is not None:
        lines[STDIN_LINE].source = ByteSource(stdin, threaded=threaded_stdin)
        lines[STDIN_LINE].label = "line0 (stdin)"
    if stdout is not None:
        lines[STDOUT_LINE].sink = stdout
        lines[STDOUT_LINE].label = "line1 (stdout)"

    for offset, path in enumerate(files):
        index = FIRST_FILE_LINE + offset
        reader, writer = _open_file_binding(Path(path))
        lines[index] = PeripheralLine(index, source=ByteSource(reader), sink=writer, label=f"line{index} ({path})")
        lines[index].owns_streams = True
    return lines
