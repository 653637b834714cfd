"""TCP transport of the four external links and their bring-up."""

from __future__ import annotations

import logging
import socket
import time
from typing import Any, Callable, Dict, List, Optional, Sequence

from nopsim.isa.ports import EXTERNAL_LINKS
from nopsim.link.wire import (
    HANDSHAKE_SIZE,
    Frame,
    FrameDecoder,
    LinkProtocolError,
    decode_handshake,
    encode_frame,
    encode_handshake,
)

logger = logging.getLogger(__name__)

DEFAULT_HOST = "127.0.0.1"
DEFAULT_CONNECT_TIMEOUT = 30.0
SEND_HIGH_WATER = 64 * 1024
RECV_CHUNK = 64 * 1024
BACKOFF_START = 0.05
BACKOFF_MAX = 1.0

ProgressCallback = Callable[[str, Dict[str, Any]], None]


class LinkError(RuntimeError):
    pass


def _emit_progress(progress_callback: Optional[ProgressCallback], event: str, **payload: Any) -> None:
    if progress_callback is None:
        return
    progress_callback(event, dict(payload))


class TcpLink:
    """One connected external link, polled without blocking at round boundaries."""

    def __init__(self, index: int, sock: socket.socket, peer_id: Optional[int] = None, high_water: int = SEND_HIGH_WATER) -> None:
        self.index = index
        self.peer_id = peer_id
        self._sock = sock
        self._sock.setblocking(False)
        self._decoder = FrameDecoder()
        self._outbound = bytearray()
        self._high_water = high_water
        self._open = True

    @property
    def is_open(self) -> bool:
        return self._open

    def fileno(self) -> int:
        return self._sock.fileno()

    def can_send(self) -> bool:
        return self._open and len(self._outbound) < self._high_water

    def send_frame(self, frame: Frame) -> None:
        if not self._open:
            raise LinkError(f"Link {self.index} is closed.")
        self._outbound.extend(encode_frame(frame))
        self.flush()

    def flush(self) -> None:
        while self._outbound and self._open:
            try:
                sent = self._sock.send(self._outbound)
            except (BlockingIOError, InterruptedError):
                return
            except OSError as exc:
                self._open = False
                raise LinkError(f"Link {self.index}: send failed: {exc}") from exc
            del self._outbound[:sent]

    def receive_frames(self) -> List[Frame]:
        self.flush()
        frames: List[Frame] = []
        while self._open:
            try:
                chunk = self._sock.recv(RECV_CHUNK)
            except (BlockingIOError, InterruptedError):
                break
            except OSError as exc:
                self._open = False
                raise LinkError(f"Link {self.index}: receive failed: {exc}") from exc
            if not chunk:
                self._open = False
                if self._decoder.pending_bytes:
                    raise LinkError(f"Link {self.index}: peer closed the connection inside a frame.")
                logger.info("Link %d: peer closed the connection.", self.index)
                break
            try:
                frames.extend(self._decoder.feed(chunk))
            except LinkProtocolError as exc:
                frames.extend(exc.frames)
                logger.error("Link %d: %s Closing the link.", self.index, exc)
                self.close()
                break
        return frames

    def close(self) -> None:
        if self._open:
            try:
                self.flush()
            except LinkError:
                pass
        self._open = False
        try:
            self._sock.close()
        except OSError:
            pass


def _listen(host: str, port: int) -> socket.socket:
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        listener.bind((host, port))
    except OSError as exc:
        listener.close()
        raise LinkError(f"Cannot listen on {host}:{port}: {exc}") from exc
    listener.listen(1)
    return listener


def _connect(host: str, port: int, deadline: float) -> socket.socket:
    delay = BACKOFF_START
    while True:
        try:
            return socket.create_connection((host, port), timeout=max(0.1, deadline - time.monotonic()))
        except (ConnectionRefusedError, socket.timeout) as exc:
            if time.monotonic() + delay > deadline:
                raise LinkError(f"Cannot connect to {host}:{port}: {exc}") from exc
            logger.debug("Connect to %s:%d refused, retrying in %.2fs.", host, port, delay)
            time.sleep(delay)
            delay = min(delay * 2, BACKOFF_MAX)


def _accept(listener: socket.socket, deadline: float) -> socket.socket:
    listener.settimeout(max(0.1, deadline - time.monotonic()))
    try:
        conn, _ = listener.accept()
    except socket.timeout as exc:
        raise LinkError(f"No peer connected to port {listener.getsockname()[1]} in time.") from exc
    return conn


def _read_handshake(sock: socket.socket, deadline: float) -> int:
    sock.settimeout(max(0.1, deadline - time.monotonic()))
    data = bytearray()
    try:
        while len(data) < HANDSHAKE_SIZE:
            chunk = sock.recv(HANDSHAKE_SIZE - len(data))
            if not chunk:
                raise LinkError("Peer closed the connection during the handshake.")
            data.extend(chunk)
    except socket.timeout as exc:
        raise LinkError("Peer did not complete the handshake in time.") from exc
    return decode_handshake(bytes(data))


def bring_up(
    first_own_socket: Optional[int],
    connect_to: Sequence[int],
    processor_id: int,
    host: str = DEFAULT_HOST,
    stub_mask: int = 0,
    connect_timeout: float = DEFAULT_CONNECT_TIMEOUT,
    progress_callback: Optional[ProgressCallback] = None,
) -> List[Optional[TcpLink]]:
    """Connect links 0..n-1 to `connect_to`, accept peers on the rest.

    Listeners are opened on first_own_socket..+3 before any connection is
    attempted. Every side sends its handshake as soon as a connection exists
    and reads the peers' handshakes only once all links are connected, so two
    instances that connect to each other cannot wait on one another. Stubbed
    links are neither connected nor awaited. Without a first socket the
    processor runs stand-alone and no socket is touched.
    """
    links: List[Optional[TcpLink]] = [None] * EXTERNAL_LINKS
    if first_own_socket is None:
        return links
    if len(connect_to) > EXTERNAL_LINKS:
        raise LinkError(f"At most {EXTERNAL_LINKS} connect-to sockets are allowed.")

    active = [index for index in range(EXTERNAL_LINKS) if not stub_mask & (1 << index)]
    _emit_progress(progress_callback, "set_total", total=len(active), description="links")
    deadline = time.monotonic() + connect_timeout

    listeners: Dict[int, socket.socket] = {}
    sockets: Dict[int, socket.socket] = {}
    try:
        for index in active:
            listeners[index] = _listen(host, first_own_socket + index)

        hello = encode_handshake(processor_id)
        for index in active:
            if index < len(connect_to):
                sock = _connect(host, connect_to[index], deadline)
            else:
                sock = _accept(listeners[index], deadline)
            sock.sendall(hello)
            sockets[index] = sock

        for index in active:
            sock = sockets[index]
            peer_id = _read_handshake(sock, deadline)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            links[index] = TcpLink(index, sock, peer_id=peer_id)
            logger.info("Link %d up, peer processor %d.", index, peer_id)
            _emit_progress(progress_callback, "step", link=index, peer=peer_id)
    except (LinkError, LinkProtocolError, OSError) as exc:
        for sock in sockets.values():
            sock.close()
        if isinstance(exc, LinkError):
            raise
        raise LinkError(f"Link bring-up failed: {exc}") from exc
    finally:
        for listener in listeners.values():
            listener.close()

    _emit_progress(progress_callback, "complete")
    return links
