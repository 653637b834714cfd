import socket
import time
import unittest
from typing import List, Tuple
from unittest.mock import MagicMock, patch

from nopsim.link import transport
from nopsim.link.transport import LinkError, TcpLink, bring_up
from nopsim.link.wire import Frame, FrameTag, decode_handshake, encode_frame, encode_handshake


def _tcp_pair() -> Tuple[socket.socket, socket.socket]:
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.bind(("127.0.0.1", 0))
    listener.listen(1)
    client = socket.create_connection(listener.getsockname())
    server, _ = listener.accept()
    listener.close()
    return client, server


def _wait_for_frames(link: TcpLink, count: int) -> List[Frame]:
    frames: List[Frame] = []
    deadline = time.monotonic() + 5
    while len(frames) < count and time.monotonic() < deadline:
        frames.extend(link.receive_frames())
    return frames


class TestTcpLink(unittest.TestCase):
    def test_send_and_receive(self) -> None:
        left, right = socket.socketpair()
        a, b = TcpLink(0, left), TcpLink(1, right)
        try:
            a.send_frame(Frame.header(0x22A0))
            a.send_frame(Frame(FrameTag.DATA, 5))
            a.send_frame(Frame(FrameTag.END))
            self.assertEqual(
                _wait_for_frames(b, 3),
                [Frame.header(0x22A0), Frame(FrameTag.DATA, 5), Frame(FrameTag.END)],
            )
            self.assertTrue(a.can_send())
        finally:
            a.close()
            b.close()

    def test_peer_close_between_frames(self) -> None:
        left, right = socket.socketpair()
        link = TcpLink(0, right)
        left.sendall(encode_frame(Frame(FrameTag.END)))
        left.close()
        with self.assertLogs("nopsim.link.transport", level="INFO"):
            frames = _wait_for_frames(link, 1)
        self.assertEqual(frames, [Frame(FrameTag.END)])
        self.assertFalse(link.is_open)
        self.assertFalse(link.can_send())
        with self.assertRaises(LinkError):
            link.send_frame(Frame(FrameTag.END))

    def test_peer_close_inside_a_frame(self) -> None:
        left, right = socket.socketpair()
        link = TcpLink(0, right)
        left.sendall(b"\x00\x01\x02")
        left.close()
        with self.assertRaises(LinkError):
            _wait_for_frames(link, 1)
        link.close()

    def test_garbage_closes_the_link(self) -> None:
        left, right = socket.socketpair()
        link = TcpLink(0, right)
        left.sendall(encode_frame(Frame.header(5)) + b"\x01\x7F")
        with self.assertLogs("nopsim.link.transport", level="ERROR"):
            frames = link.receive_frames()
        self.assertEqual(frames, [Frame.header(5), Frame(FrameTag.END)])
        self.assertFalse(link.is_open)
        left.close()

    def test_high_water_blocks_sending(self) -> None:
        left, right = socket.socketpair()
        link = TcpLink(0, left, high_water=1)
        with patch.object(link, "flush"):
            link.send_frame(Frame(FrameTag.END))
        self.assertFalse(link.can_send())
        link.close()
        right.close()


class TestBringUp(unittest.TestCase):
    def test_standalone_touches_no_socket(self) -> None:
        with patch.object(transport, "_listen", side_effect=AssertionError("no sockets expected")):
            self.assertEqual(bring_up(None, [], 8), [None, None, None, None])

    def test_too_many_connect_sockets(self) -> None:
        with self.assertRaises(LinkError):
            bring_up(9000, [1, 2, 3, 4, 5], 8)

    def test_connects_accepts_and_skips_stubs(self) -> None:
        outgoing, peer_of_outgoing = _tcp_pair()
        incoming, peer_of_incoming = _tcp_pair()
        peer_of_outgoing.sendall(encode_handshake(9))
        peer_of_incoming.sendall(encode_handshake(10))
        listener = MagicMock()
        events = []
        try:
            with patch.object(transport, "_listen", return_value=listener) as listen, patch.object(
                transport, "_connect", return_value=outgoing
            ) as connect, patch.object(transport, "_accept", return_value=incoming):
                links = bring_up(
                    9000,
                    [8000],
                    8,
                    stub_mask=0b1100,
                    progress_callback=lambda event, payload: events.append(event),
                )
            self.assertEqual([call.args[1] for call in listen.call_args_list], [9000, 9001])
            self.assertEqual(connect.call_args.args[1], 8000)
            self.assertEqual([link.peer_id for link in links[:2]], [9, 10])
            self.assertEqual(links[2:], [None, None])
            self.assertEqual(listener.close.call_count, 2)
            self.assertEqual(events, ["set_total", "step", "step", "complete"])
            self.assertEqual(decode_handshake(peer_of_outgoing.recv(8)), 8)
            self.assertEqual(decode_handshake(peer_of_incoming.recv(8)), 8)
        finally:
            for sock in (outgoing, incoming, peer_of_outgoing, peer_of_incoming):
                sock.close()

    def test_bad_handshake_fails_bring_up(self) -> None:
        outgoing, peer = _tcp_pair()
        peer.sendall(b"GET / HTTP")
        try:
            with patch.object(transport, "_listen", return_value=MagicMock()), patch.object(
                transport, "_connect", return_value=outgoing
            ):
                with self.assertRaises(LinkError):
                    bring_up(9000, [8000], 8, stub_mask=0b1110)
        finally:
            peer.close()

    def test_connect_gives_up_at_the_deadline(self) -> None:
        spare = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        spare.bind(("127.0.0.1", 0))
        port = spare.getsockname()[1]
        spare.close()
        with self.assertRaises(LinkError):
            transport._connect("127.0.0.1", port, time.monotonic())


if __name__ == "__main__":
    unittest.main()
