import random
import unittest

from nopsim.link.wire import (
    HANDSHAKE_MAGIC,
    HANDSHAKE_SIZE,
    Frame,
    FrameDecoder,
    FrameTag,
    LinkProtocolError,
    decode_handshake,
    encode_frame,
    encode_frames,
    encode_handshake,
)
from nopsim.switch.tokens import Token


def _random_frame(rng: random.Random) -> Frame:
    tag = rng.choice(list(FrameTag))
    if tag in (FrameTag.DATA, FrameTag.HEADER):
        return Frame(tag, rng.getrandbits(32))
    return Frame(tag)


class TestFrameEncoding(unittest.TestCase):
    def test_data_is_tag_plus_little_endian_word(self) -> None:
        self.assertEqual(encode_frame(Frame(FrameTag.DATA, 0x12345678)), bytes([0x00, 0x78, 0x56, 0x34, 0x12]))

    def test_bare_tags(self) -> None:
        self.assertEqual(encode_frame(Frame(FrameTag.END)), b"\x01")
        self.assertEqual(encode_frame(Frame(FrameTag.PAUSE)), b"\x02")

    def test_header(self) -> None:
        self.assertEqual(encode_frame(Frame.header(0x22A0)), bytes([0x03, 0xA0, 0x22, 0x00, 0x00]))

    def test_token_conversion(self) -> None:
        for token in (Token.data(7), Token.end(), Token.pause()):
            self.assertEqual(Frame.from_token(token).to_token(), token)
        with self.assertRaises(LinkProtocolError):
            Frame.header(1).to_token()


class TestFrameDecoder(unittest.TestCase):
    def test_partial_frames_stay_buffered(self) -> None:
        decoder = FrameDecoder()
        data = encode_frames([Frame(FrameTag.DATA, 0xCAFEBABE), Frame(FrameTag.END)])
        self.assertEqual(decoder.feed(data[:3]), [])
        self.assertEqual(decoder.pending_bytes, 3)
        self.assertEqual(decoder.feed(data[3:5]), [Frame(FrameTag.DATA, 0xCAFEBABE)])
        self.assertEqual(decoder.pending_bytes, 0)
        self.assertEqual(decoder.feed(data[5:]), [Frame(FrameTag.END)])

    def test_unknown_tag(self) -> None:
        decoder = FrameDecoder()
        with self.assertRaises(LinkProtocolError):
            decoder.feed(b"\x01\x07")

    def test_unknown_tag_keeps_frames_decoded_before_it(self) -> None:
        good = [Frame.header(5), Frame(FrameTag.DATA, 7), Frame(FrameTag.END)]
        decoder = FrameDecoder()
        with self.assertRaises(LinkProtocolError) as ctx:
            decoder.feed(encode_frames(good) + b"\x09")
        self.assertEqual(ctx.exception.frames, good)
        self.assertIn("0x09", str(ctx.exception))

    def test_random_streams_in_random_chunks(self) -> None:
        rng = random.Random(99)
        frames = [_random_frame(rng) for _ in range(1000)]
        data = encode_frames(frames)
        decoder = FrameDecoder()
        decoded = []
        offset = 0
        while offset < len(data):
            size = rng.randint(1, 9)
            decoded.extend(decoder.feed(data[offset : offset + size]))
            offset += size
        self.assertEqual(decoded, frames)
        self.assertEqual(decoder.pending_bytes, 0)


class TestHandshake(unittest.TestCase):
    def test_handshake(self) -> None:
        data = encode_handshake(9)
        self.assertEqual(len(data), HANDSHAKE_SIZE)
        self.assertEqual(data[:4], HANDSHAKE_MAGIC.to_bytes(4, "little"))
        self.assertEqual(decode_handshake(data), 9)

    def test_bad_magic(self) -> None:
        with self.assertRaises(LinkProtocolError):
            decode_handshake(b"HTTP/1.1")

    def test_short_handshake(self) -> None:
        with self.assertRaises(LinkProtocolError):
            decode_handshake(encode_handshake(9)[:5])


if __name__ == "__main__":
    unittest.main()
