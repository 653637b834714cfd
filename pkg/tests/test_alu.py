import random
import unittest

from nopsim.cpu import alu
from nopsim.cpu.faults import FaultReason, ThreadFault
from nopsim.isa.words import to_signed, to_word
from tests.oracles import left_oracle, right_oracle, swap_oracle


class TestArithmetic(unittest.TestCase):
    def test_examples(self) -> None:
        self.assertEqual(alu.sub(10, 3), 7)
        self.assertEqual(alu.sub(3, 10), to_word(-7))
        self.assertEqual(alu.combine(1, 5), 197)
        self.assertEqual(alu.sless(to_word(-1), 0), 0xFFFFFFFF)
        self.assertEqual(alu.uless(to_word(-1), 0), 0)
        self.assertEqual(alu.zero(0), 0xFFFFFFFF)
        self.assertEqual(alu.zero(5), 0)
        self.assertEqual(alu.mul(0x10000, 0x10000), 0)

    def test_sign_tests_bit_31(self) -> None:
        self.assertEqual(alu.sign(0x80000000), 0xFFFFFFFF)
        self.assertEqual(alu.sign(to_word(-5)), 0xFFFFFFFF)
        self.assertEqual(alu.sign(1), 0)
        self.assertEqual(alu.sign(0x7FFFFFFF), 0)

    def test_division_examples(self) -> None:
        self.assertEqual(alu.udiv(7, 2), (3, 1))
        q, r = alu.sdiv(to_word(-7), 2)
        self.assertEqual((to_signed(q), r), (-4, 1))
        q, r = alu.sdiv(to_word(-7), to_word(-2))
        self.assertEqual((to_signed(q), r), (4, 1))

    def test_division_by_zero_faults(self) -> None:
        for fn in (alu.udiv, alu.sdiv):
            with self.assertRaises(ThreadFault) as ctx:
                fn(5, 0)
            self.assertEqual(ctx.exception.reason, FaultReason.DIVIDE_BY_ZERO)
            self.assertEqual(int(ctx.exception.reason), 4)

    def test_euclidean_property(self) -> None:
        rng = random.Random(20240517)
        for _ in range(100_000):
            b = rng.getrandbits(32)
            a = rng.getrandbits(32) if rng.random() < 0.5 else to_word(rng.randint(-300, 300))
            if a == 0:
                continue
            q, r = alu.udiv(b, a)
            self.assertEqual(q * a + r, b)
            self.assertTrue(0 <= r < a)

            q, r = alu.sdiv(b, a)
            sa, sb = to_signed(a), to_signed(b)
            self.assertEqual(to_word(to_signed(q) * sa + r), b)
            self.assertTrue(0 <= r < abs(sa))


class TestBitFields(unittest.TestCase):
    def test_swap_examples(self) -> None:
        self.assertEqual(alu.swap_bits(0x12345678, 24), 0x78563412)
        self.assertEqual(alu.swap_bits(0xDEADBEEF, 0), 0xDEADBEEF)
        self.assertEqual(alu.swap_bits(1, 31), 0x80000000)

    def test_swap_is_an_involution(self) -> None:
        rng = random.Random(7)
        words = [rng.getrandbits(32) for _ in range(10_000)]
        for mask in range(32):
            for word in words:
                self.assertEqual(alu.swap_bits(alu.swap_bits(word, mask), mask), word)

    def test_swap_agrees_with_bit_permutation(self) -> None:
        rng = random.Random(11)
        for mask in range(32):
            for _ in range(50):
                word = rng.getrandbits(32)
                self.assertEqual(alu.swap_bits(word, mask), swap_oracle(word, mask))

    def test_mask_24_reverses_bytes(self) -> None:
        rng = random.Random(3)
        for _ in range(1000):
            word = rng.getrandbits(32)
            self.assertEqual(alu.swap_bits(word, 24), int.from_bytes(word.to_bytes(4, "little"), "big"))

    def test_mask_31_reverses_bits(self) -> None:
        rng = random.Random(5)
        for _ in range(1000):
            word = rng.getrandbits(32)
            self.assertEqual(alu.swap_bits(word, 31), int(f"{word:032b}"[::-1], 2))

    def test_shift_examples(self) -> None:
        self.assertEqual(alu.shift_left(1, 0, 1), 2)
        self.assertEqual(alu.shift_left(0x12345678, 0xDEADBEEF, 32), 0xDEADBEEF)
        self.assertEqual(alu.shift_right(0x80000000, 0, 31), 1)
        self.assertEqual(alu.shift_right(0, 1, 1), 0x80000000)

    def test_shifts_agree_with_bit_slices(self) -> None:
        rng = random.Random(13)
        for n in range(64):
            for _ in range(40):
                c, b = rng.getrandbits(32), rng.getrandbits(32)
                self.assertEqual(alu.shift_left(c, b, n), left_oracle(c, b, n), (c, b, n))
                self.assertEqual(alu.shift_right(c, b, n), right_oracle(c, b, n), (c, b, n))

    def test_left_high_bits_are_the_shifted_shifter(self) -> None:
        rng = random.Random(17)
        for n in range(32):
            c, b = rng.getrandbits(32), rng.getrandbits(32)
            self.assertEqual(alu.shift_left(c, b, n) >> n, (c << n & 0xFFFFFFFF) >> n)

    def test_log2_and_count(self) -> None:
        self.assertEqual(alu.log2(0x80000000), 31)
        self.assertEqual(alu.log2(1), 0)
        self.assertEqual(alu.log2(0), 0xFFFFFFFF)
        self.assertEqual(alu.count(0xF0), 4)
        self.assertEqual(alu.count(0xFFFFFFFF), 32)
        self.assertEqual(alu.count(0), 0)


if __name__ == "__main__":
    unittest.main()
