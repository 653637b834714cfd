from __future__ import annotations

from functools import lru_cache
from typing import Tuple

from nopsim.asm.assembler import assemble
from nopsim.cpu.memory import BOOT_ROM_BASE

# Reads the start position, then words until END, storing them from word 0
# upward (-64 plus dp = 64 is address 0), then jumps to position * 4.
BOOT_ROM_SOURCE = """\
0 IN              # start position
-64               # store index of the first word
0 INMORE ; 10 FJP # END received: leave the loop
DUP ; 0 IN        # next code word
EXCH ST           # store it
1 ADD ; -12 UJP   # advance and repeat
POP ; 4 MUL JUMP  # run the loaded code
"""


@lru_cache(maxsize=1)
def boot_rom_words() -> Tuple[int, ...]:
    return assemble(BOOT_ROM_SOURCE, origin=BOOT_ROM_BASE).words
