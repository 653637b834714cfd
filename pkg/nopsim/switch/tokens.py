from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from nopsim.isa.words import WORD_MASK


class TokenKind(Enum):
    DATA = "DATA"
    END = "END"
    PAUSE = "PAUSE"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    value: int = 0

    @classmethod
    def data(cls, value: int) -> "Token":
        return cls(TokenKind.DATA, value & WORD_MASK)

    @classmethod
    def end(cls) -> "Token":
        return cls(TokenKind.END)

    @classmethod
    def pause(cls) -> "Token":
        return cls(TokenKind.PAUSE)

    @property
    def closes_path(self) -> bool:
        return self.kind is not TokenKind.DATA

    def __str__(self) -> str:
        if self.kind is TokenKind.DATA:
            return f"DATA {self.value:08x}"
        return self.kind.value
