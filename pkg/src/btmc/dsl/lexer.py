"""Tokenizer for the model language.  Every token carries a 1-based line and column."""
from __future__ import annotations

from dataclasses import dataclass

IDENT, INT, OP, EOF = "ident", "int", "op", "eof"

_OPS2 = (":=", "==", "!=", "<=", ">=", "->", "=>", "..")
_OPS1 = set("{}()[],;:=<>+-*/%!&|")


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    column: int

    def describe(self) -> str:
        if self.kind == EOF:
            return "end of input"
        return repr(self.value)


class ParseError(Exception):
    def __init__(self, line: int, column: int, expected, found: str, message: str | None = None):
        self.line = line
        self.column = column
        self.expected = tuple(expected)
        self.found = found
        if message is None:
            exp = " or ".join(self.expected) if self.expected else "something else"
            message = f"expected {exp}, found {found}"
        self.message = message
        super().__init__(f"{line}:{column}: {message}")


def decode(data: bytes | str) -> str:
    if isinstance(data, str):
        return data
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        head = data[: exc.start]
        line = head.count(b"\n") + 1
        col = exc.start - (head.rfind(b"\n") + 1) + 1
        raise ParseError(line, col, ("UTF-8 text",), f"byte 0x{data[exc.start]:02x}") from None


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i, n = 0, len(text)
    line, col = 1, 1
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r\f\v":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isascii() and (c.isalpha() or c == "_"):
            j = i + 1
            while j < n and text[j].isascii() and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(Token(IDENT, text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isascii() and c.isdigit():
            j = i + 1
            while j < n and text[j].isascii() and text[j].isdigit():
                j += 1
            toks.append(Token(INT, text[i:j], line, col))
            col += j - i
            i = j
            continue
        two = text[i:i + 2]
        if two in _OPS2:
            toks.append(Token(OP, two, line, col))
            i += 2
            col += 2
            continue
        if c in _OPS1:
            toks.append(Token(OP, c, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(line, col, ("a token",), repr(c), f"unexpected character {c!r}")
    toks.append(Token(EOF, "", line, col))
    return toks
