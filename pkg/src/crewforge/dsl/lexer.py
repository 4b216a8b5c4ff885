"""Tokenizer for the policy language."""
from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import PolicySyntaxError
from .nodes import KEYWORDS

# kinds: NUMBER, IDENT, KEYWORD, PUNCT, EOF
NUMBER_RE = re.compile(r"(?:\d+(?:\.\d+)?|\.\d+)(?:[eE][+-]?\d+)?")
WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
# two-char punctuation must be tried first
PUNCT = ("->", "<=", ">=", "==", "{", "}", "[", "]", "(", ")", ",", ":", "=", "+", "-", "*", "/", "<", ">")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int

    @property
    def number(self) -> float:
        return float(self.text)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        m = NUMBER_RE.match(source, i)
        if m:
            tokens.append(Token("NUMBER", m.group(0), line, col))
            col += len(m.group(0))
            i = m.end()
            continue
        m = WORD_RE.match(source, i)
        if m:
            word = m.group(0)
            kind = "KEYWORD" if word in KEYWORDS else "IDENT"
            tokens.append(Token(kind, word, line, col))
            col += len(word)
            i = m.end()
            continue
        for p in PUNCT:
            if source.startswith(p, i):
                tokens.append(Token("PUNCT", p, line, col))
                col += len(p)
                i += len(p)
                break
        else:
            raise PolicySyntaxError(line, col, f"unexpected character {ch!r}")
    tokens.append(Token("EOF", "", line, col))
    return tokens
