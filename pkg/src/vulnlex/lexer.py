"""Error-tolerant Python lexer producing normalized token streams.

Snippets mined from fix commits are often fragments, so the lexer never
rejects input: unknown characters become one-character operator tokens,
unterminated strings run to the end of the line (or file, for triple
quotes), and unbalanced brackets or dedents are absorbed.

Normalization: string literals become ``<str>``, numeric literals ``<num>``,
comments are dropped. Identifiers and keywords are kept verbatim.
"""
from __future__ import annotations

import keyword
import re
from dataclasses import dataclass, field
from enum import Enum

IDENTIFIER = "identifier"
KEYWORD = "keyword"
NUMBER = "number"
STRING = "string"
OPERATOR = "operator"
PUNCTUATION = "punctuation"
NEWLINE = "newline"
INDENT = "indent"
DEDENT = "dedent"
COMMENT = "comment"


class TokenKind(str, Enum):
    IDENTIFIER = IDENTIFIER
    KEYWORD = KEYWORD
    NUMBER = NUMBER
    STRING = STRING
    OPERATOR = OPERATOR
    PUNCTUATION = PUNCTUATION
    NEWLINE = NEWLINE
    INDENT = INDENT
    DEDENT = DEDENT
    COMMENT = COMMENT

    def __str__(self) -> str:
        return self.value


STR_PLACEHOLDER = "<str>"
NUM_PLACEHOLDER = "<num>"
NL_PLACEHOLDER = "<nl>"
INDENT_PLACEHOLDER = "<ind>"
DEDENT_PLACEHOLDER = "<ded>"

KEYWORDS = frozenset(keyword.kwlist)
PUNCTUATION_CHARS = frozenset("()[]{},:;.")
OPENERS = frozenset("([{")
CLOSERS = frozenset(")]}")

# longest first so greedy matching works
OPERATORS = sorted([
    "**=", "//=", ">>=", "<<=", "...",
    "->", ":=", "!=", "==", "<=", ">=", "<<", ">>", "**", "//",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=",
    "+", "-", "*", "/", "%", "@", "&", "|", "^", "~", "<", ">", "=",
], key=len, reverse=True)

_STRING_START = re.compile(r"(?i)(?:rb|br|fr|rf|r|b|u|f)?(?:'''|\"\"\"|'|\")")
_NUMBER = re.compile(
    r"""(?ix)
    (?:0x[0-9a-f_]+ | 0o[0-7_]+ | 0b[01_]+)
    | (?:
        (?:\d[\d_]*\.?[\d_]* | \.\d[\d_]*)
        (?:e[+-]?\d[\d_]*)?
        j?
      )
    """)
_IDENT = re.compile(r"[^\W\d]\w*")
_DIGITS = frozenset("0123456789")
_PLACEHOLDER = re.compile(r"<(str|num)>")


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str

    def __iter__(self):
        return iter((self.kind, self.lexeme))


@dataclass
class TokenStream:
    tokens: list[Token] = field(default_factory=list)
    source_id: str = ""

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    @property
    def lexemes(self) -> list[str]:
        return [t.lexeme for t in self.tokens]

    def pairs(self) -> list[tuple[str, str]]:
        return [(t.kind.value, t.lexeme) for t in self.tokens]


def _indent_width(prefix: str) -> int:
    col = 0
    for ch in prefix:
        if ch == "\t":
            col = (col // 8 + 1) * 8
        elif ch == "\f":
            col = 0
        else:
            col += 1
    return col


def _scan_string(src: str, pos: int, quote: str) -> int:
    """Return the index just past the string body starting at ``pos``."""
    n = len(src)
    i = pos
    if len(quote) == 3:
        while i < n:
            if src[i] == "\\":
                i += 2
                continue
            if src.startswith(quote, i):
                return i + 3
            i += 1
        return n
    while i < n:
        ch = src[i]
        if ch == "\\":
            # backslash-newline continues a single-quoted string
            i += 2
            continue
        if ch == quote:
            return i + 1
        if ch == "\n":
            return i
        i += 1
    return n


def tokenize(code: str | bytes, source_id: str = "") -> TokenStream:
    """Split Python source into a normalized :class:`TokenStream`.

    Raises :class:`UnicodeDecodeError` for bytes that are not valid UTF-8;
    any decodable text is accepted.
    """
    if isinstance(code, bytes):
        code = code.decode("utf-8")
    src = code.replace("\r\n", "\n").replace("\r", "\n")
    out: list[Token] = []
    indents = [0]
    depth = 0
    i = 0
    n = len(src)
    at_line_start = True
    line_has_tokens = False
    pending_col: int | None = None

    def apply_indent(col: int) -> None:
        if col > indents[-1]:
            indents.append(col)
            out.append(Token(TokenKind.INDENT, INDENT_PLACEHOLDER))
            return
        while col < indents[-1]:
            if col > indents[-2]:
                # inconsistent dedent lands between two levels: stay in the
                # current block and narrow it to this column
                indents[-1] = col
                break
            indents.pop()
            out.append(Token(TokenKind.DEDENT, DEDENT_PLACEHOLDER))

    def emit(kind: TokenKind, lexeme: str) -> None:
        nonlocal line_has_tokens, pending_col
        if pending_col is not None:
            # indentation only counts once the line turns out to hold a token
            apply_indent(pending_col)
            pending_col = None
        out.append(Token(kind, lexeme))
        line_has_tokens = True

    while i < n:
        if at_line_start and depth == 0:
            j = i
            while j < n and src[j] in " \t\f":
                j += 1
            if j >= n:
                i = j
                break
            if src[j] in "#\n":
                # blank or comment-only line: no indentation effect
                i = j
                at_line_start = False
                if src[j] == "\n":
                    at_line_start = True
                    i = j + 1
                continue
            pending_col = _indent_width(src[i:j])
            i = j
            at_line_start = False
            continue

        ch = src[i]
        if ch == "\n":
            i += 1
            if depth > 0:
                continue
            if line_has_tokens:
                out.append(Token(TokenKind.NEWLINE, NL_PLACEHOLDER))
                line_has_tokens = False
            at_line_start = True
            continue
        if ch in " \t\f":
            i += 1
            continue
        if ch == "\\" and i + 1 < n and src[i + 1] == "\n":
            i += 2
            continue
        if ch == "#":
            end = src.find("\n", i)
            i = n if end < 0 else end
            continue

        m = _STRING_START.match(src, i)
        if m:
            quote = m.group(0).lstrip("rRbBuUfF")
            i = _scan_string(src, m.end(), quote)
            emit(TokenKind.STRING, STR_PLACEHOLDER)
            continue

        m = _PLACEHOLDER.match(src, i)
        if m:
            emit(TokenKind.STRING if m.group(1) == "str" else TokenKind.NUMBER, m.group(0))
            i = m.end()
            continue

        if ch in _DIGITS or (ch == "." and i + 1 < n and src[i + 1] in _DIGITS):
            m = _NUMBER.match(src, i)
            emit(TokenKind.NUMBER, NUM_PLACEHOLDER)
            i = m.end()
            continue

        m = _IDENT.match(src, i)
        if m:
            word = m.group(0)
            emit(TokenKind.KEYWORD if word in KEYWORDS else TokenKind.IDENTIFIER, word)
            i = m.end()
            continue

        if ch in OPENERS:
            depth += 1
        elif ch in CLOSERS:
            depth = max(0, depth - 1)

        for op in OPERATORS:
            if src.startswith(op, i):
                kind = TokenKind.PUNCTUATION if op == "..." else TokenKind.OPERATOR
                emit(kind, op)
                i += len(op)
                break
        else:
            emit(TokenKind.PUNCTUATION if ch in PUNCTUATION_CHARS else TokenKind.OPERATOR, ch)
            i += 1

    if line_has_tokens:
        out.append(Token(TokenKind.NEWLINE, NL_PLACEHOLDER))
    while len(indents) > 1:
        indents.pop()
        out.append(Token(TokenKind.DEDENT, DEDENT_PLACEHOLDER))
    return TokenStream(out, source_id)


def detokenize(stream: TokenStream) -> str:
    """Render a stream back to source text, four spaces per indent level.

    Re-tokenizing the result reproduces the same kind/lexeme sequence for
    every stream ``tokenize`` produces.
    """
    lines: list[str] = []
    current: list[str] = []
    level = 0
    for tok in stream.tokens:
        if tok.kind is TokenKind.NEWLINE:
            if current and current[-1] == "\\":
                current.append("")  # keep a stray backslash from joining lines
            lines.append("    " * level + " ".join(current) + "\n")
            current = []
        elif tok.kind is TokenKind.INDENT:
            level += 1
        elif tok.kind is TokenKind.DEDENT:
            level = max(0, level - 1)
        else:
            current.append(tok.lexeme)
    if current:
        lines.append("    " * level + " ".join(current))
    return "".join(lines)
