"""Surface syntax for local functions.

The grammar covers atoms ``x[i]``, ``u[a]``, ``u[a; i1 i2]``,
``ustar[a; ...]``, ``C[alpha; ...]``, ``Cstar[alpha; ...]``, rational
literals ``p/q``, the operators ``+ - * ^``, and parentheses.  The
printer emits a canonical form that re-parses to an equal value, with
rationals reduced, positive denominators, and ``/1`` suppressed.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

from .algebra import Generator, GeneratorKind, LocalFunction

__all__ = [
    "ExpressionError",
    "ExpressionSyntaxError",
    "SemanticError",
    "Token",
    "TokenStream",
    "tokenize",
    "parse_expression",
    "parse_remaining_expression",
    "format_generator",
    "format_local_function",
]


class ExpressionError(ValueError):
    """A rejected input, carrying the 1-based source position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.reason = message


class ExpressionSyntaxError(ExpressionError):
    pass


class SemanticError(ExpressionError):
    pass


_ATOM_KINDS = {
    "x": GeneratorKind.BASE,
    "u": GeneratorKind.FIELD,
    "ustar": GeneratorKind.ANTIFIELD,
    "C": GeneratorKind.GHOST,
    "Cstar": GeneratorKind.ANTIGHOST,
}

_PUNCT = {
    "[": "LBRACKET",
    "]": "RBRACKET",
    "(": "LPAREN",
    ")": "RPAREN",
    ";": "SEMI",
    ",": "COMMA",
    "+": "PLUS",
    "-": "MINUS",
    "*": "STAR",
    "^": "CARET",
    "/": "SLASH",
    "=": "EQUALS",
}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str, first_line: int = 1) -> list[Token]:
    """Split source text into tokens, dropping comments and whitespace.

    ``first_line`` offsets the reported positions so that fragments cut
    out of a larger document still point at the original file.
    """
    tokens: list[Token] = []
    line = first_line
    column = 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            column = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            column += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = column
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("INT", text[i:j], line, start_col))
            column += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("IDENT", text[i:j], line, start_col))
            column += j - i
            i = j
            continue
        kind = _PUNCT.get(ch)
        if kind is None:
            raise ExpressionSyntaxError(f"unexpected character {ch!r}", line, start_col)
        tokens.append(Token(kind, ch, line, start_col))
        i += 1
        column += 1
    tokens.append(Token("EOF", "", line, column))
    return tokens


class TokenStream:
    """Cursor over a token list with uniform error reporting."""

    def __init__(self, tokens: list[Token]):
        self._tokens = tokens
        self._pos = 0

    @property
    def current(self) -> Token:
        return self._tokens[self._pos]

    def advance(self) -> Token:
        tok = self._tokens[self._pos]
        if tok.kind != "EOF":
            self._pos += 1
        return tok

    def accept(self, kind: str) -> Token | None:
        if self.current.kind == kind:
            return self.advance()
        return None

    def expect(self, kind: str, expected: str) -> Token:
        tok = self.current
        if tok.kind != kind:
            got = tok.text or "end of input"
            raise ExpressionSyntaxError(
                f"expected {expected}, found {got!r}", tok.line, tok.column)
        return self.advance()


# ------------------------------------------------------------ parsing

def _parse_jet_indices(stream: TokenStream) -> tuple[int, ...]:
    indices: list[int] = []
    while stream.current.kind == "INT":
        indices.append(int(stream.advance().text))
    if not indices:
        tok = stream.current
        raise ExpressionSyntaxError(
            "expected at least one jet index after ';'", tok.line, tok.column)
    return tuple(sorted(indices))


def parse_atom(stream: TokenStream) -> Generator:
    tok = stream.expect("IDENT", "a generator name")
    kind = _ATOM_KINDS.get(tok.text)
    if kind is None:
        raise SemanticError(
            f"unknown generator name {tok.text!r} (expected one of"
            " x, u, ustar, C, Cstar)", tok.line, tok.column)
    stream.expect("LBRACKET", "'['")
    fam_tok = stream.current
    if fam_tok.kind not in ("IDENT", "INT"):
        raise ExpressionSyntaxError(
            f"expected a family label, found {fam_tok.text or 'end of input'!r}",
            fam_tok.line, fam_tok.column)
    stream.advance()
    family = fam_tok.text
    jet: tuple[int, ...] = ()
    if stream.accept("SEMI"):
        if kind is GeneratorKind.BASE:
            raise SemanticError(
                "base coordinates carry no jet index", fam_tok.line, fam_tok.column)
        jet = _parse_jet_indices(stream)
    stream.expect("RBRACKET", "']'")
    if kind is GeneratorKind.BASE:
        if fam_tok.kind != "INT" or int(family) < 1:
            raise SemanticError(
                "base coordinates are numbered from 1", fam_tok.line, fam_tok.column)
    return Generator(kind, family, jet)


def _parse_primary(stream: TokenStream) -> LocalFunction:
    tok = stream.current
    if tok.kind == "INT":
        stream.advance()
        numerator = int(tok.text)
        if stream.accept("SLASH"):
            den_tok = stream.expect("INT", "a denominator")
            denominator = int(den_tok.text)
            if denominator == 0:
                raise SemanticError("zero denominator", den_tok.line, den_tok.column)
            return LocalFunction.constant(Fraction(numerator, denominator))
        return LocalFunction.constant(Fraction(numerator))
    if tok.kind == "IDENT":
        g = parse_atom(stream)
        if stream.accept("CARET"):
            exp_tok = stream.expect("INT", "a nonnegative integer exponent")
            exponent = int(exp_tok.text)
            if g.is_odd and exponent > 1:
                raise SemanticError(
                    f"odd generator {format_generator(g)} cannot carry power {exponent}",
                    exp_tok.line, exp_tok.column)
            return LocalFunction.from_generator(g) ** exponent
        return LocalFunction.from_generator(g)
    if tok.kind == "LPAREN":
        stream.advance()
        inner = _parse_sum(stream)
        stream.expect("RPAREN", "')'")
        if stream.accept("CARET"):
            exp_tok = stream.expect("INT", "a nonnegative integer exponent")
            return inner ** int(exp_tok.text)
        return inner
    got = tok.text or "end of input"
    raise ExpressionSyntaxError(
        f"expected a rational, a generator, or '(', found {got!r}",
        tok.line, tok.column)


def _parse_term(stream: TokenStream) -> LocalFunction:
    value = _parse_primary(stream)
    while stream.accept("STAR"):
        value = value * _parse_primary(stream)
    return value


def _parse_sum(stream: TokenStream) -> LocalFunction:
    negate = False
    if stream.accept("MINUS"):
        negate = True
    else:
        stream.accept("PLUS")
    value = _parse_term(stream)
    if negate:
        value = -value
    while True:
        if stream.accept("PLUS"):
            value = value + _parse_term(stream)
        elif stream.accept("MINUS"):
            value = value - _parse_term(stream)
        else:
            return value


def parse_remaining_expression(stream: TokenStream) -> LocalFunction:
    """Parse an expression from the cursor through the end of the stream."""
    value = _parse_sum(stream)
    stream.expect("EOF", "end of input")
    return value


def parse_expression(text: str, first_line: int = 1) -> LocalFunction:
    """Parse one expression; the whole input must be consumed."""
    return parse_remaining_expression(TokenStream(tokenize(text, first_line)))


# ----------------------------------------------------------- printing

def format_generator(g: Generator) -> str:
    if g.jet:
        return f"{g.kind.value}[{g.family}; {' '.join(str(i) for i in g.jet)}]"
    return f"{g.kind.value}[{g.family}]"


def _format_factors(factors) -> Iterator[str]:
    for g, e in factors:
        if e == 1:
            yield format_generator(g)
        else:
            yield f"{format_generator(g)}^{e}"


def format_local_function(f: LocalFunction) -> str:
    """Render in the canonical order; the output re-parses to ``f``."""
    if f.is_zero:
        return "0"
    pieces: list[str] = []
    for m in f.monomials():
        magnitude = abs(m.coefficient)
        atoms = list(_format_factors(m.factors))
        if not atoms:
            body = str(magnitude)
        elif magnitude == 1:
            body = "*".join(atoms)
        else:
            body = f"{magnitude}*" + "*".join(atoms)
        if not pieces:
            pieces.append(body if m.coefficient > 0 else f"-{body}")
        else:
            pieces.append(f"+ {body}" if m.coefficient > 0 else f"- {body}")
    return " ".join(pieces)
