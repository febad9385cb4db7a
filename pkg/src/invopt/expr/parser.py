"""Recursive-descent parser for the expression grammar.

::

    expr     := ['+'|'-'] term (('+'|'-') term)*
    term     := unary (('*'|'/') unary)*
    unary    := '-' unary | factor
    factor   := atom ['^' exponent]
    exponent := integer | '(' ['-'] integer ')' | '(1/2)'
    atom     := number | 'x1' | 'x2' | 'x3' | '(' expr ')' | func '(' expr ')'
    func     := sin | cos | sqrt | sign | abs

Unary minus, division and negative integer exponents extend the documented
grammar so that every printed canonical form parses back.
"""

from __future__ import annotations

import re

from .core import FUNCTIONS, Add, Const, DomainError, Expr, Func, Mul, Pow, Var, canonical

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


class ParseError(ValueError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    stripped_end = len(text.rstrip())
    while pos < stripped_end:
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ParseError(message, tok[2], self.text)

    def expect(self, value):
        tok = self.take()
        if tok[1] != value or tok[0] not in ("op",):
            raise self.error(f"expected {value!r}", tok)
        return tok

    def parse(self) -> Expr:
        if self.peek()[0] == "end":
            raise self.error("empty expression")
        e = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return e

    def expr(self) -> Expr:
        terms = []
        negate = False
        if self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            negate = self.take()[1] == "-"
        t = self.term()
        terms.append(Mul((Const(-1.0), t)) if negate else t)
        while self.peek()[0] == "op" and self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            t = self.term()
            terms.append(t if op == "+" else Mul((Const(-1.0), t)))
        return terms[0] if len(terms) == 1 else Add(tuple(terms))

    def term(self) -> Expr:
        factors = [self.unary()]
        while self.peek()[0] == "op" and self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            f = self.unary()
            factors.append(f if op == "*" else Pow(f, -1))
        return factors[0] if len(factors) == 1 else Mul(tuple(factors))

    def unary(self) -> Expr:
        if self.peek() == ("op", "-", self.peek()[2]):
            self.take()
            return Mul((Const(-1.0), self.unary()))
        return self.factor()

    def factor(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            base = self.exponent(base)
            if self.peek()[0] == "op" and self.peek()[1] == "^":
                raise self.error("chained exponents need parentheses")
        return base

    def exponent(self, base: Expr) -> Expr:
        tok = self.peek()
        if tok[0] == "num":
            self.take()
            return Pow(base, self._integer(tok))
        if tok[1] != "(":
            raise self.error("disallowed exponent: expected integer or (1/2)")
        self.take()
        negative = False
        if self.peek()[1] == "-":
            self.take()
            negative = True
        num = self.take()
        if num[0] != "num":
            raise self.error("disallowed exponent: expected integer or (1/2)", num)
        if self.peek()[1] == "/":
            self.take()
            den = self.take()
            if negative or num[1] != "1" or den[1] != "2":
                raise self.error("disallowed exponent: only (1/2) is a permitted fraction", num)
            self.expect(")")
            return Func("sqrt", base)
        self.expect(")")
        n = self._integer(num)
        return Pow(base, -n if negative else n)

    def _integer(self, tok) -> int:
        if not re.fullmatch(r"\d+", tok[1]):
            raise self.error("disallowed exponent: expected an integer", tok)
        return int(tok[1])

    def atom(self) -> Expr:
        tok = self.take()
        kind, value, pos = tok
        if kind == "num":
            return Const(float(value))
        if kind == "name":
            if re.fullmatch(r"x[1-3]", value):
                return Var(int(value[1]))
            if self.peek()[1] == "(":
                if value not in FUNCTIONS:
                    raise ParseError(f"disallowed function {value!r}", pos, self.text)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Func(value, arg)
            raise ParseError(f"unknown identifier {value!r}", pos, self.text)
        if kind == "op" and value == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            raise ParseError("unexpected end of input", pos, self.text)
        raise ParseError(f"unexpected token {value!r}", pos, self.text)


def parse_raw(text: str) -> Expr:
    """Parse without canonicalizing (the literal grammar tree)."""
    return _Parser(text).parse()


def parse(text: str) -> Expr:
    """Parse ``text`` and return its canonical form."""
    e = parse_raw(text)
    try:
        return canonical(e)
    except (ZeroDivisionError, DomainError, OverflowError) as exc:
        raise ParseError(f"expression cannot be simplified: {exc}", 0, text) from exc
