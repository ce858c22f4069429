"""Parser for boundary selector expressions such as ``'x==1'`` or
``'x.^2 + y.^2 > 3.8^2'``.

The grammar (elementwise operators '.*', './', '.^' are accepted as
synonyms of the plain ones)::

    expr  := or
    or    := and ('|' and)*
    and   := cmp ('&' cmp)*
    cmp   := sum (('=='|'<='|'>='|'<'|'>') sum)?
    sum   := prod (('+'|'-') prod)*
    prod  := unary (('*'|'/'|'.*'|'./') unary)*
    unary := '-' unary | pow
    pow   := atom (('^'|'.^') unary)?
    atom  := number | 'x' | 'y' | 'pi' | func '(' expr ')' | '(' expr ')'

with func in {sin, cos, sqrt, abs, exp}.  ``parse_selector`` compiles an
expression into a pure predicate over a point (x, y); equality compares
the evaluated reals exactly (write ``'x>0.99'`` for a tolerant match).
"""

import math
import re

__all__ = ["parse_selector", "SelectorError"]

_FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "sqrt": math.sqrt,
    "abs": abs,
    "exp": math.exp,
}

_TOKEN_RE = re.compile(r"""
    (?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_]\w*)
  | (?P<op>==|<=|>=|\.\*|\./|\.\^|[-+*/^()<>&|])
  | (?P<ws>\s+)
""", re.VERBOSE)


class SelectorError(ValueError):
    """Raised for malformed selector expressions, with the offending position."""


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SelectorError(f"selector syntax error at position {pos}: "
                                f"unexpected character {text[pos]!r}")
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group()), pos))
        elif m.lastgroup == "ident":
            tokens.append(("ident", m.group(), pos))
        elif m.lastgroup == "op":
            op = m.group()
            # elementwise synonyms
            tokens.append(("op", op.lstrip("."), pos))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def accept_op(self, *ops):
        kind, val, _ = self.peek()
        if kind == "op" and val in ops:
            self.next()
            return val
        return None

    def fail(self, what):
        kind, val, pos = self.peek()
        shown = "end of input" if kind == "end" else repr(val)
        raise SelectorError(f"selector syntax error at position {pos}: "
                            f"expected {what}, got {shown}")

    # each parse method returns a closure (x, y) -> value
    def parse(self):
        node = self.p_or()
        if self.peek()[0] != "end":
            self.fail("end of expression")
        return node

    def p_or(self):
        node = self.p_and()
        while self.accept_op("|"):
            rhs = self.p_and()
            node = (lambda a, b: lambda x, y: bool(a(x, y)) or bool(b(x, y)))(node, rhs)
        return node

    def p_and(self):
        node = self.p_cmp()
        while self.accept_op("&"):
            rhs = self.p_cmp()
            node = (lambda a, b: lambda x, y: bool(a(x, y)) and bool(b(x, y)))(node, rhs)
        return node

    def p_cmp(self):
        node = self.p_sum()
        op = self.accept_op("==", "<=", ">=", "<", ">")
        if op:
            rhs = self.p_sum()
            cmpf = {"==": lambda p, q: p == q,
                    "<=": lambda p, q: p <= q,
                    ">=": lambda p, q: p >= q,
                    "<": lambda p, q: p < q,
                    ">": lambda p, q: p > q}[op]
            node = (lambda a, b, f: lambda x, y: f(a(x, y), b(x, y)))(node, rhs, cmpf)
        return node

    def p_sum(self):
        node = self.p_prod()
        while True:
            op = self.accept_op("+", "-")
            if not op:
                return node
            rhs = self.p_prod()
            if op == "+":
                node = (lambda a, b: lambda x, y: a(x, y) + b(x, y))(node, rhs)
            else:
                node = (lambda a, b: lambda x, y: a(x, y) - b(x, y))(node, rhs)

    def p_prod(self):
        node = self.p_unary()
        while True:
            op = self.accept_op("*", "/")
            if not op:
                return node
            rhs = self.p_unary()
            if op == "*":
                node = (lambda a, b: lambda x, y: a(x, y) * b(x, y))(node, rhs)
            else:
                node = (lambda a, b: lambda x, y: a(x, y) / b(x, y))(node, rhs)

    def p_unary(self):
        if self.accept_op("-"):
            inner = self.p_unary()
            return (lambda a: lambda x, y: -a(x, y))(inner)
        return self.p_pow()

    def p_pow(self):
        base = self.p_atom()
        if self.accept_op("^"):
            exponent = self.p_unary()
            return (lambda a, b: lambda x, y: a(x, y) ** b(x, y))(base, exponent)
        return base

    def p_atom(self):
        kind, val, pos = self.peek()
        if kind == "num":
            self.next()
            return (lambda c: lambda x, y: c)(val)
        if kind == "ident":
            self.next()
            if val == "x":
                return lambda x, y: x
            if val == "y":
                return lambda x, y: y
            if val == "pi":
                return lambda x, y: math.pi
            if val in _FUNCTIONS:
                if not self.accept_op("("):
                    self.fail(f"'(' after function {val!r}")
                arg = self.p_or()
                if not self.accept_op(")"):
                    self.fail("')'")
                return (lambda f, a: lambda x, y: f(a(x, y)))(_FUNCTIONS[val], arg)
            raise SelectorError(f"unknown identifier {val!r} at position {pos}")
        if self.accept_op("("):
            inner = self.p_or()
            if not self.accept_op(")"):
                self.fail("')'")
            return inner
        self.fail("a number, 'x', 'y', 'pi', a function call or '('")


def parse_selector(expr):
    """Compile a selector string into a predicate ``(x, y) -> bool``."""
    node = _Parser(expr).parse()
    return lambda x, y: bool(node(x, y))
