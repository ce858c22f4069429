"""Terms of the variational-form language.

A term is ``symbol.tag`` where the tag picks the value or a first
derivative of the symbol's finite element function: ``v.grad`` stands
for the gradient, ``v.val`` for the function itself, ``v.dx``/``v.dy``
for the partial derivatives.  Sums of terms ('v1.dy + v2.dx') keep
their order.
"""

import re
from dataclasses import dataclass

__all__ = ["Term", "TermSum", "parse_term_sum", "TermError", "TAGS"]

TAGS = ("val", "dx", "dy", "grad")

_IDENT = re.compile(r"[A-Za-z_]\w*")


class TermError(ValueError):
    """Malformed term string."""


@dataclass(frozen=True)
class Term:
    symbol: str
    tag: str

    def __str__(self):
        return f"{self.symbol}.{self.tag}"


@dataclass(frozen=True)
class TermSum:
    terms: tuple

    def __post_init__(self):
        if not self.terms:
            raise TermError("empty term sum")

    def __iter__(self):
        return iter(self.terms)

    def __len__(self):
        return len(self.terms)

    def __str__(self):
        return " + ".join(str(t) for t in self.terms)


def parse_term_sum(s):
    """Parse a '+'-joined sum of symbol.tag terms; whitespace-insensitive."""
    if isinstance(s, TermSum):
        return s
    if isinstance(s, Term):
        return TermSum(terms=(s,))
    text = str(s)
    terms = []
    offset = 0
    for piece in text.split("+"):
        stripped = piece.strip()
        pos = offset + piece.index(stripped) if stripped else offset
        if not stripped:
            raise TermError(f"term syntax error at position {pos}: empty term in {text!r}")
        parts = stripped.split(".")
        if len(parts) != 2:
            raise TermError(f"term syntax error at position {pos}: "
                            f"expected 'symbol.tag', got {stripped!r}")
        symbol, tag = parts[0].strip(), parts[1].strip()
        if not _IDENT.fullmatch(symbol):
            raise TermError(f"term syntax error at position {pos}: "
                            f"bad symbol {symbol!r}")
        if tag not in TAGS:
            raise TermError(f"unknown derivative tag {tag!r} at position {pos} "
                            f"(expected one of {', '.join(TAGS)})")
        terms.append(Term(symbol=symbol, tag=tag))
        offset += len(piece) + 1
    return TermSum(terms=tuple(terms))
