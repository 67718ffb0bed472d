"""
Chen-Fliess expansion of the proposed closed loop, orders 0..3.

Each word i_0..i_d over {0, 1, 2} pairs an iterated Lie derivative of the
output (y or k) along f0, f1, f2 with an iterated integral of the inputs
u0 = 1, u1 = sqrt(w) sin(w t), u2 = sqrt(w) cos(w t). Both are stored as
monomials in b, y0, r = a - b*k0, T and 2*pi, evaluated after a whole
number of dither periods starting at t0 = 0.

Words absent from ``_NONZERO`` have an identically vanishing Lie
derivative; words present with an empty integral list have a vanishing
integral. Every one of the 3 + 9 + 27 + 81 words is materialized as a
ChenFliessTerm so the table can be audited entry by entry.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import product

from pydantic import BaseModel, ConfigDict, model_validator

MAX_ORDER = 3


class Monomial(BaseModel):
    """c * b**p_b * y0**p_y * r**p_r * T**p_T * (2*pi)**p_2pi"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    c: Fraction
    p_b: int = 0
    p_y: int = 0
    p_r: int = 0
    p_T: Fraction = Fraction(0)
    p_2pi: Fraction = Fraction(0)


class ChenFliessTerm(BaseModel):
    model_config = ConfigDict(frozen=True)

    word: str
    order: int
    coeff_y: list[Monomial] = []
    coeff_k: list[Monomial] = []
    lie_vanishes: bool = False
    integral_vanishes: bool = False

    @model_validator(mode="after")
    def _check_word(self) -> "ChenFliessTerm":
        if not 0 <= self.order <= MAX_ORDER:
            raise ValueError(f"order {self.order} outside 0..{MAX_ORDER}")
        if len(self.word) != self.order + 1:
            raise ValueError(f"word '{self.word}' has length {len(self.word)}, expected {self.order + 1}")
        if set(self.word) - set("012"):
            raise ValueError(f"word '{self.word}' uses indices outside {{0, 1, 2}}")
        return self

    @property
    def contributes(self) -> bool:
        return bool(self.coeff_y or self.coeff_k)


# word: ((component, c, p_b, p_y, p_r), ((c, p_T, p_2pi), ...))
_NONZERO = {
    # order 0
    "0": (("y", 1, 0, 1, 1), (("1", "1", "0"),)),
    "1": (("y", -1, 1, 1, 0), ()),
    "2": (("k", 1, 0, 2, 0), ()),
    # order 1
    "00": (("y", 1, 0, 1, 2), (("1/2", "2", "0"),)),
    "01": (("y", -1, 1, 1, 1), (("1", "3/2", "-1/2"),)),
    "02": (("y", -1, 1, 3, 0), ()),
    "10": (("y", -1, 1, 1, 1), (("-1", "3/2", "-1/2"),)),
    "11": (("y", 1, 2, 1, 0), ()),
    "20": (("k", 2, 0, 2, 1), ()),
    "21": (("k", -2, 1, 2, 0), (("-1/2", "1", "0"),)),
    # order 2
    "000": (("y", 1, 0, 1, 3), (("1/6", "3", "0"),)),
    "001": (("y", -1, 1, 1, 2), (("1/2", "5/2", "-1/2"),)),
    "002": (("y", -2, 1, 3, 1), (("1", "5/2", "-3/2"),)),
    "010": (("y", -1, 1, 1, 2), ()),
    "011": (("y", 1, 2, 1, 1), (("3/4", "2", "-1"),)),
    "012": (("y", 1, 2, 3, 0), (("1/4", "2", "0"),)),
    "020": (("y", -3, 1, 3, 1), (("-2", "5/2", "-3/2"),)),
    "021": (("y", 3, 2, 3, 0), (("-1/4", "2", "0"),)),
    "100": (("y", -1, 1, 1, 2), (("-1", "5/2", "-3/2"),)),
    "101": (("y", 1, 2, 1, 1), (("-3/2", "2", "-1"),)),
    "102": (("y", 1, 2, 3, 0), (("1", "2", "-2"),)),
    "110": (("y", 1, 2, 1, 1), (("3/4", "2", "-1"),)),
    "111": (("y", -1, 3, 1, 0), ()),
    "200": (("k", 4, 0, 2, 2), (("1", "5/2", "-3/2"),)),
    "201": (("k", -4, 1, 2, 1), ()),
    "202": (("k", -2, 1, 4, 0), (("-1/2", "2", "-1"),)),
    "210": (("k", -4, 1, 2, 1), (("1/4", "2", "0"),)),
    "211": (("k", 4, 2, 2, 0), (("-1/2", "3/2", "-1/2"),)),
    # order 3
    "0000": (("y", 1, 0, 1, 4), (("1/24", "4", "0"),)),
    "0001": (("y", -1, 1, 1, 3), (("1/6", "7/2", "-1/2"), ("-1", "7/2", "-5/2"))),
    "0002": (("y", -3, 1, 3, 2), (("1/2", "7/2", "-3/2"),)),
    "0010": (("y", -1, 1, 1, 3), (("3", "7/2", "-5/2"),)),
    "0011": (("y", 1, 2, 1, 2), (("3/8", "3", "-1"),)),
    "0012": (("y", 2, 2, 3, 1), (("-1/8", "3", "-2"), ("1/12", "3", "0"))),
    "0020": (("y", -6, 1, 3, 2), (("-1/2", "7/2", "-3/2"),)),
    "0021": (("y", 6, 2, 3, 1), (("1/12", "3", "0"), ("7/8", "3", "-2"))),
    "0022": (("y", 2, 2, 5, 0), ()),
    "0100": (("y", -1, 1, 1, 3), (("-3", "7/2", "-5/2"),)),
    "0101": (("y", 1, 2, 1, 2), (("-1/4", "3", "-1"),)),
    "0102": (("y", 2, 2, 3, 1), (("3/4", "3", "-2"),)),
    "0110": (("y", 1, 2, 1, 2), (("1/4", "3", "-1"),)),
    "0111": (("y", -1, 3, 1, 1), (("5/12", "5/2", "-3/2"),)),
    # printed with a positive (2*pi) power; every other row scales as (2*pi)**-k
    "0112": (("y", -1, 3, 3, 0), (("5/4", "5/2", "-5/2"),)),
    "0120": (("y", 3, 2, 3, 1), (("1/12", "3", "0"), ("-1/2", "3", "-2"))),
    "0121": (("y", -3, 3, 3, 0), (("1/4", "5/2", "-1/2"),)),
    "0200": (("y", -9, 1, 3, 2), (("-1/2", "7/2", "-3/2"),)),
    "0201": (("y", 9, 2, 3, 1), (("-9/4", "3", "-2"),)),
    "0202": (("y", 3, 2, 5, 0), (("-1/4", "3", "-1"),)),
    "0210": (("y", 9, 2, 3, 1), (("-1/12", "3", "0"), ("1/2", "3", "-2"))),
    "0211": (("y", -9, 3, 3, 0), (("-1/4", "5/2", "-1/2"),)),
    "1000": (("y", -1, 1, 1, 3), (("-1/6", "7/2", "-1/2"), ("1", "7/2", "-5/2"))),
    "1001": (("y", 1, 2, 1, 2), (("-1/2", "3", "-1"),)),
    "1002": (("y", 2, 2, 3, 1), (("-3/2", "3", "-2"),)),
    "1010": (("y", 1, 2, 1, 2), (("-1/4", "3", "-1"),)),
    "1011": (("y", -1, 3, 1, 1), (("-5/4", "5/2", "-3/2"),)),
    "1012": (("y", -1, 3, 3, 0), (("-1/4", "5/2", "-1/2"),)),
    "1020": (("y", 3, 2, 3, 1), (("9/4", "3", "-2"),)),
    "1021": (("y", -3, 3, 3, 0), (("1/4", "5/2", "-1/2"),)),
    "1100": (("y", 1, 2, 1, 2), (("1/8", "3", "-1"), ("1/4", "3", "-1"))),
    "1101": (("y", -1, 3, 1, 1), (("5/4", "5/2", "-3/2"),)),
    "1102": (("y", -1, 3, 3, 0), (("-13/6", "5/2", "-5/2"),)),
    "1110": (("y", -1, 3, 1, 1), (("-5/12", "5/2", "-3/2"),)),
    "1111": (("y", 1, 4, 1, 0), ()),
    "2000": (("k", 8, 0, 2, 3), (("1/2", "7/2", "-3/2"),)),
    "2001": (("k", -8, 1, 2, 2), (("3/2", "3", "-2"),)),
    "2002": (("k", -8, 1, 4, 1), ()),
    "2010": (("k", -8, 1, 2, 2), (("-3/4", "3", "-2"),)),
    "2011": (("k", 8, 2, 2, 1), ()),
    "2012": (("k", 4, 2, 4, 0), (("1/2", "5/2", "-3/2"),)),
    "2020": (("k", -8, 1, 4, 1), (("-1/4", "3", "-1"),)),
    "2021": (("k", 8, 2, 4, 0), (("-1", "5/2", "-3/2"),)),
    "2100": (("k", -8, 1, 2, 2), (("-1/12", "3", "0"), ("1/2", "3", "-2"))),
    "2101": (("k", 8, 2, 2, 1), (("-1/4", "5/2", "-1/2"),)),
    "2102": (("k", 4, 2, 4, 0), (("-1/2", "5/2", "-3/2"),)),
    "2110": (("k", 8, 2, 2, 1), ()),
    "2111": (("k", -8, 3, 2, 0), (("-1/3", "2", "-1"),)),
}


def _build_term(word: str) -> ChenFliessTerm:
    order = len(word) - 1
    entry = _NONZERO.get(word)
    if entry is None:
        return ChenFliessTerm(word=word, order=order, lie_vanishes=True)
    (component, c, p_b, p_y, p_r), integral = entry
    if not integral:
        return ChenFliessTerm(word=word, order=order, integral_vanishes=True)
    monomials = [
        Monomial(
            c=Fraction(c) * Fraction(ci),
            p_b=p_b,
            p_y=p_y,
            p_r=p_r,
            p_T=Fraction(p_T),
            p_2pi=Fraction(p_2pi),
        )
        for ci, p_T, p_2pi in integral
    ]
    if component == "y":
        return ChenFliessTerm(word=word, order=order, coeff_y=monomials)
    return ChenFliessTerm(word=word, order=order, coeff_k=monomials)


@lru_cache(maxsize=None)
def terms_of_order(order: int) -> tuple[ChenFliessTerm, ...]:
    """All 3**(order+1) words of one order, in lexicographic order."""
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must be within 0..{MAX_ORDER}, got {order}")
    return tuple(_build_term("".join(w)) for w in product("012", repeat=order + 1))


def terms_up_to(order: int) -> list[ChenFliessTerm]:
    return [term for d in range(order + 1) for term in terms_of_order(d)]
