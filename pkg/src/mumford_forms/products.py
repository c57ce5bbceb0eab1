"""The two infinite products over primitive conjugacy classes, truncated.

Both products run over primitive conjugacy classes of the free group, with
multipliers as the variables.  A class of word length l has multiplier of
valuation >= l, so classes longer than the truncation degree and exponents
past it contribute factors of the form 1 + O(ideal^(N+1)) and are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .rings import NotInvertibleError, YSeries
from .schottky import (
    NumericSchottkyGroup,
    SchottkyWorkspace,
    enumerate_primitive_classes,
)


@dataclass(frozen=True)
class ProductSpec:
    """Truncation policy for the class products."""

    kind: str                      # "zograf" | "quadratic"
    class_bound: int               # max primitive-class word length
    identify_inverses: bool = False

    def __post_init__(self):
        if self.kind not in ("zograf", "quadratic"):
            raise ValueError(f"unknown product kind {self.kind!r}")
        if self.class_bound < 1:
            raise ValueError("class bound must be >= 1")


def _class_product(wsp: SchottkyWorkspace, first_exponent: int,
                   identify_inverses: bool) -> YSeries:
    """prod over classes, prod over m >= 0, of (1 - q^(first_exponent+m))."""
    ctx = wsp.ctx
    total = ctx.one()
    for cls in enumerate_primitive_classes(
        wsp.genus, ctx.trunc, identify_inverses
    ):
        q = wsp.multiplier(cls.word)
        v = q.valuation()
        if v is None:
            continue  # class beyond the truncation
        power = q ** first_exponent
        exponent = first_exponent
        while v * exponent <= ctx.trunc:
            total = total * (ctx.one() - power)
            exponent += 1
            if v * exponent <= ctx.trunc:
                power = power * q
        # all later factors are 1 + O(ideal^(trunc+1))
    return total


def zograf_product(wsp: SchottkyWorkspace,
                   identify_inverses: bool = False) -> YSeries:
    """The genus-g weight-one product prod_cls prod_m (1 - q^(1+m)).

    A unit with constant term 1.  The inverse-class convention changes the
    degree-one coefficient by a factor of two and is surfaced as a flag.
    """
    return _class_product(wsp, 1, identify_inverses)


def quadratic_product(wsp: SchottkyWorkspace,
                      identify_inverses: bool = False) -> YSeries:
    """The weight-two product with its marked-generator prefactor.

    (1 - q_1)^2 (1 - q_2) * prod_cls prod_m (1 - q^(2+m)), where q_1, q_2
    are the multipliers of the first two marked generators (exactly the
    first two deformation variables here).
    """
    ctx = wsp.ctx
    if wsp.genus < 2:
        raise ValueError("the quadratic product needs genus >= 2")
    one = ctx.one()
    q1 = wsp.multiplier((1,))
    q2 = wsp.multiplier((2,))
    pref = (one - q1) * (one - q1) * (one - q2)
    return pref * _class_product(wsp, 2, identify_inverses)


def product_ratio_power(f1: YSeries, f2: YSeries, power: int) -> YSeries:
    """f1^power / f2 for unit series (constant term 1)."""
    for name, s in (("numerator", f1), ("denominator", f2)):
        c0 = s.coefficient((0,) * s.ctx.genus)
        if s.ctx.domain.is_zero(c0):
            raise NotInvertibleError(f"{name} series is not a unit")
    return (f1 ** power) * f2.invert()


# -- numeric twins -----------------------------------------------------------


def numeric_class_product(group: NumericSchottkyGroup, first_exponent: int,
                          class_bound: int,
                          identify_inverses: bool = False) -> complex:
    total = 1 + 0j
    for cls in enumerate_primitive_classes(
        group.genus, class_bound, identify_inverses
    ):
        q = group.multiplier(cls.word)
        power = q ** first_exponent
        while abs(power) > 1e-30:
            total *= 1 - power
            power *= q
    return total


def numeric_zograf_product(group: NumericSchottkyGroup, class_bound: int,
                           identify_inverses: bool = False) -> complex:
    return numeric_class_product(group, 1, class_bound, identify_inverses)


def numeric_quadratic_product(group: NumericSchottkyGroup, class_bound: int,
                              identify_inverses: bool = False) -> complex:
    if group.genus < 2:
        raise ValueError("the quadratic product needs genus >= 2")
    q1 = group.generators[0].multiplier
    q2 = group.generators[1].multiplier
    pref = (1 - q1) ** 2 * (1 - q2)
    return pref * numeric_class_product(group, 2, class_bound,
                                        identify_inverses)
