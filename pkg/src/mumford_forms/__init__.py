"""Exact expansions of the normalized weight-13 modular discriminant form
on the universal Mumford-uniformized deformation, with an independent
numeric verification engine on concrete Schottky groups.
"""

__version__ = "0.1.0"

from .rings import (  # noqa: F401
    CoefficientField,
    ComplexDomain,
    ConfigurationError,
    FieldDomain,
    IntegerPolynomial,
    NotInvertibleError,
    PolynomialRing,
    RationalCoefficient,
    RationalDomain,
    SeriesContext,
    SeriesParseError,
    SpecializationError,
    SubstitutionMap,
    ValuationError,
    YSeries,
    integer_content_and_primitivity,
    leading_part_mod_ideal,
    series_add,
    series_invert,
    series_mul,
    substitute,
)
