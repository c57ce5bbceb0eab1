"""Exact arithmetic kernel.

Three layers, bottom up:

* :class:`IntegerPolynomial` -- sparse multivariate polynomials over the
  integers in the fixed-point variables, with packed exponent keys and a
  graded-lexicographic canonical order.
* :class:`RationalCoefficient` -- quotients of integer polynomials.  The
  denominator is kept in *factored* form ``content * prod(atom^power)``;
  in this problem every denominator that arises is a product of
  fixed-point differences ``x_a - x_b``, so reduction never needs a
  polynomial gcd, only exact trial division by the difference atoms.
* :class:`YSeries` -- truncated multivariate Laurent series in the
  deformation variables ``y_1..y_g`` with :class:`RationalCoefficient`
  (or `Fraction`, or complex) coefficients.  Each series tracks ``prec``,
  the total degree through which its terms are exact; ``prec=None`` marks
  an exact polynomial.  Truncation is by total degree, and a configurable
  valuation floor bounds how far Laurent tails may reach.

Everything here is immutable after construction and uses arbitrary
precision integer arithmetic; no floating point enters this module except
through explicitly numeric substitution targets.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union


class ConfigurationError(ValueError):
    """Operands belong to incompatible contexts (genus, field, truncation)."""


class ValuationError(ArithmeticError):
    """A Laurent valuation fell below the configured floor."""


class NotInvertibleError(ArithmeticError):
    """Series inversion requires a single-monomial invertible leading part."""


class SpecializationError(ArithmeticError):
    """A substitution hit a vanishing denominator or a divergent limit."""


class SeriesParseError(ValueError):
    """Malformed canonical text for a polynomial or series."""


# ---------------------------------------------------------------------------
# integer polynomials
# ---------------------------------------------------------------------------

_EXP_BITS = 16
_EXP_MASK = (1 << _EXP_BITS) - 1

_TOKEN_RE = re.compile(r"^(-?\d+)((?:\*[A-Za-z_][A-Za-z_0-9]*(?:\^\d+)?)*)$")


class PolynomialRing:
    """The ring of integer polynomials in a fixed ordered set of variables.

    Exponent vectors are packed into a single int, first variable in the
    highest bits, so that monomial multiplication is integer addition and
    plain int comparison of keys is lexicographic comparison of exponents.
    """

    def __init__(self, variables: tuple[str, ...]):
        if len(set(variables)) != len(variables):
            raise ConfigurationError("duplicate variable names")
        self.variables = tuple(variables)
        self.nvars = len(variables)
        self._index = {v: i for i, v in enumerate(variables)}
        self._shifts = tuple(
            _EXP_BITS * (self.nvars - 1 - i) for i in range(self.nvars)
        )

    def pack(self, exponents: Iterable[int]) -> int:
        key = 0
        n = 0
        for i, e in enumerate(exponents):
            if e < 0 or e > _EXP_MASK:
                raise ValueError("exponent out of packing range")
            key |= e << self._shifts[i]
            n += 1
        if n != self.nvars:
            raise ValueError("exponent arity mismatch")
        return key

    def unpack(self, key: int) -> tuple[int, ...]:
        return tuple((key >> s) & _EXP_MASK for s in self._shifts)

    def total_degree(self, key: int) -> int:
        return sum((key >> s) & _EXP_MASK for s in self._shifts)

    def monomial_divides(self, dkey: int, key: int) -> bool:
        for s in self._shifts:
            if ((dkey >> s) & _EXP_MASK) > ((key >> s) & _EXP_MASK):
                return False
        return True

    def grlex(self, key: int) -> tuple[int, int]:
        """Sort key for graded-lexicographic order (packed key is lex)."""
        return (self.total_degree(key), key)

    def __eq__(self, other):
        return isinstance(other, PolynomialRing) and self.variables == other.variables

    def __hash__(self):
        return hash(self.variables)

    def __repr__(self):
        return f"PolynomialRing{self.variables}"


class IntegerPolynomial:
    """A sparse integer polynomial; ``terms`` maps packed exponent -> coeff."""

    __slots__ = ("ring", "terms", "_hash", "_varmask")

    def __init__(self, ring: PolynomialRing, terms: dict[int, int]):
        self.ring = ring
        self.terms = terms  # owned; never mutated after construction
        self._hash = None
        self._varmask = None

    def varmask(self) -> int:
        """Bitmask of variables that actually occur (bit i = variable i)."""
        if self._varmask is None:
            m = 0
            shifts = self.ring._shifts
            for k in self.terms:
                for i, s in enumerate(shifts):
                    if (k >> s) & _EXP_MASK:
                        m |= 1 << i
            self._varmask = m
        return self._varmask

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, ring: PolynomialRing, c: int) -> "IntegerPolynomial":
        return cls(ring, {0: int(c)} if c else {})

    @classmethod
    def variable(cls, ring: PolynomialRing, name: str) -> "IntegerPolynomial":
        exps = [0] * ring.nvars
        exps[ring._index[name]] = 1
        return cls(ring, {ring.pack(exps): 1})

    @classmethod
    def from_exponent_terms(
        cls, ring: PolynomialRing, items: Mapping[tuple[int, ...], int]
    ) -> "IntegerPolynomial":
        return cls(ring, {ring.pack(e): int(c) for e, c in items.items() if c})

    # -- structure ----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and 0 in self.terms)

    def constant_value(self) -> int:
        return self.terms.get(0, 0)

    def total_degree(self) -> int:
        if not self.terms:
            return -1
        td = self.ring.total_degree
        return max(td(k) for k in self.terms)

    def content(self) -> int:
        g = 0
        for c in self.terms.values():
            g = math.gcd(g, c)
            if g == 1:
                break
        return g

    def leading_key(self) -> int:
        """Graded-lexicographically largest monomial."""
        return max(self.terms, key=self.ring.grlex)

    def leading_coefficient(self) -> int:
        return self.terms[self.leading_key()] if self.terms else 0

    def degree_in(self, name: str) -> int:
        if not self.terms:
            return -1
        s = self.ring._shifts[self.ring._index[name]]
        return max((k >> s) & _EXP_MASK for k in self.terms)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other: "IntegerPolynomial") -> "IntegerPolynomial":
        a, b = self.terms, other.terms
        if len(a) < len(b):
            a, b = b, a
        out = dict(a)
        for k, c in b.items():
            v = out.get(k, 0) + c
            if v:
                out[k] = v
            else:
                out.pop(k, None)
        return IntegerPolynomial(self.ring, out)

    def __neg__(self) -> "IntegerPolynomial":
        return IntegerPolynomial(self.ring, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other: "IntegerPolynomial") -> "IntegerPolynomial":
        out = dict(self.terms)
        for k, c in other.terms.items():
            v = out.get(k, 0) - c
            if v:
                out[k] = v
            else:
                out.pop(k, None)
        return IntegerPolynomial(self.ring, out)

    def __mul__(self, other) -> "IntegerPolynomial":
        if isinstance(other, int):
            if other == 0:
                return IntegerPolynomial(self.ring, {})
            return IntegerPolynomial(
                self.ring, {k: c * other for k, c in self.terms.items()}
            )
        a, b = self.terms, other.terms
        if len(a) < len(b):
            a, b = b, a
        out: dict[int, int] = {}
        get = out.get
        for kb, cb in b.items():
            for ka, ca in a.items():
                k = ka + kb
                v = get(k, 0) + ca * cb
                if v:
                    out[k] = v
                else:
                    out.pop(k, None)
        return IntegerPolynomial(self.ring, out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "IntegerPolynomial":
        if n < 0:
            raise ValueError("negative power of a polynomial")
        result = IntegerPolynomial.constant(self.ring, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def difference_pair(self) -> Optional[tuple[int, int]]:
        """Variable indices (a, b) when this polynomial is x_a - x_b."""
        if len(self.terms) != 2:
            return None
        ring = self.ring
        pos = neg = None
        for k, c in self.terms.items():
            if ring.total_degree(k) != 1:
                return None
            if c == 1:
                pos = k
            elif c == -1:
                neg = k
            else:
                return None
        if pos is None or neg is None:
            return None
        a = next(i for i in range(ring.nvars) if (pos >> ring._shifts[i]) & _EXP_MASK)
        b = next(i for i in range(ring.nvars) if (neg >> ring._shifts[i]) & _EXP_MASK)
        return (a, b)

    def _div_binomial(self, a: int, b: int) -> Optional["IntegerPolynomial"]:
        """Exact division by x_a - x_b via synthetic division in x_a."""
        ring = self.ring
        sa, sb = ring._shifts[a], ring._shifts[b]
        by_dega: dict[int, dict[int, int]] = {}
        for k, c in self.terms.items():
            ea = (k >> sa) & _EXP_MASK
            by_dega.setdefault(ea, {})[k - (ea << sa)] = c
        if len(by_dega) == 1 and 0 in by_dega:
            return None
        # p = sum_k c_k x_a^k ; q_{k-1} = c_k + x_b q_k, remainder must vanish
        deg = max(by_dega)
        quot: dict[int, int] = {}
        carry: dict[int, int] = {}
        for k in range(deg, 0, -1):
            level = by_dega.get(k, {})
            for kk, c in carry.items():
                level[kk] = level.get(kk, 0) + c
            carry = {}
            shift_a = (k - 1) << sa
            for kk, c in level.items():
                if c:
                    quot[kk + shift_a] = c
                    carry[kk + (1 << sb)] = c
        rem = by_dega.get(0, {})
        for kk, c in carry.items():
            v = rem.get(kk, 0) + c
            if v:
                rem[kk] = v
            else:
                rem.pop(kk, None)
        if any(rem.values()):
            return None
        return IntegerPolynomial(ring, quot)

    def exact_div(self, divisor: "IntegerPolynomial") -> Optional["IntegerPolynomial"]:
        """Return self / divisor if the division is exact, else None."""
        if divisor.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        if self.is_zero():
            return self
        pair = divisor.difference_pair()
        if pair is not None:
            a, b = pair
            if not (self.varmask() >> a) & 1 or not (self.varmask() >> b) & 1:
                return None
            return self._div_binomial(a, b)
        ring = self.ring
        dk = divisor.leading_key()
        dc = divisor.terms[dk]
        rem = dict(self.terms)
        quot: dict[int, int] = {}
        grlex = ring.grlex
        while rem:
            lk = max(rem, key=grlex)
            lc = rem[lk]
            if lc % dc or not ring.monomial_divides(dk, lk):
                return None
            qk = lk - dk
            qc = lc // dc
            quot[qk] = qc
            for k2, c2 in divisor.terms.items():
                kk = qk + k2
                v = rem.get(kk, 0) - qc * c2
                if v:
                    rem[kk] = v
                else:
                    rem.pop(kk, None)
        return IntegerPolynomial(ring, quot)

    # -- queries ------------------------------------------------------------

    def evaluate(self, values: Mapping[str, object]):
        """Evaluate at numeric (Fraction/complex) values for all variables."""
        ring = self.ring
        vals = [values[v] for v in ring.variables]
        total = 0
        for k, c in self.terms.items():
            term = c
            for i, s in enumerate(ring._shifts):
                e = (k >> s) & _EXP_MASK
                if e:
                    term = term * vals[i] ** e
            total = total + term
        return total

    def __eq__(self, other):
        return (
            isinstance(other, IntegerPolynomial)
            and self.ring == other.ring
            and self.terms == other.terms
        )

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.ring.variables, frozenset(self.terms.items())))
        return self._hash

    # -- canonical text -----------------------------------------------------

    def canonical_str(self) -> str:
        if not self.terms:
            return "0"
        ring = self.ring
        parts = []
        for k in sorted(self.terms, key=ring.grlex, reverse=True):
            c = self.terms[k]
            factors = [str(c)]
            exps = ring.unpack(k)
            for name, e in zip(ring.variables, exps):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            parts.append("*".join(factors))
        return " + ".join(parts)

    @classmethod
    def parse(cls, ring: PolynomialRing, text: str) -> "IntegerPolynomial":
        text = text.strip()
        if text == "0":
            return cls(ring, {})
        terms: dict[int, int] = {}
        for part in text.split(" + "):
            m = _TOKEN_RE.match(part.strip())
            if not m:
                raise SeriesParseError(f"bad polynomial term {part!r}")
            coeff = int(m.group(1))
            exps = [0] * ring.nvars
            for f in m.group(2).split("*")[1:]:
                if "^" in f:
                    name, e = f.split("^")
                    e = int(e)
                else:
                    name, e = f, 1
                if name not in ring._index:
                    raise SeriesParseError(f"unknown variable {name!r}")
                exps[ring._index[name]] += e
            key = ring.pack(exps)
            if key in terms:
                raise SeriesParseError("repeated monomial in canonical text")
            terms[key] = coeff
        return cls(ring, {k: c for k, c in terms.items() if c})

    def __repr__(self):
        return f"<poly {self.canonical_str()}>"


# ---------------------------------------------------------------------------
# the coefficient field
# ---------------------------------------------------------------------------


class CoefficientField:
    """Rational functions in the fixed-point variables.

    ``difference_atoms`` lists the canonical irreducible binomials
    ``x_a - x_b`` (earlier variable first); these are the denominators the
    theory allows, and the only ones factored out automatically.  Leading
    coefficients that refuse to factor through them are kept as opaque
    general atoms, which keeps arithmetic correct (reduction is then merely
    incomplete, and equality is cross-multiplication anyway).
    """

    # numerators larger than this skip opportunistic atom cancellation
    REDUCE_TERM_LIMIT = 800

    def __init__(self, variables: tuple[str, ...]):
        self.ring = PolynomialRing(tuple(variables))
        self.difference_atoms: list[IntegerPolynomial] = []
        for i in range(self.ring.nvars):
            for j in range(i + 1, self.ring.nvars):
                a = IntegerPolynomial.variable(self.ring, self.ring.variables[i])
                b = IntegerPolynomial.variable(self.ring, self.ring.variables[j])
                self.difference_atoms.append(a - b)
        self.zero = RationalCoefficient(self, IntegerPolynomial(self.ring, {}), 1, {})
        self.one = RationalCoefficient(
            self, IntegerPolynomial.constant(self.ring, 1), 1, {}
        )

    def from_int(self, n: int) -> "RationalCoefficient":
        return RationalCoefficient(
            self, IntegerPolynomial.constant(self.ring, n), 1, {}
        )

    def from_fraction(self, q: Fraction) -> "RationalCoefficient":
        return RationalCoefficient(
            self,
            IntegerPolynomial.constant(self.ring, q.numerator),
            q.denominator,
            {},
        )

    def variable(self, name: str) -> "RationalCoefficient":
        return RationalCoefficient(
            self, IntegerPolynomial.variable(self.ring, name), 1, {}
        )

    def coerce(self, value) -> "RationalCoefficient":
        if isinstance(value, RationalCoefficient):
            if value.field is not self and value.field.ring != self.ring:
                raise ConfigurationError("coefficient from a different field")
            return value
        if isinstance(value, int):
            return self.from_int(value)
        if isinstance(value, Fraction):
            return self.from_fraction(value)
        if isinstance(value, IntegerPolynomial):
            return RationalCoefficient(self, value, 1, {})
        raise TypeError(f"cannot coerce {type(value).__name__} into field")

    def __eq__(self, other):
        return isinstance(other, CoefficientField) and self.ring == other.ring

    def __hash__(self):
        return hash(self.ring)

    def __repr__(self):
        return f"CoefficientField{self.ring.variables}"


class RationalCoefficient:
    """``num / (den_content * prod(atom ** power))`` with integer content > 0.

    Equality is cross-multiplication equality; ``reduced()`` produces the
    canonical gcd-free representative (atoms are irreducible, so trial
    division by them is a complete reduction whenever all atoms are
    differences).
    """

    __slots__ = ("field", "num", "den_content", "den_factors")

    def __init__(
        self,
        field: CoefficientField,
        num: IntegerPolynomial,
        den_content: int,
        den_factors: dict[IntegerPolynomial, int],
    ):
        if den_content == 0:
            raise ZeroDivisionError("zero denominator content")
        if den_content < 0:
            num = -num
            den_content = -den_content
        if num.is_zero():
            den_content = 1
            den_factors = {}
        self.field = field
        self.num = num
        self.den_content = den_content
        self.den_factors = den_factors

    # -- helpers ------------------------------------------------------------

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def denominator_expanded(self) -> IntegerPolynomial:
        d = IntegerPolynomial.constant(self.field.ring, self.den_content)
        for atom, power in sorted(
            self.den_factors.items(), key=lambda kv: kv[0].canonical_str()
        ):
            for _ in range(power):
                d = d * atom
        return d

    def _scaled_num(self, target: dict[IntegerPolynomial, int], target_content: int):
        """Numerator rescaled from own denominator to the target one."""
        n = self.num
        c = target_content // self.den_content
        if c != 1:
            n = n * c
        for atom, power in target.items():
            extra = power - self.den_factors.get(atom, 0)
            for _ in range(extra):
                n = n * atom
        return n

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, int):
            other = self.field.from_int(other)
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        content = self.den_content * other.den_content // math.gcd(
            self.den_content, other.den_content
        )
        factors = dict(self.den_factors)
        for atom, power in other.den_factors.items():
            if factors.get(atom, 0) < power:
                factors[atom] = power
        num = self._scaled_num(factors, content) + other._scaled_num(factors, content)
        return RationalCoefficient(self.field, num, content, factors)._int_reduce()

    __radd__ = __add__

    def __neg__(self):
        return RationalCoefficient(
            self.field, -self.num, self.den_content, self.den_factors
        )

    def __sub__(self, other):
        if isinstance(other, int):
            other = self.field.from_int(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, int):
            if other == 0:
                return self.field.zero
            return RationalCoefficient(
                self.field, self.num * other, self.den_content, self.den_factors
            )._light_reduce()
        if self.is_zero() or other.is_zero():
            return self.field.zero
        factors = dict(self.den_factors)
        for atom, power in other.den_factors.items():
            factors[atom] = factors.get(atom, 0) + power
        return RationalCoefficient(
            self.field,
            self.num * other.num,
            self.den_content * other.den_content,
            factors,
        )._light_reduce()

    __rmul__ = __mul__

    def invert(self) -> "RationalCoefficient":
        """Multiplicative inverse; factors the numerator into atoms."""
        if self.is_zero():
            raise ZeroDivisionError("inverting zero coefficient")
        new_num = IntegerPolynomial.constant(self.field.ring, self.den_content)
        for atom, power in self.den_factors.items():
            for _ in range(power):
                new_num = new_num * atom
        factors: dict[IntegerPolynomial, int] = {}
        rem = self.num
        for atom in self.field.difference_atoms:
            while True:
                q = rem.exact_div(atom)
                if q is None:
                    break
                rem = q
                factors[atom] = factors.get(atom, 0) + 1
        if rem.is_constant():
            content = rem.constant_value()
        else:
            # leftover non-difference factor: keep it as an opaque atom
            content = rem.content()
            sign = 1 if rem.leading_coefficient() > 0 else -1
            content *= sign
            rem = rem.exact_div(
                IntegerPolynomial.constant(self.field.ring, content)
            )
            factors[rem] = factors.get(rem, 0) + 1
        return RationalCoefficient(self.field, new_num, content, factors)

    def __truediv__(self, other):
        if isinstance(other, int):
            return RationalCoefficient(
                self.field, self.num, self.den_content * other, self.den_factors
            )._light_reduce()
        return self * other.invert()

    def _int_reduce(self) -> "RationalCoefficient":
        num, content = self.num, self.den_content
        if content != 1 and not num.is_zero():
            g = math.gcd(num.content(), content)
            if g > 1:
                num = num.exact_div(IntegerPolynomial.constant(self.field.ring, g))
                content //= g
        return RationalCoefficient(self.field, num, content, self.den_factors)

    def _light_reduce(self) -> "RationalCoefficient":
        num, content = self.num, self.den_content
        if content != 1 and not num.is_zero():
            g = math.gcd(num.content(), content)
            if g > 1:
                num = num.exact_div(IntegerPolynomial.constant(self.field.ring, g))
                content //= g
        factors = self.den_factors
        if factors and 0 < len(num.terms) <= CoefficientField.REDUCE_TERM_LIMIT:
            mask = num.varmask()
            copied = None
            for atom in list(factors):
                pair = atom.difference_pair()
                if pair is not None and (
                    not (mask >> pair[0]) & 1 or not (mask >> pair[1]) & 1
                ):
                    continue
                while factors.get(atom):
                    q = num.exact_div(atom)
                    if q is None:
                        break
                    num = q
                    mask = num.varmask()
                    if copied is None:
                        copied = factors = dict(factors)
                    factors[atom] -= 1
                    if not factors[atom]:
                        del factors[atom]
        return RationalCoefficient(self.field, num, content, factors)

    def reduced(self) -> "RationalCoefficient":
        """Fully cancel atoms and integer content (canonical form)."""
        num, content = self.num, self.den_content
        factors = dict(self.den_factors)
        for atom in list(factors):
            while factors.get(atom):
                q = num.exact_div(atom)
                if q is None:
                    break
                num = q
                factors[atom] -= 1
                if not factors[atom]:
                    del factors[atom]
        if not num.is_zero():
            g = math.gcd(num.content(), content)
            if g > 1:
                num = num.exact_div(IntegerPolynomial.constant(self.field.ring, g))
                content //= g
        return RationalCoefficient(self.field, num, content, factors)

    # -- comparisons / conversions ------------------------------------------

    def __eq__(self, other):
        if isinstance(other, int):
            other = self.field.from_int(other)
        if not isinstance(other, RationalCoefficient):
            return NotImplemented
        # cross-multiplication equality
        return (self.num * other.denominator_expanded()) == (
            other.num * self.denominator_expanded()
        )

    def __hash__(self):
        r = self.reduced()
        return hash((r.num, r.den_content, frozenset(
            (a, p) for a, p in r.den_factors.items())))

    def evaluate(self, values: Mapping[str, object]):
        """Numeric value at a full assignment of the x-variables."""
        num = self.num.evaluate(values)
        den = self.den_content
        for atom, power in self.den_factors.items():
            a = atom.evaluate(values)
            if a == 0:
                raise SpecializationError(
                    f"denominator atom {atom.canonical_str()} vanishes"
                )
            den = den * a ** power
        if isinstance(num, complex) or isinstance(den, complex):
            return num / den
        if den == 0:
            raise SpecializationError("denominator vanishes")
        return Fraction(num) / Fraction(den)

    def as_fraction(self) -> Fraction:
        if not self.num.is_constant() or self.den_factors:
            r = self.reduced()
            if not r.num.is_constant() or r.den_factors:
                raise ValueError("coefficient is not a rational number")
            return Fraction(r.num.constant_value(), r.den_content)
        return Fraction(self.num.constant_value(), self.den_content)

    def canonical_pair(self) -> tuple[IntegerPolynomial, IntegerPolynomial]:
        """(numerator, denominator) reduced, denominator leading coeff > 0."""
        r = self.reduced()
        den = r.denominator_expanded()
        if den.leading_coefficient() < 0:
            den = -den
            num = -r.num
        else:
            num = r.num
        return num, den

    def __repr__(self):
        num, den = self.canonical_pair()
        if den.is_constant() and den.constant_value() == 1:
            return f"<coeff {num.canonical_str()}>"
        return f"<coeff ({num.canonical_str()}) / ({den.canonical_str()})>"


# ---------------------------------------------------------------------------
# coefficient domains (uniform view over exact/numeric coefficient types)
# ---------------------------------------------------------------------------


class FieldDomain:
    """Exact coefficients: RationalCoefficient over a CoefficientField."""

    exact = True

    def __init__(self, field: CoefficientField):
        self.field = field
        self.zero = field.zero
        self.one = field.one

    @property
    def variables(self):
        return self.field.ring.variables

    def coerce(self, v):
        return self.field.coerce(v)

    def is_zero(self, c) -> bool:
        return c.is_zero()

    def invert(self, c):
        return c.invert()

    def canonical(self, c):
        return c.reduced()

    def coeff_str(self, c) -> str:
        num, den = c.canonical_pair()
        return f"{num.canonical_str()} | {den.canonical_str()}"

    def parse_coeff(self, text: str):
        try:
            num_s, den_s = text.split(" | ")
        except ValueError as exc:
            raise SeriesParseError(f"bad coefficient {text!r}") from exc
        num = IntegerPolynomial.parse(self.field.ring, num_s)
        den = IntegerPolynomial.parse(self.field.ring, den_s)
        if den.is_zero():
            raise SeriesParseError("zero denominator")
        return self.field.coerce(num) * self.field.coerce(den).invert()

    def __eq__(self, other):
        return isinstance(other, FieldDomain) and self.field == other.field

    def __hash__(self):
        return hash(("FieldDomain", self.field))


class RationalDomain:
    """Exact coefficients that are plain rational numbers (no x-variables)."""

    exact = True
    variables: tuple[str, ...] = ()

    def __init__(self):
        self.zero = Fraction(0)
        self.one = Fraction(1)

    def coerce(self, v):
        if isinstance(v, Fraction):
            return v
        if isinstance(v, int):
            return Fraction(v)
        if isinstance(v, RationalCoefficient):
            return v.as_fraction()
        raise TypeError(f"cannot coerce {type(v).__name__} into QQ")

    def is_zero(self, c) -> bool:
        return c == 0

    def invert(self, c):
        if c == 0:
            raise ZeroDivisionError("inverting zero coefficient")
        return 1 / c

    def canonical(self, c):
        return c

    def coeff_str(self, c: Fraction) -> str:
        return f"{c.numerator} | {c.denominator}"

    def parse_coeff(self, text: str):
        try:
            num_s, den_s = text.split(" | ")
            return Fraction(int(num_s), int(den_s))
        except ValueError as exc:
            raise SeriesParseError(f"bad coefficient {text!r}") from exc

    def __eq__(self, other):
        return isinstance(other, RationalDomain)

    def __hash__(self):
        return hash("RationalDomain")


class ComplexDomain:
    """Numeric coefficients; only valid for substituted or numeric series."""

    exact = False
    variables: tuple[str, ...] = ()

    def __init__(self):
        self.zero = 0j
        self.one = 1 + 0j

    def coerce(self, v):
        return complex(v)

    def is_zero(self, c) -> bool:
        return c == 0

    def invert(self, c):
        return 1 / c

    def canonical(self, c):
        return c

    def coeff_str(self, c) -> str:
        raise ConfigurationError("complex series have no canonical text form")

    def parse_coeff(self, text: str):
        raise ConfigurationError("complex series have no canonical text form")

    def __eq__(self, other):
        return isinstance(other, ComplexDomain)

    def __hash__(self):
        return hash("ComplexDomain")


Domain = Union[FieldDomain, RationalDomain, ComplexDomain]


# ---------------------------------------------------------------------------
# truncated Laurent series in the deformation variables
# ---------------------------------------------------------------------------


class SeriesContext:
    """Shared configuration for a family of series.

    ``trunc`` is the working truncation: finite-precision series keep only
    terms of total degree <= trunc.  ``vcap`` bounds Laurent tails: no term
    may have total degree below ``-vcap``.
    """

    def __init__(self, genus: int, trunc: int, domain: Domain, vcap: Optional[int] = None):
        if genus < 1:
            raise ConfigurationError("genus must be >= 1")
        if trunc < 0:
            raise ConfigurationError("truncation must be >= 0")
        self.genus = genus
        self.trunc = trunc
        self.vcap = trunc if vcap is None else vcap
        self.domain = domain
        self.yvars = tuple(f"y{i}" for i in range(1, genus + 1))

    def compatible(self, other: "SeriesContext") -> bool:
        return (
            self.genus == other.genus
            and self.trunc == other.trunc
            and self.vcap == other.vcap
            and self.domain == other.domain
        )

    # -- constructors --------------------------------------------------------

    def zero(self) -> "YSeries":
        return YSeries(self, {}, None)

    def one(self) -> "YSeries":
        return YSeries(self, {(0,) * self.genus: self.domain.one}, None)

    def constant(self, value) -> "YSeries":
        c = self.domain.coerce(value)
        if self.domain.is_zero(c):
            return self.zero()
        return YSeries(self, {(0,) * self.genus: c}, None)

    def y(self, i: int) -> "YSeries":
        """The deformation variable y_i (1-based)."""
        if not 1 <= i <= self.genus:
            raise ConfigurationError(f"y index {i} out of range")
        e = [0] * self.genus
        e[i - 1] = 1
        return YSeries(self, {tuple(e): self.domain.one}, None)

    def monomial(self, exponents: tuple[int, ...], coeff) -> "YSeries":
        c = self.domain.coerce(coeff)
        if self.domain.is_zero(c):
            return self.zero()
        return YSeries(self, {tuple(exponents): c}, None)

    def __repr__(self):
        return (
            f"SeriesContext(genus={self.genus}, trunc={self.trunc}, "
            f"vcap={self.vcap}, domain={type(self.domain).__name__})"
        )


def _min_prec(pa: Optional[int], pb: Optional[int]) -> Optional[int]:
    if pa is None:
        return pb
    if pb is None:
        return pa
    return min(pa, pb)


def _raw_mul(dom: Domain, a: dict, b: dict, cap: int) -> dict:
    """Convolution of raw term dicts, keeping total degree <= cap."""
    if len(a) < len(b):
        a, b = b, a
    a_items = sorted(a.items(), key=lambda ec: sum(ec[0]))
    out: dict[tuple[int, ...], object] = {}
    for eb, cb in b.items():
        db = sum(eb)
        for ea, ca in a_items:
            if db + sum(ea) > cap:
                break
            e = tuple(x + y for x, y in zip(ea, eb))
            v = ca * cb
            if e in out:
                v = out[e] + v
                if dom.is_zero(v):
                    del out[e]
                    continue
            out[e] = v
    return out


class YSeries:
    """Truncated multivariate Laurent series over a coefficient domain.

    ``prec`` is the total degree through which the terms are exact;
    ``prec=None`` means the series is an exact (Laurent) polynomial.  All
    arithmetic propagates ``prec`` so that an under-resolved result is
    detectable rather than silently wrong.
    """

    __slots__ = ("ctx", "terms", "prec")

    def __init__(self, ctx: SeriesContext, terms: dict[tuple[int, ...], object],
                 prec: Optional[int]):
        self.ctx = ctx
        self.terms = terms
        self.prec = prec

    # -- bookkeeping ---------------------------------------------------------

    def _check(self, other: "YSeries") -> None:
        # same truncation regime means same context; per-series prec is the
        # finer exactness bookkeeping and combines by the min/valuation rules
        if self.ctx is not other.ctx and not self.ctx.compatible(other.ctx):
            raise ConfigurationError("series from incompatible contexts")

    def is_zero(self) -> bool:
        return not self.terms

    def valuation(self) -> Optional[int]:
        """Smallest total degree of a stored term; None for the zero series."""
        if not self.terms:
            return None
        return min(sum(e) for e in self.terms)

    def is_polynomial(self) -> bool:
        return self.prec is None

    def _capped(self, terms: dict, prec: Optional[int]) -> "YSeries":
        ctx = self.ctx
        if prec is not None:
            terms = {e: c for e, c in terms.items() if sum(e) <= prec}
        low = min((sum(e) for e in terms), default=0)
        if low < -ctx.vcap:
            raise ValuationError(
                f"valuation {low} below the configured floor {-ctx.vcap}"
            )
        return YSeries(ctx, terms, prec)

    # -- ring operations -----------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction, RationalCoefficient)):
            other = self.ctx.constant(other)
        self._check(other)
        dom = self.ctx.domain
        a, b = self.terms, other.terms
        if len(a) < len(b):
            a, b = b, a
        out = dict(a)
        for e, c in b.items():
            if e in out:
                v = out[e] + c
                if dom.is_zero(v):
                    del out[e]
                else:
                    out[e] = v
            else:
                out[e] = c
        return self._capped(out, _min_prec(self.prec, other.prec))

    __radd__ = __add__

    def __neg__(self):
        return YSeries(self.ctx, {e: -c for e, c in self.terms.items()}, self.prec)

    def __sub__(self, other):
        if isinstance(other, (int, Fraction, RationalCoefficient)):
            other = self.ctx.constant(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def _mul_prec(self, other: "YSeries") -> Optional[int]:
        va = self.valuation()
        vb = other.valuation()
        if va is None or vb is None:
            return None  # zero result is exact
        cands = []
        if self.prec is not None:
            cands.append(self.prec + vb)
        if other.prec is not None:
            cands.append(other.prec + va)
        return min(cands) if cands else None

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, RationalCoefficient)):
            c = self.ctx.domain.coerce(other)
            if self.ctx.domain.is_zero(c):
                return self.ctx.zero()
            return YSeries(
                self.ctx, {e: v * c for e, v in self.terms.items()}, self.prec
            )
        self._check(other)
        return self._mul_capped(other, self._mul_prec(other))

    __rmul__ = __mul__

    def _mul_capped(self, other: "YSeries", cap: Optional[int]) -> "YSeries":
        dom = self.ctx.domain
        a, b = self.terms, other.terms
        if not a or not b:
            return self.ctx.zero()
        if len(a) < len(b):
            a, b = b, a
        # sort the longer operand once by total degree for early cut-off
        a_items = sorted(a.items(), key=lambda ec: sum(ec[0]))
        out: dict[tuple[int, ...], object] = {}
        for eb, cb in b.items():
            db = sum(eb)
            for ea, ca in a_items:
                if cap is not None and db + sum(ea) > cap:
                    break
                e = tuple(x + y for x, y in zip(ea, eb))
                v = ca * cb
                if e in out:
                    v = out[e] + v
                    if dom.is_zero(v):
                        del out[e]
                        continue
                out[e] = v
        return self._capped(out, cap)

    def __pow__(self, n: int) -> "YSeries":
        if n < 0:
            return self.invert() ** (-n)
        result = self.ctx.one()
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def monomial_scaled(self, shift: tuple[int, ...], coeff) -> "YSeries":
        """Multiply by ``coeff * y^shift`` (shift may be negative)."""
        dom = self.ctx.domain
        c = dom.coerce(coeff)
        ds = sum(shift)
        out = {
            tuple(x + s for x, s in zip(e, shift)): v * c
            for e, v in self.terms.items()
        }
        prec = None if self.prec is None else self.prec + ds
        return self._capped(out, prec)

    # -- truncation / parts ---------------------------------------------------

    def truncated(self, k: int) -> "YSeries":
        """Drop all terms of total degree >= k (reduction mod the ideal^k)."""
        terms = {e: c for e, c in self.terms.items() if sum(e) < k}
        prec = k - 1 if self.prec is None else min(self.prec, k - 1)
        return self._capped(terms, prec)

    def with_prec(self, prec: Optional[int]) -> "YSeries":
        if prec is not None:
            if self.prec is not None and prec > self.prec:
                raise ConfigurationError("cannot raise precision after the fact")
            return self._capped(dict(self.terms), prec)
        return YSeries(self.ctx, dict(self.terms), None)

    def leading_part(self) -> "YSeries":
        """The homogeneous part of minimal total degree."""
        v = self.valuation()
        if v is None:
            return self.ctx.zero()
        return YSeries(
            self.ctx, {e: c for e, c in self.terms.items() if sum(e) == v}, self.prec
        )

    def coefficient(self, exponents: tuple[int, ...]):
        return self.terms.get(tuple(exponents), self.ctx.domain.zero)

    # -- inversion -------------------------------------------------------------

    def invert(self, target: Optional[int] = None) -> "YSeries":
        """Multiplicative inverse up to ``target`` (default: context trunc).

        Requires the minimal-total-degree part to be a single monomial with
        an invertible coefficient; Laurent inverses shift the valuation to
        its negative.
        """
        ctx = self.ctx
        dom = ctx.domain
        if not self.terms:
            raise NotInvertibleError("cannot invert the zero series")
        v = self.valuation()
        lead = [(e, c) for e, c in self.terms.items() if sum(e) == v]
        if len(lead) != 1:
            raise NotInvertibleError(
                "leading part is not a single monomial "
                f"({len(lead)} terms at total degree {v})"
            )
        (e0, c0) = lead[0]
        if target is None:
            target = ctx.trunc
        cinv = dom.invert(c0)
        if -v < -ctx.vcap:
            raise ValuationError("inverse valuation below the configured floor")
        # normalize to a unit b = 1 + r with val(r) >= 1, working past the
        # context truncation because the final shift by y^{-e0} lowers degrees
        work = target + max(v, 0)
        zero_e = (0,) * ctx.genus
        r: dict[tuple[int, ...], object] = {}
        for e, c in self.terms.items():
            ee = tuple(x - y for x, y in zip(e, e0))
            if 0 < sum(ee) <= work:
                r[ee] = c * cinv
        s: dict[tuple[int, ...], object] = {zero_e: dom.one}
        for _ in range(work):
            if not r:
                break
            rs = _raw_mul(dom, r, s, work)
            s = {e: -c for e, c in rs.items()}
            s[zero_e] = s.get(zero_e, dom.zero) + dom.one
            if dom.is_zero(s[zero_e]):
                del s[zero_e]
        out = {
            tuple(x - y for x, y in zip(e, e0)): c * cinv for e, c in s.items()
        }
        # precision: exact input gives `target`; inexact input loses 2*val
        if self.prec is None:
            prec = target
        else:
            prec = min(target, self.prec - 2 * v)
        return self._capped(out, prec)

    # -- comparison / canonical text -------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, YSeries):
            return NotImplemented
        if self.ctx is not other.ctx and self.ctx.genus != other.ctx.genus:
            return False
        if set(self.terms) != set(other.terms):
            return False
        return all(self.terms[e] == other.terms[e] for e in self.terms)

    def identical(self, other: "YSeries") -> bool:
        """Equality including precision metadata (serialization round trips)."""
        return self == other and self.prec == other.prec

    def sorted_terms(self):
        """Terms in graded-lexicographic order of the y-exponents."""
        return sorted(self.terms.items(), key=lambda ec: (sum(ec[0]), ec[0]))

    def serialize(self) -> str:
        dom = self.ctx.domain
        lines = [
            "mumford-series v1",
            f"genus {self.ctx.genus}",
            "xvars " + (",".join(dom.variables) if dom.variables else "-"),
            f"trunc {self.ctx.trunc}",
            f"vfloor {-self.ctx.vcap}",
            f"prec {'inf' if self.prec is None else self.prec}",
            f"nterms {len(self.terms)}",
        ]
        for e, c in self.sorted_terms():
            exp = " ".join(str(x) for x in e)
            lines.append(f"y {exp} : {dom.coeff_str(dom.canonical(c))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "YSeries":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        try:
            if lines[0] != "mumford-series v1":
                raise SeriesParseError(f"unknown format header {lines[0]!r}")
            genus = int(lines[1].split()[1])
            xvars_field = lines[2].split(None, 1)[1]
            xvars = () if xvars_field == "-" else tuple(xvars_field.split(","))
            trunc = int(lines[3].split()[1])
            vfloor = int(lines[4].split()[1])
            prec_s = lines[5].split()[1]
            prec = None if prec_s == "inf" else int(prec_s)
            nterms = int(lines[6].split()[1])
        except (IndexError, ValueError) as exc:
            raise SeriesParseError(f"malformed series header: {exc}") from exc
        domain: Domain
        if xvars:
            domain = FieldDomain(CoefficientField(xvars))
        else:
            domain = RationalDomain()
        ctx = SeriesContext(genus, trunc, domain, vcap=-vfloor)
        terms: dict[tuple[int, ...], object] = {}
        body = lines[7:]
        if len(body) != nterms:
            raise SeriesParseError(
                f"expected {nterms} terms, found {len(body)}"
            )
        for ln in body:
            try:
                head, coeff_s = ln.split(" : ", 1)
                parts = head.split()
                if parts[0] != "y" or len(parts) != genus + 1:
                    raise SeriesParseError(f"bad term line {ln!r}")
                e = tuple(int(x) for x in parts[1:])
            except (IndexError, ValueError) as exc:
                raise SeriesParseError(f"bad term line {ln!r}") from exc
            c = domain.parse_coeff(coeff_s)
            if domain.is_zero(c):
                raise SeriesParseError("zero coefficient stored in series file")
            if e in terms:
                raise SeriesParseError("duplicate exponent in series file")
            terms[e] = c
        return cls(ctx, terms, prec)

    def __repr__(self):
        n = len(self.terms)
        v = self.valuation()
        return f"<series genus={self.ctx.genus} terms={n} val={v} prec={self.prec}>"


# ---------------------------------------------------------------------------
# substitution
# ---------------------------------------------------------------------------


class SubstitutionMap:
    """Assignments for the x- and y-variables.

    ``x_values`` may assign exact numbers (int/Fraction), complex numbers,
    or coefficients of another field; one variable may instead be sent to
    the point at infinity (``infinity_x``), realized as the symbolic limit.
    ``y_values`` may assign numbers or series.
    """

    def __init__(
        self,
        x_values: Optional[Mapping[str, object]] = None,
        y_values: Optional[Mapping[str, object]] = None,
        infinity_x: Optional[str] = None,
    ):
        self.x_values = dict(x_values or {})
        self.y_values = dict(y_values or {})
        self.infinity_x = infinity_x

    @classmethod
    def normalization_preset(cls, extra_x: Optional[Mapping[str, object]] = None,
                             y_values: Optional[Mapping[str, object]] = None
                             ) -> "SubstitutionMap":
        """x1 -> 0, x2 -> 1 and x_{-1} -> the point at infinity."""
        xv = {"x1": 0, "x2": 1}
        if extra_x:
            xv.update(extra_x)
        return cls(x_values=xv, y_values=y_values, infinity_x="xm1")

    def __repr__(self):
        return (
            f"SubstitutionMap(x={self.x_values!r}, y={self.y_values!r}, "
            f"inf={self.infinity_x!r})"
        )


def _poly_limit_coeff(poly: IntegerPolynomial, var: str, degree: int,
                      target_ring: PolynomialRing, keep: list[str]
                      ) -> IntegerPolynomial:
    """Coefficient of var^degree in poly, re-expressed in target_ring."""
    ring = poly.ring
    idx = ring._index[var]
    s = ring._shifts[idx]
    out: dict[tuple[int, ...], int] = {}
    for k, c in poly.terms.items():
        if ((k >> s) & _EXP_MASK) != degree:
            continue
        exps = ring.unpack(k)
        reduced = tuple(exps[ring._index[v]] for v in keep)
        out[reduced] = out.get(reduced, 0) + c
    return IntegerPolynomial.from_exponent_terms(
        target_ring, {e: c for e, c in out.items() if c}
    )


def _coeff_substitute(coeff: RationalCoefficient, sub: SubstitutionMap,
                      target_domain: Domain):
    """Substitute x-values (and the infinity limit) into one coefficient."""
    field = coeff.field
    ring = field.ring
    num = coeff.num
    den = coeff.denominator_expanded()

    if sub.infinity_x is not None and sub.infinity_x in ring._index:
        var = sub.infinity_x
        keep = [v for v in ring.variables if v != var]
        target_ring = PolynomialRing(tuple(keep))
        dn = num.degree_in(var)
        dd = den.degree_in(var)
        if dn > dd:
            raise SpecializationError(
                f"limit {var} -> infinity diverges (degree {dn} over {dd})"
            )
        if dn < dd or num.is_zero():
            num = IntegerPolynomial(target_ring, {})
            den = _poly_limit_coeff(den, var, dd, target_ring, keep)
            if den.is_zero():
                raise SpecializationError("indeterminate limit at infinity")
        else:
            num = _poly_limit_coeff(num, var, dn, target_ring, keep)
            den = _poly_limit_coeff(den, var, dd, target_ring, keep)
        ring = target_ring

    remaining = [v for v in ring.variables if v not in sub.x_values]
    values = {v: sub.x_values[v] for v in ring.variables if v in sub.x_values}

    if not remaining:
        if any(isinstance(v, complex) for v in values.values()):
            nv = num.evaluate(values) if not num.is_zero() else 0.0
            dv = den.evaluate(values)
            if dv == 0:
                raise SpecializationError("denominator vanishes at substitution")
            return complex(nv) / complex(dv)
        vals = {k: Fraction(v) for k, v in values.items()}
        nv = Fraction(num.evaluate(vals)) if not num.is_zero() else Fraction(0)
        dv = Fraction(den.evaluate(vals))
        if dv == 0:
            raise SpecializationError("denominator vanishes at substitution")
        return nv / dv

    # partial substitution into a smaller function field
    if not isinstance(target_domain, FieldDomain):
        raise ConfigurationError("partial x-substitution needs a field target")
    tf = target_domain.field

    def push(poly: IntegerPolynomial):
        out = tf.zero
        for k, c in poly.terms.items():
            exps = poly.ring.unpack(k) if poly.terms else ()
            term = tf.from_int(c)
            for name, e in zip(poly.ring.variables, exps):
                if not e:
                    continue
                if name in values:
                    val = values[name]
                    if isinstance(val, complex):
                        raise ConfigurationError(
                            "complex x-values require a full substitution"
                        )
                    base = tf.from_fraction(Fraction(val))
                else:
                    base = tf.variable(name)
                for _ in range(e):
                    term = term * base
            out = out + term
        return out

    nv = push(num)
    dv = push(den)
    if dv.is_zero():
        raise SpecializationError("denominator vanishes at substitution")
    return nv * dv.invert()


def substitute(series: YSeries, sub: SubstitutionMap):
    """Apply a substitution map; a full numeric assignment yields a number.

    The map must cover whatever it touches: y-variables it does not mention
    are kept symbolic, which requires the x-substitution to leave a valid
    coefficient domain for them.
    """
    ctx = series.ctx
    dom = ctx.domain
    g = ctx.genus

    # Stage 1: substitute the x-variables coefficientwise.
    if isinstance(dom, FieldDomain) and (sub.x_values or sub.infinity_x):
        remaining = [
            v
            for v in dom.variables
            if v not in sub.x_values and v != sub.infinity_x
        ]
        has_complex = any(isinstance(v, complex) for v in sub.x_values.values())
        target_domain: Domain
        if remaining:
            target_domain = FieldDomain(CoefficientField(tuple(remaining)))
        elif has_complex:
            target_domain = ComplexDomain()
        else:
            target_domain = RationalDomain()
        new_ctx = SeriesContext(g, ctx.trunc, target_domain, vcap=ctx.vcap)
        new_terms: dict[tuple[int, ...], object] = {}
        for e, c in series.terms.items():
            v = _coeff_substitute(c, sub, target_domain)
            if isinstance(target_domain, ComplexDomain):
                v = complex(v)
            elif isinstance(target_domain, RationalDomain):
                v = Fraction(v)
            if not target_domain.is_zero(v):
                new_terms[e] = v
        series = YSeries(new_ctx, new_terms, series.prec)
        ctx, dom = new_ctx, target_domain

    if not sub.y_values:
        return series

    # Stage 2: substitute the y-variables.
    named = {f"y{i}": i - 1 for i in range(1, g + 1)}
    unknown = set(sub.y_values) - set(named)
    if unknown:
        raise ConfigurationError(f"unknown y-variables {sorted(unknown)}")

    full = all(f"y{i}" in sub.y_values for i in range(1, g + 1))
    numeric = full and all(
        isinstance(v, (int, float, complex, Fraction))
        for v in sub.y_values.values()
    )
    if numeric:
        vals = [sub.y_values[f"y{i}"] for i in range(1, g + 1)]
        exactish = all(isinstance(v, (int, Fraction)) for v in vals) and dom.exact
        total = Fraction(0) if exactish else 0j
        for e, c in series.terms.items():
            if isinstance(dom, FieldDomain):
                raise ConfigurationError(
                    "numeric y-substitution requires numeric x-substitution"
                )
            term = c if exactish else complex(c)
            for v, ee in zip(vals, e):
                if ee:
                    if v == 0:
                        if ee < 0:
                            raise SpecializationError("0 raised to negative power")
                        term = 0 if exactish else 0j
                        break
                    term = term * (Fraction(v) if exactish else complex(v)) ** ee
            total = total + term
        return total

    # series-valued (or partial) substitution: build by composition
    result = ctx.zero()
    for e, c in series.terms.items():
        term = ctx.constant(c)
        for i, ee in enumerate(e):
            if not ee:
                continue
            name = f"y{i+1}"
            if name in sub.y_values:
                val = sub.y_values[name]
                base = val if isinstance(val, YSeries) else ctx.constant(val)
            else:
                base = ctx.y(i + 1)
            term = term * (base ** ee)
        result = result + term
    return result


# ---------------------------------------------------------------------------
# content and primitivity
# ---------------------------------------------------------------------------


class PrimitivityReport:
    """Content of the minimal-degree part and its mod-p vanishing pattern."""

    def __init__(self, valuation: int, content: int,
                 primitive_at: dict[int, bool]):
        self.valuation = valuation
        self.content = content
        self.primitive_at = primitive_at

    def __repr__(self):
        flags = ", ".join(
            f"p={p}: {'primitive' if ok else 'VANISHES'}"
            for p, ok in sorted(self.primitive_at.items())
        )
        return (
            f"<primitivity val={self.valuation} content={self.content} {flags}>"
        )


def integer_content_and_primitivity(series: YSeries,
                                    primes: Iterable[int]) -> PrimitivityReport:
    """Examine the minimal-degree part over a common denominator.

    Reports the gcd of the integer coefficients of the joint numerator and,
    per listed prime, whether the part survives reduction mod p.  Valid for
    exact coefficient domains only.
    """
    if series.is_zero():
        raise ValueError("primitivity of the zero series is undefined")
    dom = series.ctx.domain
    if not dom.exact:
        raise ConfigurationError("primitivity needs exact coefficients")
    part = series.leading_part()
    coeffs = [dom.canonical(c) for _, c in part.sorted_terms()]
    ints: list[int] = []
    if isinstance(dom, RationalDomain):
        lcm = 1
        for c in coeffs:
            lcm = lcm * c.denominator // math.gcd(lcm, c.denominator)
        ints = [int(c * lcm) for c in coeffs]
    else:
        # common denominator: lcm of contents times max atom powers
        lcm = 1
        factors: dict[IntegerPolynomial, int] = {}
        for c in coeffs:
            lcm = lcm * c.den_content // math.gcd(lcm, c.den_content)
            for atom, power in c.den_factors.items():
                if factors.get(atom, 0) < power:
                    factors[atom] = power
        for c in coeffs:
            num = c._scaled_num(factors, lcm)
            ints.extend(num.terms.values())
    content = 0
    for v in ints:
        content = math.gcd(content, v)
        if content == 1:
            break
    primitive_at = {int(p): any(v % p for v in ints) for p in primes}
    return PrimitivityReport(part.valuation() or 0, content, primitive_at)


def _permute_polynomial(poly: IntegerPolynomial, index_map: Sequence[int]
                        ) -> IntegerPolynomial:
    ring = poly.ring
    out: dict[int, int] = {}
    unpack, pack = ring.unpack, ring.pack
    nv = ring.nvars
    for k, c in poly.terms.items():
        exps = unpack(k)
        new = [0] * nv
        for i, e in enumerate(exps):
            new[index_map[i]] = e
        out[pack(new)] = c
    return IntegerPolynomial(ring, out)


def permute_generator_indices(series: YSeries, sigma: Mapping[int, int]
                              ) -> YSeries:
    """Relabel generators by the permutation sigma of {1..g}.

    Sends y_i to y_{sigma(i)} and the fixed-point variables x_{±i} to
    x_{±sigma(i)}.  Only meaningful over the full (non-normalized) field,
    where the variable set is permutation-stable.
    """
    ctx = series.ctx
    g = ctx.genus
    if sorted(sigma) != list(range(1, g + 1)) or sorted(
        sigma.values()
    ) != list(range(1, g + 1)):
        raise ConfigurationError("sigma must permute {1..g}")
    dom = ctx.domain
    if not isinstance(dom, FieldDomain):
        if all(sigma[i] == i for i in sigma):
            return series
        raise ConfigurationError(
            "generator relabeling needs the full symbolic field"
        )
    ring = dom.field.ring
    index_map = [0] * ring.nvars
    for i in range(1, g + 1):
        for name, target in ((f"x{i}", f"x{sigma[i]}"),
                             (f"xm{i}", f"xm{sigma[i]}")):
            if name in ring._index:
                if target not in ring._index:
                    raise ConfigurationError(
                        "generator relabeling needs the full symbolic field"
                    )
                index_map[ring._index[name]] = ring._index[target]

    def permute_coeff(c: RationalCoefficient) -> RationalCoefficient:
        num = _permute_polynomial(c.num, index_map)
        factors: dict[IntegerPolynomial, int] = {}
        flip = False
        for atom, power in c.den_factors.items():
            a2 = _permute_polynomial(atom, index_map)
            if a2.leading_coefficient() < 0:
                a2 = -a2
                if power % 2:
                    flip = not flip
            factors[a2] = factors.get(a2, 0) + power
        if flip:
            num = -num
        return RationalCoefficient(dom.field, num, c.den_content, factors)

    terms: dict[tuple[int, ...], object] = {}
    for e, c in series.terms.items():
        new_e = [0] * g
        for i, exp in enumerate(e):
            new_e[sigma[i + 1] - 1] = exp
        terms[tuple(new_e)] = permute_coeff(c)
    return YSeries(ctx, terms, series.prec)


def coefficient_sum(field: CoefficientField, coeffs: Sequence[RationalCoefficient]):
    """Sum many coefficients over one common denominator (single rescale).

    Equivalent to repeated addition but avoids re-scaling the accumulator
    at every step, which is quadratic in the numerator size.
    """
    coeffs = [c for c in coeffs if not c.is_zero()]
    if not coeffs:
        return field.zero
    if len(coeffs) == 1:
        return coeffs[0]
    content = 1
    factors: dict[IntegerPolynomial, int] = {}
    for c in coeffs:
        content = content * c.den_content // math.gcd(content, c.den_content)
        for atom, power in c.den_factors.items():
            if factors.get(atom, 0) < power:
                factors[atom] = power
    total = IntegerPolynomial(field.ring, {})
    for c in coeffs:
        total = total + c._scaled_num(factors, content)
    return RationalCoefficient(field, total, content, factors)._light_reduce()


def series_sum(ctx: SeriesContext, parts: Sequence[YSeries]) -> YSeries:
    """Sum many series with one common-denominator pass per monomial."""
    parts = [p for p in parts if not p.is_zero()]
    if not parts:
        return ctx.zero()
    prec: Optional[int] = None
    for p in parts:
        if p.ctx is not ctx and not p.ctx.compatible(ctx):
            raise ConfigurationError("series from incompatible contexts")
        prec = _min_prec(prec, p.prec)
    dom = ctx.domain
    buckets: dict[tuple[int, ...], list] = {}
    for p in parts:
        for e, c in p.terms.items():
            if prec is not None and sum(e) > prec:
                continue
            buckets.setdefault(e, []).append(c)
    terms: dict[tuple[int, ...], object] = {}
    for e, cs in buckets.items():
        if isinstance(dom, FieldDomain):
            v = coefficient_sum(dom.field, cs)
        else:
            v = cs[0]
            for c in cs[1:]:
                v = v + c
        if not dom.is_zero(v):
            terms[e] = v
    out = YSeries(ctx, terms, prec)
    return out._capped(terms, prec)


# spec-facing operation aliases ------------------------------------------------

def series_add(a: YSeries, b: YSeries) -> YSeries:
    return a + b


def series_mul(a: YSeries, b: YSeries) -> YSeries:
    return a * b


def series_invert(a: YSeries, target: Optional[int] = None) -> YSeries:
    return a.invert(target)


def leading_part_mod_ideal(a: YSeries, k: int) -> YSeries:
    """Discard every term of total degree >= k (reduction mod ideal^k)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return a.truncated(k)
