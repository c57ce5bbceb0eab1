"""Free-group combinatorics and Moebius-matrix algebra.

Words are tuples of signed generator indices in ``{±1..±g}``; the letter
``-i`` is the inverse of ``i``.  The symbolic presentation realizes the
generator with attracting fixed point ``x_i``, repelling fixed point
``x_{-i}`` and multiplier exactly ``y_i``:

    phi_i = [[x_i - x_{-i} y_i,  x_i x_{-i} (y_i - 1)],
             [1 - y_i,           x_i y_i - x_{-i}   ]]

(projectively; the determinant is ``y_i (x_i - x_{-i})^2``).  Under the
normalization ``x_1 = 0, x_{-1} = infinity, x_2 = 1`` the first generator
degenerates to ``diag(y_1, 1)``.

Points are handled projectively as ``(numerator, denominator)`` pairs so
the point at infinity needs no special cases in the hot paths.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field as dataclass_field
from fractions import Fraction
from typing import Iterator, Optional, Sequence, Union

from .rings import (
    CoefficientField,
    ConfigurationError,
    FieldDomain,
    RationalDomain,
    SeriesContext,
    SpecializationError,
    YSeries,
)

Word = tuple[int, ...]

IDENTITY: Word = ()


class DegenerateElementError(ArithmeticError):
    """Multiplier requested for a parabolic or identity element."""


# ---------------------------------------------------------------------------
# reduced words and conjugacy classes
# ---------------------------------------------------------------------------


def _check_letters(letters: Sequence[int], genus: int) -> None:
    for l in letters:
        if l == 0 or abs(l) > genus:
            raise ValueError(f"letter {l} out of range for genus {genus}")


def reduce_word(letters: Sequence[int], genus: int) -> Word:
    """Fully cancel adjacent inverse pairs; idempotent."""
    _check_letters(letters, genus)
    stack: list[int] = []
    for l in letters:
        if stack and stack[-1] == -l:
            stack.pop()
        else:
            stack.append(l)
    return tuple(stack)


def word_inverse(word: Word) -> Word:
    return tuple(-l for l in reversed(word))


def is_cyclically_reduced(word: Word) -> bool:
    if not word:
        return True
    if any(a == -b for a, b in zip(word, word[1:])):
        return False
    return word[0] != -word[-1]


def cyclic_reduction(word: Word) -> Word:
    """Strip cancelling conjugation from both ends of a reduced word."""
    w = list(word)
    while len(w) >= 2 and w[0] == -w[-1]:
        w = w[1:-1]
    return tuple(w)


def _letter_key(l: int) -> tuple[int, int]:
    return (abs(l), 0 if l > 0 else 1)


def _word_key(word: Word) -> tuple:
    return tuple(_letter_key(l) for l in word)


def letters(genus: int) -> list[int]:
    """All signed generator indices in canonical order 1, -1, 2, -2, ..."""
    out = []
    for i in range(1, genus + 1):
        out.extend((i, -i))
    return out


def enumerate_reduced_words(genus: int, max_len: int) -> Iterator[Word]:
    """All reduced words of length <= max_len, shortest first, each once."""
    if max_len < 0:
        raise ValueError("max_len must be >= 0")
    alphabet = letters(genus)
    layer: list[Word] = [IDENTITY]
    yield IDENTITY
    for _ in range(max_len):
        nxt: list[Word] = []
        for w in layer:
            last = w[-1] if w else 0
            for l in alphabet:
                if l != -last or not w:
                    nw = w + (l,)
                    nxt.append(nw)
                    yield nw
        layer = nxt


def enumerate_coset_reps(genus: int, i: int, max_len: int) -> Iterator[Word]:
    """Reduced words of length <= max_len whose last letter is not ±i.

    These represent the cosets of the cyclic subgroup generated by the
    i-th generator, identity included.
    """
    if not 1 <= i <= genus:
        raise ValueError(f"generator index {i} out of range")
    for w in enumerate_reduced_words(genus, max_len):
        if not w or abs(w[-1]) != i:
            yield w


def rotations(word: Word) -> list[Word]:
    return [word[k:] + word[:k] for k in range(len(word))]


def is_primitive(word: Word) -> bool:
    """True unless the cyclically reduced word is a proper power."""
    n = len(word)
    for d in range(1, n):
        if n % d == 0 and word == word[d:] + word[:d]:
            return False
    return True


def canonical_class_word(word: Word, identify_inverses: bool = False) -> Word:
    """Lexicographically minimal rotation (optionally also of the inverse)."""
    if not is_cyclically_reduced(word):
        word = cyclic_reduction(word)
    candidates = rotations(word)
    if identify_inverses:
        candidates += rotations(word_inverse(word))
    return min(candidates, key=_word_key)


@dataclass(frozen=True)
class PrimitiveClass:
    """A primitive conjugacy class, named by its canonical representative."""

    word: Word
    length: int

    def multiplier(self, workspace):
        return workspace.multiplier(self.word)


def enumerate_primitive_classes(
    genus: int, max_len: int, identify_inverses: bool = False
) -> Iterator[PrimitiveClass]:
    """One canonical representative per primitive conjugacy class.

    Classes are keyed by cyclically reduced words up to rotation; with
    ``identify_inverses`` a class and its inverse class are merged.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    seen: set[Word] = set()
    for w in enumerate_reduced_words(genus, max_len):
        if not w or not is_cyclically_reduced(w) or not is_primitive(w):
            continue
        cw = canonical_class_word(w, identify_inverses)
        if cw in seen:
            continue
        seen.add(cw)
        yield PrimitiveClass(cw, len(cw))


# ---------------------------------------------------------------------------
# Moebius maps over a generic coefficient type
# ---------------------------------------------------------------------------


class MoebiusMap:
    """A 2x2 matrix acting projectively; entries are YSeries or complex."""

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a, b, c, d):
        self.a, self.b, self.c, self.d = a, b, c, d

    def compose(self, other: "MoebiusMap") -> "MoebiusMap":
        return MoebiusMap(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def adjugate(self) -> "MoebiusMap":
        """The projective inverse (no division needed)."""
        return MoebiusMap(self.d, -self.b, -self.c, self.a)

    def det(self):
        return self.a * self.d - self.b * self.c

    def trace(self):
        return self.a + self.d

    def apply_pair(self, pair):
        n, d = pair
        return (self.a * n + self.b * d, self.c * n + self.d * d)

    def __repr__(self):
        return f"MoebiusMap({self.a!r}, {self.b!r}, {self.c!r}, {self.d!r})"


def apply_moebius(m: MoebiusMap, point):
    """Apply to an affine point (YSeries, number, or None for infinity)."""
    if isinstance(point, YSeries):
        n, d = m.apply_pair((point, point.ctx.one()))
        return n * d.invert()
    if point is None:  # the point at infinity
        n, d = m.a, m.c
    else:
        n = m.a * point + m.b
        d = m.c * point + m.d
    if isinstance(n, YSeries) or isinstance(d, YSeries):
        return n * d.invert()
    if d == 0:
        return None
    return n / d


# ---------------------------------------------------------------------------
# symbolic presentation
# ---------------------------------------------------------------------------


class SymbolicSchottkyPresentation:
    """The universal marked rank-g presentation over the deformation ring.

    ``normalized=True`` pins ``x_1 = 0, x_{-1} = infinity, x_2 = 1`` and
    works over the smaller coefficient field; otherwise all ``2g``
    fixed-point symbols stay free.
    """

    def __init__(self, genus: int, normalized: bool = True):
        if genus < 1:
            raise ConfigurationError("genus must be >= 1")
        self.genus = genus
        self.normalized = normalized
        names: list[str] = []
        if normalized:
            if genus >= 2:
                names.append("xm2")
            for i in range(3, genus + 1):
                names.extend((f"x{i}", f"xm{i}"))
        else:
            for i in range(1, genus + 1):
                names.extend((f"x{i}", f"xm{i}"))
        self.x_names = tuple(names)
        if names:
            self.domain = FieldDomain(CoefficientField(self.x_names))
        else:
            self.domain = RationalDomain()

    def x_variable_name(self, t: int) -> str:
        return f"x{t}" if t > 0 else f"xm{-t}"

    def x_value(self, t: int):
        """The coefficient value of the fixed point x_t, or None for infinity."""
        if self.normalized:
            if t == 1:
                return 0
            if t == -1:
                return None
            if t == 2:
                return 1
        name = self.x_variable_name(t)
        return self.domain.field.variable(name)

    def workspace(self, trunc: int, vcap: Optional[int] = None) -> "SchottkyWorkspace":
        return SchottkyWorkspace(self, trunc, vcap)

    def __repr__(self):
        kind = "normalized" if self.normalized else "general"
        return f"SymbolicSchottkyPresentation(genus={self.genus}, {kind})"


class SchottkyWorkspace:
    """A presentation materialized at a fixed working truncation.

    Caches generator and word matrices (exact polynomial entries),
    projective images of the fixed points, and word multipliers.
    """

    def __init__(self, pres: SymbolicSchottkyPresentation, trunc: int,
                 vcap: Optional[int] = None):
        self.pres = pres
        self.genus = pres.genus
        self.ctx = SeriesContext(pres.genus, trunc, pres.domain, vcap=vcap)
        self._gen: dict[int, MoebiusMap] = {}
        self._words: dict[Word, MoebiusMap] = {IDENTITY: self._identity_matrix()}
        self._locations: dict[tuple[Word, int], tuple[YSeries, YSeries]] = {}
        self._multipliers: dict[Word, YSeries] = {}

    # -- base data -----------------------------------------------------------

    def _identity_matrix(self) -> MoebiusMap:
        one, zero = self.ctx.one(), self.ctx.zero()
        return MoebiusMap(one, zero, zero, one)

    def x_pair(self, t: int) -> tuple[YSeries, YSeries]:
        """The fixed point x_t as a projective pair of constant series."""
        v = self.pres.x_value(t)
        if v is None:
            return (self.ctx.one(), self.ctx.zero())
        return (self.ctx.constant(v), self.ctx.one())

    def x_coefficient(self, t: int):
        """The fixed point as a field element; infinity is an error."""
        v = self.pres.x_value(t)
        if v is None:
            raise SpecializationError("x_{-1} is the point at infinity here")
        return v

    def generator_matrix(self, letter: int) -> MoebiusMap:
        m = self._gen.get(letter)
        if m is not None:
            return m
        i = abs(letter)
        if not 1 <= i <= self.genus:
            raise ValueError(f"letter {letter} out of range")
        ctx = self.ctx
        y = ctx.y(i)
        one = ctx.one()
        xp = self.pres.x_value(i)
        xm = self.pres.x_value(-i)
        if xm is None:
            # attracting x_i finite, repelling at infinity: z -> x_i + y (z - x_i)
            xi = ctx.constant(xp)
            pos = MoebiusMap(y, xi * (one - y), ctx.zero(), one)
        elif xp is None:
            xr = ctx.constant(xm)
            pos = MoebiusMap(one, xr * (y - 1), ctx.zero(), y)
        else:
            xi, xr = ctx.constant(xp), ctx.constant(xm)
            pos = MoebiusMap(
                xi - xr * y,
                xi * xr * (y - 1),
                one - y,
                xi * y - xr,
            )
        self._gen[i] = pos
        self._gen[-i] = pos.adjugate()
        return self._gen[letter]

    def word_matrix(self, word: Word) -> MoebiusMap:
        m = self._words.get(word)
        if m is not None:
            return m
        prefix = self.word_matrix(word[:-1])
        m = prefix.compose(self.generator_matrix(word[-1]))
        self._words[word] = m
        return m

    def location(self, word: Word, base: int) -> tuple[YSeries, YSeries]:
        """Projective image of the fixed point x_base under the word."""
        key = (word, base)
        loc = self._locations.get(key)
        if loc is None:
            loc = self.word_matrix(word).apply_pair(self.x_pair(base))
            self._locations[key] = loc
        return loc

    # -- multipliers -----------------------------------------------------------

    def multiplier(self, word: Word) -> YSeries:
        """The multiplier series of a non-identity word.

        Computed from t = tr^2/det via the y-adically contracting iteration
        q <- (1 + q^2)/(t - 2); the root with positive valuation is the
        multiplier of the attracting fixed point.  Conjugation-invariant,
        so the input is cyclically reduced first.
        """
        w = cyclic_reduction(reduce_word(word, self.genus))
        if not w:
            raise DegenerateElementError("identity has no multiplier")
        cached = self._multipliers.get(w)
        if cached is not None:
            return cached
        ctx = self.ctx
        m = self.word_matrix(w)
        tr = m.trace()
        det = m.det()
        den = tr * tr - det * 2  # exact polynomial, unit constant term
        base = det * den.invert()  # = 1/(t - 2), valuation = len(w)
        one = ctx.one()
        q = ctx.zero()
        steps = math.ceil(ctx.trunc / len(w)) + 1
        for _ in range(steps):
            q = base * (one + q * q)
        v = q.valuation()
        if v is None:
            # a word longer than the truncation has multiplier 0 mod I^{N+1}
            if len(w) <= ctx.trunc:
                raise DegenerateElementError(
                    f"multiplier of {w} vanished below truncation {ctx.trunc}"
                )
        elif v < 1:
            raise DegenerateElementError(
                f"multiplier of {w} has no positive valuation"
            )
        self._multipliers[w] = q
        return q


# ---------------------------------------------------------------------------
# numeric groups
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Circle:
    """A circle |z - center| = radius; ``exterior`` marks the region
    containing infinity as the interior (used for the circle about the
    repelling point at infinity)."""

    center: complex
    radius: float
    exterior: bool = False

    def contains(self, z: Optional[complex]) -> bool:
        if z is None:
            return self.exterior
        inside = abs(z - self.center) < self.radius
        return inside != self.exterior

    def point(self, angle: float) -> complex:
        return self.center + self.radius * cmath.exp(1j * angle)


@dataclass(frozen=True)
class NumericGenerator:
    attracting: Optional[complex]   # None encodes infinity
    repelling: Optional[complex]
    multiplier: complex


def _pair_of(z: Optional[complex]) -> tuple[complex, complex]:
    return (1 + 0j, 0j) if z is None else (complex(z), 1 + 0j)


class NumericSchottkyGroup:
    """A concrete marked Schottky group given by fixed points and multipliers.

    Circles default to isometric circles of the generators (with a fallback
    construction when a generator fixes infinity); user circles override.
    """

    def __init__(
        self,
        generators: Sequence[NumericGenerator],
        circles: Optional[dict[int, Circle]] = None,
        max_multiplier: float = 1e-2,
    ):
        self.genus = len(generators)
        if self.genus < 1:
            raise ConfigurationError("need at least one generator")
        self.generators = list(generators)
        self.max_multiplier = float(max_multiplier)
        self._words: dict[Word, MoebiusMap] = {
            IDENTITY: MoebiusMap(1 + 0j, 0j, 0j, 1 + 0j)
        }
        self._gen: dict[int, MoebiusMap] = {}
        self.circles: dict[int, Circle] = dict(circles or {})
        for i in range(1, self.genus + 1):
            if i not in self.circles or -i not in self.circles:
                ci, cmi = self._default_circles(i)
                self.circles.setdefault(i, ci)
                self.circles.setdefault(-i, cmi)

    # -- policy ----------------------------------------------------------------

    def policy_violations(self) -> list[str]:
        out = []
        for i, gen in enumerate(self.generators, start=1):
            if abs(gen.multiplier) > self.max_multiplier:
                out.append(
                    f"|q_{i}| = {abs(gen.multiplier):.3g} exceeds the "
                    f"small-multiplier policy bound {self.max_multiplier:g}"
                )
            if gen.attracting == gen.repelling:
                out.append(f"generator {i} has collided fixed points")
        return out

    def require_policy(self) -> None:
        problems = self.policy_violations()
        if problems:
            raise SpecializationError("; ".join(problems))

    # -- matrices ----------------------------------------------------------------

    def x_value(self, t: int) -> Optional[complex]:
        gen = self.generators[abs(t) - 1]
        return gen.attracting if t > 0 else gen.repelling

    def x_pair(self, t: int) -> tuple[complex, complex]:
        return _pair_of(self.x_value(t))

    def generator_matrix(self, letter: int) -> MoebiusMap:
        m = self._gen.get(letter)
        if m is not None:
            return m
        i = abs(letter)
        gen = self.generators[i - 1]
        a, b, q = gen.attracting, gen.repelling, gen.multiplier
        if b is None:
            pos = MoebiusMap(q, a * (1 - q), 0j, 1 + 0j)
        elif a is None:
            pos = MoebiusMap(1 + 0j, b * (q - 1), 0j, q)
        else:
            pos = MoebiusMap(a - b * q, a * b * (q - 1), (1 + 0j) - q, a * q - b)
        self._gen[i] = pos
        self._gen[-i] = pos.adjugate()
        return self._gen[letter]

    def word_matrix(self, word: Word) -> MoebiusMap:
        m = self._words.get(word)
        if m is not None:
            return m
        m = self.word_matrix(word[:-1]).compose(self.generator_matrix(word[-1]))
        self._words[word] = m
        return m

    def location(self, word: Word, base: int) -> tuple[complex, complex]:
        return self.word_matrix(word).apply_pair(self.x_pair(base))

    def multiplier(self, word: Word) -> complex:
        """Eigenvalue-ratio multiplier with |q| < 1."""
        w = cyclic_reduction(reduce_word(word, self.genus))
        if not w:
            raise DegenerateElementError("identity has no multiplier")
        m = self.word_matrix(w)
        tr = m.trace()
        det = m.det()
        disc = tr * tr - 4 * det
        if abs(disc) <= 1e-14 * max(abs(tr * tr), abs(4 * det)):
            raise DegenerateElementError("parabolic element (tr^2 = 4 det)")
        root = cmath.sqrt(disc)
        lam1 = (tr + root) / 2
        lam2 = (tr - root) / 2
        if abs(lam1) < abs(lam2):
            lam1, lam2 = lam2, lam1
        return lam2 / lam1

    # -- circles -------------------------------------------------------------------

    def _other_fixed_points(self, i: int) -> list[complex]:
        pts = []
        for j, gen in enumerate(self.generators, start=1):
            if j == i:
                continue
            for p in (gen.attracting, gen.repelling):
                if p is not None:
                    pts.append(p)
        return pts

    def _default_circles(self, i: int) -> tuple[Circle, Circle]:
        gen = self.generators[i - 1]
        a, b, q = gen.attracting, gen.repelling, gen.multiplier
        sq = math.sqrt(abs(q))
        if sq == 0:
            raise ConfigurationError(f"generator {i} has zero multiplier")
        if a is not None and b is not None:
            m = self.generator_matrix(i)
            det = m.det()
            scale = cmath.sqrt(det)
            c = m.c / scale
            d = m.d / scale
            am = m.a / scale
            if abs(c) > 1e-12:
                r = 1.0 / abs(c)
                return (
                    Circle(am / c, r),          # isometric circle of the inverse
                    Circle(-d / c, r),          # isometric circle of the map
                )
            # nearly parallel fixed points; fall through to the radius rule
        anchor = a if a is not None else b
        others = self._other_fixed_points(i)
        if others:
            rho = min(abs(anchor - p) for p in others) / 2.0
        else:
            rho = 1.0
        if b is None:
            return (
                Circle(anchor, sq * rho),
                Circle(anchor, rho / sq, exterior=True),
            )
        if a is None:
            return (
                Circle(anchor, rho / sq, exterior=True),
                Circle(anchor, sq * rho),
            )
        # both finite with tiny |c|: treat like an affine map about a
        return (Circle(a, sq * rho), Circle(b, sq * rho))

    def validate_circles(self, tolerance: float = 1e-9) -> list[str]:
        """Check disjoint interiors and that each generator maps C_{-i} -> C_i."""
        problems: list[str] = []
        items = sorted(self.circles.items())
        ext = [t for t, c in items if c.exterior]
        if len(ext) > 1:
            problems.append(f"multiple circles contain infinity: {ext}")
        for k, (t1, c1) in enumerate(items):
            for t2, c2 in items[k + 1:]:
                sep = abs(c1.center - c2.center)
                if not c1.exterior and not c2.exterior:
                    ok = sep > c1.radius + c2.radius
                elif c1.exterior != c2.exterior:
                    inner, outer = (c2, c1) if c1.exterior else (c1, c2)
                    ok = sep + inner.radius < outer.radius
                else:
                    ok = False
                if not ok:
                    problems.append(f"circles {t1} and {t2} overlap")
        for i in range(1, self.genus + 1):
            src, dst = self.circles[-i], self.circles[i]
            m = self.generator_matrix(i)
            for angle in (0.1, 2.2, 4.4):
                z = src.point(angle)
                n, d = m.apply_pair((z, 1 + 0j))
                if abs(d) < 1e-300:
                    problems.append(f"generator {i} sends circle point to infinity")
                    continue
                w = n / d
                if abs(abs(w - dst.center) - dst.radius) > max(
                    tolerance, 1e-9 * dst.radius + tolerance * abs(w)
                ):
                    problems.append(
                        f"generator {i} does not map circle {-i} onto circle {i}"
                    )
                    break
        for t, c in items:
            x = self.x_value(t if abs(t) <= self.genus else t)
            if not c.contains(x):
                problems.append(f"fixed point x_{t} not inside circle {t}")
        return problems

    # -- serialization ------------------------------------------------------------

    def serialize(self) -> str:
        lines = ["schottky-group v1", f"genus {self.genus}"]
        for i, gen in enumerate(self.generators, start=1):
            lines.append(f"generator {i}")
            for tag, z in (("a", gen.attracting), ("b", gen.repelling),
                           ("q", gen.multiplier)):
                if z is None:
                    lines.append(f"{tag} inf")
                else:
                    z = complex(z)
                    lines.append(f"{tag} [{z.real!r}, {z.imag!r}]")
        for t in sorted(self.circles):
            c = self.circles[t]
            suffix = " exterior" if c.exterior else ""
            lines.append(
                f"circle {t} [{c.center.real!r}, {c.center.imag!r}] "
                f"{c.radius!r}{suffix}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str, max_multiplier: float = 1e-2
              ) -> "NumericSchottkyGroup":
        def parse_point(tok: str) -> Optional[complex]:
            tok = tok.strip()
            if tok == "inf":
                return None
            if not (tok.startswith("[") and tok.endswith("]")):
                raise ConfigurationError(f"bad point {tok!r}")
            re_s, im_s = tok[1:-1].split(",")
            return complex(float(re_s), float(im_s))

        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != "schottky-group v1":
            raise ConfigurationError("not a schottky-group v1 file")
        try:
            genus = int(lines[1].split()[1])
        except (IndexError, ValueError) as exc:
            raise ConfigurationError("missing genus line") from exc
        gens: dict[int, dict[str, Optional[complex]]] = {}
        circles: dict[int, Circle] = {}
        current: Optional[int] = None
        for ln in lines[2:]:
            parts = ln.split(None, 1)
            head = parts[0]
            if head == "generator":
                current = int(parts[1])
                gens[current] = {}
            elif head in ("a", "b", "q"):
                if current is None:
                    raise ConfigurationError("field outside a generator block")
                gens[current][head] = parse_point(parts[1])
            elif head == "circle":
                toks = parts[1].split("]")
                idx = int(toks[0].split("[")[0])
                point = parse_point(toks[0][len(str(idx)):].strip() + "]")
                rest = toks[1].strip().split()
                radius = float(rest[0])
                exterior = len(rest) > 1 and rest[1] == "exterior"
                circles[idx] = Circle(point, radius, exterior)
            else:
                raise ConfigurationError(f"unrecognized line {ln!r}")
        generators = []
        for i in range(1, genus + 1):
            if i not in gens:
                raise ConfigurationError(f"generator {i} missing")
            g = gens[i]
            if "q" not in g or g["q"] is None:
                raise ConfigurationError(f"generator {i} lacks a multiplier")
            generators.append(
                NumericGenerator(g.get("a"), g.get("b"), g["q"])
            )
        return cls(generators, circles or None, max_multiplier=max_multiplier)
