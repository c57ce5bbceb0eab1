"""Universal abelian differentials, the residue pairing, and its matrix.

A differential is held purely as a list of simple poles: one ``+1/-1``
residue pair per coset representative, located at the images of the two
fixed points.  No expansion in the curve coordinate is ever materialized;
evaluating "the rest of the product at a pole" walks the pole list.

Everything is evaluated projectively from exact polynomial data.  The
difference of two Moebius images factors exactly,

    loc_s - loc_t = cross(s, t) / (den_s den_t),
    cross(s, t) = num_s den_t - num_t den_s,

so every division in the pairing is the inversion of an exact polynomial
and the working truncation loses no precision.  Sums over the poles of a
differential are grouped by representative pair,

    1/(z - loc_+) - 1/(z - loc_-) = Q^2 D / (cross(z,+) cross(z,-)),
    D = num_+ den_- - num_- den_+,

which keeps the low-order cancellations exact and the coefficients small
(D is divisible by the product of the y's along the word).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .rings import (SeriesContext, YSeries,
                    permute_generator_indices, series_sum)
from .schottky import (
    IDENTITY,
    SchottkyWorkspace,
    SymbolicSchottkyPresentation,
    Word,
    enumerate_coset_reps,
)


class PipelineInconsistencyError(ArithmeticError):
    """A pairing fell outside the deformation ring or lost precision."""


class PoleCollisionError(ArithmeticError):
    """Two poles with distinct base data landed on the same location."""


@dataclass(frozen=True)
class ZetaCocycle:
    """The test map sending the l-th generator to ``delta_{il} (z-x_i)^j``."""

    circle: int
    power: int

    def __post_init__(self):
        if self.circle < 1:
            raise ValueError("circle index must be >= 1")
        if not 0 <= self.power <= 2:
            raise ValueError("power must be 0, 1 or 2 for quadratic forms")

    def label(self) -> str:
        return f"zeta[{self.circle},{self.power}]"


class PoleDatum:
    """One simple pole of a truncated differential."""

    __slots__ = ("word", "base", "residue", "location")

    def __init__(self, word: Word, base: int, residue: int,
                 location: tuple[YSeries, YSeries]):
        self.word = word
        self.base = base
        self.residue = residue
        self.location = location  # projective (numerator, denominator)

    @property
    def key(self) -> tuple[Word, int]:
        return (self.word, self.base)

    def at_infinity(self) -> bool:
        return self.location[1].is_zero()

    def affine_location(self) -> Optional[YSeries]:
        """The location as a Laurent series, or None for infinity."""
        n, d = self.location
        if d.is_zero():
            return None
        return n * d.invert()

    def __repr__(self):
        return f"PoleDatum(word={self.word}, base={self.base}, res={self.residue:+d})"


def enclosing_circle(pole: PoleDatum) -> int:
    """Signed index of the circle whose interior holds the pole.

    Identity-representative poles sit in the circle of their own fixed
    point; any other pole sits in the circle of its word's first letter.
    Validated numerically by winding numbers in the numeric engine.
    """
    if pole.word:
        return pole.word[0]
    return pole.base


class RepPair:
    """The two poles contributed by one coset representative."""

    __slots__ = ("word", "pos", "neg", "dpoly")

    def __init__(self, word: Word, pos: PoleDatum, neg: PoleDatum,
                 dpoly: YSeries):
        self.word = word
        self.pos = pos
        self.neg = neg
        self.dpoly = dpoly  # num_+ den_- - num_- den_+ (exact polynomial)


class DifferentialForm:
    """A truncated normalized differential as a finite list of pole pairs."""

    def __init__(self, index: int, word_bound: int, pairs: list[RepPair]):
        self.index = index
        self.word_bound = word_bound
        self.pairs = pairs
        self.poles: list[PoleDatum] = []
        for p in pairs:
            self.poles.append(p.pos)
            self.poles.append(p.neg)

    def residue_sum(self) -> int:
        return sum(p.residue for p in self.poles)

    def __repr__(self):
        return (
            f"DifferentialForm(index={self.index}, "
            f"word_bound={self.word_bound}, poles={len(self.poles)})"
        )


def build_omega(wsp: SchottkyWorkspace, i: int, word_bound: int
                ) -> DifferentialForm:
    """The i-th differential truncated to coset words of bounded length."""
    pairs: list[RepPair] = []
    for w in enumerate_coset_reps(wsp.genus, i, word_bound):
        np_, dp = wsp.location(w, i)
        nn, dn = wsp.location(w, -i)
        pos = PoleDatum(w, i, +1, (np_, dp))
        neg = PoleDatum(w, -i, -1, (nn, dn))
        dpoly = np_ * dn - nn * dp
        pairs.append(RepPair(w, pos, neg, dpoly))
    return DifferentialForm(i, word_bound, pairs)


# ---------------------------------------------------------------------------
# the pairing workspace
# ---------------------------------------------------------------------------


class PairingWorkspace:
    """Caches for pairings of one presentation at fixed truncations.

    ``trunc`` is the series truncation; ``word_bound`` the coset length cut
    (a word of length l only contributes at total degree >= l, so
    word_bound = trunc suffices and is the default).
    """

    def __init__(self, pres: SymbolicSchottkyPresentation, trunc: int,
                 word_bound: Optional[int] = None):
        self.pres = pres
        self.trunc = trunc
        self.word_bound = trunc if word_bound is None else word_bound
        # Laurent intermediates reach valuation -(cluster depth); the word
        # bound is a safe cap for how deep differences can collide.
        self.ws = SchottkyWorkspace(
            pres, trunc, vcap=trunc + max(self.word_bound, 1)
        )
        self.ctx: SeriesContext = self.ws.ctx
        self.genus = pres.genus
        self._omegas: dict[int, DifferentialForm] = {}
        self._cross: dict[tuple, YSeries] = {}
        self._inv: dict[tuple, YSeries] = {}
        self._evals: dict[tuple, YSeries] = {}
        self._pairvals: dict[tuple, YSeries] = {}
        self._singlevals: dict[tuple, YSeries] = {}
        self._rep_entries: dict[tuple, YSeries] = {}
        self._factors: dict[tuple, YSeries] = {}
        self._qsq: dict[tuple, YSeries] = {}

    # -- differentials ---------------------------------------------------------

    def omega(self, i: int) -> DifferentialForm:
        form = self._omegas.get(i)
        if form is None:
            form = build_omega(self.ws, i, self.word_bound)
            self._omegas[i] = form
        return form

    def omega2_basis(self) -> list[tuple[int, int]]:
        """Index pairs of the quadratic basis, in the canonical order."""
        g = self.genus
        if g < 2:
            raise ValueError("the quadratic basis needs genus >= 2")
        pairs = [(l, l) for l in range(1, g + 1)]
        pairs += [(1, l) for l in range(2, g + 1)]
        pairs += [(2, l) for l in range(3, g + 1)]
        return pairs

    def zeta_columns(self) -> list[ZetaCocycle]:
        cols = [ZetaCocycle(1, 1), ZetaCocycle(2, 1), ZetaCocycle(2, 2)]
        for i in range(3, self.genus + 1):
            cols += [ZetaCocycle(i, 0), ZetaCocycle(i, 1), ZetaCocycle(i, 2)]
        return cols

    # -- exact building blocks ---------------------------------------------------

    def _cross_poly(self, s: PoleDatum, t: PoleDatum) -> YSeries:
        """num_s den_t - num_t den_s; zero signals a pole collision."""
        key = (s.key, t.key)
        c = self._cross.get(key)
        if c is None:
            ns, ds = s.location
            nt, dt = t.location
            c = ns * dt - nt * ds
            self._cross[key] = c
            self._cross[(t.key, s.key)] = -c
        return c

    def _inverted(self, poly: YSeries, key: tuple, target: int) -> YSeries:
        """Cached inverse of an exact polynomial, to at least ``target``."""
        target = max(target, 0)
        got = self._inv.get(key)
        if got is not None and got.prec is not None and got.prec >= target:
            return got
        inv = poly.invert(target=target)
        self._inv[key] = inv
        return inv

    def pair_value(self, s: PoleDatum, pair: RepPair, cap: int) -> YSeries:
        """1/(p_s - loc_+) - 1/(p_s - loc_-), exact to total degree cap.

        Computed once per (pole, pair) at the working truncation and
        truncated on use; negative caps pick out the Laurent tail.
        """
        key = (s.key, pair.word)
        got = self._pairvals.get(key)
        if got is None or got.prec < cap:
            ps, qs = s.location
            q2 = self._qsq.get(s.key)
            if q2 is None:
                q2 = qs * qs
                self._qsq[s.key] = q2
            num = q2 * pair.dpoly
            if num.is_zero():
                got = self.ctx.zero().with_prec(cap)
            else:
                cp = self._cross_poly(s, pair.pos)
                cn = self._cross_poly(s, pair.neg)
                if cp.is_zero() or cn.is_zero():
                    raise PoleCollisionError(
                        f"pole {s.key} collides with pair {pair.word} of omega"
                    )
                den = cp * cn
                vnum = num.valuation()
                vden = den.valuation()
                if vnum - vden > cap:
                    got = self.ctx.zero().with_prec(cap)
                else:
                    inv = self._inverted(
                        den, (s.key, pair.pos.key, pair.neg.key),
                        cap - vnum + vden,
                    )
                    got = (num * inv).truncated(cap + 1)
            self._pairvals[key] = got
        if got.prec > cap:
            return got.truncated(cap + 1)
        return got

    def single_value(self, s: PoleDatum, t: PoleDatum, cap: int) -> YSeries:
        """1/(p_s - p_t) exact to total degree cap."""
        key = (s.key, t.key)
        got = self._singlevals.get(key)
        if got is None or got.prec < cap:
            ps, qs = s.location
            nt, dt = t.location
            cross = self._cross_poly(s, t)
            if cross.is_zero():
                raise PoleCollisionError(f"poles {s.key} and {t.key} collide")
            num = qs * dt
            vnum = num.valuation()
            vden = cross.valuation()
            if vnum is None or vnum - vden > cap:
                got = self.ctx.zero().with_prec(cap)
            else:
                inv = self._inverted(cross, (s.key, t.key, "single"),
                                     cap - vnum + vden)
                got = (num * inv).truncated(cap + 1)
            self._singlevals[key] = got
        if got.prec > cap:
            return got.truncated(cap + 1)
        return got

    def evaluate_omega_at(self, m: int, s: PoleDatum, cap: int,
                          exclude_pair: Optional[RepPair] = None) -> YSeries:
        """Value at p_s of the pole sum of omega_m, exact to degree cap.

        With ``exclude_pair`` the pole p_s itself is removed but its paired
        partner kept (the ``h`` of the double-pole residue rule).
        """
        cap = min(cap, self.trunc)
        cache_key = (m, s.key, cap, exclude_pair.word if exclude_pair else None)
        got = self._evals.get(cache_key)
        if got is not None:
            return got
        parts = [self.ctx.zero().with_prec(cap)]
        for pair in self.omega(m).pairs:
            if exclude_pair is not None and pair is exclude_pair:
                partner = pair.neg if s is pair.pos else pair.pos
                if not partner.at_infinity():
                    parts.append(self.single_value(s, partner, cap)
                                 * partner.residue)
                continue
            parts.append(self.pair_value(s, pair, cap))
        total = series_sum(self.ctx, parts)
        self._evals[cache_key] = total
        return total

    def factor_parts(self, s: PoleDatum, i: int, j: int
                     ) -> tuple[YSeries, Optional[int]]:
        """The exact polynomial part A^j of (p_s - x_i)^j and its valuation.

        The full factor is A^j / Q^j with A = P - x_i Q; keeping A^j apart
        lets a Laurent pole sum be multiplied by it first (lossless) before
        the single inversion of Q^j.  Valuation None flags a zero factor.
        """
        key = (s.key, i, j)
        got = self._factors.get(key)
        if got is not None:
            return got
        if j == 0:
            out = (self.ctx.one(), 0)
        else:
            ps, qs = s.location
            xi = self.ws.x_coefficient(i)
            a = ps - qs * xi
            if a.is_zero():
                out = (self.ctx.zero(), None)
            else:
                aj, qj = a, qs
                for _ in range(j - 1):
                    aj = aj * a
                    qj = qj * qs
                out = (aj, aj.valuation() - qj.valuation())
        self._factors[key] = out
        return out

    # -- the pairing ------------------------------------------------------------

    def _with_q_inverse(self, t1: YSeries, s: PoleDatum, j: int) -> YSeries:
        """Multiply by inv(Q_s^j), with enough inverse terms that a Laurent
        valuation of t1 does not cost exactness at the working truncation."""
        if j == 0 or t1.is_zero():
            return t1
        _, qs = s.location
        qj = qs
        for _ in range(j - 1):
            qj = qj * qs
        v1 = t1.valuation() or 0
        need = self.trunc - min(v1, 0)
        qinv = self._inverted(qj, (s.key, "q", j), need)
        return t1 * qinv

    def _simple_residue_at(self, s: PoleDatum, other_form: int, i: int,
                           j: int) -> YSeries:
        """Residue at the simple pole p_s: c_s * f_other(p_s) (p_s-x_i)^j."""
        apow, vf = self.factor_parts(s, i, j)
        if vf is None:
            return self.ctx.zero()
        # a negative cap is meaningful: it selects the Laurent tail of the
        # pole sum, which the zero of (p_s - x_i)^j then lifts back up
        cap = self.trunc - vf
        if cap < -self.ctx.vcap:
            return self.ctx.zero()
        val = self.evaluate_omega_at(other_form, s, cap)
        return self._with_q_inverse(val * apow, s, j) * s.residue

    def _double_residue_at(self, s: PoleDatum, l: int, i: int, j: int
                           ) -> YSeries:
        """Residue at the double pole p_s of omega_l^2 (z - x_i)^j dz.

        Res = 2 c_s h(p_s) (p_s - x_i)^j + c_s^2 j (p_s - x_i)^(j-1), where
        h is the pole sum of omega_l with the pole at p_s itself removed.
        """
        parts = []
        apow, vf = self.factor_parts(s, i, j)
        if vf is not None:
            cap = self.trunc - vf
            if cap >= -self.ctx.vcap:
                own = next(p for p in self.omega(l).pairs
                           if s is p.pos or s is p.neg)
                h = self.evaluate_omega_at(l, s, cap, exclude_pair=own)
                parts.append(self._with_q_inverse(h * apow, s, j)
                             * (2 * s.residue))
        if j >= 1:
            # residue^2 * j * (p - x_i)^(j-1); residue^2 == 1
            apow1, vf1 = self.factor_parts(s, i, j - 1)
            if vf1 is not None:
                parts.append(self._with_q_inverse(apow1, s, j - 1) * j)
        return series_sum(self.ctx, parts)

    def psi_pairing(self, l: int, m: int, zeta: ZetaCocycle) -> YSeries:
        """Sum of the residues of omega_l omega_m (z-x_i)^j inside circle i.

        The result must land in the deformation ring (valuation >= 0); a
        Laurent tail or a precision drop aborts with a pipeline error.
        """
        i, j = zeta.circle, zeta.power
        parts = []
        if l == m:
            for s in self.omega(l).poles:
                if enclosing_circle(s) != i:
                    continue
                parts.append(self._double_residue_at(s, l, i, j))
        else:
            for (a, b) in ((l, m), (m, l)):
                for s in self.omega(a).poles:
                    if enclosing_circle(s) != i:
                        continue
                    parts.append(self._simple_residue_at(s, b, i, j))
        total = series_sum(self.ctx, parts)
        v = total.valuation()
        if v is not None and v < 0:
            raise PipelineInconsistencyError(
                f"pairing omega_{l} omega_{m} with {zeta.label()} has "
                f"Laurent valuation {v}"
            )
        if total.prec is not None and total.prec < self.trunc:
            raise PipelineInconsistencyError(
                f"pairing omega_{l} omega_{m} with {zeta.label()} resolved "
                f"only to degree {total.prec} < {self.trunc}"
            )
        return total.with_prec(self.trunc)

    def psi_pairing_symmetric(self, l: int, m: int, zeta: ZetaCocycle
                              ) -> YSeries:
        """psi_pairing through the generator-relabeling equivariance.

        The pairing commutes with permuting the generator indices (a pure
        renaming of the x- and y-variables), so only one representative per
        index pattern is computed; the rest are permutations of it.  Falls
        back to the direct computation over normalized fields.
        """
        pres = self.pres
        if pres.normalized or pres.genus < 2:
            return self.psi_pairing(l, m, zeta)
        i, j = zeta.circle, zeta.power
        g = pres.genus
        if l == m:
            if i == l:
                pattern, anchors = ("diag-own", j), {1: l}
            else:
                pattern, anchors = ("diag-other", j), {1: l, 2: i}
        elif i == l or i == m:
            o = m if i == l else l
            pattern, anchors = ("mixed-own", j), {1: i, 2: o}
        else:
            if g < 3:
                raise ValueError("pattern requires genus >= 3")
            pattern, anchors = ("mixed-other", j), {1: l, 2: m, 3: i}
        rep = self._rep_entries.get(pattern)
        if rep is None:
            kind = pattern[0]
            if kind == "diag-own":
                rep = self.psi_pairing(1, 1, ZetaCocycle(1, j))
            elif kind == "diag-other":
                rep = self.psi_pairing(1, 1, ZetaCocycle(2, j))
            elif kind == "mixed-own":
                rep = self.psi_pairing(1, 2, ZetaCocycle(1, j))
            else:
                rep = self.psi_pairing(1, 2, ZetaCocycle(3, j))
            self._rep_entries[pattern] = rep
        sigma = dict(anchors)
        taken = set(sigma.values())
        free = [t for t in range(1, g + 1) if t not in taken]
        for src in range(1, g + 1):
            if src not in sigma:
                sigma[src] = free.pop(0)
        return permute_generator_indices(rep, sigma)

    # -- global residue check ------------------------------------------------------

    def moments(self, l: int, order: int) -> list[YSeries]:
        """Sums of residue * location^k over the finite poles, k <= order."""
        out = [self.ctx.zero() for _ in range(order + 1)]
        for s in self.omega(l).poles:
            if s.at_infinity():
                continue
            loc = s.affine_location()
            power = self.ctx.one()
            for k in range(order + 1):
                out[k] = out[k] + power * s.residue
                if k < order:
                    power = power * loc
        return out

    def residue_sum_all_poles(self, l: int, m: int, i: int, j: int) -> YSeries:
        """Sum of Res[omega_l omega_m (z-x_i)^j dz] over every pole of P^1.

        Includes the residue at infinity, computed from the moments of the
        finite pole sums; the total vanishes identically, which exercises
        every inversion in the pairing machinery.
        """
        parts = []
        if l == m:
            for s in self.omega(l).poles:
                if s.at_infinity():
                    continue
                parts.append(self._double_residue_at(s, l, i, j))
        else:
            for (a, b) in ((l, m), (m, l)):
                for s in self.omega(a).poles:
                    if s.at_infinity():
                        continue
                    parts.append(self._simple_residue_at(s, b, i, j))
        total = series_sum(self.ctx, parts)
        # residue at infinity from the large-z expansion
        if j >= 1:
            ml = self.moments(l, 1)
            mm = self.moments(m, 1)
            xi = self.ws.x_coefficient(i)
            corr = self.ctx.zero()
            if j == 1:
                corr = ml[0] * mm[0]
            elif j == 2:
                corr = (ml[0] * mm[0]) * (-2 * xi) + ml[0] * mm[1] + ml[1] * mm[0]
            total = total - corr
        return total


# ---------------------------------------------------------------------------
# the pairing matrix
# ---------------------------------------------------------------------------


class EichlerMatrix:
    """The square matrix of pairing values on the quadratic basis."""

    def __init__(self, rows: list[tuple[int, int]], cols: list[ZetaCocycle],
                 entries: list[list[YSeries]]):
        self.rows = rows
        self.cols = cols
        self.entries = entries

    @property
    def size(self) -> int:
        return len(self.rows)

    def entry(self, r: int, c: int) -> YSeries:
        return self.entries[r][c]

    def row_label(self, r: int) -> str:
        l, m = self.rows[r]
        return f"omega_{l}*omega_{m}" if l != m else f"omega_{l}^2"

    def dump(self) -> str:
        lines = ["eichler-matrix v1", f"size {self.size}"]
        lines.append("rows " + "; ".join(self.row_label(r)
                                         for r in range(self.size)))
        lines.append("cols " + "; ".join(z.label() for z in self.cols))
        for r in range(self.size):
            for c in range(self.size):
                lines.append(f"entry {r} {c}")
                lines.append(self.entries[r][c].serialize().rstrip("\n"))
        return "\n".join(lines) + "\n"

    def determinant(self) -> YSeries:
        """Division-free determinant via memoized Laplace expansion."""
        n = self.size
        if n == 0:
            raise ValueError("empty matrix")
        ctx = self.entries[0][0].ctx
        memo: dict[frozenset, YSeries] = {frozenset(): ctx.one()}

        def minor(cols: frozenset) -> YSeries:
            got = memo.get(cols)
            if got is not None:
                return got
            r = len(cols) - 1
            total = ctx.zero()
            sign = 1
            for c in sorted(cols):
                e = self.entries[r][c]
                if not e.is_zero():
                    term = e * minor(cols - {c})
                    total = total + (term if sign > 0 else -term)
                sign = -sign
            memo[cols] = total
            return total

        return minor(frozenset(range(n)))


def _pairing_worker(args):
    """Compute a batch of pairings in a fresh workspace (worker process)."""
    genus, normalized, trunc, word_bound, jobs = args
    pres = SymbolicSchottkyPresentation(genus, normalized=normalized)
    pws = PairingWorkspace(pres, trunc, word_bound)
    out = []
    for (l, m, i, j) in jobs:
        s = pws.psi_pairing(l, m, ZetaCocycle(i, j))
        out.append(((l, m, i, j), s.serialize()))
    return out


def _representative_jobs(genus: int) -> dict[tuple, tuple]:
    """Pattern key -> (l, m, i) of the orbit representative to compute."""
    reps = {}
    for j in range(3):
        reps[("diag-own", j)] = (1, 1, 1, j)
        if genus >= 2:
            reps[("diag-other", j)] = (1, 1, 2, j)
            reps[("mixed-own", j)] = (1, 2, 1, j)
        if genus >= 3:
            reps[("mixed-other", j)] = (1, 2, 3, j)
    return reps


def build_lambda_matrix(pws: PairingWorkspace, use_symmetry: bool = True,
                        processes: int = 1) -> EichlerMatrix:
    """All pairings of the quadratic basis against the zeta test maps.

    Over the full symbolic field the entries are filled orbit-by-orbit via
    the relabeling equivariance (use_symmetry=False forces every entry to
    be computed directly).  With processes > 1 the independent entries are
    farmed out to worker processes and reassembled deterministically.
    """
    rows = pws.omega2_basis()
    cols = pws.zeta_columns()
    pres = pws.pres
    symmetric = use_symmetry and not pres.normalized and pres.genus >= 2
    if processes > 1:
        if symmetric:
            jobs = sorted(set(_representative_jobs(pres.genus).values()))
        else:
            jobs = sorted(
                {(l, m, z.circle, z.power) for (l, m) in rows for z in cols}
            )
        # balance by a crude cost model: lower powers need deeper pole sums
        jobs.sort(key=lambda t: (t[3], t))
        buckets: list[list[tuple]] = [[] for _ in range(min(processes,
                                                            len(jobs)))]
        for k, job in enumerate(jobs):
            buckets[k % len(buckets)].append(job)
        import multiprocessing as mp

        args = [
            (pres.genus, pres.normalized, pws.trunc, pws.word_bound, b)
            for b in buckets if b
        ]
        with mp.get_context("fork").Pool(len(args)) as pool:
            batches = pool.map(_pairing_worker, args)
        computed = {}
        for batch in batches:
            for key, text in batch:
                computed[key] = YSeries.parse(text)
        if symmetric:
            for pattern, job in _representative_jobs(pres.genus).items():
                pws._rep_entries[pattern] = computed[job]
        else:
            for (l, m, i, j), s in computed.items():
                pws._evals[("direct-entry", l, m, i, j)] = s
            entries = [
                [computed[(l, m, z.circle, z.power)] for z in cols]
                for (l, m) in rows
            ]
            return EichlerMatrix(rows, cols, entries)
    pair = pws.psi_pairing_symmetric if symmetric else pws.psi_pairing
    entries = [
        [pair(l, m, z) for z in cols]
        for (l, m) in rows
    ]
    return EichlerMatrix(rows, cols, entries)


def det_lambda(pws: PairingWorkspace) -> YSeries:
    return build_lambda_matrix(pws).determinant()
