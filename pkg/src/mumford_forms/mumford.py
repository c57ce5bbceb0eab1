"""Assembly of the normalized weight-13 expansion and its structure checks.

The assembled series is det(Lambda) * F1^13 / F2: the determinant of the
residue-pairing matrix times the thirteenth power of the weight-one class
product over the weight-two one.  Its leading term is a signed product of
closed-form factors tau_i, one per generator beyond the first; the global
sign is genuinely ambiguous and is reported, never chosen.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

from .differentials import (
    EichlerMatrix,
    PairingWorkspace,
    PipelineInconsistencyError,
    build_lambda_matrix,
)
from .products import product_ratio_power, quadratic_product, zograf_product
from .rings import (
    PrimitivityReport,
    SubstitutionMap,
    YSeries,
    integer_content_and_primitivity,
    substitute,
)
from .schottky import SchottkyWorkspace, SymbolicSchottkyPresentation

RATIO_POWER = 13  # 6 k^2 - 6 k + 1 at k = 2


def weight_exponent(k: int) -> int:
    """The Hodge-power attached to weight k: 6 k^2 - 6 k + 1."""
    return 6 * k * k - 6 * k + 1


def _series_hash(s: YSeries) -> str:
    return hashlib.sha256(s.serialize().encode()).hexdigest()[:16]


@dataclass
class MumfordExpansion:
    genus: int
    trunc: int
    series: YSeries
    sign_ambiguous: bool = True
    provenance: dict = field(default_factory=dict)

    def primitivity(self, primes) -> PrimitivityReport:
        return integer_content_and_primitivity(self.series, primes)


def tau_factors(pres: SymbolicSchottkyPresentation, trunc: int = 1
                ) -> list[YSeries]:
    """Closed-form leading factors tau_2..tau_g, in the given variables.

    The normalized variant is obtained from the general one by the
    normalization substitution (x_1 -> 0, x_2 -> 1, x_{-1} -> infinity as a
    symbolic limit), so both variants come from a single formula.
    """
    g = pres.genus
    if g < 2:
        raise ValueError("tau factors need genus >= 2")
    general = (
        pres if not pres.normalized
        else SymbolicSchottkyPresentation(g, normalized=False)
    )
    wsp = general.workspace(trunc)
    f = general.domain.field
    x = {t: f.variable(general.x_variable_name(t))
         for t in range(-g, g + 1) if t}
    taus = []
    base2 = (
        (x[1] - x[-1]) * (x[2] - x[-2]) * (x[2] - x[-2])
        * ((x[1] - x[-2]) * (x[-1] - x[-2])).invert()
    )
    taus.append(wsp.ctx.y(2) * base2)
    for i in range(3, g + 1):
        bracket = ((x[-i] - x[1]) * (x[-i] - x[-1])).invert() - (
            (x[i] - x[2]) * (x[i] - x[-2])
            * ((x[-i] - x[2]) * (x[-i] - x[-2])
               * (x[i] - x[1]) * (x[i] - x[-1])).invert()
        )
        common = (
            (x[1] - x[-1]) * (x[2] - x[-2]) * (x[i] - x[-i]) * (x[i] - x[-i])
            * ((x[i] - x[2]) * (x[i] - x[-2])).invert()
        )
        taus.append(wsp.ctx.y(i) * (bracket * common))
    if not pres.normalized:
        return taus
    sub = SubstitutionMap.normalization_preset()
    out = []
    for t in taus:
        s = substitute(t, sub)
        out.append(s)
    return out


def tau_product(pres: SymbolicSchottkyPresentation, trunc: Optional[int] = None
                ) -> YSeries:
    """The product of all tau factors (a single monomial of degree g-1)."""
    taus = tau_factors(pres, trunc or pres.genus)
    total = taus[0]
    for t in taus[1:]:
        total = total * t
    return total


@dataclass
class LeadingTermReport:
    passed: bool
    matched_sign: Optional[int]
    detail: str = ""


def verify_leading_term(expansion: MumfordExpansion,
                        pres: SymbolicSchottkyPresentation
                        ) -> LeadingTermReport:
    """Check the minimal-degree part against the signed tau product."""
    lead = expansion.series.leading_part()
    want = tau_product(pres, expansion.trunc).leading_part()
    want = YSeries(expansion.series.ctx, dict(want.terms), want.prec)
    if lead == want:
        return LeadingTermReport(True, +1)
    if lead == -want:
        return LeadingTermReport(True, -1)
    detail = (
        "leading part:\n" + lead.serialize()
        + "expected (up to sign):\n" + want.serialize()
    )
    return LeadingTermReport(False, None, detail)


class MumfordAssembly:
    """One full assembly: workspace, matrix, products, expansion, report."""

    def __init__(self, pres: SymbolicSchottkyPresentation, trunc: int,
                 word_bound: Optional[int] = None,
                 identify_inverses: bool = False,
                 use_symmetry: bool = True,
                 processes: int = 1):
        if pres.genus < 2:
            raise ValueError("assembly needs genus >= 2")
        self.pres = pres
        self.identify_inverses = identify_inverses
        self.pairing = PairingWorkspace(pres, trunc, word_bound)
        self.matrix: EichlerMatrix = build_lambda_matrix(
            self.pairing, use_symmetry=use_symmetry, processes=processes
        )
        self.det = self.matrix.determinant()
        wsp = self.pairing.ws
        self.f1 = zograf_product(wsp, identify_inverses)
        self.f2 = quadratic_product(wsp, identify_inverses)
        self.ratio = product_ratio_power(self.f1, self.f2, RATIO_POWER)
        series = self.det * self.ratio
        v = series.valuation()
        if v is not None and v < 0:
            raise PipelineInconsistencyError(
                f"assembled series has Laurent valuation {v}; this signals "
                "a wrong pole-interior rule or a truncation bug"
            )
        if series.prec is not None and series.prec < trunc:
            raise PipelineInconsistencyError(
                f"assembled series resolved only to degree {series.prec}"
            )
        self.expansion = MumfordExpansion(
            genus=pres.genus,
            trunc=trunc,
            series=series.with_prec(trunc),
            provenance={
                "det": _series_hash(self.det),
                "f1": _series_hash(self.f1),
                "f2": _series_hash(self.f2),
            },
        )


def assemble_mu2(genus: int, trunc: int,
                 pres: Optional[SymbolicSchottkyPresentation] = None,
                 word_bound: Optional[int] = None,
                 identify_inverses: bool = False,
                 processes: int = 1) -> MumfordAssembly:
    """Assemble det(Lambda) * F1^13/F2 over the normalized presentation."""
    if pres is None:
        pres = SymbolicSchottkyPresentation(genus, normalized=True)
    return MumfordAssembly(pres, trunc, word_bound,
                           identify_inverses=identify_inverses,
                           processes=processes)


def genus1_delta_coefficients(trunc: int,
                              wsp: Optional[SchottkyWorkspace] = None
                              ) -> list[int]:
    """Integer coefficients of q prod_n (1 - q^n)^24 for q^1..q^trunc.

    Runs through the generic class-product engine at genus one (the single
    primitive class with inverses identified has multiplier exactly y_1),
    exercising the series arithmetic rather than a bespoke q-series path.
    """
    if trunc < 1:
        raise ValueError("trunc must be >= 1")
    if wsp is None:
        pres = SymbolicSchottkyPresentation(1, normalized=True)
        wsp = pres.workspace(trunc - 1)
    eta24 = zograf_product(wsp, identify_inverses=True) ** 24
    out = []
    for n in range(1, trunc + 1):
        c = eta24.coefficient((n - 1,))
        frac = c if not hasattr(c, "as_fraction") else c.as_fraction()
        if getattr(frac, "denominator", 1) != 1:
            raise PipelineInconsistencyError(
                f"non-integer coefficient at order {n}: {frac}"
            )
        out.append(int(frac))
    return out


# -- report ------------------------------------------------------------------


REPORT_CONSTANTS_NOTE = (
    "# named constants: ratio power d_2 = 13 (= 6k^2-6k+1 at k=2); the\n"
    "# analytic constants a(g) and zeta'_Q(-1) are documented but never\n"
    "# computed (outside the algebraic scope of this package)\n"
)


def expansion_report(assembly: MumfordAssembly, primes=(2, 3, 5),
                     series_path: Optional[str] = None,
                     timestamp: Optional[str] = None) -> str:
    """Structured text report for one assembly run."""
    pres = assembly.pres
    exp = assembly.expansion
    rep = verify_leading_term(exp, pres)
    prim = exp.primitivity(primes)
    lines = ["mumford-report v1"]
    lines.append(f"# generated: {timestamp or 'unspecified'}")
    lines.append(REPORT_CONSTANTS_NOTE.rstrip("\n"))
    lines.append("[parameters]")
    lines.append(f"genus {pres.genus}")
    lines.append(f"truncation {exp.trunc}")
    lines.append(f"word-bound {assembly.pairing.word_bound}")
    lines.append(
        f"normalized {'yes' if pres.normalized else 'no'}"
    )
    lines.append(
        f"identify-inverses {'yes' if assembly.identify_inverses else 'no'}"
    )
    lines.append("sign-convention ambiguous")
    lines.append("[det leading term]")
    lines.append(assembly.det.leading_part().serialize().rstrip("\n"))
    lines.append("[tau product]")
    lines.append(tau_product(pres, exp.trunc).serialize().rstrip("\n"))
    lines.append("[sign match]")
    lines.append(f"leading-term-check {'pass' if rep.passed else 'FAIL'}")
    lines.append(f"matched-sign {rep.matched_sign if rep.passed else 'none'}")
    lines.append("[primitivity table]")
    lines.append(f"leading-valuation {prim.valuation}")
    lines.append(f"content {prim.content}")
    for p in sorted(prim.primitive_at):
        ok = prim.primitive_at[p]
        lines.append(f"prime {p} {'primitive' if ok else 'vanishes'}")
    lines.append("[series file]")
    lines.append(f"path {series_path or '-'}")
    lines.append("[provenance]")
    for k, v in sorted(exp.provenance.items()):
        lines.append(f"{k} {v}")
    return "\n".join(lines) + "\n"
