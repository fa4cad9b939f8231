"""Exact scalar arithmetic, q-Pochhammer symbols, curly brackets, phi-products, and truncated series.

Everything in this module is exact: scalars are arbitrary-precision rationals
(``fractions.Fraction``), infinite products ``phi(x) = prod_{i>=0} (1 - q^i x)``
are handled formally through the two rewrite rules

    phi(q x)      = phi(x) / (1 - x)
    phi(q^{-1} x) = (1 - q^{-1} x) phi(x)

so that only *ratios* of shifted phi-values (always rational) are ever
evaluated.  The half powers q^{1/2} and hbar^{1/2} are the primitive stored
symbols; q, hbar and t = q/hbar are derived.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .errors import PoleError, RangeError, RewritePole, ShapeError

ExactScalar = Fraction


def frac(value: int | str | Fraction, den: int | None = None) -> Fraction:
    """Build an exact scalar; accepts ints, 'p/q' strings and Fractions."""
    if den is not None:
        return Fraction(value, den)
    return Fraction(value)


def frac_str(x: Fraction) -> str:
    """Serialize an exact scalar as 'numerator/denominator' in decimal digits."""
    return f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# Parameter points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamPoint:
    """Exact values of q^{1/2}, hbar^{1/2}, equivariant parameters a_k and twists zeta_m.

    The genericity guard checks a_k != q^m a_l for all k != l and |m| <= guard_window,
    which rules out Pochhammer zeros/poles within the truncation range.
    """

    q_half: Fraction
    h_half: Fraction
    a: tuple[Fraction, ...]
    zeta: tuple[Fraction, ...]
    guard_window: int = 12

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", tuple(Fraction(x) for x in self.a))
        object.__setattr__(self, "zeta", tuple(Fraction(x) for x in self.zeta))
        if self.q_half == 0 or self.h_half == 0:
            raise PoleError("q^(1/2) and hbar^(1/2) must be nonzero")
        if any(x == 0 for x in self.a) or any(x == 0 for x in self.zeta):
            raise PoleError("equivariant and twist parameters must be nonzero")
        if len(set(self.a)) != len(self.a):
            raise PoleError("equivariant parameters must be pairwise distinct")
        if self.q == 1:
            raise PoleError("q = 1 is not generic")
        for k, ak in enumerate(self.a):
            for l, al in enumerate(self.a):
                if k == l:
                    continue
                qm = Fraction(1)
                for _ in range(self.guard_window + 1):
                    if ak == qm * al:
                        raise PoleError(
                            f"genericity guard: a_{k+1} = q^m a_{l+1} within window"
                        )
                    qm *= self.q

    @property
    def q(self) -> Fraction:
        return self.q_half * self.q_half

    @property
    def h(self) -> Fraction:
        return self.h_half * self.h_half

    @property
    def t(self) -> Fraction:
        return self.q / self.h

    @property
    def w(self) -> int:
        return len(self.a)

    def shifted(self, k: int, direction: int = 1) -> "ParamPoint":
        """Return the point with a_k -> q^direction a_k (k is 1-based)."""
        if not 1 <= k <= len(self.a):
            raise RangeError(f"index {k} outside 1..{len(self.a)}")
        new_a = list(self.a)
        new_a[k - 1] = new_a[k - 1] * self.q**direction
        return ParamPoint(self.q_half, self.h_half, tuple(new_a), self.zeta, self.guard_window)

    def to_json(self) -> str:
        return json.dumps(
            {
                "q_half": frac_str(self.q_half),
                "h_half": frac_str(self.h_half),
                "a": [frac_str(x) for x in self.a],
                "zeta": [frac_str(x) for x in self.zeta],
                "guard_window": self.guard_window,
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "ParamPoint":
        obj = json.loads(text)
        return ParamPoint(
            Fraction(obj["q_half"]),
            Fraction(obj["h_half"]),
            tuple(Fraction(x) for x in obj["a"]),
            tuple(Fraction(x) for x in obj["zeta"]),
            int(obj.get("guard_window", 12)),
        )


# ---------------------------------------------------------------------------
# q-Pochhammer and curly brackets
# ---------------------------------------------------------------------------


def qpoch_base(x: Fraction, d: int, q: Fraction) -> Fraction:
    """(x; q)_d with the splice convention for negative d.

    (x;q)_d = prod_{i=0}^{d-1} (1 - q^i x) for d >= 0 and
    (x;q)_{-m} = prod_{i=1}^{m} (1 - x q^{-i})^{-1}; this is the unique
    extension satisfying (x;q)_{m+n} = (x;q)_m (x q^m; q)_n for all m, n.
    """
    x = Fraction(x)
    out = Fraction(1)
    if d >= 0:
        qi = Fraction(1)
        for _ in range(d):
            out *= 1 - qi * x
            qi *= q
        return out
    qi = Fraction(1)
    for _ in range(-d):
        qi /= q
        factor = 1 - x * qi
        if factor == 0:
            raise PoleError(f"(x;q)_{d} hits a vanishing factor at x={x}")
        out /= factor
    return out


def qpoch(x: Fraction, d: int, params: ParamPoint) -> Fraction:
    """(x; q)_d at the parameter point's q."""
    return qpoch_base(x, d, params.q)


def curly_bracket(x: Fraction, d: int, params: ParamPoint) -> Fraction:
    """{x}_d = (hbar/x; q)_d / (q/x; q)_d * (-q^{1/2} hbar^{-1/2})^d."""
    if x == 0:
        raise PoleError("curly bracket needs x != 0")
    q = params.q
    num = qpoch_base(params.h / x, d, q)
    den = qpoch_base(q / x, d, q)
    if den == 0:
        raise PoleError(f"curly bracket denominator (q/x;q)_{d} vanishes at x={x}")
    sign = (-params.q_half / params.h_half) ** d
    return num / den * sign


# ---------------------------------------------------------------------------
# Formal phi-products
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Monomial:
    """coeff * prod sym^e * q^qexp over named symbols; the q-exponent is tracked separately."""

    coeff: Fraction
    exps: tuple[tuple[str, int], ...] = ()
    qexp: int = 0

    @staticmethod
    def make(coeff: Fraction, exps: Mapping[str, int] | None = None, qexp: int = 0) -> "Monomial":
        items = tuple(sorted((s, e) for s, e in (exps or {}).items() if e != 0))
        return Monomial(Fraction(coeff), items, qexp)

    def q_mul(self, k: int) -> "Monomial":
        return Monomial(self.coeff, self.exps, self.qexp + k)

    def base(self) -> "Monomial":
        """The same monomial with q-exponent zero."""
        return Monomial(self.coeff, self.exps, 0)

    def symbol_exponent(self, sym: str) -> int:
        for s, e in self.exps:
            if s == sym:
                return e
        return 0

    def value(self, env: Mapping[str, Fraction], q: Fraction) -> Fraction:
        out = self.coeff * q**self.qexp
        for s, e in self.exps:
            out *= Fraction(env[s]) ** e
        return out


def _merge(items: Iterable[tuple[Monomial, int]]) -> tuple[tuple[Monomial, int], ...]:
    table: dict[Monomial, int] = {}
    for m, p in items:
        table[m] = table.get(m, 0) + p
    return tuple(
        sorted(
            ((m, p) for m, p in table.items() if p != 0),
            key=lambda mp: (mp[0].exps, mp[0].coeff, mp[0].qexp),
        )
    )


@dataclass(frozen=True)
class PhiProduct:
    """A formal product  prod phi(m_i)^{p_i} * prod (1 - l_j)^{e_j}.

    The linear part is the exact rational prefactor accumulated by the phi
    rewrite rules; it is kept formal (a multiset of monomials l_j) so that
    parameter shifts act covariantly on it, which makes shifting up then down
    by the same symbol the exact identity.  Canonical form: every phi argument
    has q-exponent zero.
    """

    factors: tuple[tuple[Monomial, int], ...]
    linear: tuple[tuple[Monomial, int], ...] = ()

    @staticmethod
    def from_ratios(
        num: Iterable[Monomial] = (),
        den: Iterable[Monomial] = (),
    ) -> "PhiProduct":
        items = [(m, 1) for m in num] + [(m, -1) for m in den]
        return PhiProduct(_merge(items))

    def canonicalize(self) -> "PhiProduct":
        """Pull every integer q-power out of the phi arguments into linear factors.

        phi(q^k m0) = phi(m0) / prod_{j=0}^{k-1} (1 - q^j m0)  for k > 0 and
        phi(q^k m0) = phi(m0) * prod_{j=k}^{-1} (1 - q^j m0)   for k < 0.
        """
        phis: list[tuple[Monomial, int]] = []
        lins: list[tuple[Monomial, int]] = list(self.linear)
        for m, p in self.factors:
            k = m.qexp
            m0 = m.base()
            if k > 0:
                for j in range(k):
                    lins.append((m0.q_mul(j), -p))
            elif k < 0:
                for j in range(k, 0):
                    lins.append((m0.q_mul(j), p))
            phis.append((m0, p))
        return PhiProduct(_merge(phis), _merge(lins))

    def is_canonical(self) -> bool:
        return all(m.qexp == 0 for m, _ in self.factors)

    def prefactor_value(self, env: Mapping[str, Fraction], q: Fraction) -> Fraction:
        """Evaluate the linear part prod (1 - l)^e exactly; flags rewrite poles."""
        out = Fraction(1)
        for m, p in self.linear:
            factor = 1 - m.value(env, q)
            if factor == 0:
                if p < 0:
                    raise RewritePole(f"linear factor (1 - m)^{p} with m = 1 at {m}")
                return Fraction(0)
            out *= factor**p
        return out

    def same_factors(self, other: "PhiProduct") -> bool:
        return self.factors == other.factors

    def shift(self, symbol: str, direction: int) -> "PhiProduct":
        """Replace symbol -> q^direction symbol formally in every monomial."""
        if direction == 0:
            return self
        return PhiProduct(
            tuple(
                (m.q_mul(direction * m.symbol_exponent(symbol)), p)
                for m, p in self.factors
            ),
            tuple(
                (m.q_mul(direction * m.symbol_exponent(symbol)), p)
                for m, p in self.linear
            ),
        )


def phi_shift(
    p: PhiProduct,
    symbol: str,
    direction: int,
    env: Mapping[str, Fraction] | None = None,
    q: Fraction | None = None,
) -> PhiProduct:
    """Multiply ``symbol`` by q^direction inside every argument and re-canonicalize.

    When an environment is supplied, newly produced inverse linear factors are
    checked and a RewritePole is raised if one vanishes (never silently
    dropped).
    """
    out = p.shift(symbol, direction).canonicalize()
    if env is not None and q is not None:
        out.prefactor_value(env, q)
    return out


# ---------------------------------------------------------------------------
# Truncated multigraded series
# ---------------------------------------------------------------------------


def _check_degree(deg: Sequence[int], order: Sequence[int]) -> bool:
    return all(0 <= d <= o for d, o in zip(deg, order))


@dataclass(frozen=True)
class TruncatedSeries:
    """A truncated series in num_vars grading variables with exact coefficients.

    Coefficients are only stored (and only trustworthy) componentwise below
    ``reliable_order``; products propagate the componentwise minimum.
    """

    num_vars: int
    coeffs: tuple[tuple[tuple[int, ...], Fraction], ...]
    reliable_order: tuple[int, ...]

    @staticmethod
    def make(
        num_vars: int,
        coeffs: Mapping[tuple[int, ...], Fraction],
        reliable_order: Sequence[int],
    ) -> "TruncatedSeries":
        order = tuple(int(o) for o in reliable_order)
        if len(order) != num_vars:
            raise ShapeError("reliable_order length must equal num_vars")
        kept = {
            tuple(d): Fraction(c)
            for d, c in coeffs.items()
            if _check_degree(d, order) and c != 0
        }
        return TruncatedSeries(num_vars, tuple(sorted(kept.items())), order)

    @staticmethod
    def one(num_vars: int, reliable_order: Sequence[int]) -> "TruncatedSeries":
        return TruncatedSeries.make(num_vars, {(0,) * num_vars: Fraction(1)}, reliable_order)

    def as_dict(self) -> dict[tuple[int, ...], Fraction]:
        return dict(self.coeffs)

    def coefficient(self, deg: Sequence[int]) -> Fraction:
        key = tuple(deg)
        if not _check_degree(key, self.reliable_order):
            raise ShapeError(f"degree {key} beyond reliable order {self.reliable_order}")
        return dict(self.coeffs).get(key, Fraction(0))

    def add(self, other: "TruncatedSeries") -> "TruncatedSeries":
        if self.num_vars != other.num_vars:
            raise ShapeError("mismatched num_vars")
        order = tuple(min(a, b) for a, b in zip(self.reliable_order, other.reliable_order))
        out = dict(self.coeffs)
        for d, c in other.coeffs:
            out[d] = out.get(d, Fraction(0)) + c
        return TruncatedSeries.make(self.num_vars, out, order)

    def mul(self, other: "TruncatedSeries") -> "TruncatedSeries":
        if self.num_vars != other.num_vars:
            raise ShapeError("mismatched num_vars")
        order = tuple(min(a, b) for a, b in zip(self.reliable_order, other.reliable_order))
        out: dict[tuple[int, ...], Fraction] = {}
        for d1, c1 in self.coeffs:
            for d2, c2 in other.coeffs:
                d = tuple(x + y for x, y in zip(d1, d2))
                if _check_degree(d, order):
                    out[d] = out.get(d, Fraction(0)) + c1 * c2
        return TruncatedSeries.make(self.num_vars, out, order)

    def scale(self, c: Fraction) -> "TruncatedSeries":
        return TruncatedSeries.make(
            self.num_vars, {d: v * c for d, v in self.coeffs}, self.reliable_order
        )

    def to_json_obj(self, convention: str = "zh") -> dict:
        return {
            "vars": self.num_vars,
            "convention": convention,
            "reliable_order": list(self.reliable_order),
            "terms": [
                {"deg": list(d), "coeff": frac_str(c)} for d, c in self.coeffs
            ],
        }


def series_combine(
    op: str,
    a: TruncatedSeries,
    b: TruncatedSeries | Fraction,
) -> TruncatedSeries:
    """Graded add/mul/scale with reliable-order propagation."""
    if op == "scale":
        if isinstance(b, TruncatedSeries):
            raise ShapeError("scale expects a scalar second operand")
        return a.scale(Fraction(b))
    if not isinstance(b, TruncatedSeries):
        raise ShapeError(f"{op} expects a series second operand")
    if op == "add":
        return a.add(b)
    if op == "mul":
        return a.mul(b)
    raise RangeError(f"unknown series op {op!r}")


# ---------------------------------------------------------------------------
# Probabilistic rational-identity testing
# ---------------------------------------------------------------------------


def sz_equal(
    f: Callable[[Mapping[str, Fraction]], Fraction],
    g: Callable[[Mapping[str, Fraction]], Fraction],
    variables: Sequence[str],
    trials: int = 8,
    seed: int = 0,
    max_retries: int = 64,
) -> bool:
    """Schwartz-Zippel style equality test of two rational-function evaluators.

    Samples exact rational points (deterministic under ``seed``), resamples on
    PoleError up to ``max_retries`` times per trial, and returns True iff the
    evaluators agree at every sampled point.
    """
    rng = random.Random(seed)
    for _ in range(trials):
        for attempt in range(max_retries + 1):
            point = {
                v: Fraction(rng.randint(2, 1009), rng.randint(1, 97)) * rng.choice((1, -1))
                for v in variables
            }
            if len(set(point.values())) != len(variables):
                continue
            try:
                if f(point) != g(point):
                    return False
                break
            except PoleError:
                if attempt == max_retries:
                    raise
    return True
