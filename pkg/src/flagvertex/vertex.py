"""Bare vertex series of type-A flag quivers and tRS eigenfunction candidates.

The vertex series at a torus fixed point ``p`` is the exact localization sum

    V_p(z) = sum_{d in chamber} z^d q^{N(d)/2} E * H * G * tau(x q^{-d})

with curly-bracket factors

    E = prod_m prod_{j != k} {x_{m,j}/x_{m,k}}^{-1}_{d_{m,j}-d_{m,k}},
    H = prod_m prod_{j,k} {x_{m,j}/x_{m+1,k}}_{d_{m,j}-d_{m+1,k}},
    G = prod_j prod_k {x_{n-1,j}/a_k}_{d_{n-1,j}},

where N(d) = sum v'_m d_m.  The diagonal j = k is excluded from E (the
literal double product contains phi(1) = 0) and the sharp variable absorbs
(-hbar^{1/2})^{v'} per unit degree.

An eigenfunction candidate splits the contour normalization alpha_p into a
rational phi-product N_p (all unit-argument ratios struck) and a
transcendental cocycle: the shift a_k -> q a_k multiplies the candidate by
the twist monomial of level(k) and shifts the series grading along the
suffix of levels containing k.
"""

from __future__ import annotations

import ast
import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping, Sequence

from .errors import CalibrationError, LimitError, PoleError, RangeError, ShapeError
from .kernel import (
    Monomial,
    ParamPoint,
    PhiProduct,
    TruncatedSeries,
    curly_bracket,
    phi_shift,
)
from .quiver import DegreeAssignment, FixedPointChain, enumerate_degree_assignments

# ---------------------------------------------------------------------------
# Descendant insertions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Insertion:
    """A function of the per-level variable collections, symmetric within levels.

    ``fn`` receives values[m-1][j] = the j-th displaced point of level m and
    the parameter point, and returns an exact scalar.
    """

    fn: Callable[[Sequence[Sequence[Fraction]], ParamPoint], Fraction]
    label: str = "tau"

    def evaluate(self, values: Sequence[Sequence[Fraction]], params: ParamPoint) -> Fraction:
        return Fraction(self.fn(values, params))


TRIVIAL_INSERTION = Insertion(lambda values, params: Fraction(1), label="1")


_ALLOWED_BINOPS = {ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow}


def parse_insertion(text: str) -> Insertion:
    """Parse an insertion from the small grammar over s[i][j], q, h, integers, + - * / **.

    Level variables are 1-based: s[1][1] is the first displaced point of the
    first level; h denotes hbar^{1/2}.
    """
    tree = ast.parse(text, mode="eval")

    def ev(node: ast.AST, values, params: ParamPoint) -> Fraction:
        if isinstance(node, ast.Expression):
            return ev(node.body, values, params)
        if isinstance(node, ast.Constant) and isinstance(node.value, int):
            return Fraction(node.value)
        if isinstance(node, ast.Name):
            if node.id == "q":
                return params.q
            if node.id == "h":
                return params.h_half
            raise ShapeError(f"unknown symbol {node.id!r} in insertion")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            val = ev(node.operand, values, params)
            return -val if isinstance(node.op, ast.USub) else val
        if isinstance(node, ast.BinOp) and type(node.op) in _ALLOWED_BINOPS:
            left = ev(node.left, values, params)
            right = ev(node.right, values, params)
            if isinstance(node.op, ast.Add):
                return left + right
            if isinstance(node.op, ast.Sub):
                return left - right
            if isinstance(node.op, ast.Mult):
                return left * right
            if isinstance(node.op, ast.Div):
                if right == 0:
                    raise PoleError("insertion divides by zero")
                return left / right
            if not isinstance(node.right, ast.Constant) or not isinstance(node.right.value, int):
                raise ShapeError("insertion powers must be integer literals")
            return left ** node.right.value
        if isinstance(node, ast.Subscript):
            base = node.value
            if (
                isinstance(base, ast.Subscript)
                and isinstance(base.value, ast.Name)
                and base.value.id == "s"
            ):
                i = ev_index(base.slice)
                j = ev_index(node.slice)
                return Fraction(values[i - 1][j - 1])
        raise ShapeError(f"unsupported insertion syntax: {ast.dump(node)}")

    def ev_index(node: ast.AST) -> int:
        if isinstance(node, ast.Constant) and isinstance(node.value, int):
            return node.value
        raise ShapeError("insertion indices must be integer literals")

    return Insertion(lambda values, params: ev(tree, values, params), label=text)


# ---------------------------------------------------------------------------
# Vertex coefficients and series
# ---------------------------------------------------------------------------


def _chain_values(p: FixedPointChain, params: ParamPoint) -> list[list[Fraction]]:
    """x_{m,j} = a_{e_j} for the sorted members e_j of V_m, levels m = 1..n-1."""
    return [[params.a[e - 1] for e in p.members(m)] for m in range(1, p.flag.n)]


def vertex_coefficient(
    p: FixedPointChain,
    asg: DegreeAssignment,
    tau: Insertion,
    params: ParamPoint,
) -> Fraction:
    """Exact contribution of one admissible degree assignment (z-convention)."""
    f = p.flag
    if len(params.a) != f.w:
        raise ShapeError("parameter point has wrong number of equivariant parameters")
    val = params.q_half ** asg.n_of_d()
    # E factors (diagonal excluded: the literal j = k pair is phi(1) = 0).
    for m in range(1, f.n):
        members = p.members(m)
        for ej, ek in itertools.permutations(members, 2):
            x = params.a[ej - 1] / params.a[ek - 1]
            d = asg.degree_of(m, ej) - asg.degree_of(m, ek)
            bracket = curly_bracket(x, d, params)
            if bracket == 0:
                raise PoleError("E bracket vanished; parameters are not generic enough")
            val /= bracket
    # H factors between consecutive levels.
    for m in range(1, f.n - 1):
        for ej in p.members(m):
            for ek in p.members(m + 1):
                x = params.a[ej - 1] / params.a[ek - 1]
                d = asg.degree_of(m, ej) - asg.degree_of(m + 1, ek)
                val *= curly_bracket(x, d, params)
    # G factors against the framing.
    for ej in p.members(f.n - 1):
        for k in range(1, f.w + 1):
            x = params.a[ej - 1] / params.a[k - 1]
            val *= curly_bracket(x, asg.degree_of(f.n - 1, ej), params)
    if tau is not TRIVIAL_INSERTION:
        displaced = [
            [
                params.a[e - 1] * params.q ** (-asg.degree_of(m, e))
                for e in p.members(m)
            ]
            for m in range(1, f.n)
        ]
        val *= tau.evaluate(displaced, params)
    return val


@dataclass(frozen=True)
class VertexSeries:
    """A truncated vertex series with its variable convention.

    ``convention`` is "z" (plain Kaehler variable) or "zh" (sharp variable,
    each z-coefficient multiplied by (-hbar^{1/2})^{-<v', d>}).
    """

    series: TruncatedSeries
    convention: str
    v_prime: tuple[int, ...]
    h_half: Fraction

    def convert(self, convention: str) -> "VertexSeries":
        if convention not in ("z", "zh"):
            raise RangeError(f"unknown convention {convention!r}")
        if convention == self.convention:
            return self
        # converting z -> zh multiplies the degree-d coefficient by (-h)^{-<v',d>}
        sign = -1 if convention == "zh" else 1
        coeffs = {
            d: c * (-self.h_half) ** (sign * sum(v * x for v, x in zip(self.v_prime, d)))
            for d, c in self.series.coeffs
        }
        return VertexSeries(
            TruncatedSeries.make(self.series.num_vars, coeffs, self.series.reliable_order),
            convention,
            self.v_prime,
            self.h_half,
        )

    def coefficient(self, deg: Sequence[int]) -> Fraction:
        return self.series.coefficient(deg)

    def to_json_obj(self) -> dict:
        return self.series.to_json_obj(convention=self.convention)


def vertex_series(
    p: FixedPointChain,
    tau: Insertion,
    D: Sequence[int],
    params: ParamPoint,
    convention: str = "zh",
) -> VertexSeries:
    """Sum vertex_coefficient over the chamber for every degree d <= D."""
    f = p.flag
    D = tuple(int(x) for x in D)
    if len(D) != f.n - 1:
        raise ShapeError("truncation order must have n-1 components")
    if max(D, default=0) + f.w + 2 > params.guard_window:
        raise RangeError("truncation order exceeds the genericity guard window")
    vp = f.v_prime
    coeffs: dict[tuple[int, ...], Fraction] = {}
    for d in itertools.product(*(range(x + 1) for x in D)):
        total = Fraction(0)
        for asg in enumerate_degree_assignments(p, d):
            total += vertex_coefficient(p, asg, tau, params)
        if convention == "zh":
            total *= (-params.h_half) ** (-sum(v * x for v, x in zip(vp, d)))
        elif convention != "z":
            raise RangeError(f"unknown convention {convention!r}")
        coeffs[d] = total
    series = TruncatedSeries.make(f.n - 1, coeffs, D)
    return VertexSeries(series, convention, vp, params.h_half)


@lru_cache(maxsize=4096)
def _trivial_series_table(
    p: FixedPointChain, D: tuple[int, ...], params: ParamPoint
) -> tuple[tuple[tuple[int, ...], Fraction], ...]:
    """Cached sharp-convention series coefficients for tau = 1 (used by trs.apply)."""
    return vertex_series(p, TRIVIAL_INSERTION, D, params, "zh").series.coeffs


def trivial_series_dict(
    p: FixedPointChain, D: Sequence[int], params: ParamPoint
) -> dict[tuple[int, ...], Fraction]:
    return dict(_trivial_series_table(p, tuple(int(x) for x in D), params))


# ---------------------------------------------------------------------------
# Residue-normalized prefactor N_p
# ---------------------------------------------------------------------------


def _a_sym(k: int) -> str:
    return f"a{k}"


def normalization_prefactor(p: FixedPointChain) -> PhiProduct:
    """The rational phi-product part N_p of alpha_p, with unit-argument ratios struck.

    Arguments are monomials in the symbols a1..aw (and h for hbar^{1/2}); the
    factor t x/y is stored as q^{+1} h^{-2} x/y and pulled into rational form
    on canonicalization.  All pairs whose evaluation-point ratio is exactly 1
    are omitted from numerator and denominator (the literal alpha_p is a
    formally singular 0/0 at those pairs).
    """
    f = p.flag
    num: list[Monomial] = []
    den: list[Monomial] = []

    def ratio(e_num: int, e_den: int, with_t: bool) -> Monomial:
        exps: dict[str, int] = {}
        exps[_a_sym(e_num)] = exps.get(_a_sym(e_num), 0) + 1
        exps[_a_sym(e_den)] = exps.get(_a_sym(e_den), 0) - 1
        if with_t:
            exps["h"] = -2
            return Monomial.make(Fraction(1), exps, qexp=1)
        return Monomial.make(Fraction(1), exps, qexp=0)

    # E part at s = x: phi(x_j/x_k) / phi(t x_j/x_k) over ordered pairs j != k.
    for m in range(1, f.n):
        for ej, ek in itertools.permutations(p.members(m), 2):
            num.append(ratio(ej, ek, with_t=False))
            den.append(ratio(ej, ek, with_t=True))
    # H part: phi(t x_m/x_{m+1}) / phi(x_m/x_{m+1}), unit pairs struck.
    for m in range(1, f.n - 1):
        for ej in p.members(m):
            for ek in p.members(m + 1):
                if ej == ek:
                    continue
                num.append(ratio(ej, ek, with_t=True))
                den.append(ratio(ej, ek, with_t=False))
    # G part: phi(t x/a_k) / phi(x/a_k), self pairs struck.
    for ej in p.members(f.n - 1):
        for k in range(1, f.w + 1):
            if ej == k:
                continue
            num.append(ratio(ej, k, with_t=True))
            den.append(ratio(ej, k, with_t=False))
    return PhiProduct.from_ratios(num, den)


def phi_env(params: ParamPoint) -> dict[str, Fraction]:
    env = {_a_sym(k + 1): v for k, v in enumerate(params.a)}
    env["h"] = params.h_half
    return env


def prefactor_shift_ratio(
    prefactor: PhiProduct,
    shifts: Mapping[int, int],
    params: ParamPoint,
) -> Fraction:
    """Exact N_p(a with a_k -> q^{shifts[k]} a_k) / N_p(a).

    Both sides canonicalize to the same phi-factor multiset, so the ratio is
    the ratio of the formal linear prefactors, evaluated at the point.
    """
    env = phi_env(params)
    q = params.q
    base = prefactor.canonicalize()
    shifted = prefactor
    for k, direction in sorted(shifts.items()):
        shifted = shifted.shift(_a_sym(k), direction)
    shifted = shifted.canonicalize()
    if not shifted.same_factors(base):
        raise ShapeError("shift changed the phi-factor multiset; rewrite bookkeeping bug")
    return shifted.prefactor_value(env, q) / base.prefactor_value(env, q)


# ---------------------------------------------------------------------------
# Shift cocycle and candidates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CocycleConvention:
    """Signs of the twist exponent on the global prefactor and of the level shifts."""

    sigma_pref: int = 1
    sigma_int: int = -1

    def __post_init__(self) -> None:
        if self.sigma_pref not in (1, -1) or self.sigma_int not in (1, -1):
            raise RangeError("convention signs must be +1 or -1")


#: Convention selected by calibrate_convention; frozen globally.
CALIBRATED_CONVENTION = CocycleConvention(sigma_pref=1, sigma_int=-1)


def shift_cocycle(
    p: FixedPointChain, conv: CocycleConvention = CALIBRATED_CONVENTION
) -> dict[int, tuple[int, tuple[int, ...]]]:
    """Per framing index k: (twist exponent of zeta_n, grading shift vector e_k).

    The shift a_k -> q a_k multiplies the transcendental prefactor by
    zeta_n^{sigma_pref} and shifts the stored series grading by sigma_int
    on every level m >= level_of(k); framing-only indices shift nothing.
    """
    f = p.flag
    table: dict[int, tuple[int, tuple[int, ...]]] = {}
    for k in range(1, f.w + 1):
        lvl = p.level_of(k)
        e_k = tuple(
            conv.sigma_int if m >= lvl else 0 for m in range(1, f.n)
        )
        table[k] = (conv.sigma_pref, e_k)
    return table


@dataclass(frozen=True)
class EigenfunctionCandidate:
    """Residue-normalized vertex data on which tRS operators act exactly.

    The candidate represents (transcendental prefactor) * N_p * series; the
    prefactor itself never needs evaluating because shifts act on it through
    the cocycle table and on N_p through exact phi rewrites.
    """

    point: FixedPointChain
    prefactor: PhiProduct
    cocycle: tuple[tuple[int, tuple[int, tuple[int, ...]]], ...]
    series: TruncatedSeries
    params: ParamPoint
    convention: CocycleConvention

    def cocycle_table(self) -> dict[int, tuple[int, tuple[int, ...]]]:
        return dict(self.cocycle)

    def series_at(self, params: ParamPoint) -> dict[tuple[int, ...], Fraction]:
        """The same truncated series re-evaluated at (possibly shifted) parameters."""
        return trivial_series_dict(self.point, self.series.reliable_order, params)


def eigenfunction_candidate(
    p: FixedPointChain,
    D: Sequence[int],
    params: ParamPoint,
    conv: CocycleConvention = CALIBRATED_CONVENTION,
) -> EigenfunctionCandidate:
    """Build the tau = 1 candidate at truncation order D."""
    series = TruncatedSeries.make(
        p.flag.n - 1,
        trivial_series_dict(p, D, params),
        tuple(int(x) for x in D),
    )
    if series.coefficient((0,) * (p.flag.n - 1)) != 1:
        raise ShapeError("candidate series must start at 1")
    table = shift_cocycle(p, conv)
    return EigenfunctionCandidate(
        point=p,
        prefactor=normalization_prefactor(p),
        cocycle=tuple(sorted(table.items())),
        series=series,
        params=params,
        convention=conv,
    )


def calibrate_convention(params: ParamPoint) -> CocycleConvention:
    """Select the unique sign convention for which the rank-one eigencheck passes.

    Runs the r = 1 tRS difference relation on T*P^1 through sharp order 2 for
    all four sign choices and returns the single passing one; raises
    CalibrationError when zero or several pass.
    """
    from . import trs
    from .quiver import FlagData, enumerate_fixed_points

    if len(params.a) != 2:
        base = ParamPoint(
            params.q_half, params.h_half, params.a[:2], params.zeta[:2], params.guard_window
        )
    else:
        base = params
    flag = FlagData((1,), 2)
    point = enumerate_fixed_points(flag)[0]
    passing = []
    for sigma_pref, sigma_int in itertools.product((1, -1), repeat=2):
        conv = CocycleConvention(sigma_pref, sigma_int)
        try:
            cand = eigenfunction_candidate(point, (3,), base, conv)
            report = trs.check_eigen(flag, point, 1, (3,), base, candidate=cand)
        except (PoleError, ShapeError):
            continue
        if report.status == "PASS":
            passing.append(conv)
    if len(passing) != 1:
        raise CalibrationError(
            f"{len(passing)} of 4 sign conventions pass the rank-one oracle"
        )
    return passing[0]


# ---------------------------------------------------------------------------
# hbar -> infinity (q-Toda) limit
# ---------------------------------------------------------------------------


class _HPoly:
    """Laurent polynomial in h = hbar^{1/2} with exact coefficients."""

    __slots__ = ("c",)

    def __init__(self, c: Mapping[int, Fraction] | None = None):
        self.c = {k: Fraction(v) for k, v in (c or {}).items() if v != 0}

    @staticmethod
    def const(x: Fraction) -> "_HPoly":
        return _HPoly({0: Fraction(x)})

    @staticmethod
    def term(x: Fraction, k: int) -> "_HPoly":
        return _HPoly({k: Fraction(x)})

    def __add__(self, other: "_HPoly") -> "_HPoly":
        out = dict(self.c)
        for k, v in other.c.items():
            out[k] = out.get(k, Fraction(0)) + v
        return _HPoly(out)

    def __mul__(self, other: "_HPoly") -> "_HPoly":
        out: dict[int, Fraction] = {}
        for k1, v1 in self.c.items():
            for k2, v2 in other.c.items():
                out[k1 + k2] = out.get(k1 + k2, Fraction(0)) + v1 * v2
        return _HPoly(out)

    def top(self) -> tuple[int, Fraction]:
        if not self.c:
            raise LimitError("zero polynomial has no top term")
        k = max(self.c)
        return k, self.c[k]

    def is_zero(self) -> bool:
        return not self.c


class _HRat:
    """Exact rational function in h, stored as a numerator/denominator pair."""

    __slots__ = ("num", "den")

    def __init__(self, num: _HPoly, den: _HPoly | None = None):
        if den is not None and den.is_zero():
            raise PoleError("zero denominator in h-rational arithmetic")
        self.num = num
        self.den = den or _HPoly.const(Fraction(1))

    def __mul__(self, other: "_HRat") -> "_HRat":
        return _HRat(self.num * other.num, self.den * other.den)

    def __add__(self, other: "_HRat") -> "_HRat":
        return _HRat(self.num * other.den + other.num * self.den, self.den * other.den)

    def limit_h_to_infinity(self) -> Fraction:
        """Leading behavior as h -> infinity: finite, zero, or LimitError."""
        if self.num.is_zero():
            return Fraction(0)
        kn, cn = self.num.top()
        kd, cd = self.den.top()
        if kn > kd:
            raise LimitError("coefficient diverges as hbar -> infinity")
        if kn < kd:
            return Fraction(0)
        return cn / cd


def _qpoch_h(x_const: Fraction, h_exp: int, d: int, q: Fraction) -> _HRat:
    """(x;q)_d as an h-rational for x = x_const * h^{h_exp}, splice for d < 0."""
    one = _HPoly.const(Fraction(1))
    if d >= 0:
        out = one
        qi = Fraction(1)
        for _ in range(d):
            out = out * (one + _HPoly.term(-qi * x_const, h_exp))
            qi *= q
        return _HRat(out)
    out = one
    qi = Fraction(1)
    for _ in range(-d):
        qi /= q
        out = out * (one + _HPoly.term(-qi * x_const, h_exp))
    return _HRat(one, out)


def _bracket_h(x: Fraction, d: int, q: Fraction, q_half: Fraction) -> _HRat:
    """{x}_d with hbar^{1/2} kept as the graded symbol h."""
    num = _qpoch_h(Fraction(1) / x, 2, d, q)     # (hbar/x; q)_d, hbar = h^2
    den = _qpoch_h(q / x, 0, d, q)               # (q/x; q)_d
    sign = _HRat(_HPoly.term((-q_half) ** d, -d))  # (-q^{1/2} h^{-1})^d
    return num * _HRat(den.den, den.num) * sign


def toda_limit(
    p: FixedPointChain, D: Sequence[int], params: ParamPoint
) -> VertexSeries:
    """Coefficientwise hbar -> infinity limit of the sharp-convention vertex series.

    hbar^{1/2} is treated as a graded symbol; the value params.h_half is
    ignored (only q and the equivariant parameters enter the limit).
    """
    f = p.flag
    D = tuple(int(x) for x in D)
    q, q_half = params.q, params.q_half
    vp = f.v_prime
    coeffs: dict[tuple[int, ...], Fraction] = {}
    for d in itertools.product(*(range(x + 1) for x in D)):
        total = _HRat(_HPoly({}))
        for asg in enumerate_degree_assignments(p, d):
            term = _HRat(_HPoly.const(q_half ** asg.n_of_d()))
            for m in range(1, f.n):
                for ej, ek in itertools.permutations(p.members(m), 2):
                    x = params.a[ej - 1] / params.a[ek - 1]
                    dd = asg.degree_of(m, ej) - asg.degree_of(m, ek)
                    b = _bracket_h(x, dd, q, q_half)
                    term = term * _HRat(b.den, b.num)
            for m in range(1, f.n - 1):
                for ej in p.members(m):
                    for ek in p.members(m + 1):
                        x = params.a[ej - 1] / params.a[ek - 1]
                        dd = asg.degree_of(m, ej) - asg.degree_of(m + 1, ek)
                        term = term * _bracket_h(x, dd, q, q_half)
            for ej in p.members(f.n - 1):
                for k in range(1, f.w + 1):
                    x = params.a[ej - 1] / params.a[k - 1]
                    term = term * _bracket_h(x, asg.degree_of(f.n - 1, ej), q, q_half)
            total = total + term
        # sharp conversion (-h)^{-<v',d>} tracked as a graded monomial
        conv_exp = -sum(v * x for v, x in zip(vp, d))
        conv = _HRat(_HPoly.term(Fraction((-1) ** conv_exp), conv_exp))
        coeffs[d] = (total * conv).limit_h_to_infinity()
    series = TruncatedSeries.make(f.n - 1, coeffs, D)
    return VertexSeries(series, "zh", vp, Fraction(0))
