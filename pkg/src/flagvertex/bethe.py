"""Multiprecision solver for the nested Bethe equations and transfer-matrix cross-checks.

The equations for level-i roots sigma^i_alpha (level-0 "roots" are the
equivariant parameters, the last level is empty) are used in cleared
polynomial form,

    zeta_i   prod_b (s hbar - rho_b) prod_{b != a} (s - sigma_b hbar) prod_g (s - tau_g)
  = zeta_{i+1} prod_b (s - rho_b)   prod_{b != a} (s hbar - sigma_b) prod_g (s - tau_g hbar),

which makes spurious zero roots explicit rejects.  The cross-check
diagonalizes the exact XXZ transfer matrix built in the hatted variables
a_hat = sqrt(a), x_hat = sqrt(x) with the dressed twists z_i = zeta_i
hbar^{g_i} (g_1 = w/2, g_{i+1} = g_i + (v_{i+1} - v_{i-1})/2), the unique
dictionary under which the displayed eigenvalue formula

    Lambda(x) = sum_i z_i prod (x hbar^{1/2} - sigma^{i-1} hbar^{-1/2})/(x - sigma^{i-1})
                         prod (x hbar^{-1/2} - sigma^i hbar^{1/2})/(x - sigma^i)

is pole-free exactly on the solutions of the undressed equations.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath as mp

from .errors import (
    CompletenessWarning,
    ConvergenceError,
    DegenerateRootError,
    JacobianSingular,
    PoleError,
    RangeError,
)
from .quiver import FlagData
from .reports import Report, make_report


@dataclass(frozen=True)
class BetheProblem:
    """Root counts from the flag data plus numeric hbar, a, zeta at fixed precision."""

    flag: FlagData
    hbar: str | float | Fraction
    a: tuple[str | float | Fraction, ...]
    zeta: tuple[str | float | Fraction, ...]
    precision: int = 50

    def __post_init__(self) -> None:
        if self.precision < 30:
            raise RangeError("precision must be at least 30 digits")
        if len(self.a) != self.flag.w:
            raise RangeError("need w equivariant parameters")
        if len(self.zeta) < self.flag.n:
            raise RangeError("need n twist parameters")

    @property
    def root_counts(self) -> tuple[int, ...]:
        return self.flag.v

    def mp_values(self):
        hbar = mp.mpmathify(str(self.hbar))
        a = [mp.mpmathify(str(x)) for x in self.a]
        zeta = [mp.mpmathify(str(x)) for x in self.zeta]
        return hbar, a, zeta

    def weight(self) -> tuple[int, ...]:
        return self.flag.level_sizes

    def block_dimension(self) -> int:
        import math

        out = math.factorial(self.flag.w)
        for s in self.weight():
            out //= math.factorial(s)
        return out


@dataclass
class BetheSolution:
    roots: tuple[tuple[complex, ...], ...]
    residual: float
    multiplicity_flag: bool = False

    def level(self, i: int):
        return self.roots[i - 1]


def _levels(problem: BetheProblem, roots) -> list[list]:
    """Root collections per level including the framing level 0 and empty level n."""
    _, a, _ = problem.mp_values()
    return [list(a)] + [list(level) for level in roots] + [[]]


def residual(roots: Sequence[Sequence], problem: BetheProblem) -> list:
    """Per-equation residual of the cleared polynomial system (LHS - RHS)."""
    hbar, a, zeta = problem.mp_values()
    collections = _levels(problem, roots)
    guard = mp.mpf(10) ** (-(problem.precision // 2))
    out = []
    for i in range(1, problem.flag.n):
        level = collections[i]
        prev, nxt = collections[i - 1], collections[i + 1]
        for al, s in enumerate(level):
            if abs(s) <= guard:
                raise DegenerateRootError("zero Bethe root")
            for be, s2 in enumerate(level):
                if be != al and abs(s - s2) <= guard:
                    raise DegenerateRootError("colliding Bethe roots within a level")
            lhs = zeta[i - 1]
            rhs = zeta[i]
            for rho in prev:
                lhs *= s * hbar - rho
                rhs *= s - rho
            for be, s2 in enumerate(level):
                if be == al:
                    continue
                lhs *= s - s2 * hbar
                rhs *= s * hbar - s2
            for tau in nxt:
                lhs *= s - tau
                rhs *= s - tau * hbar
            out.append(lhs - rhs)
    return out


def _flatten(roots) -> list:
    return [x for level in roots for x in level]


def _unflatten(vec, counts):
    out, pos = [], 0
    for c in counts:
        out.append(tuple(vec[pos : pos + c]))
        pos += c
    return out


def _newton(problem: BetheProblem, seed: list, max_iter: int = 80):
    counts = problem.root_counts
    ndim = sum(counts)
    x = [mp.mpc(v) for v in seed]
    tol = mp.mpf(10) ** (-(problem.precision - 10))
    step = mp.mpf(10) ** (-(problem.precision // 2))
    for _ in range(max_iter):
        try:
            f = residual(_unflatten(x, counts), problem)
        except DegenerateRootError as exc:
            raise ConvergenceError(str(exc)) from exc
        if max(abs(v) for v in f) < tol:
            return x
        jac = mp.zeros(ndim, ndim)
        for j in range(ndim):
            xp = list(x)
            h = step * (1 + abs(x[j]))
            xp[j] = x[j] + h
            try:
                fp = residual(_unflatten(xp, counts), problem)
            except DegenerateRootError as exc:
                raise ConvergenceError(str(exc)) from exc
            for i in range(ndim):
                jac[i, j] = (fp[i] - f[i]) / h
        try:
            delta = mp.lu_solve(jac, mp.matrix([-v for v in f]))
        except ZeroDivisionError as exc:
            raise JacobianSingular("singular Jacobian in Newton step") from exc
        x = [xi + delta[i] for i, xi in enumerate(x)]
    raise ConvergenceError("Newton did not converge from this seed")


def _canonical(vec, counts):
    levels = _unflatten(vec, counts)
    return tuple(
        tuple(sorted(level, key=lambda z: (mp.re(z), mp.im(z)))) for level in levels
    )


def _seed_pool(problem: BetheProblem, seeds: int, rng) -> list[list]:
    """Both decoupled-regime families sigma ~ a_k and sigma ~ a_k/hbar, plus noise."""
    hbar, a, _ = problem.mp_values()
    counts = problem.root_counts
    candidates = [ak for ak in a] + [ak / hbar for ak in a]
    pool: list[list] = []
    for combo in itertools.combinations(range(len(candidates)), counts[0] if counts else 0):
        base = [candidates[i] for i in combo]
        rest: list = []
        for lvl in counts[1:]:
            rest.extend(base[:lvl] if len(base) >= lvl else list(candidates[:lvl]))
        pool.append(list(base) + rest)
    out = []
    for base in pool:
        for _ in range(max(1, seeds // max(1, len(pool)))):
            out.append(
                [
                    v * (1 + mp.mpf(rng.uniform(0.02, 0.2)))
                    + mp.mpc(0, 1) * mp.mpf(rng.uniform(0.01, 0.1)) * abs(v)
                    for v in base
                ]
            )
    return out


def solve(problem: BetheProblem, strategy: str = "newton", seeds: int = 24, seed: int = 7) -> list[BetheSolution]:
    """All distinct solutions found from the seed families, deduplicated and sorted.

    The homotopy strategy walks zeta ratios from the decoupled regime to the
    target in geometric steps, Newton-tracking each family; both candidate
    branch families are seeded since the decoupling limit of either sign is
    admissible.
    """
    import random

    if strategy not in ("newton", "homotopy"):
        raise RangeError(f"unknown strategy {strategy!r}")
    rng = random.Random(seed)
    counts = problem.root_counts
    tol = mp.mpf(10) ** (-(problem.precision - 10))
    solutions: dict = {}
    with mp.workdps(problem.precision + 15):
        pool = _seed_pool(problem, seeds, rng)
        for start in pool:
            try:
                if strategy == "newton":
                    vec = _newton(problem, start)
                else:
                    vec = start
                    steps = 8
                    for k in range(1, steps + 1):
                        frac = mp.mpf(k) / steps
                        interp = BetheProblem(
                            problem.flag,
                            problem.hbar,
                            problem.a,
                            tuple(
                                str(mp.mpmathify(str(z)) ** frac)
                                for z in problem.zeta
                            ),
                            problem.precision,
                        )
                        vec = _newton(interp, vec)
                    vec = _newton(problem, vec)
            except (ConvergenceError, JacobianSingular):
                continue
            key_levels = _canonical(vec, counts)
            collision = mp.mpf(10) ** (-(problem.precision // 2))
            rounded = tuple(
                tuple((mp.nstr(mp.re(z), 25), mp.nstr(mp.im(z), 25)) for z in lvl)
                for lvl in key_levels
            )
            duplicate = False
            for known in solutions.values():
                dist = max(
                    abs(x - y)
                    for lx, ly in zip(known.roots, key_levels)
                    for x, y in zip(lx, ly)
                )
                if dist < collision:
                    duplicate = True
                    break
            if duplicate:
                continue
            res = max(abs(v) for v in residual(key_levels, problem))
            if res < tol:
                solutions[rounded] = BetheSolution(key_levels, float(res))
    found = sorted(
        solutions.values(),
        key=lambda s: tuple((float(mp.re(z)), float(mp.im(z))) for z in s.roots[0]),
    )
    expected = problem.block_dimension()
    if len(found) != expected:
        warnings.warn(
            f"found {len(found)} Bethe solutions, weight block has dimension {expected}",
            CompletenessWarning,
        )
    return found


# ---------------------------------------------------------------------------
# Eigenvalue reconstruction
# ---------------------------------------------------------------------------


def _twist_exponents(flag: FlagData) -> list[Fraction]:
    """g_i with z_i = zeta_i hbar^{g_i}: g_1 = w/2, g_{i+1} = g_i + (v_{i+1}-v_{i-1})/2."""
    g = [Fraction(flag.w, 2)]
    for i in range(1, flag.n):
        g.append(g[-1] + Fraction(flag.rank(i + 1) - flag.rank(i - 1), 2))
    return g


def lambda_eval(x, solution: BetheSolution, problem: BetheProblem):
    """Lambda(x) from the Bethe roots; pole-free at the roots by the equations."""
    hbar, a, zeta = problem.mp_values()
    hh = mp.sqrt(hbar)
    x = mp.mpmathify(str(x))
    collections = [list(a)] + [list(l) for l in solution.roots] + [[]]
    for coll in collections[:-1]:
        for v in coll:
            if abs(x - v) == 0:
                raise PoleError("Lambda evaluated at a pole")
    g = _twist_exponents(problem.flag)
    total = mp.mpf(0)
    for i in range(1, problem.flag.n + 1):
        term = zeta[i - 1] * hbar ** mp.mpf(g[i - 1])
        for rho in collections[i - 1]:
            term *= (x * hh - rho / hh) / (x - rho)
        for sig in collections[i]:
            term *= (x / hh - sig * hh) / (x - sig)
        total += term
    return total


def h_eval(i: int, solution: BetheSolution, problem: BetheProblem):
    """Eigenvalue of the nonlocal Hamiltonian H_i on this Bethe branch."""
    hbar, a, zeta = problem.mp_values()
    hh = mp.sqrt(hbar)
    g = _twist_exponents(problem.flag)
    out = zeta[0] * hbar ** mp.mpf(g[0])
    for k, ak in enumerate(a, start=1):
        if k == i:
            continue
        out *= (a[i - 1] * hh - ak / hh) / (a[i - 1] - ak)
    for sig in solution.roots[0]:
        out *= (a[i - 1] / hh - sig * hh) / (a[i - 1] - sig)
    return out


# ---------------------------------------------------------------------------
# Numeric XXZ operators in the hatted variables
# ---------------------------------------------------------------------------


def _r_tilde_numeric(x, hh, n: int):
    den = hh * x - 1 / (hh * x)
    if den == 0 or x == 1 or x == -1:
        raise PoleError("numeric Rtilde pole")
    scale = den / (x - 1 / x)
    gamma = (x - 1 / x) / den * scale
    beta = (hh - 1 / hh) / den * scale
    M = mp.zeros(n * n)
    for aa in range(n):
        M[aa * n + aa, aa * n + aa] = scale
        for bb in range(n):
            if aa != bb:
                M[aa * n + bb, aa * n + bb] = gamma
    for aa in range(n):
        for bb in range(aa + 1, n):
            M[aa * n + bb, bb * n + aa] = x * beta
            M[bb * n + aa, aa * n + bb] = beta / x
    return M


def transfer_numeric(x, problem: BetheProblem, n: int | None = None):
    """Exact-formula transfer matrix at hat variables, dressed twists, mpmath arithmetic."""
    hbar, a, zeta = problem.mp_values()
    n = n if n is not None else problem.flag.n
    w = problem.flag.w
    hh = mp.sqrt(hbar)
    ahat = [mp.sqrt(v) for v in a]
    xhat = mp.sqrt(mp.mpmathify(str(x)))
    g = _twist_exponents(problem.flag)
    ztw = [zeta[i] * hbar ** mp.mpf(g[i]) for i in range(n)]
    dim = n**w
    blocks = [[None] * n for _ in range(n)]
    for al in range(n):
        m = mp.zeros(dim)
        for c in range(dim):
            m[c, c] = ztw[al]
        blocks[al][al] = m
    for k in range(1, w + 1):
        r4 = _r_tilde_numeric(xhat / ahat[k - 1], hh, n)
        stride = n ** (w - k)
        new_blocks = [[None] * n for _ in range(n)]
        for al in range(n):
            for be in range(n):
                acc = mp.zeros(dim)
                hit = False
                for ga in range(n):
                    blk = blocks[ga][be]
                    if blk is None:
                        continue
                    for r in range(dim):
                        rk = (r // stride) % n
                        base = r - rk * stride
                        for b in range(n):
                            coeff = r4[al * n + rk, ga * n + b]
                            if coeff == 0:
                                continue
                            hit = True
                            for c in range(dim):
                                acc[r, c] += coeff * blk[base + b * stride, c]
                new_blocks[al][be] = acc if hit else None
        blocks = new_blocks
    total = mp.zeros(dim)
    for al in range(n):
        if blocks[al][al] is not None:
            total += blocks[al][al]
    return total


def _weight_rows(n: int, w: int, weight: Sequence[int]) -> list[int]:
    rows = []
    for idx, J in enumerate(itertools.product(range(1, n + 1), repeat=w)):
        content = [0] * n
        for j in J:
            content[j - 1] += 1
        if tuple(content) == tuple(weight):
            rows.append(idx)
    return rows


def spectral_crosscheck(problem: BetheProblem, precision: int | None = None, seed: int = 7) -> Report:
    """Match every Bethe solution to a transfer-matrix eigenvector branch.

    PASS iff the solution count equals the weight-block dimension and, for
    every matched pair, Lambda(x) at three sample points and every h_i agree
    with the Rayleigh quotients of the exact operators to 10^-(precision-15).
    """
    precision = precision or problem.precision
    n, w = problem.flag.n, problem.flag.w
    tol = mp.mpf(10) ** (-(precision - 15))
    details: dict[str, str] = {}
    with mp.workdps(precision + 15):
        sols = solve(problem, "newton", seeds=32, seed=seed)
        expected = problem.block_dimension()
        details["solutions"] = str(len(sols))
        details["block_dim"] = str(expected)
        if len(sols) != expected:
            warnings.warn("Bethe completeness failed at these twists", CompletenessWarning)
            return make_report("bethe-spectral", False, seed=seed, details=details)
        hbar, a, zeta = problem.mp_values()
        samples = [mp.mpf(10), mp.mpf(7) / 2, mp.mpf(13) / 3]
        rows = _weight_rows(n, w, problem.weight())
        t_mats = []
        for x in samples:
            full = transfer_numeric(x, problem)
            t_mats.append(mp.matrix([[full[r, c] for c in rows] for r in rows]))
        evals, evecs = mp.eig(t_mats[0])
        used = set()
        ok = True
        max_err = mp.mpf(0)
        hh = mp.sqrt(hbar)
        # numeric nonlocal Hamiltonians via residues of the transfer matrix
        h_ops = _extract_h_numeric(problem, rows)
        for s_idx, sol in enumerate(sols):
            lam0 = lambda_eval(samples[0], sol, problem)
            branch = min(
                (b for b in range(len(evals)) if b not in used),
                key=lambda b: abs(evals[b] - lam0),
            )
            used.add(branch)
            vec = mp.matrix([evecs[r, branch] for r in range(len(rows))])
            norm = sum(abs(v) ** 2 for v in vec)
            for j, x in enumerate(samples):
                ray = sum(
                    mp.conj(vec[r]) * sum(t_mats[j][r, c] * vec[c] for c in range(len(rows)))
                    for r in range(len(rows))
                ) / norm
                err = abs(lambda_eval(x, sol, problem) - ray)
                max_err = max(max_err, err)
                if err > tol:
                    ok = False
            for i in range(1, w + 1):
                ray = sum(
                    mp.conj(vec[r]) * sum(h_ops[i - 1][r, c] * vec[c] for c in range(len(rows)))
                    for r in range(len(rows))
                ) / norm
                err = abs(h_eval(i, sol, problem) - ray)
                max_err = max(max_err, err)
                if err > tol:
                    ok = False
        details["max_error"] = mp.nstr(max_err, 8)
    return make_report("bethe-spectral", ok, seed=seed, details=details)


def _extract_h_numeric(problem: BetheProblem, rows: list[int]):
    """H_k on the weight block from the simple-pole expansion of T(x)."""
    hbar, a, _ = problem.mp_values()
    w = problem.flag.w
    hh = mp.sqrt(hbar)
    kappa = (hh - 1 / hh) / 2
    samples = [mp.mpf(17) / 2 + k for k in range(w + 1)]
    mats = []
    for x in samples:
        full = transfer_numeric(x, problem)
        mats.append(mp.matrix([[full[r, c] for c in rows] for r in rows]))
    moment = mp.zeros(w + 1)
    for s, x in enumerate(samples):
        moment[s, 0] = mp.mpf(1)
        for k in range(w):
            moment[s, k + 1] = kappa * (x + a[k]) / (x - a[k])
    minv = mp.inverse(moment)
    out = []
    for comp in range(1, w + 1):
        acc = mp.zeros(len(rows))
        for s in range(w + 1):
            acc += mats[s] * minv[comp, s]
        out.append(acc)
    return out
