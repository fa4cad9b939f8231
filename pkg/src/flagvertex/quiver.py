"""Flag-quiver combinatorics: dimension vectors, fixed-point chains, degree assignments.

A type-A quiver with gauge ranks v_1 <= ... <= v_{n-1} and framing rank w has
torus fixed points labelled by nested chains V_1 subset ... subset V_{n-1} of
{1..w} with |V_m| = v_m.  A quasimap degree at a fixed point is an assignment
of a nonnegative integer to every (level, chain element) pair, weakly
decreasing up the chain.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

from .errors import RangeError, ShapeError


@dataclass(frozen=True)
class FlagData:
    """Gauge ranks v_1..v_{n-1} and framing rank w, with v_0 = 0 and v_n = w."""

    v: tuple[int, ...]
    w: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "v", tuple(int(x) for x in self.v))
        if not self.v:
            raise ShapeError("at least one gauge node is required")
        ranks = (0,) + self.v + (self.w,)
        if any(b < a for a, b in zip(ranks, ranks[1:])) or self.v[0] <= 0:
            raise ShapeError("ranks must satisfy 0 < v_1 <= ... <= v_{n-1} <= w")

    @property
    def n(self) -> int:
        return len(self.v) + 1

    def rank(self, m: int) -> int:
        """v_m with the conventions v_0 = 0 and v_n = w."""
        if m == 0:
            return 0
        if m == self.n:
            return self.w
        return self.v[m - 1]

    @property
    def level_sizes(self) -> tuple[int, ...]:
        """s_m = v_m - v_{m-1} for m = 1..n; these sum to w."""
        return tuple(self.rank(m) - self.rank(m - 1) for m in range(1, self.n + 1))

    @property
    def v_prime(self) -> tuple[int, ...]:
        """v'_m for m = 1..n-1: v'_m = v_{m+1} - v_{m-1} except v'_{n-1} = w - v_{n-2}.

        For a single gauge node both defining clauses give v'_1 = w.
        """
        out = []
        for m in range(1, self.n):
            if m == self.n - 1:
                out.append(self.w - self.rank(self.n - 2))
            else:
                out.append(self.rank(m + 1) - self.rank(m - 1))
        return tuple(out)

    def fixed_point_count(self) -> int:
        denom = 1
        for s in self.level_sizes:
            denom *= math.factorial(s)
        return math.factorial(self.w) // denom

    def to_json(self) -> str:
        return json.dumps({"v": list(self.v), "w": self.w}, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "FlagData":
        obj = json.loads(text)
        return FlagData(tuple(obj["v"]), int(obj["w"]))


@dataclass(frozen=True)
class FixedPointChain:
    """A nested chain V_1 subset ... subset V_{n-1} of framing indices (1-based, sorted)."""

    flag: FlagData
    levels: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        sets = [frozenset(level) for level in self.levels]
        if len(sets) != self.flag.n - 1:
            raise ShapeError("chain must have n-1 levels")
        for m, level in enumerate(sets):
            if len(self.levels[m]) != len(level) or len(level) != self.flag.v[m]:
                raise ShapeError(f"level {m+1} must have {self.flag.v[m]} distinct elements")
            if any(not 1 <= k <= self.flag.w for k in level):
                raise RangeError("chain elements must lie in 1..w")
            if m > 0 and not sets[m - 1] <= level:
                raise ShapeError("levels must be nested")

    def level_of(self, k: int) -> int:
        """Minimal level containing k, or n when k appears only in the framing."""
        if not 1 <= k <= self.flag.w:
            raise RangeError(f"index {k} outside 1..{self.flag.w}")
        for m, level in enumerate(self.levels, start=1):
            if k in level:
                return m
        return self.flag.n

    def members(self, m: int) -> tuple[int, ...]:
        """Sorted members of V_m; m = n returns the full framing 1..w."""
        if m == self.flag.n:
            return tuple(range(1, self.flag.w + 1))
        return self.levels[m - 1]

    def to_json_obj(self) -> list[list[int]]:
        return [list(level) for level in self.levels]


def enumerate_fixed_points(f: FlagData) -> list[FixedPointChain]:
    """All chains in lexicographic canonical order; count = w!/(s_1!...s_n!)."""
    chains: list[FixedPointChain] = []

    def extend(prefix: list[tuple[int, ...]], m: int) -> None:
        if m == f.n:
            chains.append(FixedPointChain(f, tuple(prefix)))
            return
        prev = prefix[-1] if prefix else ()
        new_count = f.v[m - 1] - len(prev)
        pool = [k for k in range(1, f.w + 1) if k not in prev]
        for extra in itertools.combinations(pool, new_count):
            prefix.append(tuple(sorted(prev + extra)))
            extend(prefix, m + 1)
            prefix.pop()

    extend([], 1)
    chains.sort(key=lambda c: c.levels)
    return chains


@dataclass(frozen=True)
class DegreeAssignment:
    """Degrees d_m(k) >= 0 on chain members, weakly decreasing along the chain.

    ``deg[m-1]`` maps each member of V_m to its degree; the chain-induced
    admissibility condition is d_m(k) >= d_{m+1}(k) for every k in V_m.
    """

    point: FixedPointChain
    deg: tuple[tuple[tuple[int, int], ...], ...]

    def degree_of(self, m: int, k: int) -> int:
        for kk, d in self.deg[m - 1]:
            if kk == k:
                return d
        raise RangeError(f"element {k} not in level {m}")

    @property
    def level_totals(self) -> tuple[int, ...]:
        return tuple(sum(d for _, d in level) for level in self.deg)

    def n_of_d(self) -> int:
        """N(d) = sum_m v'_m d_m with the section-3 v' convention."""
        vp = self.point.flag.v_prime
        return sum(v * d for v, d in zip(vp, self.level_totals))


def enumerate_degree_assignments(
    p: FixedPointChain, d: Sequence[int]
) -> list[DegreeAssignment]:
    """All assignments with level totals exactly d, enumerated top level down.

    Depth-first from level n-1 downward so the monotonicity bound
    d_m(k) >= d_{m+1}(k) prunes early; returns the empty list when no
    assignment exists.
    """
    f = p.flag
    d = tuple(int(x) for x in d)
    if len(d) != f.n - 1:
        raise ShapeError("degree vector length must be n-1")
    if any(x < 0 for x in d):
        raise RangeError("degree vector must be componentwise nonnegative")

    levels = [p.members(m) for m in range(1, f.n)]
    out: list[DegreeAssignment] = []

    def compositions(members: tuple[int, ...], total: int, lower: dict[int, int]) -> Iterator[dict[int, int]]:
        """All degree rows on ``members`` summing to ``total`` with per-element lower bounds."""
        if sum(lower.get(k, 0) for k in members) > total:
            return
        if not members:
            if total == 0:
                yield {}
            return
        head, tail = members[0], members[1:]
        tail_min = sum(lower.get(k, 0) for k in tail)
        for value in range(lower.get(head, 0), total - tail_min + 1):
            for rest in compositions(tail, total - value, lower):
                yield {head: value, **rest}

    def descend(m_idx: int, above: dict[int, int], rows: list[dict[int, int]]) -> None:
        if m_idx < 0:
            deg = tuple(
                tuple(sorted(rows[m].items())) for m in range(f.n - 1)
            )
            out.append(DegreeAssignment(p, deg))
            return
        for row in compositions(levels[m_idx], d[m_idx], above):
            rows[m_idx] = row
            descend(m_idx - 1, row, rows)

    descend(f.n - 2, {}, [dict() for _ in range(f.n - 1)])
    out.sort(key=lambda a: a.deg)
    return out


def level_of(p: FixedPointChain, k: int) -> int:
    """Minimal level of k in the chain (n for framing-only indices)."""
    return p.level_of(k)
