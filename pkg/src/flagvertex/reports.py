"""Uniform PASS/FAIL reports with exact residual tables."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from .kernel import frac_str


@dataclass(frozen=True)
class Report:
    check: str
    status: str  # "PASS" | "FAIL"
    residuals: tuple[tuple[tuple[int, ...], Fraction], ...] = ()
    reliable_order: tuple[int, ...] = ()
    seed: int = 0
    details: tuple[tuple[str, str], ...] = ()

    @property
    def passed(self) -> bool:
        return self.status == "PASS"

    def to_json_obj(self) -> dict:
        return {
            "check": self.check,
            "status": self.status,
            "residuals": [
                {"deg": list(d), "value": frac_str(v)} for d, v in self.residuals
            ],
            "reliable_order": list(self.reliable_order),
            "seed": self.seed,
            "details": {k: v for k, v in self.details},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)


def make_report(
    check: str,
    ok: bool,
    residuals=(),
    reliable_order=(),
    seed: int = 0,
    details: dict[str, str] | None = None,
) -> Report:
    return Report(
        check=check,
        status="PASS" if ok else "FAIL",
        residuals=tuple((tuple(d), Fraction(v)) for d, v in residuals),
        reliable_order=tuple(reliable_order),
        seed=seed,
        details=tuple(sorted((details or {}).items())),
    )
