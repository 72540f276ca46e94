"""Verification reports and their JSON-lines serialization."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

RHS_FLOOR = 1e-300


def _clean(v: Any) -> Any:
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if hasattr(v, "tolist"):
        return _clean(v.tolist())
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


@dataclass
class VerificationReport:
    """Outcome of one named check: per-point records plus a verdict."""

    check: str
    passed: bool = True
    records: list[dict] = field(default_factory=list)
    fitted: dict[str, float] = field(default_factory=dict)
    tolerances: dict[str, float] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    kind: str = "check"

    def add(self, grid_point, lhs: float, rhs: float, **extra) -> float:
        ratio = float(lhs) / max(float(rhs), RHS_FLOOR)
        rec = {"check": self.check, "grid_point": grid_point, "lhs": float(lhs),
               "rhs": float(rhs), "ratio": ratio}
        rec.update(extra)
        self.records.append(rec)
        return ratio

    @property
    def max_ratio(self) -> float:
        return max((r["ratio"] for r in self.records), default=0.0)

    def worst(self) -> dict | None:
        if not self.records:
            return None
        return max(self.records, key=lambda r: r["ratio"])

    def summary(self) -> dict:
        return _clean({"type": "summary", "kind": self.kind, "check": self.check,
                       "passed": bool(self.passed), "n_records": len(self.records),
                       "max_ratio": self.max_ratio, "fitted": self.fitted,
                       "tolerances": self.tolerances, "notes": self.notes})

    def to_jsonl(self) -> str:
        lines = [json.dumps(_clean(dict(r, type=self.kind))) for r in self.records]
        lines.append(json.dumps(self.summary()))
        return "\n".join(lines) + "\n"


def write_jsonl(path, reports) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rep in reports:
            fh.write(rep.to_jsonl())
