"""Report containers shared by the estimators and the CLI.

Every number that leaves the toolkit travels in a :class:`ReportRow` with a
``bound_kind`` saying how it relates to the target quantity:

``exact``             the target quantity itself
``upper`` / ``lower`` a certified bound
``probe``             a heuristic, certified in neither direction
``limsup-surrogate``  max over a finite tail standing in for a limsup
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

from .errors import ArgumentError
from .group import FiniteSubset

BOUND_KINDS = ("exact", "upper", "lower", "probe", "limsup-surrogate")

ScheduleItem = tuple[str, FiniteSubset]


def normalize_schedule(schedule: Sequence[Union[FiniteSubset, ScheduleItem]]) -> list[ScheduleItem]:
    """Accept bare subsets or ``(label, subset)`` pairs; return pairs."""
    out = []
    for i, item in enumerate(schedule):
        if isinstance(item, FiniteSubset):
            out.append((f"F{i}", item))
        else:
            label, F = item
            out.append((str(label), F))
    if not out:
        raise ArgumentError("schedule must be nonempty")
    for label, F in out:
        if len(F) == 0:
            raise ArgumentError(f"schedule entry {label} is empty")
    return out


@dataclass
class ReportRow:
    label: str
    size: int
    value: float
    bound_kind: str
    running_min: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "label": self.label,
            "size": self.size,
            "value_nats": self.value,
            "value_bits": nats_to_bits(self.value),
            "bound_kind": self.bound_kind,
        }
        if self.running_min is not None:
            d["running_min_nats"] = self.running_min
        if self.extra:
            d["extra"] = self.extra
        return d


@dataclass
class EntropyReport:
    quantity: str
    rows: list[ReportRow]
    estimate: float
    bound_kind: str
    notes: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def values(self) -> list[float]:
        return [r.value for r in self.rows]

    @property
    def running_min(self) -> list[float]:
        return [r.running_min for r in self.rows]

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "estimate_nats": self.estimate,
            "estimate_bits": nats_to_bits(self.estimate),
            "bound_kind": self.bound_kind,
            "notes": list(self.notes),
            "meta": self.meta,
            "rows": [r.to_dict() for r in self.rows],
        }


def nats_to_bits(x: float) -> float:
    return x / math.log(2)


def with_running_min(rows: list[ReportRow]) -> list[ReportRow]:
    best = math.inf
    for r in rows:
        best = min(best, r.value)
        r.running_min = best
    return rows
