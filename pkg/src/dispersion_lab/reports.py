"""Structured diagnostic results that serialize to JSON."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

SCHEMA_VERSION = 1


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps(payload: dict) -> str:
    return json.dumps(_plain(payload), indent=2, sort_keys=True, allow_nan=True) + "\n"


@dataclass
class Check:
    name: str
    value: Any
    tolerance: Any
    passed: bool
    note: str = ""


@dataclass
class DiagnosticsReport:
    """Outcome of a validation or consistency diagnostic.

    ``passed`` is the conjunction of all checks. ``data`` carries any
    numbers worth reporting that are not pass/fail themselves.
    """

    name: str
    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, value, tolerance, passed, note="") -> Check:
        check = Check(name, value, tolerance, bool(passed), note)
        self.checks.append(check)
        return check

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "report": self.name,
            "passed": self.passed,
            "checks": [asdict(c) for c in self.checks],
            "data": self.data,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())


CLASSIFICATIONS = ("diffusive", "antidiffusive", "mixed")


@dataclass
class SignReport:
    """Sign verdict for a turbulent-viscosity condition over a sampled grid.

    ``witness_points`` holds ``(location, sign)`` pairs; ``location`` is a
    grid value or, for grid-difference checks, a pair of neighbouring grid
    values. ``diffusive_sign`` is the derivative sign that corresponds to a
    nonnegative turbulent viscosity (-1 for KdV's phi', +1 for the NLS
    condition on lambda*phi*sqrt(1-lambda^2)).
    """

    classification: str
    witness_points: list
    tolerance: float
    diffusive_sign: int
    quantity: str = ""
    values: dict = field(default_factory=dict)
    allow_zero: bool = False

    def __post_init__(self):
        if self.classification not in CLASSIFICATIONS:
            raise ValueError(f"classification must be one of {CLASSIFICATIONS}")

    @classmethod
    def from_signs(cls, witness_points, tolerance, diffusive_sign, quantity="", values=None,
                   allow_zero=False):
        """Classify from derivative signs in {-1, 0, +1}.

        With ``allow_zero`` a vanishing derivative counts as satisfying the
        diffusive condition (a non-strict inequality).
        """
        signs = [s for _, s in witness_points]
        ok = [s == diffusive_sign or (allow_zero and s == 0) for s in signs]
        anti = [s == -diffusive_sign or (allow_zero and s == 0) for s in signs]
        if signs and all(ok):
            verdict = "diffusive"
        elif signs and all(anti):
            verdict = "antidiffusive"
        else:
            verdict = "mixed"
        return cls(verdict, list(witness_points), float(tolerance), int(diffusive_sign), quantity,
                   dict(values or {}), allow_zero)

    @property
    def violations(self) -> list:
        """Witness locations where the diffusive condition fails."""
        return [loc for loc, s in self.witness_points
                if s != self.diffusive_sign and not (self.allow_zero and s == 0)]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "quantity": self.quantity,
            "classification": self.classification,
            "diffusive_sign": self.diffusive_sign,
            "tolerance": self.tolerance,
            "witness_points": [{"at": loc, "sign": s} for loc, s in self.witness_points],
            "violations": self.violations,
            "values": self.values,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())
