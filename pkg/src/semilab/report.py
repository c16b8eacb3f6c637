from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


def plain(value: Any) -> Any:
    """Convert numpy scalars/arrays (possibly nested) into JSON-ready Python objects."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


@dataclass
class CheckReport:
    """Two-sided verdict of an inequality or identity check.

    ``lhs`` is the measured quantity, ``rhs`` the bound it is compared with.
    """

    lhs: float
    rhs: float
    passed: bool
    grid: Any = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return plain({"lhs": self.lhs, "rhs": self.rhs, "pass": self.passed,
                      "grid": self.grid, **self.details})

    def __bool__(self) -> bool:
        return bool(self.passed)
