"""
Precision reports: per-trial position and angle errors in the
"Δd (Δr, Δp, Δy)" form, millimetres and degrees, with aggregates that are
always recomputed from the rows.
"""
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from rich.table import Table

from deskasm.se3 import Pose, wrap_angle

COLUMNS = ("d_mm", "roll_deg", "pitch_deg", "yaw_deg", "x_mm", "y_mm", "z_mm")


@dataclass
class PrecisionRow:
    label:     str
    kind:      str
    d_mm:      float
    roll_deg:  float
    pitch_deg: float
    yaw_deg:   float
    x_mm:      float
    y_mm:      float
    z_mm:      float

    def formatted(self) -> str:
        return f"{self.d_mm:.2f} ({self.roll_deg:.2f}, {self.pitch_deg:.2f}, {self.yaw_deg:.2f})"


def pose_row(label: str, estimate: Pose, truth: Pose, kind: str = "") -> PrecisionRow:
    """Errors of *estimate* against *truth*: position difference and roll/pitch/yaw differences."""
    dp = (estimate.position - truth.position) * 1000.0
    e, t = estimate.rpy(), truth.rpy()
    ang = [math.degrees(wrap_angle(a - b)) for a, b in zip(e, t)]
    return PrecisionRow(label, kind, float(np.linalg.norm(dp)), *ang, *map(float, dp))


@dataclass
class PrecisionReport:
    title:    str
    rows:     list[PrecisionRow] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)      # trial labels without a detection

    def add(self, row: PrecisionRow) -> PrecisionRow:
        self.rows.append(row)
        return row

    def kinds(self) -> list[str]:
        return list(dict.fromkeys(r.kind for r in self.rows))

    def aggregate(self, kind: str | None = None) -> dict[str, float]:
        """Mean absolute error per column over the rows of *kind* (all rows when None)."""
        rows = [r for r in self.rows if kind is None or r.kind == kind]
        if not rows:
            return {c: 0.0 for c in COLUMNS}
        return {c: float(np.mean([abs(getattr(r, c)) for r in rows])) for c in COLUMNS}

    def maximum(self, kind: str | None = None) -> dict[str, float]:
        rows = [r for r in self.rows if kind is None or r.kind == kind]
        return {c: max((abs(getattr(r, c)) for r in rows), default=0.0) for c in COLUMNS}

    def to_dict(self) -> dict:
        return {"title": self.title, "rows": [asdict(r) for r in self.rows],
                "aggregate": {k or "all": self.aggregate(k) for k in self.kinds()},
                "failures": list(self.failures)}

    def table(self) -> Table:
        t = Table(title=self.title)
        for name in ("trial", "kind", "Δd (Δr, Δp, Δy)", "Δx mm", "Δy mm", "Δz mm"):
            t.add_column(name, justify="right" if name not in ("trial", "kind") else "left")
        for r in self.rows:
            t.add_row(r.label, r.kind, r.formatted(), f"{r.x_mm:.2f}", f"{r.y_mm:.2f}", f"{r.z_mm:.2f}")
        for k in self.kinds():
            a = self.aggregate(k)
            t.add_row("mean |Δ|", k, f"{a['d_mm']:.2f} ({a['roll_deg']:.2f}, {a['pitch_deg']:.2f}, "
                      f"{a['yaw_deg']:.2f})", f"{a['x_mm']:.2f}", f"{a['y_mm']:.2f}", f"{a['z_mm']:.2f}",
                      style="bold")
        return t
