"""Gates, run reports and the in-memory tables a scenario fills."""

from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass, field

from .estimates import EntropyEstimate
from .path_model import csv_header_comment


@dataclass(frozen=True)
class Gate:
    """A pass/fail check: |achieved - target| <= tolerance.

    ``margin`` is the observed discrepancy |achieved - target|.
    """

    name: str
    target: float
    provenance: str
    achieved: float
    tolerance: float

    @property
    def margin(self) -> float:
        return abs(self.achieved - self.target)

    @property
    def passed(self) -> bool:
        return bool(self.margin <= self.tolerance)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(margin=self.margin, passed=self.passed)
        return d


@dataclass(frozen=True)
class BoundGate(Gate):
    """One-sided check: achieved <= target + tolerance."""

    @property
    def margin(self) -> float:
        return max(self.achieved - self.target, 0.0)


def compare_estimators(a: EntropyEstimate, b: EntropyEstimate, sigmas: float = 3.0) -> Gate:
    """Pass iff |a - b| <= sigmas * sqrt(se_a^2 + se_b^2)."""
    tol = sigmas * math.hypot(a.stderr, b.stderr)
    return Gate(f"{a.estimator_tag} vs {b.estimator_tag}", b.value, f"{b.estimator_tag} estimate",
                a.value, tol)


@dataclass
class RunReport:
    scenario: str
    version: str
    seed: int
    config: dict
    estimates: dict[str, EntropyEstimate] = field(default_factory=dict)
    checks: dict[str, dict] = field(default_factory=dict)
    gates: list[Gate] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    tables: dict[str, io.StringIO] = field(default_factory=dict, repr=False)
    wall_clock: float = 0.0
    files: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.gates)

    # helpers used by scenarios
    def estimate(self, est: EntropyEstimate, key: str | None = None) -> EntropyEstimate:
        self.estimates[key or est.estimator_tag] = est
        return est

    def gate(self, name, target, provenance, achieved, tolerance, one_sided=False) -> Gate:
        cls = BoundGate if one_sided else Gate
        g = cls(name, float(target), provenance, float(achieved), float(tolerance))
        self.gates.append(g)
        return g

    def add(self, g: Gate) -> Gate:
        self.gates.append(g)
        return g

    def table(self, name: str, header: bool = True) -> io.StringIO:
        """A CSV buffer, by default already carrying the versioned header comment."""
        if name not in self.tables:
            buf = io.StringIO(newline="")
            if header:
                buf.write(csv_header_comment(self.version) + "\n")
            self.tables[name] = buf
        return self.tables[name]

    def summary(self, timestamp: str | None = None) -> dict:
        out = {
            "scenario": self.scenario,
            "version": self.version,
            "seed": self.seed,
            "config": self.config,
            "passed": self.passed,
            "estimates": {k: asdict(v) for k, v in self.estimates.items()},
            "checks": self.checks,
            "gates": [g.as_dict() for g in self.gates],
            "diagnostics": self.diagnostics,
            "files": self.files,
            "wall_clock_s": self.wall_clock,
        }
        if timestamp is not None:
            out["timestamp"] = timestamp
        return out
