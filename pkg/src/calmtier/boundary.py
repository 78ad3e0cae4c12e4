"""Empirical check of a tier against simulated executions.

The expected pattern per tier, over every interleaving (or the sampled ones
for larger specs):

* M   - valid in all three modes
* M-O - valid under causal and orchestrated; when the spec has handoffs, at
  least one uncoordinated interleaving is invalid
* NM  - valid under orchestration, and at least one invalid interleaving
  under both uncoordinated and causal execution
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from calmtier.classifier import Tier
from calmtier.engine import Mode, RunResult, enumerate_runs, is_exhaustive
from calmtier.task import TaskSpec


@dataclass(frozen=True)
class ModeStats:
    mode: Mode
    runs: int
    valid: int
    mean_cost: Fraction
    exhaustive: bool

    @property
    def rate(self) -> Fraction:
        return Fraction(self.valid, self.runs)

    @classmethod
    def of(cls, mode: Mode, runs: list[RunResult], exhaustive: bool) -> ModeStats:
        return cls(mode, len(runs), sum(r.valid for r in runs),
                   Fraction(sum(r.cost_units for r in runs), len(runs)), exhaustive)


def profile(spec: TaskSpec, limit: int = 64, seed: int = 0) -> dict[Mode, ModeStats]:
    exhaustive = is_exhaustive(spec)
    return {m: ModeStats.of(m, enumerate_runs(spec, m, limit, seed=seed), exhaustive)
            for m in Mode}


def matches(tier: Tier, stats: dict[Mode, ModeStats], has_handoffs: bool) -> bool:
    u, c, o = (stats[m].rate for m in (Mode.UNCOORDINATED, Mode.CAUSAL, Mode.ORCHESTRATED))
    if tier is Tier.M:
        return u == c == o == 1
    if tier is Tier.M_O:
        return c == o == 1 and (u < 1 if has_handoffs else True)
    return o == 1 and u < 1 and c < 1


def empirical_tier(stats: dict[Mode, ModeStats]) -> Tier:
    """The lowest tier whose guarantee the observed runs are consistent with."""
    u, c = stats[Mode.UNCOORDINATED].rate, stats[Mode.CAUSAL].rate
    if u == 1 and c == 1:
        return Tier.M
    if c == 1:
        return Tier.M_O
    return Tier.NM
