"""Compare classifier tiers with simulated behaviour on random task specs.

    python3 scripts/soundness_sweep.py [--count 300] [--seed 1] [--max-subtasks 5]

Prints the tier mix, how many specs were too large to enumerate, and every
spec whose simulated validity pattern disagrees with its tier.
"""
from __future__ import annotations

import argparse
import time
from collections import Counter
from dataclasses import dataclass

from calmtier.boundary import matches, profile
from calmtier.classifier import classify
from calmtier.engine import is_exhaustive
from calmtier.generate import random_specs
from calmtier.task import dump_task


@dataclass(frozen=True)
class SweepConfig:
    count: int = 300
    seed: int = 1
    max_subtasks: int = 5
    limit: int = 48


def main(cfg: SweepConfig) -> int:
    start = time.perf_counter()
    tiers: Counter = Counter()
    sampled, bad = 0, []
    for spec in random_specs(cfg.count, cfg.seed, max_subtasks=cfg.max_subtasks):
        tier = classify(spec).tier
        tiers[tier.value] += 1
        sampled += not is_exhaustive(spec)
        if not matches(tier, profile(spec, cfg.limit), bool(spec.handoffs)):
            bad.append(spec)
    print(f"specs: {cfg.count}  tiers: {dict(sorted(tiers.items()))}  sampled: {sampled}  "
          f"mismatches: {len(bad)}  ({time.perf_counter() - start:.1f}s)")
    for spec in bad:
        print(dump_task(spec))
    return 1 if bad else 0


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--count", type=int, default=SweepConfig.count)
    p.add_argument("--seed", type=int, default=SweepConfig.seed)
    p.add_argument("--max-subtasks", type=int, default=SweepConfig.max_subtasks)
    p.add_argument("--limit", type=int, default=SweepConfig.limit)
    a = p.parse_args()
    raise SystemExit(main(SweepConfig(a.count, a.seed, a.max_subtasks, a.limit)))
