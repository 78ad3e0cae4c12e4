"""Validity rate of every bundled task under each execution mode.

    python3 scripts/boundary_table.py [--limit N] [--seed S]
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass

from calmtier.boundary import matches, profile
from calmtier.bundle import bundled_tasks
from calmtier.classifier import classify
from calmtier.engine import Mode, interleaving_count, is_exhaustive
from calmtier.portfolio import percent


@dataclass(frozen=True)
class BoundaryConfig:
    limit: int = 64
    seed: int = 0


def main(cfg: BoundaryConfig) -> None:
    print(f"{'task':<22} {'tier':<4} {'orders':>6} " + " ".join(f"{m.value:>14}" for m in Mode)
          + f" {'c':>6}  boundary")
    for spec in bundled_tasks():
        tier = classify(spec).tier
        stats = profile(spec, cfg.limit, cfg.seed)
        orders = interleaving_count(spec, Mode.UNCOORDINATED) if is_exhaustive(spec) else "-"
        c = stats[Mode.ORCHESTRATED].mean_cost / stats[Mode.UNCOORDINATED].mean_cost
        cells = " ".join(f"{percent(stats[m].rate):>14}" for m in Mode)
        ok = matches(tier, stats, bool(spec.handoffs))
        print(f"{spec.id:<22} {tier.value:<4} {orders:>6} {cells} {float(c):>6.2f}  "
              f"{'ok' if ok else 'MISMATCH'}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--limit", type=int, default=BoundaryConfig.limit)
    p.add_argument("--seed", type=int, default=BoundaryConfig.seed)
    a = p.parse_args()
    main(BoundaryConfig(a.limit, a.seed))
