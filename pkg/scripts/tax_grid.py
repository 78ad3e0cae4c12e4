"""Coordination tax over a grid of non-monotone fractions and cost multipliers, as CSV.

    python3 scripts/tax_grid.py [--f 0.1,0.26,0.58] [--c 2,2.3,4.4,10]
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from fractions import Fraction

from calmtier.portfolio import coordination_tax


@dataclass(frozen=True)
class GridConfig:
    f_values: tuple[Fraction, ...] = tuple(Fraction(x) for x in
                                           ("0", "0.1", "0.26", "0.4", "0.58", "0.8", "1"))
    c_values: tuple[Fraction, ...] = tuple(Fraction(x) for x in ("1.5", "2.3", "4", "4.4", "10"))


def main(cfg: GridConfig) -> None:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["f"] + [f"c={float(c):g}" for c in cfg.c_values])
    for f in cfg.f_values:
        w.writerow([f"{float(f):g}"] + [f"{float(coordination_tax(f, c)):.4f}"
                                         for c in cfg.c_values])


def _fractions(raw: str) -> tuple[Fraction, ...]:
    return tuple(Fraction(x) for x in raw.split(","))


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--f", type=_fractions, default=GridConfig.f_values)
    p.add_argument("--c", type=_fractions, default=GridConfig.c_values)
    a = p.parse_args()
    main(GridConfig(a.f, a.c))
