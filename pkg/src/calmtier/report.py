"""Assemble the reproduction report from the bundled tasks and portfolio."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from calmtier import __version__
from calmtier.boundary import ModeStats, matches, profile
from calmtier.bundle import ONET_MONOTONIC, ONET_TOTAL, apqc_records, bundled_tasks
from calmtier.classifier import Classification, classify
from calmtier.engine import Mode
from calmtier.portfolio import (
    CategoryRow,
    coordination_tax,
    estimate_f,
    percent,
    summarize,
    wilson_interval,
)

C_GRID = (Fraction("2.3"), Fraction("4.4"), Fraction(4), Fraction(10))


@dataclass(frozen=True)
class ReproduceConfig:
    sample_limit: int = 64
    seed: int = 0
    tax_only: bool = False
    c_grid: tuple[Fraction, ...] = C_GRID


@dataclass(frozen=True)
class SimulationRow:
    task: str
    tier: str
    stats: dict
    c_ratio: Fraction
    boundary_ok: bool


@dataclass
class ReportBundle:
    config: ReproduceConfig
    classifications: list[Classification] = field(default_factory=list)
    simulations: list[SimulationRow] = field(default_factory=list)
    categories: list[CategoryRow] = field(default_factory=list)
    overall: CategoryRow | None = None
    apqc_f: Fraction | None = None
    apqc_f_ci: tuple[float, float] | None = None
    onet_ci: tuple[float, float] | None = None
    tax_rows: list[tuple[str, Fraction, Fraction, Fraction]] = field(default_factory=list)
    seeds: list = field(default_factory=list)

    # --- serialization ---------------------------------------------------
    def to_json(self) -> dict:
        out: dict = {"schema": 1}
        if not self.config.tax_only:
            out["classification"] = [c.to_json() for c in self.classifications]
            out["simulation"] = [
                {"task": row.task, "tier": row.tier, "boundary_ok": row.boundary_ok,
                 "c_ratio": _num(row.c_ratio),
                 "modes": {m.value: {"runs": s.runs, "valid": s.valid,
                                     "validity_rate": _num(s.rate),
                                     "mean_cost": _num(s.mean_cost),
                                     "exhaustive": s.exhaustive}
                           for m, s in row.stats.items()}}
                for row in self.simulations]
            out["portfolio"] = {
                "categories": [_row_json(r) for r in self.categories],
                "total": _row_json(self.overall),
                "f": _num(self.apqc_f),
                "f_ci": [round(x, 6) for x in self.apqc_f_ci],
                "onet": {"monotonic": ONET_MONOTONIC, "total": ONET_TOTAL,
                         "rate": round(ONET_MONOTONIC / ONET_TOTAL, 6),
                         "ci": [round(x, 6) for x in self.onet_ci]},
            }
        out["tax"] = [{"f_source": src, "f": _num(f), "c": _num(c), "T": _num(t),
                       "T_percent": percent(t)} for src, f, c, t in self.tax_rows]
        out["provenance"] = {"version": __version__, "seed": self.config.seed,
                             "sample_limit": self.config.sample_limit, "seeds": self.seeds}
        return out

    def to_text(self) -> str:
        lines: list[str] = [f"calmtier {__version__} reproduction report", ""]
        if not self.config.tax_only:
            lines += ["Classification", "--------------"]
            counts = {"M": 0, "M-O": 0, "NM": 0}
            for c in self.classifications:
                counts[c.tier.value] += 1
                fired = ", ".join(t.test.value for t in c.fired()) or "none"
                lines.append(f"{c.task_id:<22} {c.tier.value:<4} {c.inferred_thompson.value:<25}"
                             f" fired: {fired}")
            lines.append(f"totals: {counts['M']} M, {counts['M-O']} M-O, {counts['NM']} NM")
            lines += ["", "Simulation (validity rate over all interleavings)", "-" * 49]
            lines.append(f"{'task':<22} {'tier':<4} {'uncoord':>8} {'causal':>8} "
                         f"{'orch':>8} {'c':>6}  boundary")
            for row in self.simulations:
                rates = [percent(row.stats[m].rate) for m in Mode]
                lines.append(f"{row.task:<22} {row.tier:<4} {rates[0]:>8} {rates[1]:>8} "
                             f"{rates[2]:>8} {float(row.c_ratio):>6.2f}  "
                             f"{'ok' if row.boundary_ok else 'MISMATCH'}")
            lines += ["", "APQC portfolio", "--------------"]
            lines.append(f"{'category':<26} {'M':>3} {'M-O':>4} {'NM':>3} {'% mono':>7}")
            for r in self.categories + [self.overall]:
                places = 1 if r is self.overall else 0
                lines.append(f"{r.category:<26} {r.m:>3} {r.m_o:>4} {r.nm:>3} "
                             f"{percent(r.monotonic, places):>7}")
            lo, hi = self.apqc_f_ci
            lines.append(f"f = {self.overall.nm}/{self.overall.total} = "
                         f"{float(self.apqc_f):.4f}, 95% CI [{lo:.3f}, {hi:.3f}]")
            lo, hi = self.onet_ci
            lines.append(f"O*NET monotonic {ONET_MONOTONIC}/{ONET_TOTAL} = "
                         f"{percent(Fraction(ONET_MONOTONIC, ONET_TOTAL), 1)}, "
                         f"95% CI [{percent(lo, 1)}, {percent(hi, 1)}]")
            lines.append("")
        lines += ["Coordination tax", "----------------"]
        for src, f, c, t in self.tax_rows:
            lines.append(f"{src:<18} T({_short(f)}, {_short(c)}) = {percent(t)}")
        lines.append("")
        return "\n".join(lines)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def _num(x: Fraction | None):
    if x is None:
        return None
    return x.numerator if x.denominator == 1 else round(float(x), 6)


def _short(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{float(x):.4g}"


def _row_json(r: CategoryRow) -> dict:
    return {"category": r.category, "M": r.m, "M-O": r.m_o, "NM": r.nm,
            "monotonic": round(float(r.monotonic), 6)}


def tax_grid(c_grid=C_GRID, apqc_f: Fraction | None = None) -> list:
    sources = []
    if apqc_f is not None:
        sources.append(("APQC portfolio", apqc_f))
    sources += [("APQC (f=0.26)", Fraction("0.26")), ("O*NET (f=0.58)", Fraction("0.58")),
                ("O*NET portfolio", Fraction(ONET_TOTAL - ONET_MONOTONIC, ONET_TOTAL))]
    return [(src, f, c, coordination_tax(f, c)) for src, f in sources for c in c_grid]


def reproduce(config: ReproduceConfig = ReproduceConfig()) -> ReportBundle:
    bundle = ReportBundle(config)
    records = apqc_records()
    bundle.apqc_f, bundle.apqc_f_ci = estimate_f(records)
    bundle.tax_rows = tax_grid(config.c_grid, bundle.apqc_f)
    if config.tax_only:
        return bundle
    for spec in bundled_tasks():
        c = classify(spec)
        bundle.classifications.append(c)
        stats: dict[Mode, ModeStats] = profile(spec, config.sample_limit, config.seed)
        ratio = stats[Mode.ORCHESTRATED].mean_cost / stats[Mode.UNCOORDINATED].mean_cost
        bundle.simulations.append(SimulationRow(spec.id, c.tier.value, stats, ratio,
                                                matches(c.tier, stats, bool(spec.handoffs))))
        if not stats[Mode.UNCOORDINATED].exhaustive:
            bundle.seeds.append({"task": spec.id, "seeds": [config.seed, config.seed
                                                            + config.sample_limit - 1]})
    bundle.categories, bundle.overall = summarize(records)
    bundle.onet_ci = wilson_interval(ONET_MONOTONIC, ONET_TOTAL)
    return bundle
