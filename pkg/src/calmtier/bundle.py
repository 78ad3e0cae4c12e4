"""Access to the bundled task specs and portfolio data.

``CALMTIER_DATA`` points at a replacement directory with the same layout
(``tasks/*.json`` and ``apqc_portfolio.csv``).
"""
from __future__ import annotations

import os
from pathlib import Path

from calmtier.portfolio import PortfolioRecord, load_portfolio
from calmtier.task import TaskSpec, load_task_file

# Reporting order: four M, two M-O, four NM
TASK_ORDER = (
    "strategy_pillars", "feature_specs", "marketing_content", "security_audit",
    "stage_gate", "ticket_escalation",
    "budget_allocation", "backlog_sprint", "production_schedule", "headcount_allocation",
)

# O*NET headline numbers: monotone task statements out of all classified
ONET_MONOTONIC = 5564
ONET_TOTAL = 13417


def data_dir() -> Path:
    override = os.environ.get("CALMTIER_DATA")
    if override:
        return Path(override)
    return Path(__file__).parent / "data"


def bundled_tasks() -> list[TaskSpec]:
    tasks_dir = data_dir() / "tasks"
    found = {p.stem: p for p in tasks_dir.glob("*.json")}
    ordered = [n for n in TASK_ORDER if n in found] + sorted(set(found) - set(TASK_ORDER))
    return [load_task_file(found[name]) for name in ordered]


def bundled_task(name: str) -> TaskSpec:
    return load_task_file(data_dir() / "tasks" / f"{name}.json")


def apqc_records() -> list[PortfolioRecord]:
    return load_portfolio((data_dir() / "apqc_portfolio.csv").read_text(encoding="utf-8"))
