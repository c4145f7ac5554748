"""
Runs registered checks and writes their artifacts.

Artifacts under out_dir:
    verify.json         VerifySummary (pass flags and measured quantities)
    verify_<name>.csv   per-check measurement table
"""
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import pandas as pd

from src.utils.errors import ConfigError
from src.utils.monitoring import get_logger

from .check_base import CheckResult, VerifySummary
from .registry import CheckRegistry

logger = get_logger("verify")

SUMMARY_NAME = "verify.json"


def run_checks(
    names: Optional[Sequence[str]] = None,
    params: Optional[Dict[str, Any]] = None,
    registry: Optional[CheckRegistry] = None,
) -> VerifySummary:
    """
    Run the named checks, or all of them. When running everything, checks
    whose required inputs are absent are skipped; a check asked for by name
    fails instead.
    """
    registry = registry or CheckRegistry()
    params = params or {}
    explicit = bool(names)
    selected = list(names) if names else registry.names()
    unknown = [n for n in selected if registry.get(n) is None]
    if unknown:
        raise ConfigError(f"unknown check(s) {unknown}; expected one of {registry.names()}")

    results: List[CheckResult] = []
    for name in selected:
        missing = registry.missing_params(name, params)
        if missing and not explicit:
            logger.info("check_skipped", check=name, missing=missing)
            continue
        results.append(registry.create(name)(params))
    return VerifySummary(passed=all(r.passed for r in results) and bool(results), checks=results)


def write_summary(summary: VerifySummary, out_dir: Union[str, Path]) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for result in summary.checks:
        if result.table:
            columns = list(result.table[0])
            pd.DataFrame(result.table, columns=columns).to_csv(out_dir / f"verify_{result.name}.csv", index=False)
    path = out_dir / SUMMARY_NAME
    path.write_text(summary.model_dump_json(indent=2) + "\n")
    logger.info("verify_summary_written", path=str(path), passed=summary.passed)
    return path
