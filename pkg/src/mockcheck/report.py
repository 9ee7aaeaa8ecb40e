"""Stage reports, the repeated-run protocol, and report rendering."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

from .findings import ERROR, Finding, majority_vote, sort_findings

SCHEMA_VERSION = 1


@dataclass
class Report:
    stage: str
    interfaces: dict
    config: dict
    executed_checks: list[str]
    findings: list[Finding]
    skipped_checks: dict = field(default_factory=dict)
    per_run_findings: list[list[Finding]] = field(default_factory=list)
    traces: list[dict] = field(default_factory=list)
    timings: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.findings = sort_findings(self.findings)

    @property
    def verdict(self) -> str:
        return "fail" if any(f.severity == ERROR for f in self.findings) else "pass"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def check_ids(self) -> set[str]:
        return {f.check_id for f in self.findings}

    def to_dict(self, include_timings: bool = False) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "stage": self.stage,
            "verdict": self.verdict,
            "interfaces": self.interfaces,
            "config": self.config,
            "executed_checks": list(self.executed_checks),
            "skipped_checks": dict(self.skipped_checks),
            "findings": [f.to_dict() for f in self.findings],
            "per_run_findings": [[f.to_dict() for f in run] for run in self.per_run_findings],
            "traces": self.traces,
        }
        if include_timings:
            doc["timings"] = self.timings
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Report":
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema_version {doc.get('schema_version')!r}")
        return cls(
            stage=doc["stage"],
            interfaces=doc["interfaces"],
            config=doc["config"],
            executed_checks=list(doc["executed_checks"]),
            findings=[Finding.from_dict(f) for f in doc["findings"]],
            skipped_checks=dict(doc.get("skipped_checks", {})),
            per_run_findings=[[Finding.from_dict(f) for f in run] for run in doc.get("per_run_findings", [])],
            traces=list(doc.get("traces", [])),
            timings=dict(doc.get("timings", {})),
        )


def render_report(report: Report, format: str = "text", include_timings: bool = False) -> bytes:
    """Render as ``json`` (lossless) or human-readable ``text``."""
    if format == "json":
        doc = report.to_dict(include_timings=include_timings)
        return (json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n").encode("utf-8")
    if format != "text":
        raise ValueError(f"unknown report format {format!r}")
    lines = [f"mockcheck {report.stage} stage: {report.verdict.upper()}"]
    for name, summary in report.interfaces.items():
        lines.append(f"  {name}: {json.dumps(summary, sort_keys=True)}")
    lines.append(f"  checks run: {', '.join(report.executed_checks) or '-'}")
    for check_id, reason in report.skipped_checks.items():
        lines.append(f"  skipped {check_id}: {reason}")
    if report.findings:
        lines.append("")
        for f in report.findings:
            lines.append(f"{f.check_id.upper()} [{f.severity}] {f.message} → {f.fix}")
    else:
        lines.append("")
        lines.append("PASS: no findings")
    if include_timings and report.timings:
        lines.append("")
        lines.append("timings: " + ", ".join(f"{k}={v:.3f}s" for k, v in report.timings.items()))
    return ("\n".join(lines) + "\n").encode("utf-8")


def run_repeated(check: Callable[[int, int], tuple[list[Finding], dict | None]], runs: int, base_seed: int):
    """Run a stochastic check ``runs`` times with seeds ``base_seed + i``.

    ``check(run_index, seed)`` returns its findings and an optional trace
    record.  Returns the majority-voted findings, the raw per-run findings
    and the collected traces.
    """
    per_run: list[list[Finding]] = []
    traces: list[dict] = []
    for i in range(runs):
        findings, trace = check(i, base_seed + i)
        per_run.append(list(findings))
        if trace is not None:
            traces.append(trace)
    return majority_vote(per_run, runs), per_run, traces
