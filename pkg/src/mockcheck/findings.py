"""Findings, the fix catalog, and majority voting across repeated runs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ContractError

CATALOG_VERSION = 1

ERROR = "error"
WARNING = "warning"

# check_id -> (stage, fix text).  Texts are stable within a catalog version.
FIX_CATALOG: dict[str, tuple[str, str]] = {
    # data preparation stage
    "missing_values": ("data", "remove or replace (impute) missing values before training"),
    "missing_labels": ("data", "drop rows whose label is missing, or recover the labels"),
    "class_imbalance": ("data", "rebalance the classes (resample, or weight the loss) before training"),
    "missing_encoding": ("data", "encode categorical column (one-hot or ordinal) before training"),
    "missing_scaling": ("data", "scale or normalize the feature (standardize or min-max) before training"),
    "label_mismatch": ("data", "make the labels match the problem definition (class count and integer ids, or numeric targets for regression)"),
    "data_nonfinite_loss": ("data", "the mock model produced a non-finite loss; look for NaN, infinite or extreme values in the data"),
    "model_not_learning": ("data", "the mock model cannot learn from this data; review labels, outliers and feature selection"),
    # model design stage
    "input_shape": ("model", "set the input layer size to the number of features exposed by the data interface"),
    "output_shape": ("model", "set the output layer size to match the task (1 for regression, number of classes for classification)"),
    "missing_activation": ("model", "add a non-linear activation (e.g. relu) to every hidden layer"),
    "output_activation": ("model", "use the output activation that fits the task (linear for regression, sigmoid for binary, softmax for multiclass)"),
    "learning_rate": ("model", "choose a learning rate inside the common range (e.g. 1e-4 to 1e-2)"),
    "loss_function": ("model", "use the loss that fits the task (mse for regression, binary_crossentropy for binary, categorical_crossentropy for multiclass)"),
    "metrics": ("model", "use metrics that fit the task (mae for regression, accuracy for classification)"),
    "nonfinite_loss": ("model", "the loss became NaN or infinite; lower the learning rate or check weight initialization"),
    "oscillating_loss": ("model", "reduce the learning rate or decrease batch size"),
    "slow_convergence": ("model", "the model converges too slowly; increase the learning rate or revisit the architecture"),
    "metric_flat": ("model", "the model is not learning (metric never changes); check activations, learning rate and output layer"),
}

DATA_CHECK_IDS = tuple(k for k, (stage, _) in FIX_CATALOG.items() if stage == "data")
MODEL_CHECK_IDS = tuple(k for k, (stage, _) in FIX_CATALOG.items() if stage == "model")


def fix_for(check_id: str) -> str:
    try:
        return FIX_CATALOG[check_id][1]
    except KeyError:
        raise ContractError(f"unknown check id {check_id!r}") from None


@dataclass
class Finding:
    """One detected issue.

    ``locus`` names where the issue sits (a column, a layer index, or ""
    for whole-stage findings); together with ``check_id`` it identifies the
    finding across repeated runs.
    """

    check_id: str
    severity: str
    message: str
    evidence: dict = field(default_factory=dict)
    locus: str = ""
    stage: str = ""
    fix: str = ""

    def __post_init__(self):
        if self.check_id not in FIX_CATALOG:
            raise ContractError(f"unknown check id {self.check_id!r}")
        if self.severity not in (ERROR, WARNING):
            raise ContractError(f"severity must be 'error' or 'warning', got {self.severity!r}")
        self.stage = self.stage or FIX_CATALOG[self.check_id][0]
        self.fix = self.fix or fix_for(self.check_id)

    @property
    def key(self) -> tuple[str, str]:
        return (self.check_id, self.locus)

    @property
    def sort_key(self):
        index = self.evidence.get("column_index", self.evidence.get("layer_index", -1))
        return (self.check_id, index, self.locus)

    def to_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "stage": self.stage,
            "severity": self.severity,
            "message": self.message,
            "fix": self.fix,
            "locus": self.locus,
            "evidence": self.evidence,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Finding":
        return cls(
            check_id=doc["check_id"],
            severity=doc["severity"],
            message=doc["message"],
            evidence=doc.get("evidence", {}),
            locus=doc.get("locus", ""),
            stage=doc.get("stage", ""),
            fix=doc.get("fix", ""),
        )


def sort_findings(findings: Iterable[Finding]) -> list[Finding]:
    return sorted(findings, key=lambda f: f.sort_key)


def majority_vote(per_run_findings: Sequence[Sequence[Finding]], runs: int | None = None) -> list[Finding]:
    """Keep findings reported in more than half of the runs.

    Identity is ``(check_id, locus)``.  The surviving finding is the one from
    the earliest run that reported it, with ``runs_flagged`` added to its
    evidence.  With a single run the findings pass through unchanged.
    """
    runs = len(per_run_findings) if runs is None else runs
    if runs < 1 or runs % 2 == 0:
        raise ContractError(f"runs must be a positive odd number, got {runs}")
    if len(per_run_findings) != runs:
        raise ContractError(f"expected findings for {runs} runs, got {len(per_run_findings)}")
    if runs == 1:
        return list(per_run_findings[0])
    first: dict[tuple[str, str], Finding] = {}
    seen_in: dict[tuple[str, str], list[int]] = {}
    for run_index, findings in enumerate(per_run_findings):
        for f in findings:
            runs_for_key = seen_in.setdefault(f.key, [])
            if run_index not in runs_for_key:
                runs_for_key.append(run_index)
            first.setdefault(f.key, f)
    kept = []
    for key, finding in first.items():
        if len(seen_in[key]) * 2 > runs:
            evidence = dict(finding.evidence)
            evidence["runs_flagged"] = seen_in[key]
            kept.append(
                Finding(finding.check_id, finding.severity, finding.message, evidence,
                        finding.locus, finding.stage, finding.fix)
            )
    return kept


def json_number(x: float):
    """Floats as JSON-safe values: non-finite numbers become strings."""
    x = float(x)
    if x != x:
        return "nan"
    if x in (float("inf"), float("-inf")):
        return "inf" if x > 0 else "-inf"
    return x
