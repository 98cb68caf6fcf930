import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

from .errors import ReportError

logger = logging.getLogger(__name__)

PASS = "pass"
FAIL = "fail"
FINDING = "finding"
STATUSES = (PASS, FAIL, FINDING)
TIMING_FIELDS = ("seconds",)


@dataclass
class CheckRecord:
    check_id: str
    suite: str
    group: str
    q: int
    status: str
    theorem: bool = True
    expected: Optional[str] = None
    computed: Optional[str] = None
    witness: Optional[str] = None
    classes: Optional[int] = None
    compared: Optional[int] = None
    detail: Dict[str, str] = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def failed(self) -> bool:
        return self.theorem and self.status == FAIL

    def verdict(self) -> str:
        line = f"{self.status.upper():8} {self.check_id}"
        if self.computed is not None:
            line += f"  computed={self.computed}"
        if self.expected is not None:
            line += f"  expected={self.expected}"
        if self.witness:
            line += f"  witness: {self.witness}"
        return line


@dataclass
class Report:
    version: str
    config: Dict[str, object]
    records: List[CheckRecord] = field(default_factory=list)
    moduli: Dict[str, List[int]] = field(default_factory=dict)

    def summary(self) -> Dict[str, int]:
        counts = pd.Series([r.status for r in self.records], dtype="object").value_counts()
        return {status: int(counts.get(status, 0)) for status in STATUSES}

    @property
    def exit_code(self) -> int:
        return 1 if any(r.failed for r in self.records) else 0

    def to_dict(self, timing: bool = True) -> Dict[str, object]:
        records = []
        for r in self.records:
            data = asdict(r)
            if not timing:
                for name in TIMING_FIELDS:
                    data.pop(name)
            records.append(data)
        return {
            "version": self.version,
            "config": self.config,
            "moduli": self.moduli,
            "records": records,
            "summary": self.summary(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "Report":
        return cls(
            version=data["version"],
            config=data["config"],
            records=[CheckRecord(**r) for r in data.get("records", [])],
            moduli=data.get("moduli", {}),
        )

    def to_frame(self) -> pd.DataFrame:
        columns = ["check_id", "suite", "group", "q", "status", "theorem", "seconds"]
        return pd.DataFrame([asdict(r) for r in self.records], columns=columns + ["detail"])[columns]


def render_json(report: Report, timing: bool = True) -> str:
    return json.dumps(report.to_dict(timing=timing), indent=2, sort_keys=True) + "\n"


def render_text(report: Report) -> str:
    lines = [f"bkfourier {report.version}"]
    frame = report.to_frame()
    if not frame.empty:
        table = frame.groupby(["group", "q", "status"]).size().unstack(fill_value=0)
        lines.append(table.to_string())
        lines.append("")
    lines.extend(r.verdict() for r in report.records)
    summary = report.summary()
    lines.append(", ".join(f"{summary[s]} {s}" for s in STATUSES))
    return "\n".join(lines) + "\n"


def emit_report(report: Report, fmt: str = "text", out_path: Optional[Path] = None) -> str:
    text = render_json(report) if fmt == "json" else render_text(report)
    if out_path is not None:
        path = Path(out_path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise ReportError(f"cannot write report {path}: {exc}") from exc
        logger.info("report written to %s", path)
    return text
