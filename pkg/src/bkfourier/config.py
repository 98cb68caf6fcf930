import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .errors import ConfigError
from .groupoid import DEFAULT_MATRIX_CAP
from .groups import stack_point_bound
from .utils import dedupe, prime_power, split_names

MATRIX_CAP_ENV = "BKFOURIER_MATRIX_CAP"

DEFAULT_GRID: Dict[str, List[int]] = {
    "sl2": [3, 5],
    "pgl2": [3, 5],
    "gl2": [3, 5],
    "gl2-char2": [2, 4],
    "torus": [3, 5, 7],
    "quadform": [3, 5, 7],
}
GROUP_NAMES = tuple(DEFAULT_GRID)
EVEN_GROUPS = ("gl2-char2",)
STACK_GROUPS = ("sl2", "pgl2", "gl2", "gl2-char2")
# execution-only; left out of the config echoed in reports
EXECUTION_FIELDS = ("threads", "out_path", "format", "export_tables", "tables_dir", "log_level")
CHECK_NAMES = ("kernels", "involutivity", "extension", "pushforward", "quadform", "gauss")
FORMATS = ("text", "json")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


@dataclass
class CheckConfig:
    groups: List[str] = field(default_factory=lambda: list(GROUP_NAMES))
    q_list: List[int] = field(default_factory=list)
    checks: List[str] = field(default_factory=lambda: ["all"])
    threads: int = 1
    matrix_cap: int = DEFAULT_MATRIX_CAP
    out_path: Optional[str] = None
    format: str = "text"
    export_tables: bool = False
    tables_dir: str = "tables"
    size_limits: Dict[str, int] = field(
        default_factory=lambda: {
            "sl2": 7,
            "pgl2": 7,
            "gl2": 5,
            "gl2-char2": 4,
            "torus": 7,
            "quadform": 7,
        }
    )
    log_level: str = "WARNING"

    @classmethod
    def load(cls, path: Path) -> "CheckConfig":
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    def save(self, path: Path) -> None:
        path.write_text(json.dumps(self.__dict__, indent=2), encoding="utf-8")

    def from_env(self) -> "CheckConfig":
        value = os.environ.get(MATRIX_CAP_ENV)
        if value:
            try:
                self.matrix_cap = int(value)
            except ValueError as exc:
                raise ConfigError(f"{MATRIX_CAP_ENV} must be an integer, got {value!r}") from exc
        return self

    @property
    def selected_checks(self) -> List[str]:
        names = split_names(self.checks)
        if "all" in names:
            return list(CHECK_NAMES)
        return dedupe(names)

    def wants(self, check: str) -> bool:
        return check in self.selected_checks

    def validate(self) -> "CheckConfig":
        groups = split_names(self.groups)
        unknown = [g for g in groups if g not in DEFAULT_GRID]
        if unknown:
            raise ConfigError(f"unknown groups {unknown}; choose from {list(GROUP_NAMES)}")
        if not groups:
            raise ConfigError("no groups selected")
        unknown = [c for c in split_names(self.checks) if c != "all" and c not in CHECK_NAMES]
        if unknown:
            raise ConfigError(f"unknown checks {unknown}; choose from {list(CHECK_NAMES)} or all")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {list(FORMATS)}, got {self.format!r}")
        if str(self.log_level).upper() not in LOG_LEVELS:
            raise ConfigError(f"log level must be one of {list(LOG_LEVELS)}")
        if self.threads < 1:
            raise ConfigError(f"threads must be positive, got {self.threads}")
        if self.matrix_cap < 1:
            raise ConfigError(f"matrix_cap must be positive, got {self.matrix_cap}")
        for q in self.q_list:
            if prime_power(q) is None:
                raise ConfigError(f"q = {q} is not a prime power")
        for group, q in self.jobs():
            odd = q % 2 == 1
            if odd == (group in EVEN_GROUPS):
                parity = "even" if group in EVEN_GROUPS else "odd"
                raise ConfigError(f"{group} needs {parity} q, got q = {q}")
            limit = self.size_limits.get(group)
            if limit is not None and q > limit:
                size = ""
                if group in STACK_GROUPS:
                    size = f" ({stack_point_bound(group, q)} stack points)"
                raise ConfigError(f"{group} at q = {q}{size} is above its size limit {limit}")
        return self

    def point_limit(self, group: str) -> Optional[int]:
        """Stack points allowed for group: the stack size at its q size limit."""
        limit = self.size_limits.get(group)
        if limit is None or group not in STACK_GROUPS:
            return None
        return stack_point_bound(group, limit)

    def echo(self) -> Dict[str, object]:
        return {k: v for k, v in self.__dict__.items() if k not in EXECUTION_FIELDS}

    def jobs(self) -> List[Tuple[str, int]]:
        out = []
        for group in dedupe(split_names(self.groups)):
            for q in self.q_list or DEFAULT_GRID[group]:
                out.append((group, int(q)))
        return out
