from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ddgcn import const
from ddgcn.config import Config, DdgcnModel
from ddgcn.utils.io import atomic_write_text


class RunRecord(DdgcnModel):
    """Everything needed to rerun one CLI invocation."""

    subcommand: str
    flags: dict[str, Any]
    seed: int
    config: Config


@dataclass
class DdgcnContext:
    """Runtime state for one ddgcn invocation."""

    # Effective config: file values with CLI flags applied on top
    config: Config
    config_path: str

    subcommand: str = ""
    flags: dict[str, object] = field(default_factory=dict)
    seed: int = 0

    def record_run(self, output: str | Path) -> Path:
        """Write ``<output>.run.json`` next to an output file or inside an output dir."""
        output = Path(output)
        if output.is_dir():
            path = output / f"{self.subcommand}{const.RUN_RECORD_SUFFIX}"
        else:
            path = output.with_name(output.name + const.RUN_RECORD_SUFFIX)
        flags = {key: str(val) if isinstance(val, Path) else val for key, val in self.flags.items()}
        record = RunRecord(subcommand=self.subcommand, flags=flags, seed=self.seed, config=self.config)
        atomic_write_text(path, record.model_dump_json(indent=2, by_alias=True) + "\n")
        return path
