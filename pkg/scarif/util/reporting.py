import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import pandas as pd
from pydantic import BaseModel, Field

from scarif import __version__

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"

logger = logging.getLogger(__name__)


class RunManifest(BaseModel):
    """Record of one CLI invocation, written next to its outputs."""

    command: str
    inputs: list[str] = Field(default_factory=list)
    profile: str | None = None
    outputs: list[str] = Field(default_factory=list)
    tool_version: str = __version__
    timestamp: str = Field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )


def dumps(payload: Any) -> str:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


class ReportWriter:
    """Writes report files into one output directory and tracks them for the manifest."""

    def __init__(self, output_dir: str | Path):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.outputs: list[Path] = []

    def _build_output_path(self, filename: str) -> Path:
        candidate = Path(filename)
        if candidate.is_absolute() or ".." in candidate.parts:
            raise ValueError(f"report filenames must stay inside the output directory: {filename}")
        return self.output_dir / candidate

    def write_json(self, filename: str, payload: dict[str, Any]) -> Path:
        path = self._build_output_path(filename)
        path.write_text(dumps({"schema_version": SCHEMA_VERSION, **payload}), encoding="utf-8")
        self.outputs.append(path)
        logger.info("wrote %s", path)
        return path

    def write_csv(self, filename: str, frame: pd.DataFrame) -> Path:
        path = self._build_output_path(filename)
        frame.to_csv(path, index=False)
        self.outputs.append(path)
        logger.info("wrote %s", path)
        return path

    def add_existing(self, path: Path) -> None:
        self.outputs.append(Path(path))

    def finalize(
        self,
        command: str,
        inputs: list[str | Path] | None = None,
        profile: str | None = None,
    ) -> Path:
        manifest = RunManifest(
            command=command,
            inputs=[str(p) for p in inputs or []],
            profile=profile,
            outputs=[str(p) for p in self.outputs],
        )
        path = self._build_output_path(MANIFEST_NAME)
        path.write_text(dumps(manifest.model_dump()), encoding="utf-8")
        return path
