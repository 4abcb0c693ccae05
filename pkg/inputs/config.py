# inputs/config.py
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


@dataclass
class RunConfig:
    """Parameters of one command-line run, echoed into every output file."""
    command: str
    parameters: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    out: Optional[Path] = None
    log_level: str = "WARNING"

    def __post_init__(self):
        self.log_level = self.log_level.upper()
        if self.log_level not in LOG_LEVELS:
            raise ValueError(f"log_level must be one of {LOG_LEVELS}, got {self.log_level}.")
        if self.out is not None:
            self.out = Path(self.out)

    def config_hash(self) -> str:
        canonical = json.dumps(
            {"command": self.command, "parameters": self.parameters, "seed": self.seed},
            sort_keys=True, separators=(",", ":"),
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def as_dict(self) -> Dict[str, Any]:
        return {"command": self.command, "parameters": self.parameters, "seed": self.seed}
