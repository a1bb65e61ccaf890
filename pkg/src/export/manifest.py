"""Run manifest written next to every set of outputs."""
import json
import os
from dataclasses import dataclass, field, asdict
from datetime import datetime
from typing import Dict, List, Optional

from .. import __version__
from ..config import MANIFEST_NAME
from .to_csv import write_json


@dataclass
class RunManifest:
    """Everything needed to replay a run: the argv, the resolved configuration and the seed."""
    subcommand: str
    argv: List[str]
    config: Dict[str, object]
    overrides: Dict[str, str] = field(default_factory=dict)
    seed: Optional[int] = None
    version: str = __version__
    started: str = field(default_factory=lambda: datetime.now().isoformat())
    duration_s: float = 0.0
    outputs: List[str] = field(default_factory=list)

    def save(self, out_dir) -> str:
        return write_json(asdict(self), out_dir, MANIFEST_NAME)

    @classmethod
    def load(cls, path) -> 'RunManifest':
        if os.path.isdir(path):
            path = os.path.join(path, MANIFEST_NAME)
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        try:
            return cls(**data)
        except TypeError as e:
            raise ValueError(f"{path}: not a run manifest ({e})") from e
