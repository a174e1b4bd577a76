"""Server configuration: checkpoint paths per role, device, decode defaults."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

GENERATION_ROLES = ("qfs", "agm", "qgm", "qam")
SEP = "<sep>"


@dataclass(frozen=True)
class DecodeDefaults:
    beam_size: int = 4
    max_len: int = 64
    temperature: float = 0.0

    def __post_init__(self):
        if self.beam_size < 1 or self.max_len < 1 or self.temperature < 0:
            raise ValueError("invalid decode defaults")


@dataclass
class ServerConfig:
    """Checkpoint paths per role; embed falls back to the ranker encoder.

    With temperature 0 decoding is greedy/beam with no sampling, so identical
    requests produce identical responses.
    """

    qfs: str
    agm: str
    qgm: str
    qam: str
    ranker: str
    embed: str | None = None
    device: str = "cpu"
    port: int = 8080
    max_source_len: int = 1024
    decode: DecodeDefaults = field(default_factory=DecodeDefaults)

    def __post_init__(self):
        if self.embed is None:
            self.embed = self.ranker
        for role in (*GENERATION_ROLES, "ranker", "embed"):
            path = getattr(self, role)
            if not Path(path).exists():
                raise FileNotFoundError(f"{role} checkpoint not found: {path}")

    @classmethod
    def from_json(cls, path) -> "ServerConfig":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        decode = DecodeDefaults(**doc.pop("decode", {}))
        return cls(decode=decode, **doc)
