from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path


@dataclass(frozen=True)
class BackboneConfig:
    width: int = 192
    depth: int = 4
    heads: int = 4
    head_dim: int = 48
    latent_tokens: int = 64
    output_fields: int = 192
    pe_freq_lo: float = 0.25
    pe_freq_hi: float = 64.0
    mass_injection: bool = True

    def __post_init__(self):
        for name in ("width", "depth", "heads", "head_dim", "latent_tokens", "output_fields"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        lo, hi = self.pe_exponents
        if lo > hi:
            raise ValueError("pe_freq_lo must not exceed pe_freq_hi")

    @property
    def pe_exponents(self) -> tuple[int, int]:
        out = []
        for name in ("pe_freq_lo", "pe_freq_hi"):
            e = math.log2(getattr(self, name))
            if abs(e - round(e)) > 1e-12:
                raise ValueError(f"{name} must be a power of two")
            out.append(int(round(e)))
        return out[0], out[1]

    @property
    def pe_dim(self) -> int:
        lo, hi = self.pe_exponents
        return 3 + 6 * (hi - lo + 1)

    @property
    def inner_dim(self) -> int:
        return self.heads * self.head_dim

    def replace(self, **kw) -> "BackboneConfig":
        return BackboneConfig(**{**asdict(self), **kw})


NEO_BASE = BackboneConfig()
# sin/cos at 2^0 .. 2^9 plus raw coordinates: 63 input dims
NERF_PE = BackboneConfig(pe_freq_lo=1.0, pe_freq_hi=512.0)
TINY = BackboneConfig(width=12, depth=1, heads=2, head_dim=6, latent_tokens=8,
                      output_fields=12, pe_freq_lo=0.5, pe_freq_hi=4.0)


def _parse_value(kind, raw: str):
    if kind is bool or kind == "bool":
        low = raw.strip().lower()
        if low in ("1", "true", "on", "yes"):
            return True
        if low in ("0", "false", "off", "no"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind is int or kind == "int":
        return int(raw)
    return float(raw)


def parse_config(text: str) -> BackboneConfig:
    types = {f.name: f.type for f in fields(BackboneConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(types[key], raw)
    return BackboneConfig(**values)


def format_config(cfg: BackboneConfig) -> str:
    lines = []
    for k, v in asdict(cfg).items():
        if isinstance(v, bool):
            v = "on" if v else "off"
        lines.append(f"{k}={v}")
    return "\n".join(lines) + "\n"


def load_config(path: str | os.PathLike) -> BackboneConfig:
    return parse_config(Path(path).read_text())


def save_config(path: str | os.PathLike, cfg: BackboneConfig) -> None:
    Path(path).write_text(format_config(cfg))
