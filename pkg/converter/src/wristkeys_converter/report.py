"""Conversion reports: what was read, what was written, what was dropped."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field


def sha256_of(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return f"sha256:{digest.hexdigest()}"


@dataclass
class ConversionReport:
    source_path: str
    output_path: str
    counts: dict[str, int] = field(default_factory=dict)
    checksum: str = ""
    warnings: list[str] = field(default_factory=list)

    def warn(self, message: str) -> None:
        self.warnings.append(message)

    def as_text(self) -> str:
        lines = [
            "conversion-report v1",
            f"source: {self.source_path}",
            f"output: {self.output_path}",
        ]
        for key in sorted(self.counts):
            lines.append(f"{key}: {self.counts[key]}")
        lines.append(f"checksum: {self.checksum}")
        lines.append(f"warnings: {len(self.warnings)}")
        lines.extend(f"  - {w}" for w in self.warnings)
        return "\n".join(lines)
