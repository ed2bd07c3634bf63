"""CSV rendering and run manifests.

Numbers are written locale-free with 9 significant digits, so identical
inputs give byte-identical files. A manifest records everything needed to
replay a command and the checksum its outputs must reproduce.
"""

import csv
import hashlib
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

from pydantic import BaseModel

from campus_epi import __version__
from campus_epi.errors import ManifestError

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        text = f"{value:.9g}"
        return "0" if text == "-0" else text
    return str(value)


def to_csv(rows: Iterable[Mapping[str, Any]], columns: Sequence[str]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row[col]) for col in columns])
    return buffer.getvalue()


def checksum(outputs: Mapping[str, str]) -> str:
    """sha256 over every output name and body, in order."""
    digest = hashlib.sha256()
    for name, body in outputs.items():
        digest.update(name.encode("utf-8"))
        digest.update(b"\0")
        digest.update(body.encode("utf-8"))
        digest.update(b"\0")
    return f"sha256:{digest.hexdigest()}"


class RunManifest(BaseModel):
    """Sidecar describing how an output was produced."""

    command: str
    params: dict[str, Any]
    seed: Optional[int] = None
    version: str = __version__
    checksum: str

    def to_text(self) -> str:
        lines = [
            f"command={self.command}",
            f"version={self.version}",
            f"seed={'' if self.seed is None else self.seed}",
            f"params={json.dumps(self.params, sort_keys=True)}",
            f"checksum={self.checksum}",
        ]
        return "\n".join(lines) + "\n"

    def write(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_text(), encoding="utf-8")
        logger.info(f"Manifest written to {path}")

    @classmethod
    def read(cls, path: Path) -> "RunManifest":
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
        fields: dict[str, str] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ManifestError(f"{path}:{lineno}: expected key=value")
            fields[key.strip()] = value
        missing = {"command", "params", "checksum"} - fields.keys()
        if missing:
            raise ManifestError(f"{path}: missing keys {sorted(missing)}")
        try:
            params = json.loads(fields["params"])
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: params are not valid JSON: {exc}") from exc
        seed = fields.get("seed", "")
        return cls(
            command=fields["command"],
            params=params,
            seed=int(seed) if seed else None,
            version=fields.get("version", __version__),
            checksum=fields["checksum"],
        )
