"""Configuration files and self-describing CSV outputs."""

from __future__ import annotations

import csv
import json
import os
import time
from pathlib import Path

from dpalab import __version__
from dpalab.rng import ALGORITHM, mix64

OUTPUT_DIR_ENV = "DPALAB_OUTPUT_DIR"


class ConfigError(ValueError):
    """Unparseable or invalid configuration."""


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are ignored.

    Keys are normalized to use underscores.  Errors name the file, line and column.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if "=" not in line:
            col = len(line) - len(line.lstrip()) + 1
            raise ConfigError(f"{source}:{lineno}:{col}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if not key or not key.replace("_", "").isalnum():
            col = len(raw) - len(raw.lstrip()) + 1
            raise ConfigError(f"{source}:{lineno}:{col}: invalid key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}:1: duplicate key {key!r}")
        value = value.strip()
        if not value:
            raise ConfigError(f"{source}:{lineno}:{line.index('=') + 2}: empty value for {key!r}")
        out[key] = value
    return out


def read_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return parse_config_text(text, str(path))


def parse_count(text) -> int:
    """Parse a natural number, accepting forms such as ``1e6`` or ``1_000``."""
    if isinstance(text, int):
        return text
    s = str(text).strip().replace("_", "")
    try:
        value = float(s)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None
    if value != int(value) or value < 0:
        raise ConfigError(f"not a natural number: {text!r}")
    return int(value)


def parse_count_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [parse_count(t) for t in text]
    return [parse_count(t) for t in str(text).split(",") if t.strip()]


def parse_float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(t) for t in text]
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"not a comma-separated list of numbers: {text!r}") from None


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


def fmt(value) -> str:
    """CSV cell text; floats carry 17 significant digits."""
    if isinstance(value, float):
        return f"{value:.17g}"
    if hasattr(value, "dtype"):
        return fmt(value.item())
    return str(value)


class ResultWriter:
    """Writes CSV files whose ``#`` header echoes the configuration and seeds.

    Headers contain no timestamps, so identical configurations give
    byte-identical files; run times go into a ``.meta.json`` sidecar.
    """

    def __init__(self, out_dir, command: str, config: dict, seed: int | None, replicates: int = 0):
        self.out_dir = Path(out_dir)
        self.command = command
        self.config = dict(config)
        self.seed = seed
        self.replicates = replicates
        self.started = time.time()
        self.files: list[str] = []

    def header_lines(self) -> list[str]:
        lines = [f"# dpalab {__version__} {self.command}"]
        for key in sorted(self.config):
            lines.append(f"# config {key}={self.config[key]}")
        if self.seed is not None:
            lines.append(f"# master_seed={self.seed}")
            lines.append(f"# seed_derivation={ALGORITHM}")
            if self.replicates:
                seeds = ",".join(str(mix64(self.seed, r)) for r in range(self.replicates))
                lines.append(f"# replicate_seeds={seeds}")
        return lines

    def path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name

    def write_rows(self, name: str, columns, rows) -> Path:
        p = self.path(name)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            for line in self.header_lines():
                fh.write(line + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([fmt(v) for v in row])
        self._finish(p)
        return p

    def write_with(self, name: str, writer) -> Path:
        """Let ``writer(path)`` produce a CSV body, then prepend the header."""
        p = self.path(name)
        writer(p)
        body = p.read_text(encoding="utf-8")
        p.write_text("\n".join(self.header_lines()) + "\n" + body, encoding="utf-8")
        self._finish(p)
        return p

    def _finish(self, p: Path) -> None:
        self.files.append(p.name)
        meta = {"file": p.name, "command": self.command, "version": __version__,
                "config": self.config, "master_seed": self.seed,
                "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
                "elapsed_seconds": round(time.time() - self.started, 3)}
        with open(p.with_name(p.name + ".meta.json"), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_csv_body(path) -> list[list[str]]:
    """Rows of a result CSV with the ``#`` header removed (first row = column names)."""
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(line for line in fh if not line.startswith("#")))
