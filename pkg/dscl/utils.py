"""File formats and output helpers shared by the commands."""

import functools
import json
import struct
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import click
import numpy as np
import pandas as pd

from . import __version__
from .errors import ConfigError, DsclError, IoError, NonFiniteLoss
from .numerics import EmbeddingBatch, LabeledBatch

MAGIC = b"DSCLEMB1"
_HEADER = struct.Struct("<IIB")
FLAG_ASSIGNED = 0x1
FLAG_LATENT = 0x2


@dataclass
class EmbeddingFile:
    """Contents of an embedding file; label arrays are ``None`` when absent."""

    vectors: np.ndarray
    assigned: Optional[np.ndarray] = None
    latent: Optional[np.ndarray] = None

    @classmethod
    def from_batch(cls, batch):
        if isinstance(batch, EmbeddingBatch):
            return cls(batch.vectors)
        return cls(batch.vectors, batch.assigned, batch.latent)

    def as_batch(self, temperature=1.0, normalize=False):
        """Labelled batch at ``temperature``; ``normalize`` rescales rows to unit norm."""
        if self.assigned is None:
            raise ConfigError("embedding file carries no assigned labels")
        make = EmbeddingBatch.from_raw if normalize else EmbeddingBatch
        return LabeledBatch(make(self.vectors, temperature), self.assigned, self.latent)


def ensure_dir(path):
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create directory {path}: {exc}") from None
    return path


def write_embeddings(path, batch):
    """Write the binary container: magic, header, float32 rows, u32 labels."""
    record = batch if isinstance(batch, EmbeddingFile) else EmbeddingFile.from_batch(batch)
    n, d = record.vectors.shape
    flags = (FLAG_ASSIGNED if record.assigned is not None else 0) | (
        FLAG_LATENT if record.latent is not None else 0
    )
    parts = [MAGIC, _HEADER.pack(n, d, flags), record.vectors.astype("<f4").tobytes()]
    for labels in (record.assigned, record.latent):
        if labels is not None:
            parts.append(np.asarray(labels).astype("<u4").tobytes())
    try:
        with open(path, "wb") as f:
            f.write(b"".join(parts))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def read_embeddings(path):
    try:
        with open(path, "rb") as f:
            payload = f.read()
    except FileNotFoundError:
        raise IoError(f"embedding file not found: {path}") from None
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None

    if payload[:len(MAGIC)] != MAGIC:
        raise IoError(f"{path}: not an embedding file (bad magic)")
    offset = len(MAGIC)
    if len(payload) < offset + _HEADER.size:
        raise IoError(f"{path}: truncated header")
    n, d, flags = _HEADER.unpack_from(payload, offset)
    offset += _HEADER.size
    expected = offset + 4 * n * d + 4 * n * (bool(flags & FLAG_ASSIGNED) + bool(flags & FLAG_LATENT))
    if len(payload) != expected:
        raise IoError(f"{path}: expected {expected} bytes, found {len(payload)}")

    vectors = np.frombuffer(payload, dtype="<f4", count=n * d, offset=offset)
    vectors = vectors.reshape(n, d).astype(np.float64)
    offset += 4 * n * d
    labels = {}
    for flag in (FLAG_ASSIGNED, FLAG_LATENT):
        if flags & flag:
            labels[flag] = np.frombuffer(payload, dtype="<u4", count=n, offset=offset).astype(np.int64)
            offset += 4 * n
    return EmbeddingFile(vectors, labels.get(FLAG_ASSIGNED), labels.get(FLAG_LATENT))


def export_embeddings_csv(path, batch):
    """Columns ``v0..v{d-1}`` then ``assigned`` and ``latent`` when present."""
    record = batch if isinstance(batch, EmbeddingFile) else EmbeddingFile.from_batch(batch)
    frame = pd.DataFrame(record.vectors, columns=[f"v{j}" for j in range(record.vectors.shape[1])])
    if record.assigned is not None:
        frame["assigned"] = record.assigned
    if record.latent is not None:
        frame["latent"] = record.latent
    write_csv(path, frame)


def import_embeddings_csv(path):
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError:
        raise IoError(f"embedding file not found: {path}") from None
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    columns = [c for c in frame.columns if c.startswith("v")]
    if not columns:
        raise IoError(f"{path}: no vector columns (v0, v1, ...)")
    columns.sort(key=lambda c: int(c[1:]))
    vectors = frame[columns].to_numpy(dtype=np.float64)
    assigned = frame["assigned"].to_numpy(dtype=np.int64) if "assigned" in frame else None
    latent = frame["latent"].to_numpy(dtype=np.int64) if "latent" in frame else None
    return EmbeddingFile(vectors, assigned, latent)


def load_embeddings(path):
    """Read either format, chosen by extension (``.csv`` or binary)."""
    if Path(path).suffix.lower() == ".csv":
        return import_embeddings_csv(path)
    return read_embeddings(path)


def save_embeddings(path, batch):
    if Path(path).suffix.lower() == ".csv":
        export_embeddings_csv(path, batch)
    else:
        write_embeddings(path, batch)


def stamp(payload, timestamp=True):
    """Attach the package version and, unless suppressed, a UTC timestamp."""
    stamped = dict(payload)
    stamped["dscl_version"] = __version__
    if timestamp:
        stamped["generated_at"] = datetime.now(timezone.utc).isoformat()
    return stamped


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def write_json(path, payload):
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, default=_json_default)
            f.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def write_csv(path, frame):
    try:
        frame.to_csv(path, index=False)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def reports_errors(func):
    """Turn package errors into an ``[ERROR]`` line on stderr and the error's exit code."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except DsclError as exc:
            click.secho(f"[ERROR] {exc}", fg="red", err=True)
            if isinstance(exc, NonFiniteLoss) and exc.diagnostics:
                click.echo(json.dumps(exc.diagnostics, indent=2, default=str), err=True)
            click.get_current_context().exit(exc.exit_code)

    return wrapper


def write_comparison(out_dir, result, config_record, formats=("json", "csv"), timestamp=True):
    """Write ``runs.csv``, ``summary.csv`` and ``report.json`` for a comparison.

    Returns the written paths. Run wall times are kept only with timestamps on.
    """
    out_dir = ensure_dir(out_dir)
    written = []
    if "csv" in formats:
        for name, frame in (("runs.csv", result.runs), ("summary.csv", result.summary)):
            write_csv(out_dir / name, frame)
            written.append(out_dir / name)
    if "json" in formats:
        runs = [
            dict(
                {k: v for k, v in entry.items() if k != "report"},
                **entry["report"].to_dict(include_timing=timestamp),
            )
            for entry in result.reports
        ]
        payload = {
            "config": config_record,
            "summary": json.loads(result.summary.to_json(orient="records")),
            "runs": runs,
        }
        write_json(out_dir / "report.json", stamp(payload, timestamp))
        written.append(out_dir / "report.json")
    return written
