"""Datasets, genome files and CSV output.

CIFAR binaries are parsed from their distribution layout (one label byte,
or coarse+fine label bytes, followed by 3072 channel-planar pixel bytes).
Synthetic Blobs/Spirals sets are deterministic in their seed.
"""
from __future__ import annotations

import csv
import enum
import io
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grn import Genome, GrnConfig, Kind, Protein, validate_genome

__all__ = [
    "ImageRecord",
    "Dataset",
    "DataError",
    "GenomeFormatError",
    "GenomeFile",
    "parse_cifar10",
    "parse_cifar100",
    "records_to_dataset",
    "load_cifar",
    "SynthKind",
    "synth_dataset",
    "format_genome",
    "parse_genome",
    "save_genome",
    "load_genome",
    "write_telemetry_csv",
    "write_history_csv",
    "write_rows_csv",
]

CIFAR10_RECORD = 3073
CIFAR100_RECORD = 3074
PIXELS = 3 * 32 * 32
GENOME_FORMAT_VERSION = 1


class DataError(ValueError):
    pass


class GenomeFormatError(DataError):
    pass


@dataclass(frozen=True)
class ImageRecord:
    label: int
    pixels: bytes
    coarse_label: int | None = None


@dataclass
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise DataError("inputs and labels differ in length")

    def __len__(self):
        return int(self.labels.shape[0])

    def subset(self, n: int) -> Dataset:
        return Dataset(self.inputs[:n], self.labels[:n], self.n_classes)


def _check_length(data: bytes, record: int) -> int:
    if len(data) % record:
        raise DataError(f"length {len(data)} not multiple of {record} "
                        f"(trailing bytes at offset {len(data) - len(data) % record})")
    return len(data) // record


def parse_cifar10(data: bytes) -> list[ImageRecord]:
    n = _check_length(data, CIFAR10_RECORD)
    out = []
    for k in range(n):
        off = k * CIFAR10_RECORD
        label = data[off]
        if label > 9:
            raise DataError(f"label {label} > 9 at offset {off}")
        out.append(ImageRecord(label, bytes(data[off + 1:off + CIFAR10_RECORD])))
    return out


def parse_cifar100(data: bytes) -> list[ImageRecord]:
    n = _check_length(data, CIFAR100_RECORD)
    out = []
    for k in range(n):
        off = k * CIFAR100_RECORD
        coarse, fine = data[off], data[off + 1]
        if coarse > 19:
            raise DataError(f"coarse label {coarse} > 19 at offset {off}")
        if fine > 99:
            raise DataError(f"fine label {fine} > 99 at offset {off + 1}")
        out.append(ImageRecord(fine, bytes(data[off + 2:off + CIFAR100_RECORD]), coarse))
    return out


def records_to_dataset(records: Sequence[ImageRecord], n_classes: int) -> Dataset:
    px = np.frombuffer(b"".join(r.pixels for r in records), dtype=np.uint8)
    inputs = px.reshape(len(records), 3, 32, 32).astype(np.float64) / 255.0
    labels = np.array([r.label for r in records], dtype=np.int64)
    return Dataset(inputs, labels, n_classes)


_CIFAR_FILES = {
    "cifar10": ([f"data_batch_{i}.bin" for i in range(1, 6)], ["test_batch.bin"], parse_cifar10, 10),
    "cifar100": (["train.bin"], ["test.bin"], parse_cifar100, 100),
}


def load_cifar(name: str, data_dir: str | os.PathLike, split: str = "train",
               subset: int | None = None) -> Dataset:
    """Load a CIFAR split from a directory of the binary distribution files."""
    train_files, test_files, parser, n_classes = _CIFAR_FILES[name]
    files = train_files if split == "train" else test_files
    records: list[ImageRecord] = []
    for fname in files:
        path = Path(data_dir) / fname
        if not path.exists():
            # the archives extract into a cifar-*-batches-bin/ subdirectory
            nested = list(Path(data_dir).glob(f"*/{fname}"))
            if not nested:
                raise DataError(f"missing {name} file {fname} under {data_dir}")
            path = nested[0]
        try:
            records.extend(parser(path.read_bytes()))
        except DataError as e:
            raise DataError(f"{path}: {e}") from None
        if subset is not None and len(records) >= subset:
            break
    if subset is not None:
        records = records[:subset]
    return records_to_dataset(records, n_classes)


class SynthKind(str, enum.Enum):
    BLOBS = "blobs"
    SPIRALS = "spirals"


def synth_dataset(kind: str | SynthKind, n: int, n_classes: int, seed: int,
                  noise: float | None = None, dim: int = 2) -> Dataset:
    """Balanced synthetic classification set with features scaled to [0, 1].

    Blobs: isotropic Gaussian clusters around centres on a circle.
    Spirals: interleaved arms with Gaussian jitter.
    """
    kind = SynthKind(kind)
    if n < n_classes:
        raise ValueError("need at least one sample per class")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % n_classes
    if kind is SynthKind.BLOBS:
        noise = 0.15 if noise is None else noise
        angles = 2 * np.pi * np.arange(n_classes) / n_classes
        centres = np.zeros((n_classes, dim))
        centres[:, 0], centres[:, 1] = np.cos(angles), np.sin(angles)
        x = centres[labels] + noise * rng.standard_normal((n, dim))
    else:
        noise = 0.05 if noise is None else noise
        r = rng.random(n)
        theta = 3.0 * np.pi * r + 2 * np.pi * labels / n_classes
        x = np.zeros((n, dim))
        x[:, 0], x[:, 1] = r * np.cos(theta), r * np.sin(theta)
        x[:, :2] += noise * rng.standard_normal((n, 2))
    perm = rng.permutation(n)
    x, labels = x[perm], labels[perm]
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return Dataset((x - lo) / span, labels.astype(np.int64), n_classes)


# --- genome files ---------------------------------------------------------

@dataclass(frozen=True)
class GenomeFile:
    genome: Genome
    base: str
    version: int = GENOME_FORMAT_VERSION


def _r(x: float) -> str:
    return f"{x:.17g}"


def format_genome(genome: Genome, base: str | None = None) -> str:
    if base is None:
        base = {4: "sgd", 8: "adam"}.get(genome.n_outputs, "sgd")
    if base not in ("sgd", "adam"):
        raise ValueError(f"unknown base {base!r}")
    lines = [f"version {GENOME_FORMAT_VERSION}", f"base {base}",
             f"beta {_r(genome.beta)}", f"delta {_r(genome.delta)}"]
    lines += [f"{p.kind.value} {_r(p.id)} {_r(p.enh)} {_r(p.inh)}" for p in genome.proteins]
    return "\n".join(lines) + "\n"


def parse_genome(text: str, config: GrnConfig | None = None) -> GenomeFile:
    header: dict[str, str] = {}
    proteins = []
    expected = ["version", "base", "beta", "delta"]
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if len(header) < len(expected):
            key = expected[len(header)]
            if len(parts) != 2 or parts[0] != key:
                raise GenomeFormatError(f"line {lineno}: expected '{key} <value>'")
            header[key] = parts[1]
            if key == "version" and parts[1] != str(GENOME_FORMAT_VERSION):
                raise GenomeFormatError(f"line {lineno}: unsupported version {parts[1]!r}")
            continue
        if len(parts) != 4:
            raise GenomeFormatError(f"line {lineno}: expected 'kind id enh inh'")
        try:
            kind = Kind(parts[0])
            tags = [float(v) for v in parts[1:]]
        except ValueError:
            raise GenomeFormatError(f"line {lineno}: malformed protein {line!r}") from None
        proteins.append(Protein(*tags, kind))
    if len(header) < len(expected):
        raise GenomeFormatError(f"missing header field {expected[len(header)]!r}")
    if header["base"] not in ("sgd", "adam"):
        raise GenomeFormatError(f"unknown base {header['base']!r}")
    try:
        genome = Genome(tuple(proteins), float(header["beta"]), float(header["delta"]))
    except ValueError:
        raise GenomeFormatError("malformed beta/delta") from None
    violations = validate_genome(genome, config)
    if violations:
        raise GenomeFormatError("validate_genome: " + "; ".join(violations))
    return GenomeFile(genome, header["base"], int(header["version"]))


def save_genome(path: str | os.PathLike, genome: Genome, base: str | None = None) -> None:
    Path(path).write_text(format_genome(genome, base), encoding="utf-8")


def load_genome(path: str | os.PathLike, config: GrnConfig | None = None) -> GenomeFile:
    return parse_genome(Path(path).read_text(encoding="utf-8"), config)


# --- CSV -----------------------------------------------------------------

def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def write_rows_csv(path: str | os.PathLike, columns: Sequence[str], rows: Iterable[dict]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) for c in columns])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_telemetry_csv(path: str | os.PathLike, rows: Sequence[dict], base: str) -> None:
    from .neuromod import telemetry_columns
    write_rows_csv(path, telemetry_columns(base), rows)


def write_history_csv(path: str | os.PathLike, history: Sequence) -> None:
    from .grneat import GenerationRecord
    columns = [f.name for f in fields(GenerationRecord)]
    write_rows_csv(path, columns, ({c: getattr(r, c) for c in columns} for r in history))
