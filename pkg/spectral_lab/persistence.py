"""
Persistence

This module provides the on-disk formats of the laboratory: CSV tables with fixed
float formatting, sorted JSON, serialized instances and the run directory with
its manifest.

A run is written into a temporary directory next to its final location and
renamed into place only when every output has been written, so a failed run
leaves nothing behind.
"""

import csv
import hashlib
import io
import json
import logging
import os
import platform
import shutil
import tempfile
import time
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy
from scipy import sparse

from .config import TOOL_VERSION
from .ensembles import DenseHermitian, Instance, SparseHermitian, SparsePauliSum
from .errors import ConfigError, DomainError
from .models import EnsembleSpec, ExperimentConfig, Manifest, ManifestEntry
from .spectral import Spectrum

logger = logging.getLogger(__name__)

FLOAT_FORMAT = ".17g"
MANIFEST_NAME = "manifest.json"


# --- Formatting ---

def format_float(value: float) -> str:
    return format(float(value), FLOAT_FORMAT)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Render a header plus rows with 17-significant-digit floats and LF line endings."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise DomainError(f"Row has {len(row)} cells, header has {len(header)}")
        writer.writerow([_cell(value) for value in row])
    return buffer.getvalue()


def records_table(records: Sequence[Any]) -> Tuple[List[str], List[List[Any]]]:
    """Header and rows from a sequence of pydantic records (field order kept)."""
    if not records:
        return [], []
    header = list(type(records[0]).model_fields)
    return header, [[getattr(record, name) for name in header] for record in records]


def json_text(payload: Any) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def content_hash(data: bytes) -> str:
    """Git-style blob SHA-1 of data."""
    digest = hashlib.sha1()
    digest.update(f"blob {len(data)}\0".encode())
    digest.update(data)
    return digest.hexdigest()


def config_hash(config: ExperimentConfig) -> str:
    """Hash of the canonical JSON of the result-determining config fields."""
    canonical = json.dumps(config.hashed_payload(), sort_keys=True, separators=(",", ":"))
    return content_hash(canonical.encode())


def read_json(path: str) -> Any:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


# --- Instances ---

def _spec_fields(spec: Optional[EnsembleSpec]) -> Dict[str, Any]:
    if spec is None:
        return {"variant": "custom", "seed": None}
    return {"variant": spec.variant.value, "seed": spec.seed}


def instance_files(h: Instance, stem: str, spec: Optional[EnsembleSpec] = None) -> Dict[str, bytes]:
    """
    Serialized files of an instance keyed by file name.

    Pauli sums become one JSON file with the term list. Dense and triplet matrices
    become a JSON header plus little-endian complex128 payloads.
    """
    header = _spec_fields(spec)
    if isinstance(h, SparsePauliSum):
        header.update(n=h.n, m=h.m, terms=[{"coeff": float(c), "pauli": str(s)} for c, s in h.terms])
        return {f"{stem}.json": json_text(header).encode()}

    if isinstance(h, DenseHermitian):
        data_file = f"{stem}.bin"
        header.update(N=h.dim, dtype="<c16", layout="row_major", data_file=data_file)
        payload = np.ascontiguousarray(h.matrix, dtype="<c16").tobytes()
        return {f"{stem}.json": json_text(header).encode(), data_file: payload}

    if isinstance(h, SparseHermitian):
        data_file, index_file = f"{stem}.bin", f"{stem}.idx"
        coo = h.matrix
        header.update(N=h.dim, nnz=int(coo.nnz), dtype="<c16", index_dtype="<i8", layout="coo",
                      data_file=data_file, index_file=index_file)
        indices = np.concatenate([coo.row, coo.col]).astype("<i8")
        return {f"{stem}.json": json_text(header).encode(),
                data_file: np.asarray(coo.data, dtype="<c16").tobytes(),
                index_file: indices.tobytes()}

    raise DomainError(f"Cannot serialize instance of type {type(h).__name__}")


def save_instance(h: Instance, directory: str, stem: str, spec: Optional[EnsembleSpec] = None) -> List[str]:
    """Write an instance into directory and return the written file names."""
    names = []
    for name, data in instance_files(h, stem, spec).items():
        with open(os.path.join(directory, name), "wb") as f:
            f.write(data)
        names.append(name)
    return names


def load_instance(path: str) -> Tuple[Instance, Dict[str, Any]]:
    """
    Read an instance written by save_instance.

    Args:
        path: Path to the instance JSON (header) file

    Returns:
        (instance, header dict)

    Raises:
        ConfigError: If the file is missing or malformed
    """
    if not os.path.exists(path):
        raise ConfigError(f"Instance file not found: {path}")
    try:
        header = read_json(path)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Instance file {path} is not valid JSON: {e}") from e
    source = header.get("variant", "custom")
    directory = os.path.dirname(path)

    if "terms" in header:
        terms = [(term["coeff"], term["pauli"]) for term in header["terms"]]
        return SparsePauliSum.from_text(terms, source=source), header

    layout = header.get("layout")
    N = int(header["N"])
    data = np.fromfile(os.path.join(directory, header["data_file"]), dtype=header.get("dtype", "<c16"))
    if layout == "row_major":
        if data.size != N * N:
            raise ConfigError(f"Payload of {path} holds {data.size} values, expected {N * N}")
        return DenseHermitian(data.reshape(N, N).astype(np.complex128), source), header
    if layout == "coo":
        indices = np.fromfile(os.path.join(directory, header["index_file"]), dtype=header.get("index_dtype", "<i8"))
        rows, cols = indices[:data.size], indices[data.size:]
        matrix = sparse.coo_array((data.astype(np.complex128), (rows, cols)), shape=(N, N))
        return SparseHermitian(matrix, source), header
    raise ConfigError(f"Unknown instance layout {layout!r} in {path}")


# --- Spectra ---

def spectrum_rows(s: Spectrum) -> Tuple[List[str], List[List[Any]]]:
    return ["index", "eigenvalue"], [[index, value] for index, value in enumerate(s.eigenvalues)]


def spectrum_summary(s: Spectrum) -> Dict[str, Any]:
    return {"N": s.N, "lambda_min": s.lambda_min, "lambda_max": s.lambda_max,
            "mean": s.mean, "second_moment": s.moment(2), "source": s.source}


# --- Run directory ---

def provenance() -> Dict[str, str]:
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "platform": platform.platform()}


class RunWriter:
    """
    Collect the outputs of one run and publish them atomically with a manifest.

    Usage:
        with RunWriter(config, "spectrum", root) as run:
            run.write_csv("spectrum.csv", header, rows)
    """

    def __init__(self, config: ExperimentConfig, subcommand: str, output_root: str):
        self.config = config
        self.subcommand = subcommand
        self.config_hash = config_hash(config)
        self.output_root = output_root
        self.run_name = f"{config.experiment}-{subcommand}-{self.config_hash[:8]}"
        self.final_dir = os.path.join(output_root, self.run_name)
        self.work_dir: Optional[str] = None
        self._outputs: Dict[str, ManifestEntry] = {}
        self._started = 0.0

    def __enter__(self) -> "RunWriter":
        os.makedirs(self.output_root, exist_ok=True)
        self.work_dir = tempfile.mkdtemp(prefix=f".{self.run_name}-", dir=self.output_root)
        self._started = time.perf_counter()
        logger.info(f"Writing run {self.run_name} ({self.subcommand})")
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is not None:
            logger.error(f"Run {self.run_name} failed, removing partial output: {exc}")
            shutil.rmtree(self.work_dir, ignore_errors=True)
            return False
        self._write_manifest()
        if os.path.exists(self.final_dir):
            logger.info(f"Replacing previous output at {self.final_dir}")
            shutil.rmtree(self.final_dir)
        os.replace(self.work_dir, self.final_dir)
        logger.info(f"Run {self.run_name} written to {self.final_dir}")
        return False

    def _register(self, name: str, data: bytes) -> None:
        if name in self._outputs or name == MANIFEST_NAME:
            raise DomainError(f"Output {name} written twice in run {self.run_name}")
        with open(os.path.join(self.work_dir, name), "wb") as f:
            f.write(data)
        self._outputs[name] = ManifestEntry(name=name, sha1=content_hash(data), bytes=len(data))

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
        self._register(name, csv_text(header, rows).encode())

    def write_records(self, name: str, records: Sequence[Any]) -> None:
        header, rows = records_table(records)
        self.write_csv(name, header, rows)

    def write_json(self, name: str, payload: Any) -> None:
        self._register(name, json_text(payload).encode())

    def write_instance(self, h: Instance, stem: str, spec: Optional[EnsembleSpec] = None) -> List[str]:
        files = instance_files(h, stem, spec)
        for name, data in files.items():
            self._register(name, data)
        return list(files)

    @property
    def outputs(self) -> List[str]:
        return sorted(self._outputs)

    def _write_manifest(self) -> None:
        manifest = Manifest(
            experiment=self.config.experiment,
            subcommand=self.subcommand,
            seed=self.config.seed,
            config_hash=self.config_hash,
            config=self.config.hashed_payload(),
            tool_version=TOOL_VERSION,
            created_at=datetime.now(timezone.utc).isoformat(),
            wall_time_seconds=time.perf_counter() - self._started,
            outputs=[self._outputs[name] for name in self.outputs],
            provenance=provenance(),
        )
        with open(os.path.join(self.work_dir, MANIFEST_NAME), "wb") as f:
            f.write(json_text(manifest.model_dump(mode="json")).encode())
