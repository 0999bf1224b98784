"""Run configuration and run-directory files (JSON, CSV, raw float64 snapshots).

Every write goes to a temporary file in the target directory and is renamed
into place, so a crash never leaves a half-written artifact behind.
"""
from __future__ import annotations

import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .lattice import LatticeSpec, Semimetric, lattice_from_json
from .potentials import ModelSpec, model_from_json
from .sampler.chain import ORDERS, ChainState

CONFIG = "config.json"
META = "meta.json"
SAMPLES = "samples.csv"
CHECKPOINT = "checkpoint.bin"
CHECKPOINT_META = "checkpoint.json"
REPORT = "report.json"
COV = "cov.csv"


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def read_json(path, error=DataError) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise error("cannot read %s: %s" % (path, exc)) from None


def digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# --- configuration -----------------------------------------------------------

def _check_finite(obj, where="config"):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return
    if isinstance(obj, (int, float)):
        if not math.isfinite(obj):
            raise ConfigError("non-finite number at %s" % where)
        return
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, "%s.%s" % (where, k))
        return
    if isinstance(obj, list):
        for i, v in enumerate(obj):
            _check_finite(v, "%s[%d]" % (where, i))
        return
    raise ConfigError("unsupported value at %s" % where)


def _int(section: dict, key: str, default=None, minimum: Optional[int] = None) -> int:
    v = section.get(key, default)
    if v is None:
        raise ConfigError("missing sampler.%s" % key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError("%s must be an integer" % key)
    if minimum is not None and v < minimum:
        raise ConfigError("%s must be >= %d" % (key, minimum))
    return v


@dataclass
class SamplerConfig:
    sweeps: int
    burnin: int
    thin: int
    seed: int
    order: str = "checkerboard"

    def to_json(self) -> dict:
        return {"sweeps": self.sweeps, "burnin": self.burnin, "thin": self.thin,
                "seed": self.seed, "order": self.order}


@dataclass
class AnalysisConfig:
    observable: str = "tanh"
    max_displacement: int = 4
    a: float = 0.0
    base_site: Optional[int] = None
    n_batches: int = 32


@dataclass
class RunConfig:
    model: ModelSpec
    lattice: LatticeSpec
    metric: Semimetric
    sampler: Optional[SamplerConfig]
    analysis: AnalysisConfig
    raw: Dict[str, Any] = field(default_factory=dict)

    @property
    def digest(self) -> str:
        return digest(self.raw)


def parse_config(raw: dict) -> RunConfig:
    """Validate a config mapping; raises ConfigError with a readable reason."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _check_finite(raw)
    for key in ("model", "lattice"):
        if not isinstance(raw.get(key), dict):
            raise ConfigError("missing or malformed %r section" % key)
    try:
        model = model_from_json(raw["model"])
        lattice = lattice_from_json(raw["lattice"], max(model.r0, 1))
        metric = Semimetric(float(raw.get("metric", {}).get("alpha", 0.0)))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("invalid config: %s" % exc) from None
    if model.dim is not None and model.dim != lattice.dim:
        raise ConfigError("model displacements are %d-dimensional but the lattice has dim %d"
                          % (model.dim, lattice.dim))
    sampler = None
    s = raw.get("sampler")
    if s is not None:
        if not isinstance(s, dict):
            raise ConfigError("malformed 'sampler' section")
        if "seed" not in s:
            raise ConfigError("sampler.seed is required")
        sweeps = _int(s, "sweeps", minimum=1)
        burnin = _int(s, "burnin", sweeps // 10, minimum=0)
        thin = _int(s, "thin", 1, minimum=1)
        seed = _int(s, "seed", minimum=0)
        if seed >= 2**64:
            raise ConfigError("seed must fit in 64 bits")
        order = s.get("order", "checkerboard")
        if order not in ORDERS:
            raise ConfigError("sampler.order must be one of %s" % (ORDERS,))
        if not sweeps > burnin:
            raise ConfigError("need sweeps > burnin")
        sampler = SamplerConfig(sweeps, burnin, thin, seed, order)
    a = raw.get("analysis", {})
    if not isinstance(a, dict):
        raise ConfigError("malformed 'analysis' section")
    try:
        analysis = AnalysisConfig(str(a.get("observable", "tanh")), int(a.get("max_displacement", 4)),
                                  float(a.get("a", 0.0)), a.get("base_site"),
                                  int(a.get("n_batches", 32)))
    except (TypeError, ValueError) as exc:
        raise ConfigError("invalid analysis section: %s" % exc) from None
    if analysis.max_displacement < 0:
        raise ConfigError("max_displacement must be >= 0")
    return RunConfig(model, lattice, metric, sampler, analysis, raw)


def load_config(path) -> RunConfig:
    return parse_config(read_json(path, ConfigError))


# --- run directory -----------------------------------------------------------

def prepare_out_dir(out, force: bool) -> Path:
    out = Path(out)
    if out.exists() and not out.is_dir():
        raise ConfigError("%s exists and is not a directory" % out)
    if out.exists() and any(out.iterdir()):
        if not force:
            raise ConfigError("refusing to overwrite non-empty %s (use --force)" % out)
        for p in out.iterdir():
            if p.is_file():
                p.unlink()
    out.mkdir(parents=True, exist_ok=True)
    return out


def samples_csv(sweeps: np.ndarray, fields: np.ndarray, header: bool) -> str:
    buf = io.StringIO()
    n = fields.shape[1] if fields.ndim == 2 else 0
    if header:
        buf.write(",".join(["sweep"] + ["x_%d" % i for i in range(n)]) + "\n")
    for s, row in zip(sweeps, fields):
        buf.write("%d," % s + ",".join("%.17g" % v for v in row) + "\n")
    return buf.getvalue()


def write_samples(path, sweeps: np.ndarray, fields: np.ndarray, append: bool = False) -> None:
    path = Path(path)
    old = path.read_text() if append and path.exists() else ""
    atomic_write_text(path, old + samples_csv(sweeps, fields, header=not old))


def read_samples(path, n_sites: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """(sweeps, fields) from samples.csv; DataError on anything malformed."""
    try:
        with open(path) as fh:
            head = fh.readline().strip().split(",")
            rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    except OSError as exc:
        raise DataError("cannot read %s: %s" % (path, exc)) from None
    if not head or head[0] != "sweep":
        raise DataError("%s: bad header" % path)
    n = len(head) - 1
    if n_sites is not None and n != n_sites:
        raise DataError("%s: %d site columns, expected %d" % (path, n, n_sites))
    if any(len(r) != n + 1 for r in rows):
        raise DataError("%s: ragged rows" % path)
    try:
        arr = np.array(rows, dtype=float).reshape(len(rows), n + 1)
    except ValueError as exc:
        raise DataError("%s: %s" % (path, exc)) from None
    if not np.all(np.isfinite(arr)):
        raise DataError("%s: non-finite values" % path)
    return arr[:, 0].astype(np.int64), arr[:, 1:]


def write_field(path, field_values: np.ndarray, sidecar: dict) -> None:
    path = Path(path)
    atomic_write_bytes(path, np.ascontiguousarray(field_values, dtype="<f8").tobytes())
    write_json(path.with_suffix(".json"), sidecar)


def read_field(path, n_sites: int) -> np.ndarray:
    try:
        data = np.frombuffer(Path(path).read_bytes(), dtype="<f8")
    except OSError as exc:
        raise DataError("cannot read %s: %s" % (path, exc)) from None
    if data.size != n_sites:
        raise DataError("%s: %d values, expected %d" % (path, data.size, n_sites))
    return data.astype(float)


def save_checkpoint(run_dir, state: ChainState, lattice: LatticeSpec) -> None:
    run_dir = Path(run_dir)
    sidecar = {"sweep": state.sweep, "seed": state.seed, "model_hash": state.model_hash,
               "extents": list(lattice.extents), "n_sites": lattice.n_sites}
    atomic_write_bytes(run_dir / CHECKPOINT, np.ascontiguousarray(state.field, dtype="<f8").tobytes())
    write_json(run_dir / CHECKPOINT_META, sidecar)


def load_checkpoint(run_dir, lattice: LatticeSpec) -> ChainState:
    run_dir = Path(run_dir)
    side = read_json(run_dir / CHECKPOINT_META)
    field_values = read_field(run_dir / CHECKPOINT, lattice.n_sites)
    try:
        return ChainState(field_values, int(side["sweep"]), int(side["seed"]), str(side["model_hash"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError("corrupt checkpoint sidecar: %s" % exc) from None
