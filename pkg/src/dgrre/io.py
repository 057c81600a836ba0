"""Serialization of run artifacts: CSV tables, JSON manifests, checkpoints."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__

FLOAT_FMT = "{:.9e}"
OUTPUT_ENV = "DGRRE_OUTPUT_DIR"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "nan" if math.isnan(x) else FLOAT_FMT.format(float(x))
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])
    return path


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return None if not math.isfinite(x) else x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path: Path, data: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def blob_hash(data: bytes) -> str:
    """Git-style blob id of ``data``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def config_hash(config: dict) -> str:
    return blob_hash(json.dumps(config, sort_keys=True).encode())


def output_root(configured: str, override: str | None = None) -> Path:
    """Explicit override first, then the environment, then the config value."""
    if override:
        return Path(override)
    env = os.environ.get(OUTPUT_ENV)
    return Path(env) if env else Path(configured)


# -- run artifacts ----------------------------------------------------------

def write_report(path: Path, report) -> Path:
    cols = list(report.columns)
    return write_csv(path, cols, ([r.get(c, math.nan) for c in cols] for r in report.rows))


def write_energy(path: Path, traj) -> Path:
    n = len(traj.energy)
    t = np.arange(n) * traj.dt
    rows = zip(range(n), t, traj.energy, traj.mean_u, traj.dissipation)
    return write_csv(path, ["step", "t", "energy", "mean_u", "dissipation"], rows)


def write_checkpoint(directory: Path, index: int, state, disc) -> Path:
    """One CSV per snapshot (element_index, field, coeff_*) plus a JSON sidecar."""
    p = disc.degree
    header = ["element_index", "field"] + [f"coeff_{k}" for k in range(p + 1)]
    rows = []
    for name in ("u", "v", "tau"):
        c = getattr(state, name).coeffs
        # full precision so that a checkpoint restores the state exactly
        rows += [[i, name, *(repr(float(x)) for x in c[i])] for i in range(c.shape[0])]
    path = write_csv(directory / f"checkpoint_{index:04d}.csv", header, rows)
    write_json(path.with_suffix(".json"), {
        "t": state.t, "degree": p, "basis": "orthonormal_legendre",
        "nodes": disc.mesh.nodes, "bc_mode": disc.mesh.bc_mode, "mesh_hash": disc.mesh.content_hash,
    })
    return path


def read_checkpoint(path: Path):
    """Coefficient arrays per field and the sidecar metadata."""
    header, rows = read_csv(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    out: dict[str, list] = {}
    for r in rows:
        out.setdefault(r[1], []).append([float(x) for x in r[2:]])
    return {k: np.array(v) for k, v in out.items()}, meta


def manifest(config: dict, result=None, extra: dict | None = None) -> dict:
    m = {"package": "dgrre", "version": __version__, "config": config, "config_hash": config_hash(config)}
    if result is not None:
        m.update({
            "mesh_hash": result.disc.mesh.content_hash,
            "dt": result.trajectory.dt,
            "steps": len(result.trajectory.energy) - 1,
            "sigma": result.disc.sigma,
            "status": "failed" if result.trajectory.failure else "ok",
        })
    if extra:
        m.update(extra)
    return m


def write_convergence(path: Path, table) -> Path:
    return write_csv(path, table.header(), table.formatted_rows())
