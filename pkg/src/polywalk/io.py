"""Sample files: a column-major float64 binary with a JSON sidecar, or CSV
with a header. Multiple chains are stored stacked, with the chain lengths
recorded alongside."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

FORMATS = ("bin", "csv")


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_samples(path: str | Path, chains: Sequence[np.ndarray], fmt: str = "bin",
                  meta: dict | None = None) -> None:
    """Write chains to ``path``.

    ``bin`` writes the stacked ``n x d`` matrix in column-major order as
    raw little-endian float64, with ``<path>.json`` holding rows, cols,
    chain lengths and ``meta``. ``csv`` writes a ``chain,x1,...,xd`` table.
    """
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    chains = [np.asarray(c, dtype=float) for c in chains]
    X = np.concatenate(chains)
    lengths = [int(c.shape[0]) for c in chains]
    path = Path(path)
    if fmt == "bin":
        path.write_bytes(np.asfortranarray(X).astype("<f8").tobytes(order="F"))
        side = {
            "rows": int(X.shape[0]),
            "cols": int(X.shape[1]),
            "dtype": "float64",
            "byteorder": "little",
            "order": "column-major",
            "chains": lengths,
            **(meta or {}),
        }
        sidecar_path(path).write_text(json.dumps(side, indent=2, sort_keys=True))
        return
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["chain"] + [f"x{j + 1}" for j in range(X.shape[1])])
        for i, c in enumerate(chains):
            for row in c:
                w.writerow([i] + [repr(float(v)) for v in row])


def read_samples(path: str | Path) -> list[np.ndarray]:
    """Inverse of ``write_samples``; the format is inferred from the sidecar."""
    path = Path(path)
    side = sidecar_path(path)
    if side.exists():
        info = json.loads(side.read_text())
        raw = np.frombuffer(path.read_bytes(), dtype="<f8")
        X = raw.reshape((info["rows"], info["cols"]), order="F")
        bounds = np.cumsum([0] + list(info.get("chains", [info["rows"]])))
        return [np.array(X[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    ids = data[:, 0].astype(int)
    return [data[ids == k, 1:] for k in np.unique(ids)]


def read_sidecar(path: str | Path) -> dict:
    side = sidecar_path(path)
    return json.loads(side.read_text()) if side.exists() else {}
