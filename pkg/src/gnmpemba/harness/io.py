"""Plain-text outputs: trajectory CSVs, JSON reports and the run manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NU_MAX = 10
SCALAR_ORDER = ("M", "Mhat", "F_fw", "F_bw", "D_T")


def fmt(x: float) -> str:
    """17 significant digits, enough to round-trip any float64."""
    return f"{float(x):.17g}"


def folded_moduli(mhat_series: np.ndarray, nu: np.ndarray, nu_max: int) -> np.ndarray:
    """``max(|mhat(nu)|, |mhat(-nu)|)`` for ``nu = 0..nu_max``.

    For a real profile both members of a pair have the same modulus, so the
    fold loses nothing.
    """
    a = np.abs(np.atleast_2d(mhat_series))
    idx = {int(n): i for i, n in enumerate(nu)}
    cols = []
    for n in range(nu_max + 1):
        ii = [idx[k] for k in {n, -n} if k in idx]
        cols.append(a[:, ii].max(axis=1))
    return np.stack(cols, axis=1) if cols else np.zeros((a.shape[0], 0))


def timeseries_columns(nu_max: int, scalars=()) -> list[str]:
    return ["t", "deltaJ"] + [f"mhat_{n}" for n in range(nu_max + 1)] + list(scalars)


def write_timeseries(record, path, *, nu_max: int = NU_MAX, scalars: dict | None = None) -> Path:
    """CSV of a trajectory: t, deltaJ, folded |mhat_nu|, then scalar series.

    ``scalars`` maps column names to arrays sampled on ``record.times``;
    the record's own fidelity/trace-distance series are added when present.
    """
    path = Path(path)
    series = dict(record.distance_series) if record.distance_series else {}
    series.update(scalars or {})
    names = [k for k in SCALAR_ORDER if k in series] + sorted(k for k in series if k not in SCALAR_ORDER)
    n = len(record.times)
    for k in names:
        if len(series[k]) != n:
            raise ValueError(f"scalar column {k!r} has {len(series[k])} rows, expected {n}")
    nu_max = min(nu_max, record.params.L // 2)
    mods = folded_moduli(record.mhat_series, record.nu, nu_max) if n else np.zeros((0, nu_max + 1))
    dJ = record.deltaJ_series
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(timeseries_columns(nu_max, names))
            for i in range(n):
                row = [record.times[i], dJ[i], *mods[i], *(series[k][i] for k in names)]
                w.writerow([fmt(x) for x in row])
    except OSError as exc:
        raise OSError(f"cannot write time series to {path}: {exc}") from exc
    return path


def read_timeseries(path) -> dict[str, np.ndarray]:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read time series from {path}: {exc}") from exc
    if not rows:
        raise ValueError(f"{path}: missing header")
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r] for r in body], dtype=float).reshape(len(body), len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _clean(o):
    # JSON has no inf/nan
    if isinstance(o, float) and not math.isfinite(o):
        return None if math.isnan(o) else ("inf" if o > 0 else "-inf")
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def write_json(path, payload) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    text = json.dumps(_clean(json.loads(json.dumps(payload, default=_default, allow_nan=True))), indent=2, sort_keys=True)
    tmp.write_text(text + "\n")
    tmp.replace(path)
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    config: dict
    version: str
    seeds: dict = field(default_factory=dict)
    wall_time: float = 0.0
    files: dict[str, str] = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    status: str = "ok"

    def inventory(self, outdir) -> None:
        """Checksum every file in ``outdir`` except the manifest itself."""
        outdir = Path(outdir)
        self.files = {
            str(p.relative_to(outdir)): sha256_file(p)
            for p in sorted(outdir.rglob("*"))
            if p.is_file() and p.name != "manifest.json" and not p.name.endswith(".tmp")
        }

    def write(self, outdir) -> Path:
        outdir = Path(outdir)
        self.inventory(outdir)
        return write_json(
            outdir / "manifest.json",
            {
                "config": self.config,
                "version": self.version,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "seeds": self.seeds,
                "wall_time": self.wall_time,
                "files": self.files,
                "failures": self.failures,
                "status": self.status,
            },
        )
