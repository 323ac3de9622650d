"""CSV formats for Q-tables, distributions, runs and aggregate traces.

Every file starts with ``# rasql <kind> v1`` followed by ``# key=value``
metadata lines and a column header. Floats are written with ``repr`` so
identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .learner import RunRecord

FORMAT_VERSION = 1


def _header(kind: str, meta: dict) -> str:
    lines = [f"# rasql {kind} v{FORMAT_VERSION}"]
    lines += [f"# {k}={v}" for k, v in meta.items()]
    return "\n".join(lines) + "\n"


def _write(path: Path, kind: str, meta: dict, columns: list[str], rows) -> None:
    buf = io.StringIO()
    buf.write(_header(kind, meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    Path(path).write_text(buf.getvalue())


def _read(path: Path, kind: str) -> tuple[dict, list[dict]]:
    meta = {}
    body = []
    with open(path) as fh:
        first = fh.readline().strip()
        if not first.startswith(f"# rasql {kind} v"):
            raise ValueError(f"{path}: not a rasql {kind} file")
        version = int(first.rsplit("v", 1)[1])
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported {kind} format version {version}")
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
            else:
                body.append(line)
    return meta, list(csv.DictReader(body))


def write_q_csv(path, qs: np.ndarray, meta: dict | None = None) -> None:
    """Q-table stack ``(L, Z, A)`` as rows ``phase,z,a,value``."""
    qs = np.asarray(qs, dtype=float)
    rows = ((l, z, a, qs[l, z, a]) for l, z, a in np.ndindex(qs.shape))
    _write(path, "q-table", {"shape": "x".join(map(str, qs.shape)), **(meta or {})},
           ["phase", "z", "a", "value"], rows)


def read_q_csv(path) -> np.ndarray:
    meta, rows = _read(path, "q-table")
    shape = tuple(int(n) for n in meta["shape"].split("x"))
    out = np.full(shape, np.nan)
    for r in rows:
        out[int(r["phase"]), int(r["z"]), int(r["a"])] = float(r["value"])
    return out


def write_distribution_csv(path, mass: np.ndarray, meta: dict | None = None) -> None:
    """Joint mass ``(S, Y, Z, A)`` as rows ``s,y,z,a,mass`` in C order."""
    mass = np.asarray(mass, dtype=float)
    rows = ((s, y, z, a, mass[s, y, z, a]) for s, y, z, a in np.ndindex(mass.shape))
    _write(path, "distribution", {"shape": "x".join(map(str, mass.shape)), **(meta or {})},
           ["s", "y", "z", "a", "mass"], rows)


def read_distribution_csv(path) -> np.ndarray:
    meta, rows = _read(path, "distribution")
    shape = tuple(int(n) for n in meta["shape"].split("x"))
    out = np.zeros(shape)
    for r in rows:
        out[int(r["s"]), int(r["y"]), int(r["z"]), int(r["a"])] = float(r["mass"])
    return out


def write_run_csv(path, rec: RunRecord) -> None:
    """Snapshots as rows ``t,phase,z,a,q_value``; the final table is the last snapshot."""
    meta = {"config_digest": rec.config_digest, "seed": rec.seed, "schedule": rec.schedule,
            "shape": "x".join(map(str, rec.final.shape)),
            "visits": json.dumps(rec.visits.tolist(), separators=(",", ":"))}

    def rows():
        for k, t in enumerate(rec.times):
            snap = rec.snapshots[k]
            for l, z, a in np.ndindex(snap.shape):
                yield int(t), l, z, a, snap[l, z, a]

    _write(path, "run", meta, ["t", "phase", "z", "a", "q_value"], rows())


def read_run_csv(path) -> RunRecord:
    meta, rows = _read(path, "run")
    shape = tuple(int(n) for n in meta["shape"].split("x"))
    times = sorted({int(r["t"]) for r in rows})
    index = {t: k for k, t in enumerate(times)}
    snaps = np.full((len(times),) + shape, np.nan)
    for r in rows:
        snaps[index[int(r["t"])], int(r["phase"]), int(r["z"]), int(r["a"])] = float(r["q_value"])
    return RunRecord(seed=int(meta["seed"]), times=np.array(times, dtype=np.int64),
                     snapshots=snaps, final=snaps[-1].copy(),
                     visits=np.array(json.loads(meta["visits"]), dtype=np.int64),
                     config_digest=meta.get("config_digest", ""),
                     schedule=meta.get("schedule", ""))


def write_trace_csv(path, trace, meta: dict | None = None) -> None:
    """Aggregate trace as rows ``phase,z,a,t,median,q25,q75,limit``."""
    limit = trace.limit

    def rows():
        L, Z, A = trace.median.shape[1:]
        for l, z, a in np.ndindex(L, Z, A):
            lim = "" if limit is None else limit[l, z, a]
            for k, t in enumerate(trace.times):
                yield (l, z, a, int(t), trace.median[k, l, z, a], trace.lower[k, l, z, a],
                       trace.upper[k, l, z, a], lim)

    _write(path, "trace", {"seeds": len(trace.seeds), **(meta or {})},
           ["phase", "z", "a", "t", "median", "q25", "q75", "limit"], rows())
