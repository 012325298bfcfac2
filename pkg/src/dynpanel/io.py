"""Serialization: panel CSV, world JSON, canonical config digests."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

from .core import ObservedPanel, PotentialOutcomeWorld, TreatmentPath
from .errors import ConfigError, MalformedWorldError

PANEL_HEADER = ("unit", "t", "y", "d")


def jsonable(obj):
    """JSON-safe copy: numpy scalars to Python, NaN to None, infinities to strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if np.isnan(f):
            return None
        if np.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def dumps_pretty(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def panel_to_csv(panel: ObservedPanel, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PANEL_HEADER)
    for i in range(panel.n):
        for t in range(panel.horizon + 1):
            d = 0 if t == 0 else int(panel.d[i, t - 1])
            w.writerow((i, t, repr(float(panel.y[i, t])), d))
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def panel_from_csv(source) -> ObservedPanel:
    """Read a long-format ``unit,t,y,d`` panel. ``source`` is a path or CSV text."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        try:
            text = Path(source).read_text()
        except FileNotFoundError:
            raise ConfigError(f"panel file not found: {source}") from None
    else:
        text = str(source)
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(c.strip() for c in rows[0]) != PANEL_HEADER:
        raise ConfigError(f"panel CSV must start with header {','.join(PANEL_HEADER)}")
    body = [r for r in rows[1:] if r]
    try:
        units = np.array([int(r[0]) for r in body])
        ts = np.array([int(r[1]) for r in body])
        ys = np.array([float(r[2]) for r in body])
        ds = np.array([int(r[3]) for r in body])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"malformed panel CSV row: {exc}") from None
    ids, unit_pos = np.unique(units, return_inverse=True)
    T = int(ts.max())
    n = ids.size
    if body and len(body) != n * (T + 1):
        raise MalformedWorldError("unbalanced panel: every unit needs rows t = 0..T")
    y = np.full((n, T + 1), np.nan)
    d = np.zeros((n, T + 1), dtype=np.int64)
    y[unit_pos, ts] = ys
    d[unit_pos, ts] = ds
    if np.isnan(y).any():
        raise MalformedWorldError("unbalanced panel: missing (unit, t) rows")
    if np.any(d[:, 0] != 0):
        raise MalformedWorldError("treatment at t = 0 must be 0")
    return ObservedPanel(y=y, d=d[:, 1:])


def world_to_json(world: PotentialOutcomeWorld) -> dict:
    units = []
    for i in range(world.n):
        po = {}
        for t in range(1, world.horizon + 1):
            for k in range(2**t):
                po[TreatmentPath.from_index(k, t).key] = float(world.po[t - 1][i, k])
        latent = {key: np.asarray(v[i]).tolist() for key, v in world.latent.items()}
        units.append(
            {
                "y0": float(world.y0[i]),
                "po": po,
                "assigned": "".join(str(int(b)) for b in world.assigned[i]),
                "latent": latent,
            }
        )
    return {
        "schema": 1,
        "regime": world.regime,
        "horizon": world.horizon,
        "meta": jsonable(world.meta),
        "units": units,
    }


def world_from_json(doc) -> PotentialOutcomeWorld:
    if isinstance(doc, (str, Path)):
        doc = json.loads(Path(doc).read_text())
    T = int(doc["horizon"])
    units = doc["units"]
    n = len(units)
    y0 = np.array([u["y0"] for u in units], dtype=np.float64)
    po = []
    for t in range(1, T + 1):
        keys = [TreatmentPath.from_index(k, t).key for k in range(2**t)]
        arr = np.empty((n, 2**t))
        for i, u in enumerate(units):
            try:
                arr[i] = [u["po"][key] for key in keys]
            except KeyError as exc:
                raise MalformedWorldError(f"unit {i} lacks potential outcome for path {exc}") from None
        po.append(arr)
    assigned = np.array([[int(c) for c in u["assigned"]] for u in units], dtype=np.int8).reshape(n, T)
    latent = {}
    if units:
        for key in units[0].get("latent", {}):
            latent[key] = np.array([u["latent"][key] for u in units])
    return PotentialOutcomeWorld(
        y0=y0, po=tuple(po), assigned=assigned, latent=latent,
        regime=doc.get("regime", "unknown"), meta=doc.get("meta", {}),
    )


def panel_digest(panel: ObservedPanel) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(panel.y).tobytes())
    h.update(np.ascontiguousarray(panel.d).tobytes())
    return h.hexdigest()


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
