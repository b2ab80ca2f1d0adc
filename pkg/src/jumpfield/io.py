"""Serialization: binary64 arrays with JSON headers, deterministic CSV/JSON.

Result files must be byte-identical across runs with the same config and
master seed, so floats are written with repr (shortest round-trip form) and
JSON keys are sorted.  Manifests carry the volatile metadata (timestamps,
wall time) and are excluded from reproducibility comparisons.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import numpy as np


def _sidecar(path_prefix, ext):
    # append, never replace: prefixes like "snapshot_t0.5" keep their dot
    return Path(str(path_prefix) + ext)


def write_array(path_prefix, values, extra_meta=None):
    """Row-major float64 dump with a sidecar JSON header."""
    arr = np.ascontiguousarray(np.asarray(values, dtype="<f8"))
    header = {"shape": list(arr.shape), "dtype": "float64",
              "endianness": "little", "order": "C"}
    if extra_meta:
        header.update(extra_meta)
    _sidecar(path_prefix, ".f64").write_bytes(arr.tobytes())
    write_json(_sidecar(path_prefix, ".json"), header)
    return _sidecar(path_prefix, ".f64")


def read_array(path_prefix):
    header = json.loads(_sidecar(path_prefix, ".json").read_text())
    raw = _sidecar(path_prefix, ".f64").read_bytes()
    arr = np.frombuffer(raw, dtype="<f8").reshape(header["shape"])
    return arr, header


def write_field(path_prefix, field, extra_meta=None):
    meta = {"dx": field.grid.dx, "side": field.grid.side,
            "dimension": field.grid.dimension}
    if extra_meta:
        meta.update(extra_meta)
    return write_array(path_prefix, field.values, meta)


def write_configuration(path_prefix, cfg, extra_meta=None):
    box = cfg.box
    meta = {"count": len(cfg), "dimension": box.dimension,
            "box": type(box).__name__,
            "box_params": {k: getattr(box, k) for k in
                           ("side",) if hasattr(box, "side")}}
    if hasattr(box, "window"):
        meta["box_params"] = {"window": box.window, "halo": box.halo}
    if extra_meta:
        meta.update(extra_meta)
    return write_array(path_prefix, cfg.points, meta)


def _format_cell(v):
    # np.float64 subclasses float, so normalize through float() before repr
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return str(v)


def write_csv(path, columns, rows):
    """Rows are dicts; missing cells become empty strings."""
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_format_cell(row.get(c, "")) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    lines = Path(path).read_text().strip().split("\n")
    columns = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        row = {}
        for c, cell in zip(columns, cells):
            if cell == "":
                row[c] = None
                continue
            try:
                row[c] = int(cell)
            except ValueError:
                try:
                    row[c] = float(cell)
                except ValueError:
                    row[c] = cell
        rows.append(row)
    return columns, rows


class _NumpyEncoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        return super().default(o)


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True,
                                     cls=_NumpyEncoder) + "\n")


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def environment_versions():
    import numpy
    versions = {"python": sys.version.split()[0],
                "numpy": numpy.__version__}
    try:
        import scipy
        versions["scipy"] = scipy.__version__
    except ImportError:
        versions["scipy"] = "absent"
    return versions
