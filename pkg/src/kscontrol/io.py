"""CSV and JSON writers shared by the modules and the CLI."""

import csv
import json
import math

import numpy as np


def write_field_csv(path, mesh, **fields):
    """Header ``x, t, <names>`` then one row per grid point, time-major."""
    names = list(fields)
    arrays = [np.asarray(fields[k], dtype=float) for k in names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "t"] + names)
        for n, t in enumerate(mesh.t):
            for i, x in enumerate(mesh.x):
                w.writerow([repr(float(x)), repr(float(t))] + [repr(float(a[n, i])) for a in arrays])


def write_table_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
