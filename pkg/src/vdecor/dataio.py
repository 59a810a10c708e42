"""Delimited file schemas.

Training rows: loc_1..loc_d, x_1..x_P, y. Query rows drop the y column.
The intercept is never stored; it is synthesized inside the pipeline so the
transformed-intercept requirement cannot be bypassed by file edits. Floats
are written with 17 significant digits, which round-trips IEEE doubles
exactly.
"""

import csv
import re

import numpy as np

from .errors import ValidationError

_FMT = "%.17g"


def _parse_header(names, want_y):
    d = 0
    while d < len(names) and names[d] == f"loc_{d + 1}":
        d += 1
    if d == 0:
        raise ValidationError(f"header must start with loc_1..loc_d, got {names[:3]}")
    p = 0
    while d + p < len(names) and names[d + p] == f"x_{p + 1}":
        p += 1
    rest = names[d + p :]
    if want_y:
        if rest != ["y"]:
            raise ValidationError(f"training header must end with 'y', got trailing columns {rest}")
    elif rest:
        raise ValidationError(f"unexpected trailing columns {rest}")
    return d, p


def _read_rows(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValidationError(f"{path}: empty file")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
            rows.append((lineno, row))
    return [h.strip() for h in header], rows


def _to_matrix(path, header, rows):
    out = np.empty((len(rows), len(header)))
    for r, (lineno, row) in enumerate(rows):
        for c, cell in enumerate(row):
            try:
                val = float(cell)
            except ValueError:
                raise ValidationError(
                    f"{path}: bad value at row {lineno}, column {header[c]!r}: {cell!r}"
                ) from None
            if not np.isfinite(val):
                raise ValidationError(f"{path}: non-finite value at row {lineno}, column {header[c]!r}")
            out[r, c] = val
    return out


def read_training_csv(path):
    """Read a training file; returns (coords, features, response)."""
    header, rows = _read_rows(path)
    d, p = _parse_header(header, want_y=True)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    mat = _to_matrix(path, header, rows)
    return mat[:, :d], mat[:, d : d + p], mat[:, d + p]


def read_query_csv(path, extra=()):
    """Read a query file (locations + features); extra named columns may
    follow the schema columns. Returns (coords, features, extras dict)."""
    header, rows = _read_rows(path)
    base = list(header)
    extras_present = [name for name in extra if name in header]
    for name in extras_present:
        base.remove(name)
    d, p = _parse_header(base, want_y=False)
    mat = _to_matrix(path, header, rows) if rows else np.empty((0, len(header)))
    cols = {name: i for i, name in enumerate(header)}
    coords = mat[:, [cols[f"loc_{j + 1}"] for j in range(d)]]
    features = mat[:, [cols[f"x_{j + 1}"] for j in range(p)]]
    extras = {name: mat[:, cols[name]] for name in extras_present}
    return coords, features, extras


def _write(path, header, columns):
    mat = [np.asarray(c, dtype=np.float64) for c in columns]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in range(mat[0].shape[0] if mat else 0):
            writer.writerow([_FMT % c[r] for c in mat])


def write_training_csv(path, coords, features, response):
    coords = np.asarray(coords, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    header = (
        [f"loc_{j + 1}" for j in range(coords.shape[1])]
        + [f"x_{j + 1}" for j in range(features.shape[1])]
        + ["y"]
    )
    cols = [coords[:, j] for j in range(coords.shape[1])]
    cols += [features[:, j] for j in range(features.shape[1])]
    cols.append(np.asarray(response, dtype=np.float64))
    _write(path, header, cols)


def write_query_csv(path, coords, features, extras=None):
    coords = np.asarray(coords, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    header = [f"loc_{j + 1}" for j in range(coords.shape[1])]
    header += [f"x_{j + 1}" for j in range(features.shape[1])]
    cols = [coords[:, j] for j in range(coords.shape[1])]
    cols += [features[:, j] for j in range(features.shape[1])]
    for name, values in (extras or {}).items():
        header.append(name)
        cols.append(np.asarray(values, dtype=np.float64))
    _write(path, header, cols)


def write_predictions_csv(path, coords, predictions):
    coords = np.asarray(coords, dtype=np.float64)
    header = [f"loc_{j + 1}" for j in range(coords.shape[1])] + ["y_star"]
    cols = [coords[:, j] for j in range(coords.shape[1])] + [np.asarray(predictions, dtype=np.float64)]
    _write(path, header, cols)


def write_transformed_csv(path, order, ytilde, xtilde):
    """Transformed design in max-min order; row column holds original indices."""
    xtilde = np.asarray(xtilde, dtype=np.float64)
    header = ["row"] + [f"xt_{j}" for j in range(xtilde.shape[1])] + ["yt"]
    cols = [np.asarray(order, dtype=np.float64)]
    cols += [xtilde[:, j] for j in range(xtilde.shape[1])]
    cols.append(np.asarray(ytilde, dtype=np.float64))
    _write(path, header, cols)


def read_transformed_csv(path):
    header, rows = _read_rows(path)
    if header[:1] != ["row"] or header[-1:] != ["yt"]:
        raise ValidationError(f"{path}: not a transformed-data file")
    if not re.fullmatch(r"xt_0(,xt_\d+)*", ",".join(header[1:-1])):
        raise ValidationError(f"{path}: unexpected transformed columns")
    mat = _to_matrix(path, header, rows) if rows else np.empty((0, len(header)))
    return mat[:, 0].astype(np.int64), mat[:, -1], mat[:, 1:-1]
