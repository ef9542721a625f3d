"""File formats: vector CSV, IDX tensors, output CSVs, key=value sidecars.

Every output file the CLI writes is paired with a ``<file>.meta`` sidecar of
``key=value`` lines carrying the full resolved configuration, the seed, and
the package version, so a run can be reproduced bit for bit.
"""

from __future__ import annotations

import struct

import numpy as np

from graphpde.errors import ParseError

_IDX_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}


def read_vectors_csv(path, labels=False):
    """Rows of comma-separated floats; optional trailing integer label column.

    Returns (vectors, labels_or_None).  Malformed rows raise ParseError with
    the offending line number.
    """
    rows = []
    labs = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
                if labels and width < 2:
                    raise ParseError(f"{path}:{lineno}: need a label column")
            elif len(cells) != width:
                raise ParseError(
                    f"{path}:{lineno}: expected {width} fields, got {len(cells)}")
            try:
                if labels:
                    labs.append(int(float(cells[-1])))
                    rows.append([float(c) for c in cells[:-1]])
                else:
                    rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ParseError(f"{path}: no data rows")
    vectors = np.array(rows, dtype=float)
    return vectors, (np.array(labs, dtype=int) if labels else None)


def read_idx(path):
    """Big-endian IDX tensor, flattened row-major.

    Tensors with two or more dimensions come back as (n, prod(rest)); in
    particular (n, 28, 28) image stacks flatten to (n, 784) vectors.
    """
    with open(path, "rb") as fh:
        head = fh.read(4)
        if len(head) < 4 or head[0] != 0 or head[1] != 0:
            raise ParseError(f"{path}: bad IDX magic {head[:2]!r}")
        code, ndim = head[2], head[3]
        if code not in _IDX_DTYPES:
            raise ParseError(f"{path}: unknown IDX type code 0x{code:02x}")
        if ndim < 1:
            raise ParseError(f"{path}: zero-dimensional IDX tensor")
        raw_dims = fh.read(4 * ndim)
        if len(raw_dims) != 4 * ndim:
            raise ParseError(f"{path}: truncated IDX dimension header")
        dims = struct.unpack(">" + "I" * ndim, raw_dims)
        dtype = _IDX_DTYPES[code]
        count = int(np.prod(dims))
        payload = fh.read(count * dtype.itemsize)
        if len(payload) != count * dtype.itemsize:
            raise ParseError(
                f"{path}: truncated payload, expected {count * dtype.itemsize} "
                f"bytes, got {len(payload)}")
        data = np.frombuffer(payload, dtype=dtype).astype(dtype.newbyteorder("="))
    if ndim == 1:
        return data
    return data.reshape(dims[0], count // dims[0])


def write_sidecar(path, mapping):
    with open(path, "w") as fh:
        for key, value in mapping.items():
            fh.write(f"{key}={value}\n")


def read_sidecar(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, value = line.split("=", 1)
            out[key] = value
    return out


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_table_csv(path, header, rows):
    """Generic CSV writer; floats are written with full round-trip precision."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(c) for c in row) + "\n")


def write_rank_csv(path, result):
    rows = zip(range(len(result.r)), result.r, result.u)
    write_table_csv(path, ["node", "r", "u"], rows)


def write_grid_csv(path, field):
    vals = field.values
    d = vals.ndim
    header = [f"i{a + 1}" for a in range(d)] + ["value"]
    idx = np.stack(np.unravel_index(np.arange(vals.size), vals.shape), axis=1)
    rows = (list(ix) + [val] for ix, val in zip(idx, vals.ravel()))
    write_table_csv(path, header, rows)


def read_grid_csv(path):
    from graphpde.continuum import GridField

    with open(path) as fh:
        header = fh.readline().strip().split(",")
        d = len(header) - 1
        idx, vals = [], []
        for line in fh:
            cells = line.strip().split(",")
            idx.append([int(c) for c in cells[:d]])
            vals.append(float(cells[d]))
    idx = np.array(idx)
    n = idx.max() + 1
    grid = np.empty((n,) * d)
    grid[tuple(idx.T)] = vals
    return GridField(grid)
