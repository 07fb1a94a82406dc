"""NTF v1 field container.

One UTF-8 JSON header line terminated by a newline, then the raw payload:
little-endian doubles (dtype "f64le") or complex doubles ("c128le"),
component-major, row-major within each component.  Round trips are
bit-exact.
"""

from __future__ import annotations

import json

import numpy as np

from .grid_field import Grid, ScalarField, SymTensorField, VectorField, num_components

__all__ = ["NtfError", "write_field", "read_field", "write_raw", "read_raw"]

_DTYPES = {"f64le": "<f8", "c128le": "<c16"}


class NtfError(ValueError):
    """Malformed NTF header or payload."""


def _header(kind, n, shape, spacing, origin, ncomp, dtype, extra=None):
    head = {
        "version": 1,
        "kind": kind,
        "n": int(n),
        "shape": [int(s) for s in shape],
        "spacing": [float(h) for h in spacing],
        "origin": [float(o) for o in origin],
        "components": int(ncomp),
        "order": "upper-lex",
        "dtype": dtype,
    }
    if extra:
        head.update(extra)
    return head


def write_raw(path, values: np.ndarray, header: dict) -> None:
    dtype = _DTYPES[header["dtype"]]
    payload = np.ascontiguousarray(values, dtype=dtype)
    expect = header["components"] * int(np.prod(header["shape"]))
    if payload.size != expect:
        raise NtfError(f"payload has {payload.size} values, header promises {expect}")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload.tobytes())


def read_raw(path) -> tuple[np.ndarray, dict]:
    with open(path, "rb") as fh:
        line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise NtfError(f"unreadable header: {exc}") from exc
    for key in ("version", "kind", "n", "shape", "spacing", "origin", "components", "order", "dtype"):
        if key not in header:
            raise NtfError(f"missing header key {key!r}")
    if header["version"] != 1:
        raise NtfError(f"unsupported version {header['version']!r}")
    if header["order"] != "upper-lex":
        raise NtfError(f"unsupported order {header['order']!r}")
    if header["dtype"] not in _DTYPES:
        raise NtfError(f"unsupported dtype {header['dtype']!r}")
    dtype = np.dtype(_DTYPES[header["dtype"]])
    expect = header["components"] * int(np.prod(header["shape"]))
    if len(blob) != expect * dtype.itemsize:
        raise NtfError(f"payload truncated: {len(blob)} bytes, expected {expect * dtype.itemsize}")
    values = np.frombuffer(blob, dtype=dtype).reshape(header["components"], *header["shape"])
    return values, header


def write_field(path, field, extra: dict | None = None) -> None:
    """Serialize a scalar, vector, or symmetric tensor field."""
    g = field.grid
    if isinstance(field, ScalarField):
        kind, ncomp, values = "scalar", 1, field.values[np.newaxis]
    elif isinstance(field, VectorField):
        kind, ncomp, values = "vector", g.n + 1, field.components
        extra = dict(extra or {}, boundary_zero=field.boundary_zero)
    elif isinstance(field, SymTensorField):
        kind, ncomp, values = "sym2", num_components(g.n), field.components
        extra = dict(extra or {}, supported=field.supported)
    else:
        raise TypeError(f"cannot serialize {type(field).__name__}")
    write_raw(path, values, _header(kind, g.n, g.shape, g.spacing, g.origin, ncomp, "f64le", extra))


def read_field(path):
    """Read back a field written by write_field."""
    values, header = read_raw(path)
    grid = Grid(header["n"], tuple(header["shape"]), tuple(header["spacing"]), tuple(header["origin"]))
    kind = header["kind"]
    if kind == "scalar":
        return ScalarField(grid, values[0])
    if kind == "vector":
        return VectorField(grid, values, boundary_zero=bool(header.get("boundary_zero", False)))
    if kind == "sym2":
        return SymTensorField(grid, values, supported=bool(header.get("supported", False)))
    raise NtfError(f"no field reader for kind {kind!r}")
