"""Binary and text serialization of sampled fields and polymetrics.

Field blob layout (all little endian)::

    magic       4 bytes   b"PMF1"
    dim         uint32
    cov_rank    uint32
    contra_rank uint32
    symmetric   uint8
    resolution  dim x uint32
    periodic    dim x uint8
    bounds      dim x 2 float64  (lo, hi per axis)
    components  float64, C order, shape resolution + (dim,) * rank

A scalar field is stored as a rank-0 tensor.  Polymetric blob::

    magic       4 bytes   b"PMP1"
    count       uint32
    inertias    count x (uint32 p, uint32 q)
    blobs       count x (uint64 length, field blob)
"""

import io
import struct

import numpy as np

from .errors import IoFailure
from .grid import ScalarField, TensorField, make_chart

FIELD_MAGIC = b"PMF1"
POLY_MAGIC = b"PMP1"


def field_to_bytes(field):
    chart = field.chart
    if isinstance(field, ScalarField):
        data, cov, contra, sym = field.values, 0, 0, False
    else:
        data, cov, contra, sym = field.components, field.covariant_rank, field.contravariant_rank, field.symmetric
    buf = io.BytesIO()
    buf.write(FIELD_MAGIC)
    buf.write(struct.pack("<IIIB", chart.dim, cov, contra, int(sym)))
    buf.write(struct.pack(f"<{chart.dim}I", *chart.resolution))
    buf.write(struct.pack(f"<{chart.dim}B", *[int(p) for p in chart.periodic]))
    buf.write(struct.pack(f"<{2 * chart.dim}d", *[b for pair in chart.bounds for b in pair]))
    buf.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
    return buf.getvalue()


def field_from_bytes(blob):
    try:
        if blob[:4] != FIELD_MAGIC:
            raise IoFailure("not a polymet field blob (bad magic)")
        off = 4
        dim, cov, contra, sym = struct.unpack_from("<IIIB", blob, off)
        off += 13
        resolution = struct.unpack_from(f"<{dim}I", blob, off)
        off += 4 * dim
        periodic = struct.unpack_from(f"<{dim}B", blob, off)
        off += dim
        flat = struct.unpack_from(f"<{2 * dim}d", blob, off)
        off += 16 * dim
    except struct.error as exc:
        raise IoFailure(f"truncated field header: {exc}") from exc
    chart = make_chart(dim, list(zip(flat[0::2], flat[1::2])), resolution, [bool(p) for p in periodic])
    shape = chart.shape + (dim,) * (cov + contra)
    count = int(np.prod(shape))
    if len(blob) - off != 8 * count:
        raise IoFailure(f"payload has {len(blob) - off} bytes, expected {8 * count}")
    data = np.frombuffer(blob, dtype="<f8", count=count, offset=off).reshape(shape).astype(float)
    if cov + contra == 0:
        return ScalarField(chart, data)
    return TensorField(chart, data, cov, contra, bool(sym))


def save_field(field, path):
    try:
        with open(path, "wb") as fh:
            fh.write(field_to_bytes(field))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def load_field(path):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return field_from_bytes(blob)


def dump_text(field, path):
    """Debug dump: one row per node, node coordinates then flattened components."""
    chart = field.chart
    data = field.values if isinstance(field, ScalarField) else field.components
    rows = np.concatenate(
        [chart.points().reshape(chart.size, chart.dim), np.asarray(data).reshape(chart.size, -1)], axis=1
    )
    header = f"dim={chart.dim} resolution={list(chart.resolution)} periodic={list(chart.periodic)}"
    try:
        np.savetxt(path, rows, header=header, fmt="%.17g")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def polymetric_to_bytes(fields, inertias):
    buf = io.BytesIO()
    buf.write(POLY_MAGIC)
    buf.write(struct.pack("<I", len(fields)))
    for p, q in inertias:
        buf.write(struct.pack("<II", p, q))
    for f in fields:
        blob = field_to_bytes(f)
        buf.write(struct.pack("<Q", len(blob)))
        buf.write(blob)
    return buf.getvalue()


def polymetric_from_bytes(blob):
    """Return ``(fields, inertias)``; inertias as ``(p, q)`` tuples."""
    if blob[:4] != POLY_MAGIC:
        raise IoFailure("not a polymet polymetric blob (bad magic)")
    try:
        (count,) = struct.unpack_from("<I", blob, 4)
        off = 8
        inertias = []
        for _ in range(count):
            inertias.append(struct.unpack_from("<II", blob, off))
            off += 8
        fields = []
        for _ in range(count):
            (length,) = struct.unpack_from("<Q", blob, off)
            off += 8
            fields.append(field_from_bytes(blob[off : off + length]))
            off += length
    except struct.error as exc:
        raise IoFailure(f"truncated polymetric blob: {exc}") from exc
    return fields, inertias


def save_polymetric(fields, inertias, path):
    try:
        with open(path, "wb") as fh:
            fh.write(polymetric_to_bytes(fields, inertias))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def load_polymetric(path):
    try:
        with open(path, "rb") as fh:
            return polymetric_from_bytes(fh.read())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
