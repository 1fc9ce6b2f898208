"""Low-level file format primitives: binary PGM (P5), descriptor CSV, LCDF.

LCDF is the binary descriptor container used throughout: magic ``LCD1``,
uint32-LE count, uint32-LE dim, then count*dim float64-LE values in record
order.
"""

import struct

import numpy as np

from .errors import DimensionMismatch, ParseError

LCDF_MAGIC = b"LCD1"


def read_pgm(path):
    """Read a binary (P5) PGM file.

    Returns (rows, cols, maxval, pixels) with pixels a uint8 array of
    length rows*cols in row-major order. Only maxval <= 255 is supported.
    """
    with open(path, "rb") as fh:
        data = fh.read()

    pos = 0

    def next_token():
        nonlocal pos
        while pos < len(data):
            if data[pos : pos + 1].isspace():
                pos += 1
            elif data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos : pos + 1] != b"\n":
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError(f"{path}: truncated PGM header")
        return data[start:pos]

    magic = next_token()
    if magic != b"P5":
        raise ParseError(f"{path}: not a binary PGM (magic {magic!r})")
    try:
        cols = int(next_token())
        rows = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise ParseError(f"{path}: bad PGM header field: {exc}") from exc
    if rows < 1 or cols < 1:
        raise ParseError(f"{path}: bad PGM size {rows}x{cols}")
    if not 0 < maxval <= 255:
        raise ParseError(f"{path}: unsupported maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos : pos + rows * cols]
    if len(raster) != rows * cols:
        raise ParseError(f"{path}: expected {rows * cols} raster bytes, got {len(raster)}")
    return rows, cols, maxval, np.frombuffer(raster, dtype=np.uint8)


def write_pgm(path, rows, cols, maxval, pixels):
    """Write a binary (P5) PGM file from a uint8 row-major raster."""
    raster = np.asarray(pixels, dtype=np.uint8).reshape(rows * cols)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n%d\n" % (cols, rows, maxval))
        fh.write(raster.tobytes())


def read_descriptor_csv(path):
    """Read one descriptor per line (comma-separated floats, no header).

    Returns a (count, dim) float64 array. Raises ParseError with the
    1-based line number on malformed input or ragged rows.
    """
    rows = []
    dim = None
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", record=lineno) from exc
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise DimensionMismatch(
                    f"{path}: line {lineno} has {len(values)} values, expected {dim}"
                )
            rows.append(values)
    if not rows:
        raise ParseError(f"{path}: no descriptor records")
    return np.asarray(rows, dtype=np.float64)


def write_descriptor_csv(path, records):
    records = np.asarray(records, dtype=np.float64)
    with open(path, "w", encoding="ascii") as fh:
        for row in records:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def read_lcdf(path):
    """Read an LCDF container into a (count, dim) float64 array."""
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) != 12 or header[:4] != LCDF_MAGIC:
            raise ParseError(f"{path}: not an LCDF file")
        count, dim = struct.unpack("<II", header[4:])
        payload = fh.read(count * dim * 8)
    if len(payload) != count * dim * 8:
        raise ParseError(f"{path}: expected {count * dim} float64 values, file truncated")
    return np.frombuffer(payload, dtype="<f8").reshape(count, dim).astype(np.float64)


def write_lcdf(path, records):
    records = np.asarray(records, dtype=np.float64)
    if records.ndim != 2:
        raise ParseError("LCDF payload must be a 2-d record array")
    count, dim = records.shape
    with open(path, "wb") as fh:
        fh.write(LCDF_MAGIC)
        fh.write(struct.pack("<II", count, dim))
        fh.write(records.astype("<f8").tobytes(order="C"))
