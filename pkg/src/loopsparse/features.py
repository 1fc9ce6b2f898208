"""Image and descriptor representations as unit feature vectors.

Every frame, whatever its source (down-sampled raw image, precomputed
descriptor, or a stack of several), ends up as a unit l2-norm vector; the
dictionary and solver operate only on such vectors. Down-sampling is plain
box-filter block averaging over floor-partitioned pixel blocks, which keeps
the mapping deterministic and scale invariant.
"""

from dataclasses import dataclass, field

import numpy as np

from . import formats
from .errors import BadDimensions, DimensionMismatch, EmptyInput, ZeroVector

UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class GrayImage:
    """Grayscale raster with intensities scaled into [0, 1]."""

    rows: int
    cols: int
    pixels: np.ndarray  # row-major, length rows*cols

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise BadDimensions(f"image size {self.rows}x{self.cols} must be positive")
        pix = np.ascontiguousarray(np.asarray(self.pixels, dtype=np.float64).reshape(-1))
        if pix.size != self.rows * self.cols:
            raise BadDimensions(
                f"pixel count {pix.size} != rows*cols = {self.rows * self.cols}"
            )
        if pix.size and (np.nanmin(pix) < 0.0 or np.nanmax(pix) > 1.0 or not np.isfinite(pix).all()):
            raise BadDimensions("pixel intensities must lie in [0, 1]")
        pix.flags.writeable = False
        object.__setattr__(self, "pixels", pix)

    def as_matrix(self):
        return self.pixels.reshape(self.rows, self.cols)


@dataclass(frozen=True)
class FeatureVector:
    """Unit l2-norm feature of dimension ``dim``."""

    values: np.ndarray
    source_tag: str = ""
    dim: int = field(init=False)

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64).reshape(-1))
        if vals.size < 1:
            raise BadDimensions("feature dimension must be >= 1")
        if not np.isfinite(vals).all():
            raise ZeroVector("feature contains NaN/Inf entries")
        norm = float(np.linalg.norm(vals))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ZeroVector(f"feature norm {norm!r} is not unit within {UNIT_NORM_TOL}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "dim", vals.size)


def unit_feature(values, source_tag=""):
    """Normalize raw values onto the unit sphere and wrap as a FeatureVector."""
    vals = np.asarray(values, dtype=np.float64).reshape(-1)
    if vals.size < 1:
        raise BadDimensions("feature dimension must be >= 1")
    if not np.isfinite(vals).all():
        raise ZeroVector("feature contains NaN/Inf entries")
    norm = np.linalg.norm(vals)
    if norm == 0.0:
        raise ZeroVector("cannot normalize an all-zero vector")
    return FeatureVector(vals / norm, source_tag=source_tag)


def image_from_pgm(path):
    """Load a binary PGM as a GrayImage with intensities scaled by maxval."""
    rows, cols, maxval, raster = formats.read_pgm(path)
    return GrayImage(rows, cols, raster.astype(np.float64) / float(maxval))


def gray_from_channels(channels):
    """Average color channels (a list of GrayImage) into one grayscale image."""
    if not channels:
        raise EmptyInput("no channels to average")
    base = channels[0]
    for ch in channels[1:]:
        if (ch.rows, ch.cols) != (base.rows, base.cols):
            raise DimensionMismatch("channel sizes differ")
    mean = np.mean([ch.pixels for ch in channels], axis=0)
    return GrayImage(base.rows, base.cols, mean)


def image_to_feature(img, target_rows, target_cols):
    """Down-sample by block averaging, vectorize row-major, normalize to unit norm.

    Source rows/cols are partitioned into ``target_rows``/``target_cols``
    contiguous blocks with floor-rounded boundaries; each output pixel is the
    mean of its block.
    """
    if target_rows < 1 or target_cols < 1:
        raise BadDimensions("target size must be positive")
    if target_rows > img.rows or target_cols > img.cols:
        raise BadDimensions(
            f"target {target_rows}x{target_cols} exceeds source {img.rows}x{img.cols}"
        )
    pix = img.as_matrix()
    row_edges = (np.arange(target_rows + 1, dtype=np.int64) * img.rows) // target_rows
    col_edges = (np.arange(target_cols + 1, dtype=np.int64) * img.cols) // target_cols
    sums = np.add.reduceat(pix, row_edges[:-1], axis=0)
    sums = np.add.reduceat(sums, col_edges[:-1], axis=1)
    counts = np.outer(np.diff(row_edges), np.diff(col_edges)).astype(np.float64)
    flat = (sums / counts).reshape(-1)
    norm = np.linalg.norm(flat)
    if norm == 0.0:
        raise ZeroVector("image is identically zero; no unit feature exists")
    return FeatureVector(flat / norm, source_tag=f"raw{target_rows}x{target_cols}")


def stack_features(parts):
    """Concatenate unit features and re-project onto the unit sphere."""
    if not parts:
        raise EmptyInput("stack_features requires at least one part")
    flat = np.concatenate([p.values for p in parts])
    return FeatureVector(flat / np.linalg.norm(flat), source_tag="stacked")


def load_descriptors(path, format="csv", source_tag="descriptor"):
    """Load descriptor records from a CSV or LCDF file as unit features.

    Records stored un-normalized are silently normalized; an all-zero record
    raises ZeroVector, and ragged records raise ParseError/DimensionMismatch.
    """
    if format == "csv":
        records = formats.read_descriptor_csv(path)
    elif format == "lcdf":
        records = formats.read_lcdf(path)
    else:
        raise ValueError(f"unknown descriptor format {format!r}")
    out = []
    for idx, row in enumerate(records):
        norm = np.linalg.norm(row)
        if norm == 0.0:
            raise ZeroVector(f"{path}: record {idx} is all zeros")
        out.append(FeatureVector(row / norm, source_tag=source_tag))
    return out


def detect_descriptor_format(path):
    """Pick csv vs lcdf from the file's magic bytes (falls back to extension)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == formats.LCDF_MAGIC:
        return "lcdf"
    return "lcdf" if str(path).endswith(".lcdf") else "csv"
