"""The online redundant dictionary D = [I_n | B].

The identity noise block is implicit; only the image block B is stored, one
unit column appended per accepted frame. Appends never touch existing
columns, and ``image_block()`` hands out a read-only snapshot view, so solves
over a snapshot are unaffected by later appends.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import formats
from .errors import DimensionMismatch, OutOfRange
from .features import FeatureVector

_INITIAL_CAPACITY = 64


@dataclass(frozen=True)
class ColumnIndex:
    """Raw solver-facing column index, partitioned into noise and image kinds."""

    raw: int
    n: int

    @property
    def kind(self):
        return "noise" if self.raw < self.n else "image"

    @property
    def image_index(self):
        return None if self.raw < self.n else self.raw - self.n


@dataclass(frozen=True)
class FrameMeta:
    frame_index: int
    timestamp: float
    source_tag: str


class Dictionary:
    """Append-only dictionary with an implicit identity block of size n."""

    def __init__(self, n):
        if n < 1:
            raise DimensionMismatch(f"feature dimension must be >= 1, got {n}")
        self.n = int(n)
        self._rows = np.empty((_INITIAL_CAPACITY, self.n), dtype=np.float64)
        self._m = 0
        self.frame_meta = []

    @property
    def m(self):
        return self._m

    @property
    def width(self):
        return self.n + self._m

    def append(self, f: FeatureVector, timestamp=None, frame_index=None):
        if f.dim != self.n:
            raise DimensionMismatch(f"feature dim {f.dim} != dictionary n {self.n}")
        if self._m == self._rows.shape[0]:
            grown = np.empty((2 * self._rows.shape[0], self.n), dtype=np.float64)
            grown[: self._m] = self._rows[: self._m]
            self._rows = grown
        self._rows[self._m] = f.values
        if frame_index is None:
            frame_index = self._m
        if timestamp is None:
            timestamp = float(frame_index)
        self.frame_meta.append(FrameMeta(int(frame_index), float(timestamp), f.source_tag))
        self._m += 1

    def image_block(self):
        """Read-only (m, n) snapshot whose rows are the appended columns."""
        view = self._rows[: self._m]
        view.flags.writeable = False
        return view

    def column(self, idx):
        """Materialize a single column (standard basis vector for noise indices)."""
        raw = idx.raw if isinstance(idx, ColumnIndex) else int(idx)
        if not 0 <= raw < self.width:
            raise OutOfRange(f"column {raw} outside [0, {self.width})")
        if raw < self.n:
            col = np.zeros(self.n)
            col[raw] = 1.0
            return col
        return self._rows[raw - self.n].copy()

    def column_index(self, raw):
        if not 0 <= raw < self.width:
            raise OutOfRange(f"column {raw} outside [0, {self.width})")
        return ColumnIndex(int(raw), self.n)

    def correlations(self, r):
        """D^T r over the full width; the noise block contributes r itself."""
        r = np.asarray(r, dtype=np.float64)
        if r.shape != (self.n,):
            raise DimensionMismatch(f"vector shape {r.shape} != ({self.n},)")
        if self._m == 0:
            return r.copy()
        return np.concatenate([r, self._rows[: self._m] @ r])

    def dense(self):
        """Full (n, n+m) matrix; test-scale only."""
        return np.hstack([np.eye(self.n), self._rows[: self._m].T])


def new_dictionary(n):
    return Dictionary(n)


def save_dictionary(d: Dictionary, lcdf_path, meta_path):
    formats.write_lcdf(lcdf_path, d.image_block() if d.m else np.empty((0, d.n)))
    with open(meta_path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_index", "timestamp", "source_tag"])
        for meta in d.frame_meta:
            writer.writerow([meta.frame_index, repr(meta.timestamp), meta.source_tag])


def load_dictionary(lcdf_path, meta_path):
    records = formats.read_lcdf(lcdf_path)
    metas = []
    with open(meta_path, "r", newline="", encoding="ascii") as fh:
        for row in csv.DictReader(fh):
            metas.append(
                FrameMeta(int(row["frame_index"]), float(row["timestamp"]), row["source_tag"])
            )
    if len(metas) != records.shape[0]:
        raise DimensionMismatch(
            f"{meta_path}: {len(metas)} meta rows for {records.shape[0]} columns"
        )
    d = Dictionary(records.shape[1]) if records.size else Dictionary(max(1, records.shape[1]))
    for row, meta in zip(records, metas):
        d.append(
            FeatureVector(row, source_tag=meta.source_tag),
            timestamp=meta.timestamp,
            frame_index=meta.frame_index,
        )
    return d
