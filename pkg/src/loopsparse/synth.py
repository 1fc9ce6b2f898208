"""Ground-truthed synthetic descriptor streams for desk-scale benchmarks.

The exploration part of a stream is a smooth random walk on the unit sphere
(consecutive frames correlate like neighboring video frames; frames more
than a couple dozen steps apart are near-orthogonal). Revisits are planted
as short segments: a run of consecutive frames re-observing consecutive
earlier frames, each corrupted by a Gaussian perturbation of the requested
relative magnitude and re-normalized. Segments rather than isolated frames
because the temporal-consistency filter requires a supporting detection; the
smooth walk, rather than i.i.d. vectors, gives the noise level a real effect
(at high noise the solution starts splitting onto walk neighbors and the
query drops below threshold).
"""

from dataclasses import dataclass

import numpy as np

from .features import FeatureVector

DEFAULT_NEIGHBOR_CORR = 0.988
DEFAULT_SEGMENT_LEN = 2


@dataclass(frozen=True)
class SynthDataset:
    features: np.ndarray  # (n_frames, dim) unit rows, in stream order
    truth_pairs: tuple  # ((revisit_frame, original_frame), ...)
    seed: int
    noise_level: float

    def feature_list(self, source_tag="synthetic"):
        return [FeatureVector(row, source_tag=source_tag) for row in self.features]


def _unit(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def walk_features(rng, n_frames, dim, neighbor_corr=DEFAULT_NEIGHBOR_CORR):
    """Unit-sphere random walk with fixed consecutive-frame correlation."""
    if not 0.0 < neighbor_corr < 1.0:
        raise ValueError("neighbor correlation must lie in (0, 1)")
    step = np.sqrt(1.0 / neighbor_corr**2 - 1.0)
    out = np.empty((n_frames, dim))
    out[0] = _unit(rng, dim)
    for k in range(1, n_frames):
        nxt = out[k - 1] + step * _unit(rng, dim)
        out[k] = nxt / np.linalg.norm(nxt)
    return out


def perturb(v, noise_level, rng):
    """Add a random perturbation of relative l2 magnitude, re-normalize."""
    if noise_level == 0.0:
        return v.copy()
    noisy = v + noise_level * _unit(rng, v.size)
    return noisy / np.linalg.norm(noisy)


def generate(
    seed,
    n_frames,
    n_loops,
    dim,
    noise_level,
    neighbor_corr=DEFAULT_NEIGHBOR_CORR,
    segment_len=DEFAULT_SEGMENT_LEN,
    t_g_frames=10,
):
    """Build a stream with ``n_loops`` planted revisit segments plus truth pairs.

    Originals sit in the first half of the stream, revisit segments in the
    second half, always separated from their originals by far more than the
    temporal gate. ``noise_level`` 0 plants exact duplicates.
    """
    if n_frames <= 0 or n_loops <= 0 or dim <= 0:
        raise ValueError("n_frames, n_loops and dim must be positive")
    if not 0.0 <= noise_level < 1.0:
        raise ValueError("noise_level must lie in [0, 1)")
    revisit_start = n_frames // 2
    slot_spacing = (n_frames - revisit_start) // n_loops
    if slot_spacing < segment_len + 1:
        raise ValueError(
            f"{n_loops} segments of {segment_len} frames do not fit after frame {revisit_start}"
        )
    anchor_lo = t_g_frames + 1
    anchor_hi = revisit_start - t_g_frames - segment_len
    anchor_spacing = (anchor_hi - anchor_lo) // n_loops
    if anchor_spacing < segment_len + 1:
        raise ValueError("not enough early frames to host distinct originals")

    rng = np.random.default_rng(seed)
    features = walk_features(rng, n_frames, dim, neighbor_corr)
    anchors = [anchor_lo + e * anchor_spacing for e in range(n_loops)]
    order = rng.permutation(n_loops)

    truth = []
    for e in range(n_loops):
        slot = revisit_start + e * slot_spacing
        anchor = anchors[int(order[e])]
        for s in range(segment_len):
            features[slot + s] = perturb(features[anchor + s], noise_level, rng)
            truth.append((slot + s, anchor + s))
    return SynthDataset(
        features=features,
        truth_pairs=tuple(truth),
        seed=seed,
        noise_level=noise_level,
    )


def repeated_visit_stream(seed, n_places, repeats, dim):
    """i.i.d. random unit places presented ``repeats`` times in order."""
    rng = np.random.default_rng(seed)
    places = np.stack([_unit(rng, dim) for _ in range(n_places)])
    return np.tile(places, (repeats, 1))


def orthogonal_visit_stream(seed, n_places, repeats, dim):
    """Mutually orthonormal places repeated in order.

    Exact orthogonality pins every solve to a single breakpoint regardless of
    the ambient dimension, which isolates dimension cost in timing studies
    (the same sequence structure represented at different dims).
    """
    if n_places > dim:
        raise ValueError(f"{n_places} orthonormal places do not fit in dimension {dim}")
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((dim, n_places)))
    return np.tile(basis.T.copy(), (repeats, 1))


def aliased_variants(base, count, delta, rng):
    """Near-duplicates of ``base`` whose correlations with it tie exactly.

    Perturbation directions are orthogonalized against ``base`` so a query
    equal to ``base`` sees identical correlations to every variant and the
    sparse solution splits across them instead of picking one.
    """
    variants = []
    for _ in range(count):
        v = _unit(rng, base.size)
        v = v - (v @ base) * base
        v /= np.linalg.norm(v)
        noisy = base + delta * v
        variants.append(noisy / np.linalg.norm(noisy))
    return variants
