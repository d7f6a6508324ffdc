"""Ideal pseudo-thermal speckle frames and bucket signals.

Per-unit intensities are i.i.d. negative-exponential with mean I_0; the
bucket signal is the transmittance-weighted sum over units. Frame j is a
pure function of (seed, j), so any parallel schedule reproduces the same
sample set bit for bit.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .objects import ObjectMask

__all__ = [
    "TINY_INTENSITY",
    "SpeckleConfig",
    "SpeckleFrame",
    "SampleSet",
    "generate_frame",
    "bucket_signal",
    "run_simulation",
    "dump_samples",
    "load_samples",
]

# clamp floor for intensities: smallest positive normal double, so that
# negative-order powers never see log(0)
TINY_INTENSITY = float(np.finfo(np.float64).tiny)

_COUNTER_SHIFT = 192  # frame index keyed into the high Philox counter word


@dataclass(frozen=True)
class SpeckleConfig:
    """Source parameters: mean intensity, RNG seed, unit count."""

    i0: float
    seed: int
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.i0) and self.i0 > 0):
            raise ValueError("mean intensity i0 must be positive")
        if self.n < 1:
            raise ValueError("unit count n must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SpeckleFrame:
    """One speckle realization: reference intensities plus bucket value."""

    index: int
    reference: np.ndarray
    bucket: float


def _frame_bitgen(seed: int, frame_index: int) -> np.random.Philox:
    # counter-based substream: disjoint counter blocks per frame index
    return np.random.Philox(key=seed, counter=frame_index << _COUNTER_SHIFT)


def generate_frame(config: SpeckleConfig, frame_index: int) -> np.ndarray:
    """Draw the n reference intensities of one frame.

    Exponential sampling by inverse CDF, -i0*log(1-u) with u in [0, 1),
    so the argument stays in (0, 1]; exact zeros and underflows clamp to
    the smallest positive normal intensity.
    """
    if frame_index < 0:
        raise ValueError("frame_index must be nonnegative")
    gen = np.random.Generator(_frame_bitgen(config.seed, frame_index))
    u = gen.random(config.n)
    out = -config.i0 * np.log1p(-u)
    return np.maximum(out, TINY_INTENSITY)


class _FrameSource:
    """Reusable frame generator; bitwise-identical to generate_frame but
    avoids per-frame Generator construction."""

    def __init__(self, config: SpeckleConfig):
        self._config = config
        self._bitgen = np.random.Philox(key=config.seed)
        self._gen = np.random.Generator(self._bitgen)

    def uniforms(self, frame_index: int) -> np.ndarray:
        state = self._bitgen.state
        state["state"]["counter"][:] = 0
        state["state"]["counter"][3] = frame_index
        state["buffer_pos"] = 4  # drop buffered outputs from the previous frame
        state["has_uint32"] = 0
        state["uinteger"] = 0
        self._bitgen.state = state
        return self._gen.random(self._config.n)

    def intensities(self, frame_index: int) -> np.ndarray:
        out = -self._config.i0 * np.log1p(-self.uniforms(frame_index))
        return np.maximum(out, TINY_INTENSITY)

    def block(self, start: int, count: int) -> np.ndarray:
        out = np.empty((count, self._config.n))
        for row in range(count):
            out[row] = self.intensities(start + row)
        return out


def _compensated_weighted_sum(block: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Neumaier-compensated sum of weights[j]*block[:, j] over nonzero weights.

    Term order is ascending unit index; zero weights contribute exactly 0
    and are skipped.
    """
    rows = block.shape[0]
    total = np.zeros(rows)
    carry = np.zeros(rows)
    for j in np.flatnonzero(weights):
        term = weights[j] * block[:, j]
        new = total + term
        lost = np.where(
            np.abs(total) >= np.abs(term),
            (total - new) + term,
            (term - new) + total,
        )
        carry += lost
        total = new
    return total + carry


def bucket_signal(reference: np.ndarray, mask: ObjectMask) -> float:
    """Transmittance-weighted total intensity, compensated summation."""
    reference = np.asarray(reference, dtype=np.float64)
    if reference.shape != (mask.n,):
        raise ValueError(
            f"reference length {reference.shape} does not match mask n={mask.n}"
        )
    return float(_compensated_weighted_sum(reference[None, :], mask.units)[0])


@dataclass(frozen=True)
class SampleSet:
    """Deterministic stream of N speckle frames with buckets attached.

    Re-iterable; every pass regenerates identical frames.
    """

    config: SpeckleConfig
    mask: ObjectMask
    n_frames: int

    def __post_init__(self):
        if self.n_frames < 1:
            raise ValueError("frame count must be at least 1")
        if self.config.n != self.mask.n:
            raise ValueError("config unit count does not match mask")

    def __len__(self) -> int:
        return self.n_frames

    def __iter__(self) -> Iterator[SpeckleFrame]:
        for start, refs, buckets in self.iter_batches():
            for row in range(refs.shape[0]):
                yield SpeckleFrame(
                    index=start + row,
                    reference=refs[row],
                    bucket=float(buckets[row]),
                )

    def iter_batches(
        self, batch_size: int = 2048, start: int = 0, stop: int | None = None
    ) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
        """Yield (first_index, reference_block, bucket_vector) batches."""
        if batch_size < 1:
            raise ValueError("batch_size must be positive")
        stop = self.n_frames if stop is None else stop
        source = _FrameSource(self.config)
        weights = self.mask.units
        for first in range(start, stop, batch_size):
            count = min(batch_size, stop - first)
            refs = source.block(first, count)
            buckets = _compensated_weighted_sum(refs, weights)
            yield first, refs, buckets

    def buckets(self, batch_size: int = 2048) -> np.ndarray:
        """All N bucket values in frame order."""
        out = np.empty(self.n_frames)
        for first, refs, buckets in self.iter_batches(batch_size):
            out[first : first + buckets.size] = buckets
        return out


def run_simulation(config: SpeckleConfig, mask: ObjectMask, n_frames: int) -> SampleSet:
    """Forward model: N frames of reference intensities with bucket values."""
    return SampleSet(config=config, mask=mask, n_frames=n_frames)


# ---------------------------------------------------------------------------
# raw sample dump: one JSON header line, then little-endian binary records
# (frame_index u64, bucket f64, n reference f64)


def dump_samples(samples: SampleSet, path) -> None:
    header = {
        "n": samples.config.n,
        "n_frames": samples.n_frames,
        "i0": samples.config.i0,
        "seed": int(samples.config.seed),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for first, refs, buckets in samples.iter_batches():
            for row in range(refs.shape[0]):
                fh.write(struct.pack("<Qd", first + row, buckets[row]))
                fh.write(refs[row].astype("<f8").tobytes())


def load_samples(path) -> tuple[dict, np.ndarray, np.ndarray]:
    """Read a sample dump; returns (header, frame_indices+buckets, references)."""
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl].decode("utf-8"))
    n, n_frames = header["n"], header["n_frames"]
    record = np.dtype([("index", "<u8"), ("bucket", "<f8"), ("reference", "<f8", (n,))])
    body = np.frombuffer(raw[nl + 1 :], dtype=record)
    if body.size != n_frames:
        raise ValueError(f"sample dump holds {body.size} records, header says {n_frames}")
    return header, body[["index", "bucket"]], np.ascontiguousarray(body["reference"])
