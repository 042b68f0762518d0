"""Sparse photon frames and the .spf container format.

Layout (all little-endian):

  header, 64 bytes:
    magic     8s   = b"SPFRAMES"
    version   u32  = 1
    flags     u32  = 0
    n_frames  u64
    n_pix     u64
    meta_len  u64  (JSON blob appended after the frame blocks)
    crc32     u32  of header bytes [0:40)
    reserved  20 bytes, zero
  per frame:
    frame_id  u64
    n_ones    u32
    n_multi   u32
    place_ones  u32[n_ones]    strictly increasing pixel indices, 1 photon each
    place_multi u32[n_multi]   strictly increasing pixel indices, >= 2 photons
    count_multi u32[n_multi]
  tail:
    meta JSON, meta_len bytes (canonical: sorted keys)

The two index lists are disjoint; total photons = n_ones + sum(count_multi).
"""

from __future__ import annotations

import dataclasses
import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import SparseFormatError
from .geometry import DetectorGeometry

MAGIC = b"SPFRAMES"
VERSION = 1
_HEADER = struct.Struct("<8sIIQQQ")  # 40 bytes, then crc32 + 20 reserved
HEADER_SIZE = 64


@dataclass
class SparseFrame:
    frame_id: int
    place_ones: np.ndarray  # u32, strictly increasing
    place_multi: np.ndarray  # u32, strictly increasing
    count_multi: np.ndarray  # u32, each >= 2

    def photons(self) -> int:
        return int(len(self.place_ones) + self.count_multi.sum())

    def to_dense(self, n_pix: int) -> np.ndarray:
        dense = np.zeros(n_pix, dtype=np.int64)
        dense[self.place_ones] = 1
        dense[self.place_multi] = self.count_multi
        return dense

    @staticmethod
    def from_dense(counts: np.ndarray, frame_id: int) -> "SparseFrame":
        counts = np.asarray(counts).ravel()
        ones = np.flatnonzero(counts == 1)
        multi = np.flatnonzero(counts >= 2)
        return SparseFrame(
            frame_id=int(frame_id),
            place_ones=ones.astype(np.uint32),
            place_multi=multi.astype(np.uint32),
            count_multi=counts[multi].astype(np.uint32),
        )

    def validate(self, n_pix: int) -> None:
        for name, arr in (("place_ones", self.place_ones), ("place_multi", self.place_multi)):
            if arr.size and (arr[-1] >= n_pix):
                raise SparseFormatError(f"frame {self.frame_id}: {name} out of range")
            if arr.size > 1 and not np.all(np.diff(arr.astype(np.int64)) > 0):
                raise SparseFormatError(
                    f"frame {self.frame_id}: {name} not strictly increasing"
                )
        if self.count_multi.size != self.place_multi.size:
            raise SparseFormatError(f"frame {self.frame_id}: count/index length mismatch")
        if self.count_multi.size and self.count_multi.min() < 2:
            raise SparseFormatError(f"frame {self.frame_id}: multi-photon count < 2")
        if self.place_ones.size and self.place_multi.size:
            if np.intersect1d(self.place_ones, self.place_multi).size:
                raise SparseFormatError(f"frame {self.frame_id}: index lists overlap")


@dataclass
class SparseFrameSet:
    frames: list[SparseFrame]
    geometry: DetectorGeometry
    metadata: dict = field(default_factory=dict)
    _counts: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.frames)

    def photon_counts(self) -> np.ndarray:
        if self._counts is None or len(self._counts) != len(self.frames):
            self._counts = np.array([f.photons() for f in self.frames], dtype=np.int64)
        return self._counts

    def subset(self, indices: np.ndarray) -> "SparseFrameSet":
        return SparseFrameSet(
            frames=[self.frames[i] for i in indices],
            geometry=self.geometry,
            metadata=dict(self.metadata, subset_of=self.metadata.get("hash", "")),
        )


# -- file I/O ----------------------------------------------------------------


def _pack_header(n_frames: int, n_pix: int, meta_len: int) -> bytes:
    body = _HEADER.pack(MAGIC, VERSION, 0, n_frames, n_pix, meta_len)
    crc = zlib.crc32(body) & 0xFFFFFFFF
    return body + struct.pack("<I", crc) + b"\x00" * 20


def write_spf(path: str | Path, frames: list[SparseFrame], n_pix: int, metadata: dict | None = None) -> None:
    meta_blob = json.dumps(metadata or {}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_pack_header(len(frames), n_pix, len(meta_blob)))
        for fr in frames:
            fr.validate(n_pix)
            fh.write(struct.pack("<QII", fr.frame_id, len(fr.place_ones), len(fr.place_multi)))
            fh.write(np.ascontiguousarray(fr.place_ones, dtype="<u4").tobytes())
            fh.write(np.ascontiguousarray(fr.place_multi, dtype="<u4").tobytes())
            fh.write(np.ascontiguousarray(fr.count_multi, dtype="<u4").tobytes())
        fh.write(meta_blob)


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise SparseFormatError(f"truncated file while reading {what}")
    return buf


def read_spf_header(path: str | Path) -> tuple[int, int, int]:
    """(n_frames, n_pix, meta_len) after strict header validation."""
    with open(path, "rb") as fh:
        raw = _read_exact(fh, HEADER_SIZE, "header")
    body, crc_bytes, reserved = raw[:40], raw[40:44], raw[44:]
    magic, version, flags, n_frames, n_pix, meta_len = _HEADER.unpack(body)
    if magic != MAGIC:
        raise SparseFormatError(f"bad magic {magic!r}")
    if (zlib.crc32(body) & 0xFFFFFFFF) != struct.unpack("<I", crc_bytes)[0]:
        raise SparseFormatError("header checksum mismatch")
    if version != VERSION:
        raise SparseFormatError(f"unsupported version {version}")
    if flags != 0:
        raise SparseFormatError(f"unsupported flags {flags:#x}")
    if reserved != b"\x00" * 20:
        raise SparseFormatError("nonzero reserved header bytes")
    return n_frames, n_pix, meta_len


def iter_spf_frames(path: str | Path, n_pix_expected: int | None = None) -> Iterator[SparseFrame]:
    """Stream frames without loading the whole file; validates as it goes."""
    n_frames, n_pix, meta_len = read_spf_header(path)
    if n_pix_expected is not None and n_pix != n_pix_expected:
        raise SparseFormatError(f"file n_pix {n_pix} != geometry n_pix {n_pix_expected}")
    with open(path, "rb") as fh:
        fh.seek(HEADER_SIZE)
        for i in range(n_frames):
            hdr = _read_exact(fh, 16, f"frame {i} header")
            frame_id, n_ones, n_multi = struct.unpack("<QII", hdr)
            if n_ones > n_pix or n_multi > n_pix:
                raise SparseFormatError(f"frame {i}: implausible lengths")
            ones = np.frombuffer(_read_exact(fh, 4 * n_ones, f"frame {i} ones"), dtype="<u4")
            multi = np.frombuffer(_read_exact(fh, 4 * n_multi, f"frame {i} multi"), dtype="<u4")
            counts = np.frombuffer(_read_exact(fh, 4 * n_multi, f"frame {i} counts"), dtype="<u4")
            fr = SparseFrame(frame_id, ones.copy(), multi.copy(), counts.copy())
            fr.validate(n_pix)
            yield fr
        meta = _read_exact(fh, meta_len, "metadata")
        try:
            json.loads(meta) if meta else {}
        except json.JSONDecodeError as exc:
            raise SparseFormatError(f"corrupt metadata JSON: {exc}") from exc
        if fh.read(1):
            raise SparseFormatError("trailing bytes after metadata")


def read_spf(path: str | Path, geometry: DetectorGeometry) -> SparseFrameSet:
    frames = list(iter_spf_frames(path, n_pix_expected=geometry.n_pix))
    _, _, meta_len = read_spf_header(path)
    metadata = {}
    if meta_len:
        with open(path, "rb") as fh:
            fh.seek(-meta_len, 2)
            metadata = json.loads(fh.read(meta_len))
    return SparseFrameSet(frames=frames, geometry=geometry, metadata=metadata)


def write_dataset(path: str | Path, fset: SparseFrameSet) -> None:
    write_spf(path, fset.frames, fset.geometry.n_pix, fset.metadata)


# -- statistics / selection ---------------------------------------------------


def photon_histogram(fset: SparseFrameSet) -> tuple[np.ndarray, np.ndarray]:
    """Exact histogram of photons/frame: (photon values 0..max, counts)."""
    counts = fset.photon_counts()
    top = int(counts.max()) if len(counts) else 0
    hist = np.bincount(counts, minlength=top + 1)
    return np.arange(top + 1), hist


def valley_threshold(hist: np.ndarray) -> int:
    """Deepest valley between the two tallest separated modes (brute force)."""
    if hist.size < 3:
        return 0
    smooth = np.convolve(hist.astype(float), np.ones(5) / 5.0, mode="same")
    peak1 = int(np.argmax(smooth))
    best_val, best_pos = np.inf, peak1
    for p2 in range(hist.size):
        lo, hi = sorted((peak1, p2))
        if hi - lo < 2 or smooth[p2] < 0.1 * smooth[peak1]:
            continue
        seg = smooth[lo + 1 : hi]
        v = lo + 1 + int(np.argmin(seg))
        score = smooth[v] - min(smooth[peak1], smooth[p2])
        if score < best_val:
            best_val, best_pos = score, v
    return best_pos


def select_frames(fset: SparseFrameSet, min_photons: int) -> SparseFrameSet:
    keep = np.flatnonzero(fset.photon_counts() >= min_photons)
    out = fset.subset(keep)
    out.metadata["min_photons"] = int(min_photons)
    return out


def dataset_hash(fset: SparseFrameSet) -> str:
    import hashlib

    h = hashlib.sha256()
    for fr in fset.frames:
        h.update(struct.pack("<QII", fr.frame_id, len(fr.place_ones), len(fr.place_multi)))
        h.update(np.ascontiguousarray(fr.place_ones, dtype="<u4").tobytes())
        h.update(np.ascontiguousarray(fr.place_multi, dtype="<u4").tobytes())
        h.update(np.ascontiguousarray(fr.count_multi, dtype="<u4").tobytes())
    return h.hexdigest()[:16]
