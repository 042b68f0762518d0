"""Synthetic ground-truth generation: Ewald slicing, Poisson sampling, datasets.

Orientation convention: ``slice_volume(vol, q, geom)`` samples the volume at
``R(q) @ q_pix`` for every detector q-vector, i.e. the quaternion carries
detector-plane coordinates into the volume frame. Composing ``q`` with an
in-plane rotation (about z) spins the resulting pattern on the detector.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import map_coordinates

from . import quaternions as quat
from .errors import OutOfGridError, SpihetError
from .frames import SparseFrame, SparseFrameSet
from .geometry import DetectorGeometry
from .shapes import ParticleShape, grid_for_geometry, make_volume
from .volumes import IntensityVolume3D

SENTINEL = np.nan  # masked-pixel marker in dense 2D models


def slice_volume(
    vol: IntensityVolume3D,
    orientation: np.ndarray,
    geom: DetectorGeometry,
    curved: bool = False,
) -> np.ndarray:
    """Trilinear central-slice of the volume on the detector grid.

    Returns a (ny, nx) float array; masked pixels are NaN. Raises
    OutOfGridError if any good pixel's rotated q falls outside the grid.
    """
    qvec = geom.q_vectors(curved=curved)
    good = geom.good()
    rot = quat.rotation_matrix(orientation)
    coords = (rot @ qvec[good].T) / vol.voxel_q_step + vol.grid_size // 2
    upper = vol.grid_size - 1
    if coords.min() < 0.0 or coords.max() > upper:
        radii = np.linalg.norm(qvec[good], axis=1)
        bad = np.any((coords < 0) | (coords > upper), axis=0)
        worst = radii[bad].max() / geom.q_pixel_step()
        raise OutOfGridError(
            f"detector q at pixel radius {worst:.1f} px falls outside the "
            f"{vol.grid_size}^3 volume grid"
        )
    values = map_coordinates(vol.values, coords, order=1, mode="nearest")
    out = np.full(geom.n_pix, SENTINEL)
    out[good] = values
    return out.reshape(geom.num_pix_y, geom.num_pix_x)


def frame_rng(seed: int, frame_id: int, stream: int = 0) -> np.random.Generator:
    """Independent per-frame stream; results do not depend on worker count.

    stream 0 draws orientation/fluence, stream 1 draws photons, so a frame is
    reproducible from its sidecar row without replaying the other draws.
    """
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), int(frame_id), int(stream)])
    )


def sample_frame(
    model: np.ndarray,
    fluence_scale: float,
    rng: np.random.Generator | int,
    frame_id: int = 0,
) -> SparseFrame:
    """Per-pixel independent Poisson counts with mean fluence_scale * model."""
    if isinstance(rng, (int, np.integer)):
        rng = frame_rng(rng, frame_id)
    flat = np.asarray(model, dtype=np.float64).ravel()
    mean = np.where(np.isnan(flat), 0.0, flat) * fluence_scale
    if mean.min() < 0:
        raise SpihetError("model has negative intensity on good pixels")
    counts = rng.poisson(mean)
    return SparseFrame.from_dense(counts, frame_id)


@dataclass
class GroundTruth:
    frame_id: int
    shape_id: int
    orientation: np.ndarray  # (4,)
    fluence_scale: float  # absolute multiplier applied to the sliced model
    shape_param: float  # superball exponent (or NaN)


def write_sidecar(path: str | Path, truths: list[GroundTruth]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame_id", "shape_id", "qw", "qx", "qy", "qz", "fluence_scale", "shape_param"])
        for t in truths:
            w.writerow(
                [t.frame_id, t.shape_id]
                + [repr(float(c)) for c in t.orientation]
                + [repr(float(t.fluence_scale)), repr(float(t.shape_param))]
            )


def read_sidecar(path: str | Path) -> list[GroundTruth]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                GroundTruth(
                    frame_id=int(row["frame_id"]),
                    shape_id=int(row["shape_id"]),
                    orientation=np.array(
                        [float(row[k]) for k in ("qw", "qx", "qy", "qz")]
                    ),
                    fluence_scale=float(row["fluence_scale"]),
                    shape_param=float(row["shape_param"]),
                )
            )
    return out


def make_dataset(
    mixture: list[tuple[ParticleShape, float]],
    n_frames: int,
    mean_photons: float,
    seed: int,
    geom: DetectorGeometry,
    jitter_sigma: float = 0.2,
    n_base_orientations: int | None = None,
    supersample: int = 4,
    curved: bool = False,
) -> tuple[SparseFrameSet, list[GroundTruth]]:
    """Draw frames from a weighted shape mixture with random orientations.

    Each frame's expected photon total is mean_photons times a log-normal
    jitter with unit mean; the recorded fluence_scale is the absolute
    multiplier applied to the sliced model, so frames are reproducible from
    the sidecar alone.

    With ``n_base_orientations`` set, orientations are drawn from that many
    random bases per shape, each composed with a free in-plane angle
    (desk-scale datasets stay classifiable with few EMC classes); otherwise
    orientations are fully uniform.
    """
    if not mixture:
        raise SpihetError("empty shape mixture")
    weights = np.array([w for _, w in mixture], dtype=float)
    if weights.min() < 0 or abs(weights.sum() - 1.0) > 1e-9:
        raise SpihetError("mixture weights must be nonnegative and sum to 1")

    dq = geom.q_pixel_step()
    grid = grid_for_geometry(geom.max_q(curved), dq)
    vols = [make_volume(s, grid, dq, supersample=supersample) for s, _ in mixture]

    top = np.random.default_rng(np.random.SeedSequence([seed, 0xD5]))
    shape_ids = top.choice(len(mixture), size=n_frames, p=weights)
    bases = None
    if n_base_orientations is not None:
        bases = [
            quat.random_uniform(top, n_base_orientations) for _ in range(len(mixture))
        ]

    frames: list[SparseFrame] = []
    truths: list[GroundTruth] = []
    ln_mu = -0.5 * jitter_sigma**2  # unit-mean log-normal
    for fid in range(n_frames):
        rng = frame_rng(seed, fid)
        sid = int(shape_ids[fid])
        if bases is None:
            ori = quat.random_uniform(rng)
        else:
            base = bases[sid][int(rng.integers(len(bases[sid])))]
            ori = quat.compose(base, quat.inplane(rng.uniform(0.0, 2.0 * math.pi)))
        pattern = slice_volume(vols[sid], ori, geom, curved=curved)
        total = np.nansum(pattern)
        jitter = float(np.exp(rng.normal(ln_mu, jitter_sigma))) if jitter_sigma > 0 else 1.0
        scale = mean_photons * jitter / total
        frames.append(sample_frame(pattern, scale, frame_rng(seed, fid, 1), frame_id=fid))
        p = mixture[sid][0].exponent if mixture[sid][0].kind == "superball" else math.nan
        truths.append(GroundTruth(fid, sid, ori, scale, p))

    meta = {
        "creator": "spihet.simulate.make_dataset",
        "n_frames": n_frames,
        "mean_photons": mean_photons,
        "seed": seed,
        "jitter_sigma": jitter_sigma,
        "n_base_orientations": n_base_orientations,
        "shapes": [
            {
                "kind": s.kind,
                "edge_or_diameter_nm": s.edge_or_diameter_nm,
                "exponent": None if math.isinf(s.exponent) else s.exponent,
                "aspect_z": s.aspect_z,
                "density_gcc": s.density_gcc,
                "weight": w,
            }
            for s, w in mixture
        ],
        "geometry_hash": geom.content_hash(),
    }
    fset = SparseFrameSet(frames=frames, geometry=geom, metadata=meta)
    return fset, truths


def simulate_averages(
    shapes: list[ParticleShape],
    orientations: np.ndarray,
    geom: DetectorGeometry,
    mean_photons: float | None = None,
    seed: int = 0,
    supersample: int = 4,
) -> tuple[np.ndarray, list[GroundTruth]]:
    """Noise-free (or Poisson-noised) model averages, one per orientation.

    shapes has one entry per output average (repeat entries for sweeps);
    volumes are cached by shape parameters. Used for oracle tests and for
    building VAE bundles from pure simulation.
    """
    if len(shapes) != len(orientations):
        raise SpihetError("need one shape per orientation")
    dq = geom.q_pixel_step()
    grid = grid_for_geometry(geom.max_q(), dq)
    cache: dict[tuple, tuple[int, IntensityVolume3D]] = {}
    avgs, truths = [], []
    for i, (s, ori) in enumerate(zip(shapes, orientations)):
        key = (s.kind, s.edge_or_diameter_nm, s.exponent, s.aspect_z, s.density_gcc)
        if key not in cache:
            cache[key] = (len(cache), make_volume(s, grid, dq, supersample=supersample))
        shape_id, vol = cache[key]
        pattern = slice_volume(vol, ori, geom)
        scale = 1.0
        if mean_photons is not None:
            scale = mean_photons / np.nansum(pattern)
            rng = frame_rng(seed, i)
            noisy = rng.poisson(np.where(np.isnan(pattern), 0.0, pattern) * scale)
            pattern = np.where(np.isnan(pattern), np.nan, noisy.astype(float))
        else:
            pattern = pattern * scale
        avgs.append(pattern)
        p = s.exponent if s.kind == "superball" else math.nan
        truths.append(GroundTruth(i, shape_id, np.asarray(ori, dtype=float), scale, p))
    return np.array(avgs), truths
