"""Unit-quaternion rotations, uniform sampling, and octahedral symmetry tools.

Quaternions are (w, x, y, z) with Hamilton composition; q and -q are the same
rotation. ``rotation_matrix(q) @ v`` rotates a vector.
"""

from __future__ import annotations

import numpy as np


def normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def compose(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product: rotation_matrix(compose(a, b)) == R(a) @ R(b)."""
    q1 = np.asarray(q1, dtype=np.float64)
    q2 = np.asarray(q2, dtype=np.float64)
    w1, x1, y1, z1 = np.moveaxis(q1, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(q2, -1, 0)
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


def conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def rotation_matrix(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix (or stacked matrices for stacked quaternions)."""
    q = normalize(q)
    w, x, y, z = np.moveaxis(q, -1, 0)
    m = np.empty(q.shape[:-1] + (3, 3))
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def from_matrix(m: np.ndarray) -> np.ndarray:
    """Quaternion (w >= 0) of a single proper rotation matrix."""
    m = np.asarray(m, dtype=np.float64)
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s,
             (m[1, 0] - m[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(1.0 + m[i, i] - m[j, j] - m[k, k]) * 2
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    if q[0] < 0:
        q = -q
    return normalize(q)


def from_axis_angle(axis, angle_rad: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    h = 0.5 * angle_rad
    return np.concatenate([[np.cos(h)], np.sin(h) * axis])


def inplane(angle_rad: float) -> np.ndarray:
    """Rotation about the beam (z) axis."""
    return from_axis_angle([0.0, 0.0, 1.0], angle_rad)


def random_uniform(rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Uniform rotations: normalized 4D Gaussians (Marsaglia)."""
    size = (4,) if n is None else (n, 4)
    q = rng.standard_normal(size)
    return normalize(q)


def geodesic_distance(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Rotation angle between two orientations, in radians, ignoring q ~ -q."""
    dot = np.abs(np.sum(np.asarray(q1) * np.asarray(q2), axis=-1))
    return 2.0 * np.arccos(np.clip(dot, -1.0, 1.0))


_OCTAHEDRAL: np.ndarray | None = None


def octahedral_group() -> np.ndarray:
    """The 24 proper rotations of the cube as quaternions, identity first."""
    global _OCTAHEDRAL
    if _OCTAHEDRAL is None:
        mats = []
        for perm in (
            (0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)
        ):
            for signs in np.ndindex(2, 2, 2):
                m = np.zeros((3, 3))
                for row, col in enumerate(perm):
                    m[row, col] = 1.0 - 2.0 * signs[row]
                if np.linalg.det(m) > 0:
                    mats.append(m)
        quats = np.array([from_matrix(m) for m in mats])
        order = np.lexsort((quats[:, 3], quats[:, 2], quats[:, 1], -quats[:, 0]))
        _OCTAHEDRAL = quats[order]
    return _OCTAHEDRAL


def canonicalize(q: np.ndarray) -> np.ndarray:
    """Fundamental-domain representative of q modulo the octahedral group.

    Orientations R and G R (G a cube rotation) produce identical patterns of a
    cube-symmetric object, so equivalence classes are left cosets; among the 48
    candidates {+-(g * q)} the one with lexicographically largest (w, x, y, z)
    is returned. Deterministic, so equal classes map to equal representatives.
    """
    q = np.asarray(q, dtype=np.float64)
    single = q.ndim == 1
    q2 = np.atleast_2d(q)
    group = octahedral_group()
    cands = compose(group[None, :, :], q2[:, None, :])  # (n, 24, 4)
    cands = np.concatenate([cands, -cands], axis=1)  # (n, 48, 4)
    # lexicographic argmax over (w, x, y, z) per row
    reps = np.empty_like(q2)
    for i, row in enumerate(cands):
        order = np.lexsort((row[:, 3], row[:, 2], row[:, 1], row[:, 0]))
        reps[i] = row[order[-1]]
    reps = normalize(reps)
    return reps[0] if single else reps


def sym_distance(q1: np.ndarray, q2: np.ndarray) -> float:
    """Geodesic distance modulo octahedral symmetry."""
    group = octahedral_group()
    cands = compose(group, np.asarray(q2, dtype=np.float64)[None, :])
    return float(np.min(geodesic_distance(np.asarray(q1)[None, :], cands)))
