"""3D intensity volumes and 2D model stacks: containers plus raw+JSON persistence.

Raw arrays are little-endian float32/float64, C order; each array file has a
sibling JSON manifest carrying shape, dtype and physical scale, so every
artifact is self-describing and byte-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _read_json(path: Path) -> dict:
    return json.loads(path.read_text())


@dataclass
class IntensityVolume3D:
    """Cubic-grid Fourier intensity |F(q)|^2, centered, voxel_q_step in 1/m."""

    values: np.ndarray  # (m, m, m) float64, axes (qx, qy, qz)
    voxel_q_step: float
    density: np.ndarray | None = field(default=None, repr=False)

    @property
    def grid_size(self) -> int:
        return self.values.shape[0]

    @property
    def real_voxel_size(self) -> float:
        """Real-space voxel size in m of the FFT-conjugate grid."""
        return 1.0 / (self.grid_size * self.voxel_q_step)

    @property
    def real_voxel_nm(self) -> float:
        return self.real_voxel_size * 1e9

    def q_axis(self) -> np.ndarray:
        m = self.grid_size
        return (np.arange(m) - m // 2) * self.voxel_q_step


def save_volume(vol: IntensityVolume3D, path: str | Path) -> None:
    path = Path(path)
    np.asarray(vol.values, dtype="<f4").tofile(path)
    _write_json(
        path.with_suffix(path.suffix + ".json"),
        {
            "kind": "intensity_volume_3d",
            "shape": list(vol.values.shape),
            "dtype": "<f4",
            "order": "C",
            "voxel_q_step_per_m": vol.voxel_q_step,
            "real_voxel_size_m": vol.real_voxel_size,
        },
    )


def load_volume(path: str | Path) -> IntensityVolume3D:
    path = Path(path)
    meta = _read_json(path.with_suffix(path.suffix + ".json"))
    values = np.fromfile(path, dtype=meta["dtype"]).reshape(meta["shape"])
    return IntensityVolume3D(
        values=values.astype(np.float64), voxel_q_step=meta["voxel_q_step_per_m"]
    )


def save_model_stack(
    models: np.ndarray,
    path: str | Path,
    ids: list[int] | None = None,
    extra: dict | None = None,
) -> None:
    """Stack of 2D averages as raw float32 plus a JSON manifest."""
    path = Path(path)
    models = np.asarray(models)
    if models.ndim != 3:
        raise ValueError("expected a (count, ny, nx) stack")
    np.asarray(models, dtype="<f4").tofile(path)
    meta = {
        "kind": "model_stack_2d",
        "count": int(models.shape[0]),
        "ny": int(models.shape[1]),
        "nx": int(models.shape[2]),
        "dtype": "<f4",
        "order": "C",
        "ids": list(range(models.shape[0])) if ids is None else [int(i) for i in ids],
    }
    if extra:
        meta.update(extra)
    _write_json(path.with_suffix(path.suffix + ".json"), meta)


def load_model_stack(path: str | Path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = _read_json(path.with_suffix(path.suffix + ".json"))
    stack = np.fromfile(path, dtype=meta["dtype"]).reshape(
        meta["count"], meta["ny"], meta["nx"]
    )
    return stack.astype(np.float64), meta
