"""Detector geometry: pixel grid, reciprocal-space mapping, mask, file I/O.

Conventions
-----------
* q = 2 sin(theta) / lambda in 1/m (no 2*pi), so a particle of extent a
  produces fringes spaced 1/a.
* The flat-Ewald (paraxial) mapping q = (x, y, 0) / (lambda * D) is the
  default; the exact Ewald-sphere mapping sits behind ``curved=True``.
* Mask values: 0 = good, 1 = bad, 2 = outside analysis radius.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GeometryError

HC_KEV_M = 1.23984198e-09  # h*c in keV*m

MASK_GOOD = 0
MASK_BAD = 1
MASK_OUTSIDE = 2


@dataclass
class DetectorGeometry:
    num_pix_x: int
    num_pix_y: int
    pixel_size: float  # m
    detector_distance: float  # m
    photon_energy_kev: float
    center: tuple[float, float] = (0.0, 0.0)  # (cx, cy) fractional pixels
    mask: np.ndarray | None = field(default=None, repr=False)  # (ny, nx) uint8

    def __post_init__(self):
        if self.num_pix_x < 1 or self.num_pix_y < 1:
            raise GeometryError("pixel counts must be positive")
        if self.pixel_size <= 0 or self.detector_distance <= 0:
            raise GeometryError("pixel size and distance must be positive")
        if self.photon_energy_kev <= 0:
            raise GeometryError("photon energy must be positive")
        if self.mask is None:
            self.mask = default_radius_mask(
                self.num_pix_x, self.num_pix_y, self.center
            )
        self.mask = np.ascontiguousarray(self.mask, dtype=np.uint8)
        if self.mask.shape != (self.num_pix_y, self.num_pix_x):
            raise GeometryError(
                f"mask shape {self.mask.shape} does not match detector "
                f"({self.num_pix_y}, {self.num_pix_x})"
            )

    # -- derived quantities -------------------------------------------------

    @property
    def wavelength(self) -> float:
        return HC_KEV_M / self.photon_energy_kev

    @property
    def n_pix(self) -> int:
        return self.num_pix_x * self.num_pix_y

    def pixel_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-pixel (x, y) offsets from the beam center, in pixels, row-major."""
        ys, xs = np.mgrid[0 : self.num_pix_y, 0 : self.num_pix_x]
        return (xs - self.center[0]).ravel(), (ys - self.center[1]).ravel()

    def pixel_radii(self) -> np.ndarray:
        px, py = self.pixel_coords()
        return np.hypot(px, py)

    def good(self) -> np.ndarray:
        """Boolean flat mask of pixels entering likelihood/correlation sums."""
        return (self.mask == MASK_GOOD).ravel()

    def q_pixel_step(self) -> float:
        """Reciprocal-space step of one pixel in the flat-Ewald mapping (1/m)."""
        return self.pixel_size / (self.wavelength * self.detector_distance)

    def q_vectors(self, curved: bool = False) -> np.ndarray:
        """(n_pix, 3) q-vectors in 1/m for every pixel (masked ones included)."""
        px, py = self.pixel_coords()
        x = px * self.pixel_size
        y = py * self.pixel_size
        d = self.detector_distance
        if not curved:
            q = np.stack([x, y, np.zeros_like(x)], axis=1) / (self.wavelength * d)
        else:
            norm = np.sqrt(x * x + y * y + d * d)
            q = np.stack([x / norm, y / norm, d / norm - 1.0], axis=1)
            q /= self.wavelength
        return q

    def max_q(self, curved: bool = False) -> float:
        q = self.q_vectors(curved)[self.good()]
        return float(np.linalg.norm(q, axis=1).max())

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(
            repr(
                (
                    self.num_pix_x,
                    self.num_pix_y,
                    self.pixel_size,
                    self.detector_distance,
                    self.photon_energy_kev,
                    self.center,
                )
            ).encode()
        )
        h.update(self.mask.tobytes())
        return h.hexdigest()[:16]


def default_radius_mask(nx: int, ny: int, center: tuple[float, float]) -> np.ndarray:
    """Good inside the inscribed circle around the center, outside-radius beyond."""
    ys, xs = np.mgrid[0:ny, 0:nx]
    r = np.hypot(xs - center[0], ys - center[1])
    rmax = min(center[0], center[1], nx - 1 - center[0], ny - 1 - center[1])
    mask = np.where(r <= rmax + 0.5, MASK_GOOD, MASK_OUTSIDE).astype(np.uint8)
    return mask


def desk_geometry(
    n_pix: int = 129,
    max_angle_deg: float = 1.8,
    detector_distance: float = 0.705,
    photon_energy_kev: float = 6.0,
) -> DetectorGeometry:
    """Square synthetic detector whose edge reaches the given scattering angle.

    Defaults mirror a 6 keV beam with the detector 705 mm downstream and an
    analysis range of 1.8 degrees; pixels are sized so that n_pix//2 of them
    span that range (i.e. a binned-detector desk-scale stand-in).
    """
    half = n_pix // 2
    pixel_size = detector_distance * np.tan(np.radians(max_angle_deg)) / half
    return DetectorGeometry(
        num_pix_x=n_pix,
        num_pix_y=n_pix,
        pixel_size=pixel_size,
        detector_distance=detector_distance,
        photon_energy_kev=photon_energy_kev,
        center=(float(half), float(half)),
    )


# -- persistence -----------------------------------------------------------

_KEYS = (
    "num_pix_x",
    "num_pix_y",
    "pixel_size_m",
    "detector_distance_m",
    "photon_energy_kev",
    "center_x",
    "center_y",
)


def write_geometry(geom: DetectorGeometry, path: str | Path) -> None:
    """Plain-text key=value file plus a sibling binary mask (1 byte/pixel)."""
    path = Path(path)
    mask_path = path.with_suffix(".mask")
    lines = [
        f"num_pix_x = {int(geom.num_pix_x)}",
        f"num_pix_y = {int(geom.num_pix_y)}",
        f"pixel_size_m = {float(geom.pixel_size)!r}",
        f"detector_distance_m = {float(geom.detector_distance)!r}",
        f"photon_energy_kev = {float(geom.photon_energy_kev)!r}",
        f"center_x = {float(geom.center[0])!r}",
        f"center_y = {float(geom.center[1])!r}",
        f"mask_file = {mask_path.name}",
    ]
    path.write_text("\n".join(lines) + "\n")
    mask_path.write_bytes(geom.mask.tobytes())


def read_geometry(path: str | Path) -> DetectorGeometry:
    path = Path(path)
    if not path.exists():
        raise GeometryError(f"geometry file not found: {path}")
    kv: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise GeometryError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        kv[key.strip()] = value.strip()
    missing = [k for k in _KEYS if k not in kv]
    if missing:
        raise GeometryError(f"{path}: missing keys {missing}")
    try:
        nx, ny = int(kv["num_pix_x"]), int(kv["num_pix_y"])
        geom_kwargs = dict(
            num_pix_x=nx,
            num_pix_y=ny,
            pixel_size=float(kv["pixel_size_m"]),
            detector_distance=float(kv["detector_distance_m"]),
            photon_energy_kev=float(kv["photon_energy_kev"]),
            center=(float(kv["center_x"]), float(kv["center_y"])),
        )
    except ValueError as exc:
        raise GeometryError(f"{path}: {exc}") from exc
    mask = None
    if "mask_file" in kv:
        mask_path = path.parent / kv["mask_file"]
        if not mask_path.exists():
            raise GeometryError(f"mask file not found: {mask_path}")
        raw = np.frombuffer(mask_path.read_bytes(), dtype=np.uint8)
        if raw.size != nx * ny:
            raise GeometryError(
                f"{mask_path}: {raw.size} bytes, expected {nx * ny}"
            )
        mask = raw.reshape(ny, nx).copy()
    return DetectorGeometry(mask=mask, **geom_kwargs)
