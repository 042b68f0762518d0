"""Parametric particle shapes and their oversampled 3D Fourier intensities.

The superball family |x/a|^p + |y/a|^p + |z/a|^p <= 1 interpolates from a
sphere (p = 2) to a cube (p -> inf); a single exponent therefore serves as a
ground-truth "melting coordinate". An oblate spheroid variant (anisotropic z
semi-axis) provides a contaminant shape for classification tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeSupportError
from .volumes import IntensityVolume3D

NM = 1e-9


@dataclass(frozen=True)
class ParticleShape:
    kind: str  # superball | sphere | spheroid
    edge_or_diameter_nm: float  # cube edge (superball) or diameter (sphere/spheroid)
    exponent: float = 2.0  # superball p; >= 2, may be inf (exact cube)
    aspect_z: float = 1.0  # z semi-axis / equatorial semi-axis (spheroid)
    density_gcc: float = 19.32

    def __post_init__(self):
        if self.kind not in ("superball", "sphere", "spheroid"):
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.edge_or_diameter_nm <= 0:
            raise ValueError("size must be positive")
        if self.kind == "superball" and self.exponent < 2:
            raise ValueError("superball exponent must be >= 2")
        if self.aspect_z <= 0:
            raise ValueError("aspect_z must be positive")

    @property
    def semi_axis_m(self) -> float:
        return 0.5 * self.edge_or_diameter_nm * NM

    @property
    def p(self) -> float:
        return self.exponent if self.kind == "superball" else 2.0

    def semi_axes_m(self) -> tuple[float, float, float]:
        a = self.semi_axis_m
        c = a * (self.aspect_z if self.kind == "spheroid" else 1.0)
        return (a, a, c)

    def bounding_radius_m(self) -> float:
        """Radius of the smallest sphere containing the shape."""
        ax, ay, az = self.semi_axes_m()
        p = self.p
        if not math.isfinite(p):
            return math.sqrt(ax * ax + ay * ay + az * az)
        # farthest point of |x/ax|^p + ... = 1 from the origin
        if abs(ax - az) < 1e-30:
            return ax * 3.0 ** (0.5 - 1.0 / p)
        # spheroid (p == 2): max semi-axis
        return max(ax, az)

    def analytic_volume_nm3(self) -> float:
        ax, ay, az = (s / NM for s in self.semi_axes_m())
        p = self.p
        if not math.isfinite(p):
            return 8.0 * ax * ay * az
        g = math.gamma(1.0 + 1.0 / p) ** 3 / math.gamma(1.0 + 3.0 / p)
        return 8.0 * ax * ay * az * g

    def mass(self) -> float:
        """density * analytic volume (arbitrary but consistent units: gcc*nm^3)."""
        return self.density_gcc * self.analytic_volume_nm3()


def cube(edge_nm: float, density_gcc: float = 19.32) -> ParticleShape:
    return ParticleShape("superball", edge_nm, math.inf, 1.0, density_gcc)


def sphere(diameter_nm: float, density_gcc: float = 19.32) -> ParticleShape:
    return ParticleShape("sphere", diameter_nm, 2.0, 1.0, density_gcc)


def superball(edge_nm: float, p: float, density_gcc: float = 19.32) -> ParticleShape:
    return ParticleShape("superball", edge_nm, p, 1.0, density_gcc)


def oblate(diameter_nm: float, aspect_z: float, density_gcc: float = 19.32) -> ParticleShape:
    return ParticleShape("spheroid", diameter_nm, 2.0, aspect_z, density_gcc)


def sphere_matching_mass(ref: ParticleShape, density_gcc: float) -> ParticleShape:
    """Sphere with the same mass as ``ref`` at a different material density."""
    vol_nm3 = ref.mass() / density_gcc
    d = 2.0 * (3.0 * vol_nm3 / (4.0 * math.pi)) ** (1.0 / 3.0)
    return sphere(d, density_gcc)


def _occupancy(shape: ParticleShape, grid_size: int, dx: float, supersample: int) -> np.ndarray:
    """Voxel occupancy fractions via s^3 subsampling, z-slab chunked."""
    m, s = grid_size, supersample
    ax, ay, az = shape.semi_axes_m()
    sub = (np.arange(m * s) - (m * s - 1) / 2.0) * (dx / s)
    p = shape.p

    def level(coords: np.ndarray, semi: float) -> np.ndarray:
        u = np.abs(coords) / semi
        if not math.isfinite(p):
            return u  # combined with max() below
        return u**p

    fx = level(sub, ax)
    fy = level(sub, ay)
    fz = level(sub, az)
    occ = np.empty((m, m, m), dtype=np.float64)
    finite_p = math.isfinite(p)
    plane_xy = None
    if finite_p:
        plane_xy = fx[:, None] + fy[None, :]
    else:
        plane_xy = np.maximum(fx[:, None], fy[None, :])
    inv = 1.0 / (s * s * s)
    for iz in range(m):
        fzs = fz[iz * s : (iz + 1) * s]
        if finite_p:
            inside = plane_xy[:, :, None] + fzs[None, None, :] <= 1.0
        else:
            inside = np.maximum(plane_xy[:, :, None], fzs[None, None, :]) <= 1.0
        counts = inside.sum(axis=2, dtype=np.float64)
        counts = counts.reshape(m, s, m, s).sum(axis=(1, 3))
        occ[:, :, iz] = counts * inv
    return occ


def make_volume(
    shape: ParticleShape,
    grid_size: int,
    voxel_q_step: float,
    supersample: int = 4,
    keep_density: bool = False,
) -> IntensityVolume3D:
    """Oversampled |F(q)|^2 of the shape's density on a centered cubic grid.

    The density is voxelized with sub-voxel supersampling and the voxel-box
    window is deconvolved in Fourier space, so the returned intensity tracks
    the continuous form factor to ~1e-3 relative at low q. Axes are (qx, qy,
    qz); q = (index - m//2) * voxel_q_step.
    """
    if grid_size % 2 != 1:
        raise ValueError("grid_size must be odd so q=0 sits on the grid")
    if voxel_q_step <= 0:
        raise ValueError("voxel_q_step must be positive")
    fov = 1.0 / voxel_q_step
    extent = 2.0 * shape.bounding_radius_m()
    if extent >= fov / 3.0:
        raise ShapeSupportError(
            f"shape extent {extent / NM:.1f} nm exceeds one third of the "
            f"real-space field of view {fov / NM:.1f} nm"
        )
    m = grid_size
    dx = fov / m
    dx_nm = dx / NM  # intensity carries the voxel measure in nm^3: F ~ g/cc * nm^3,
    # keeping |F|^2 comfortably inside float32 range for raw-file persistence
    density = _occupancy(shape, m, dx, supersample) * shape.density_gcc
    f = np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(density))) * dx_nm**3
    q = (np.arange(m) - m // 2) * voxel_q_step
    window = np.sinc(q * dx)
    f /= window[:, None, None] * window[None, :, None] * window[None, None, :]
    intensity = np.abs(f) ** 2
    vol = IntensityVolume3D(values=intensity, voxel_q_step=voxel_q_step)
    if keep_density:
        dec = np.fft.fftshift(
            np.fft.ifftn(np.fft.ifftshift(f / dx_nm**3))
        ).real
        vol.density = dec
    return vol


def sphere_form_factor_intensity(q: np.ndarray, diameter_nm: float) -> np.ndarray:
    """Normalized intensity [3 (sin u - u cos u)/u^3]^2 with u = pi q d (q in 1/m)."""
    u = np.pi * np.asarray(q, dtype=np.float64) * diameter_nm * NM
    out = np.ones_like(u)
    nz = np.abs(u) > 1e-8
    un = u[nz]
    out[nz] = (3.0 * (np.sin(un) - un * np.cos(un)) / un**3) ** 2
    return out


SPHERE_FIRST_ZERO_U = 4.493409457909064  # first positive root of tan(u) = u


def grid_for_geometry(max_q: float, voxel_q_step: float, margin: int = 2) -> int:
    """Smallest odd grid covering |q| <= max_q with a safety margin (voxels)."""
    half = int(np.ceil(max_q / voxel_q_step)) + margin
    return 2 * half + 1
