"""Polar resampling of detector-grid patterns with Friedel folding.

Angles cover [0, pi): each angular bin is a full diameter line, with the two
arms (theta, theta+pi) bilinearly sampled and averaged where both are valid.
Radii run from r_min to r_max in 1-pixel steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SpihetError
from .geometry import DetectorGeometry


@dataclass(frozen=True)
class PolarGrid:
    r_min: int
    r_max: int
    n_theta: int
    theta_oversample: int = 1  # fine samples averaged per angular bin (anti-aliasing)

    def __post_init__(self):
        if self.r_min < 0 or self.r_max <= self.r_min:
            raise SpihetError("need 0 <= r_min < r_max")
        if self.n_theta < 4:
            raise SpihetError("n_theta too small")
        if self.theta_oversample < 1:
            raise SpihetError("theta_oversample must be >= 1")

    @property
    def n_r(self) -> int:
        return self.r_max - self.r_min + 1

    def radii(self) -> np.ndarray:
        return np.arange(self.r_min, self.r_max + 1, dtype=np.float64)

    def thetas(self) -> np.ndarray:
        return np.arange(self.n_theta) * (np.pi / self.n_theta)

    def fine_thetas(self) -> np.ndarray:
        """Supersampled angles centered on each bin."""
        ss = self.theta_oversample
        return (np.arange(self.n_theta * ss) - (ss - 1) / 2.0) * (
            np.pi / (self.n_theta * ss)
        )


@dataclass
class PolarPattern:
    """values[r, theta] on the folded grid; valid marks usable bins."""

    values: np.ndarray  # (n_r, n_theta)
    valid: np.ndarray  # (n_r, n_theta) bool
    grid: PolarGrid

    def lines(self) -> tuple[np.ndarray, np.ndarray]:
        """(n_theta, n_r) line profiles and their validity masks."""
        return self.values.T.copy(), self.valid.T.copy()


def bilinear_sample(
    image: np.ndarray, good: np.ndarray, xs: np.ndarray, ys: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Mask-aware bilinear sampling: a sample is valid only if all four
    neighbouring pixels are good and finite."""
    ny, nx = image.shape
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    inb = (x0 >= 0) & (y0 >= 0) & (x0 <= nx - 2) & (y0 <= ny - 2)
    x0c = np.clip(x0, 0, nx - 2)
    y0c = np.clip(y0, 0, ny - 2)
    fx = xs - x0c
    fy = ys - y0c
    img = np.where(good & np.isfinite(image), image, 0.0)
    ok = good & np.isfinite(image)
    v00 = img[y0c, x0c]
    v01 = img[y0c, x0c + 1]
    v10 = img[y0c + 1, x0c]
    v11 = img[y0c + 1, x0c + 1]
    values = (
        v00 * (1 - fy) * (1 - fx)
        + v01 * (1 - fy) * fx
        + v10 * fy * (1 - fx)
        + v11 * fy * fx
    )
    valid = (
        inb
        & ok[y0c, x0c]
        & ok[y0c, x0c + 1]
        & ok[y0c + 1, x0c]
        & ok[y0c + 1, x0c + 1]
    )
    return values, valid


def to_polar(pattern: np.ndarray, geom: DetectorGeometry, grid: PolarGrid) -> PolarPattern:
    """Bilinear polar resampling with Friedel folding onto [0, pi).

    With theta_oversample > 1 each angular bin integrates that many fine
    samples across its extent (anti-aliased bins); a bin is valid when every
    fine sample on at least one Friedel arm is valid.
    """
    limit = min(
        geom.center[0],
        geom.center[1],
        geom.num_pix_x - 1 - geom.center[0],
        geom.num_pix_y - 1 - geom.center[1],
    )
    if grid.r_max > limit:
        raise SpihetError(f"r_max {grid.r_max} exceeds detector radius {limit:.0f}")
    good2d = geom.good().reshape(geom.num_pix_y, geom.num_pix_x)
    r = grid.radii()[:, None]
    th = grid.fine_thetas()[None, :]
    cx, cy = geom.center
    ss = grid.theta_oversample
    n_fine = grid.n_theta * ss
    vals = np.zeros((2, grid.n_r, n_fine))
    valid = np.zeros((2, grid.n_r, n_fine), dtype=bool)
    for arm, sign in enumerate((1.0, -1.0)):
        xs = cx + sign * r * np.cos(th)
        ys = cy + sign * r * np.sin(th)
        v, ok = bilinear_sample(pattern, good2d, xs, ys)
        vals[arm] = v
        valid[arm] = ok
    n_ok = valid.sum(axis=0)
    with np.errstate(invalid="ignore"):
        folded = np.where(n_ok > 0, vals.sum(axis=0) / np.maximum(n_ok, 1), 0.0)
    fine_valid = n_ok > 0
    if ss == 1:
        return PolarPattern(values=folded, valid=fine_valid, grid=grid)
    folded = folded.reshape(grid.n_r, grid.n_theta, ss)
    fine_valid = fine_valid.reshape(grid.n_r, grid.n_theta, ss)
    bin_valid = fine_valid.all(axis=2)
    binned = np.where(bin_valid, folded.mean(axis=2), 0.0)
    return PolarPattern(values=binned, valid=bin_valid, grid=grid)


def log_scale(pp: PolarPattern) -> PolarPattern:
    """log(1 + I/I0) with I0 the median over all valid bins of this pattern.

    A single per-pattern scale keeps radial structure (a per-ring scale would
    flatten isotropic patterns into zero-variance lines).
    """
    vals = pp.values[pp.valid]
    if vals.size == 0:
        raise SpihetError("pattern has no valid polar bins")
    i0 = float(np.median(vals))
    if i0 <= 0:
        pos = vals[vals > 0]
        if pos.size == 0:
            raise SpihetError("pattern has no positive intensity")
        i0 = float(np.median(pos))
    out = np.where(pp.valid, np.log1p(np.maximum(pp.values, 0.0) / i0), 0.0)
    return PolarPattern(values=out, valid=pp.valid.copy(), grid=pp.grid)


def ring_means(pp: PolarPattern) -> np.ndarray:
    """Mean over valid angular bins per ring (NaN where the ring is empty)."""
    n = pp.valid.sum(axis=1)
    s = np.where(pp.valid, pp.values, 0.0).sum(axis=1)
    with np.errstate(invalid="ignore"):
        return np.where(n > 0, s / np.maximum(n, 1), np.nan)
