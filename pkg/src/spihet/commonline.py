"""Best-common-line similarity between 2D averages and the all-pairs CC-matrix.

For every angle pair (theta_i, theta_j) the Pearson correlation of the two
diameter-line profiles is computed over mutually valid radial bins; the
maximum over angle pairs is the pair's similarity.

Line preparation (all knobs in CommonLineConfig):
  * intensities are log-scaled, log(1 + I/I0) with I0 the per-pattern median
    over good pixels, so low-q does not dominate;
  * angular bins are anti-aliased (integrated over their extent);
  * profiles are correlated at two radial smoothing scales and the Pearson
    values averaged: the envelope scale is robust to sub-pixel sampling
    differences while the fine scale keeps fringe phase, which discriminates
    between a true common line and look-alike streak pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import CommonLineError
from .geometry import DetectorGeometry
from .polar import PolarGrid, PolarPattern, to_polar

_VAR_EPS = 1e-12
_BLOCK = 128  # fixed j-axis block width: results never depend on scheduling


@dataclass(frozen=True)
class CommonLineConfig:
    r_min: int | None = None  # None: 12% of detector radius
    r_max: int | None = None  # None: detector radius - 2
    n_theta: int = 44
    theta_oversample: int = 6
    log_scale: bool = True
    smooth_sigmas: tuple[float, ...] = (2.2, 0.7)  # radial Gaussian scales, px
    scale_weights: tuple[float, ...] = (0.5, 0.5)
    min_overlap: float = 0.5

    def polar_grid(self, geom: DetectorGeometry) -> PolarGrid:
        limit = int(
            min(
                geom.center[0],
                geom.center[1],
                geom.num_pix_x - 1 - geom.center[0],
                geom.num_pix_y - 1 - geom.center[1],
            )
        )
        r_max = (limit - 2) if self.r_max is None else self.r_max
        r_min = max(2, round(0.12 * limit)) if self.r_min is None else self.r_min
        return PolarGrid(r_min, r_max, self.n_theta, self.theta_oversample)


@dataclass
class LinePattern:
    """Per-scale line profiles of one average: each (n_theta, n_r)."""

    lines: list[np.ndarray]
    valid: np.ndarray  # (n_theta, n_r)
    grid: PolarGrid


def log_scale_image(pattern: np.ndarray, geom: DetectorGeometry) -> np.ndarray:
    """log(1 + I/I0), I0 = median positive intensity over good pixels."""
    good = geom.good().reshape(pattern.shape)
    vals = pattern[good & np.isfinite(pattern)]
    pos = vals[vals > 0]
    if pos.size == 0:
        raise CommonLineError("pattern has no positive intensity on good pixels")
    i0 = float(np.median(pos))
    return np.log1p(np.maximum(pattern, 0.0) / i0)


def _smooth_valid(values: np.ndarray, valid: np.ndarray, sigma: float) -> np.ndarray:
    """Normalized-convolution Gaussian along the radial axis (axis 0)."""
    if sigma <= 0:
        return np.where(valid, values, 0.0)
    num = gaussian_filter1d(np.where(valid, values, 0.0), sigma, axis=0, mode="nearest")
    den = gaussian_filter1d(valid.astype(np.float64), sigma, axis=0, mode="nearest")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(valid & (den > 1e-12), num / np.maximum(den, 1e-12), 0.0)
    return out


def line_pattern(
    average: np.ndarray, geom: DetectorGeometry, cfg: CommonLineConfig
) -> LinePattern:
    """Prepare the per-scale line profiles of one 2D average."""
    img = log_scale_image(average, geom) if cfg.log_scale else average
    pp = to_polar(img, geom, cfg.polar_grid(geom))
    return line_pattern_from_polar(pp, cfg)


def line_pattern_from_polar(pp: PolarPattern, cfg: CommonLineConfig) -> LinePattern:
    """Line profiles from an existing polar pattern (no 2D transform)."""
    lines = [
        _smooth_valid(pp.values, pp.valid, s).T.copy() for s in cfg.smooth_sigmas
    ]
    return LinePattern(lines=lines, valid=pp.valid.T.copy(), grid=pp.grid)


def _pair_corr(
    xa: np.ndarray, va: np.ndarray, xb: np.ndarray, vb: np.ndarray, min_bins: int
) -> np.ndarray:
    """Masked Pearson for all (line_a, line_b) pairs via six matmuls.

    Entries with fewer than min_bins mutually valid radial bins, or with
    degenerate variance, are NaN.
    """
    n = va @ vb.T
    sx = xa @ vb.T
    sy = va @ xb.T
    sxy = xa @ xb.T
    sxx = (xa * xa) @ vb.T
    syy = va @ (xb * xb).T
    with np.errstate(invalid="ignore", divide="ignore"):
        cov = sxy - sx * sy / n
        varx = sxx - sx * sx / n
        vary = syy - sy * sy / n
        rho = cov / np.sqrt(varx * vary)
    bad = (n < min_bins) | (varx <= _VAR_EPS * n) | (vary <= _VAR_EPS * n)
    rho[bad] = np.nan
    return np.clip(rho, -1.0, 1.0)


def _combined_corr(a: LinePattern, b: LinePattern, cfg: CommonLineConfig) -> np.ndarray:
    min_bins = max(2, int(np.ceil(cfg.min_overlap * a.grid.n_r)))
    va = a.valid.astype(np.float64)
    vb = b.valid.astype(np.float64)
    total = None
    for w, xa, xb in zip(cfg.scale_weights, a.lines, b.lines):
        rho = _pair_corr(xa * a.valid, va, xb * b.valid, vb, min_bins)
        total = w * rho if total is None else total + w * rho
    return total


def best_common_line(
    a: LinePattern, b: LinePattern, cfg: CommonLineConfig | None = None
) -> tuple[float, int, int]:
    """(similarity, theta_bin_a, theta_bin_b) of the best common line."""
    cfg = cfg or CommonLineConfig()
    if a.grid != b.grid:
        raise CommonLineError("patterns live on different polar grids")
    rho = _combined_corr(a, b, cfg)
    if np.all(np.isnan(rho)):
        raise CommonLineError("no valid angle pair between the two patterns")
    ia, ib = np.unravel_index(np.nanargmax(rho), rho.shape)
    return float(rho[ia, ib]), int(ia), int(ib)


@dataclass
class CCMatrix:
    values: np.ndarray  # (N, N) float64, symmetric, diag 1
    theta_i: np.ndarray  # (N, N) int32 best line angle bin in pattern i
    theta_j: np.ndarray  # (N, N) int32 best line angle bin in pattern j
    valid: np.ndarray  # (N, N) bool, False where a pair had no valid angle pair
    n_theta: int

    @property
    def n(self) -> int:
        return self.values.shape[0]


def cc_matrix(patterns: list[LinePattern], cfg: CommonLineConfig | None = None) -> CCMatrix:
    """All-pairs best-common-line similarity matrix.

    Pairwise failures (no valid angle pair) are recorded in the valid mask;
    pca_embed imputes them with column means. The internal block width is a
    constant, so results are bit-identical across runs and worker counts.
    """
    cfg = cfg or CommonLineConfig()
    n = len(patterns)
    if n < 2:
        raise CommonLineError("need at least two patterns")
    grid = patterns[0].grid
    if any(p.grid != grid for p in patterns):
        raise CommonLineError("patterns live on different polar grids")
    a_bins = grid.n_theta

    values = np.eye(n)
    theta_i = np.zeros((n, n), dtype=np.int32)
    theta_j = np.zeros((n, n), dtype=np.int32)
    valid = np.ones((n, n), dtype=bool)
    for i in range(n - 1):
        js = np.arange(i + 1, n)
        for lo in range(0, len(js), _BLOCK):
            chunk = js[lo : lo + _BLOCK]
            stacked = LinePattern(
                lines=[
                    np.concatenate([patterns[j].lines[s] for j in chunk], axis=0)
                    for s in range(len(cfg.smooth_sigmas))
                ],
                valid=np.concatenate([patterns[j].valid for j in chunk], axis=0),
                grid=grid,
            )
            rho = _combined_corr(patterns[i], stacked, cfg)
            rho3 = rho.reshape(a_bins, len(chunk), a_bins).transpose(1, 0, 2)
            for k, j in enumerate(chunk):
                r = rho3[k]
                if np.all(np.isnan(r)):
                    valid[i, j] = valid[j, i] = False
                    values[i, j] = values[j, i] = np.nan
                    continue
                ia, ib = np.unravel_index(np.nanargmax(r), r.shape)
                values[i, j] = values[j, i] = r[ia, ib]
                theta_i[i, j], theta_j[i, j] = ia, ib
                theta_i[j, i], theta_j[j, i] = ib, ia
    return CCMatrix(values, theta_i, theta_j, valid, a_bins)


def line_patterns(
    averages: np.ndarray, geom: DetectorGeometry, cfg: CommonLineConfig | None = None
) -> list[LinePattern]:
    cfg = cfg or CommonLineConfig()
    return [line_pattern(avg, geom, cfg) for avg in averages]


# -- analytic oracle helpers --------------------------------------------------


def intersection_line_angles(
    quat_a: np.ndarray, quat_b: np.ndarray, symmetry: np.ndarray | None = None
) -> list[tuple[float, float]]:
    """In-plane angles (radians, mod pi) of the central-plane intersection.

    With a symmetry group given (object rotations under which the volume is
    invariant), one candidate per group element is returned: patterns of a
    symmetric object share a common line for every symmetry image of either
    plane.
    """
    from . import quaternions as quat

    ra = quat.rotation_matrix(quat_a)
    rb = quat.rotation_matrix(quat_b)
    gs = [np.eye(3)] if symmetry is None else list(quat.rotation_matrix(symmetry))
    out = []
    for g in gs:
        rgb = g @ rb
        d = np.cross(ra[:, 2], rgb[:, 2])
        norm = np.linalg.norm(d)
        if norm < 1e-12:
            continue
        d = d / norm
        ca = ra.T @ d
        cb = rgb.T @ d
        out.append(
            (
                float(np.arctan2(ca[1], ca[0]) % np.pi),
                float(np.arctan2(cb[1], cb[0]) % np.pi),
            )
        )
    return out


def line_direction(quat_p: np.ndarray, theta: float) -> np.ndarray:
    """3D direction sampled by a pattern's line at in-plane angle theta."""
    from . import quaternions as quat

    r = quat.rotation_matrix(quat_p)
    return r @ np.array([np.cos(theta), np.sin(theta), 0.0])


# -- persistence -------------------------------------------------------------


def save_cc_matrix(cc: CCMatrix, path: str | Path) -> None:
    path = Path(path)
    np.ascontiguousarray(cc.values, dtype="<f8").tofile(path)
    angles = path.with_suffix(path.suffix + ".angles")
    np.stack([cc.theta_i, cc.theta_j]).astype("<i4").tofile(angles)
    mask = path.with_suffix(path.suffix + ".valid")
    np.packbits(cc.valid).tofile(mask)
    meta = {
        "kind": "cc_matrix",
        "n": cc.n,
        "dtype": "<f8",
        "n_theta": cc.n_theta,
        "angle_table": angles.name,
        "valid_mask": mask.name,
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(meta, sort_keys=True, indent=1) + "\n"
    )


def load_cc_matrix(path: str | Path) -> CCMatrix:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    n = meta["n"]
    values = np.fromfile(path, dtype=meta["dtype"]).reshape(n, n)
    angles = np.fromfile(path.parent / meta["angle_table"], dtype="<i4").reshape(2, n, n)
    packed = np.fromfile(path.parent / meta["valid_mask"], dtype=np.uint8)
    valid = np.unpackbits(packed, count=n * n).astype(bool).reshape(n, n)
    return CCMatrix(values, angles[0], angles[1], valid, meta["n_theta"])
