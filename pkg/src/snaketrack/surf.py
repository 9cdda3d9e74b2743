"""Box-filter Hessian interest points, orientations, descriptors, matching.

Detection approximates the Hessian determinant with integral-image box
filters at filter sizes 9, 15, 21, 27 in the first octave; each further
octave doubles both the size gap between layers and the sampling stride.
The filter response at size L is (Dxx * Dyy - (0.9 * Dxy)^2) with each
derivative normalized by the filter area L^2.

Sign convention: the second-derivative filters are oriented so that a bright
blob on a dark background gives a positive trace, hence laplacian_sign =
sign(Dxx + Dyy) is +1 for bright-on-dark and -1 for dark-on-bright. The
determinant is unchanged by this choice.

Scale equals 1.2 * L / 9, i.e. the 9x9 filter corresponds to sigma = 1.2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import ExtremitySelectionError
from .image import IntegralImage, box_sum_grid

BASE_SCALE = 1.2            # scale of the 9x9 base filter
BASE_FILTER = 9
DXY_WEIGHT = 0.9
LAYERS_PER_OCTAVE = 4

ORIENTATION_RADIUS = 6      # sampling disk radius, in units of scale
ORIENTATION_SIGMA = 2.0     # Gaussian weight, in units of scale
ORIENTATION_WINDOW = math.pi / 3.0
ORIENTATION_STEP = math.pi / 36.0

DESCRIPTOR_SPAN = 20        # descriptor window side, in units of scale
DESCRIPTOR_SIGMA = 3.3      # Gaussian weight, in units of scale
LONE_MATCH_LIMIT = 0.5      # max distance for a single sign-compatible candidate

TWO_PI = 2.0 * math.pi


@dataclass
class DetectorParams:
    """Detection and matching knobs."""

    hessian_threshold: float = 0.0002
    octaves: int = 3
    init_step: int = 1
    ratio: float = 0.7

    def __post_init__(self):
        if self.hessian_threshold <= 0.0:
            raise ValueError("hessian_threshold must be > 0")
        if self.octaves < 1:
            raise ValueError("octaves must be >= 1")
        if self.init_step < 1:
            raise ValueError("init_step must be >= 1")
        if not 0.0 < self.ratio <= 1.0:
            raise ValueError("ratio must lie in (0, 1]")


@dataclass(eq=False)
class KeyPoint:
    """An interest point in pixel coordinates (sub-pixel after refinement)."""

    x: float
    y: float
    scale: float
    response: float
    laplacian_sign: int
    orientation: float = 0.0
    descriptor: np.ndarray | None = None
    orientation_fallback: bool = False  # set when the orientation disk did not fit


@dataclass(frozen=True)
class Match:
    index_a: int
    index_b: int
    distance: float


class ExtremitySelection(NamedTuple):
    points: list            # 8 KeyPoints in anchor order
    reused: tuple           # parallel flags, True where a keypoint was reused


def _layer_sizes(octave: int) -> list[int]:
    gap = 6 * 2 ** (octave - 1)
    return [3 + gap + k * gap for k in range(LAYERS_PER_OCTAVE)]


def _hessian_layer(padded, width, height, size, xs, ys):
    """Determinant and trace responses of one filter size over a sample grid."""
    lobe = size // 3
    border = (size - 1) // 2
    half = lobe // 2
    X, Y = np.meshgrid(xs, ys)
    inv_area = 1.0 / float(size * size)

    def boxes(dx0, dy0, dx1, dy1):
        return box_sum_grid(padded, width, height, X + dx0, Y + dy0, X + dx1, Y + dy1)

    # bright-center convention: 3 * middle lobe - whole filter footprint
    whole_x = boxes(-border, -(lobe - 1), border, lobe - 1)
    mid_x = boxes(-half, -(lobe - 1), -half + lobe - 1, lobe - 1)
    dxx = (3.0 * mid_x - whole_x) * inv_area
    whole_y = boxes(-(lobe - 1), -border, lobe - 1, border)
    mid_y = boxes(-(lobe - 1), -half, lobe - 1, -half + lobe - 1)
    dyy = (3.0 * mid_y - whole_y) * inv_area
    upper_right = boxes(1, -lobe, lobe, -1)
    lower_left = boxes(-lobe, 1, -1, lobe)
    upper_left = boxes(-lobe, -lobe, -1, -1)
    lower_right = boxes(1, 1, lobe, lobe)
    dxy = (upper_left + lower_right - upper_right - lower_left) * inv_area

    det = dxx * dyy - (DXY_WEIGHT * DXY_WEIGHT) * dxy * dxy
    return det, dxx + dyy


def _refine(cube: np.ndarray) -> np.ndarray | None:
    """Quadratic sub-sample offset from a 3x3x3 response cube (s, y, x)."""
    grad = 0.5 * np.array([
        cube[2, 1, 1] - cube[0, 1, 1],
        cube[1, 2, 1] - cube[1, 0, 1],
        cube[1, 1, 2] - cube[1, 1, 0],
    ])
    center = cube[1, 1, 1]
    dss = cube[2, 1, 1] - 2.0 * center + cube[0, 1, 1]
    dyy = cube[1, 2, 1] - 2.0 * center + cube[1, 0, 1]
    dxx = cube[1, 1, 2] - 2.0 * center + cube[1, 1, 0]
    dsy = 0.25 * (cube[2, 2, 1] - cube[2, 0, 1] - cube[0, 2, 1] + cube[0, 0, 1])
    dsx = 0.25 * (cube[2, 1, 2] - cube[2, 1, 0] - cube[0, 1, 2] + cube[0, 1, 0])
    dyx = 0.25 * (cube[1, 2, 2] - cube[1, 2, 0] - cube[1, 0, 2] + cube[1, 0, 0])
    hess = np.array([[dss, dsy, dsx], [dsy, dyy, dyx], [dsx, dyx, dxx]])
    try:
        offset = np.linalg.solve(hess, -grad)
    except np.linalg.LinAlgError:
        return None
    if np.abs(offset).max() > 1.0:
        # wild extrapolation, keep the measured location
        return None
    return offset  # (ds, dy, dx) in layer/grid units


def detect_keypoints(ii: IntegralImage, params: DetectorParams) -> list[KeyPoint]:
    """Scale-space maxima of the box-filter Hessian determinant.

    Candidates are strict maxima over their 26 scale-space neighbors within
    an octave and must exceed params.hessian_threshold. Octaves whose
    smallest filter does not fit in the image are dropped. Results are
    sorted by descending response, ties by (y, x) ascending.
    """
    w, h = ii.width, ii.height
    padded = ii.padded
    found: list[KeyPoint] = []
    for octave in range(1, params.octaves + 1):
        sizes = _layer_sizes(octave)
        if sizes[0] > min(w, h):
            break
        step = params.init_step * 2 ** (octave - 1)
        xs = np.arange(0, w, step)
        ys = np.arange(0, h, step)
        if len(xs) < 3 or len(ys) < 3:
            break
        gap = 6 * 2 ** (octave - 1)
        layers = [_hessian_layer(padded, w, h, size, xs, ys) for size in sizes]
        resp = np.stack([det for det, _ in layers])
        ny, nx = resp.shape[1:]
        for mid in (1, 2):
            center = resp[mid][1:-1, 1:-1]
            mask = center > params.hessian_threshold
            if not mask.any():
                continue
            for dz in (mid - 1, mid, mid + 1):
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        if dz == mid and dy == 0 and dx == 0:
                            continue
                        neighbor = resp[dz][1 + dy:ny - 1 + dy, 1 + dx:nx - 1 + dx]
                        mask &= center > neighbor
                        if not mask.any():
                            break
            for gy, gx in np.argwhere(mask):
                gy += 1
                gx += 1
                cube = resp[mid - 1:mid + 2, gy - 1:gy + 2, gx - 1:gx + 2]
                offset = _refine(cube)
                if offset is None:
                    ds = dy = dx = 0.0
                else:
                    ds, dy, dx = offset
                size_eff = sizes[mid] + ds * gap
                found.append(KeyPoint(
                    x=float((gx + dx) * step),
                    y=float((gy + dy) * step),
                    scale=BASE_SCALE * size_eff / BASE_FILTER,
                    response=float(resp[mid][gy, gx]),
                    laplacian_sign=1 if layers[mid][1][gy, gx] >= 0.0 else -1,
                ))
    found.sort(key=lambda kp: (-kp.response, kp.y, kp.x))
    return found


def _haar_x(padded, w, h, cx, cy, half):
    """Right-minus-left box difference of side 2*half centered at (cx, cy)."""
    right = box_sum_grid(padded, w, h, cx, cy - half, cx + half - 1, cy + half - 1)
    left = box_sum_grid(padded, w, h, cx - half, cy - half, cx - 1, cy + half - 1)
    return right - left


def _haar_y(padded, w, h, cx, cy, half):
    """Bottom-minus-top box difference of side 2*half centered at (cx, cy)."""
    lower = box_sum_grid(padded, w, h, cx - half, cy, cx + half - 1, cy + half - 1)
    upper = box_sum_grid(padded, w, h, cx - half, cy - half, cx + half - 1, cy - 1)
    return lower - upper


_ORI_OFFSETS = np.array([(i, j) for i in range(-6, 7) for j in range(-6, 7)
                         if i * i + j * j <= ORIENTATION_RADIUS ** 2])
_ORI_WEIGHTS = np.exp(-(_ORI_OFFSETS[:, 0] ** 2 + _ORI_OFFSETS[:, 1] ** 2)
                      / (2.0 * ORIENTATION_SIGMA ** 2))


def assign_orientation(ii: IntegralImage, kp: KeyPoint) -> float:
    """Dominant Haar-response direction around a keypoint, in [0, 2*pi).

    Weighted horizontal/vertical Haar responses (wavelet side 4 * scale) are
    sampled on a disk of radius 6 * scale; the orientation is the angle of
    the largest response vector summed over a sliding pi/3 window stepped by
    pi/36. If the disk does not fit inside the image the orientation is 0
    and the keypoint is flagged.
    """
    s = kp.scale
    margin = ORIENTATION_RADIUS * s
    w, h = ii.width, ii.height
    if not (margin <= kp.x <= w - 1 - margin and margin <= kp.y <= h - 1 - margin):
        kp.orientation = 0.0
        kp.orientation_fallback = True
        return 0.0
    sr = max(1, int(math.floor(s + 0.5)))
    px = np.floor(kp.x + _ORI_OFFSETS[:, 0] * s + 0.5).astype(np.int64)
    py = np.floor(kp.y + _ORI_OFFSETS[:, 1] * s + 0.5).astype(np.int64)
    gx = _ORI_WEIGHTS * _haar_x(ii.padded, w, h, px, py, 2 * sr)
    gy = _ORI_WEIGHTS * _haar_y(ii.padded, w, h, px, py, 2 * sr)
    angles = np.mod(np.arctan2(gy, gx), TWO_PI)
    best_norm = -1.0
    best = (0.0, 0.0)
    for k in range(72):
        start = k * ORIENTATION_STEP
        inside = np.mod(angles - start, TWO_PI) < ORIENTATION_WINDOW
        sx = float(gx[inside].sum())
        sy = float(gy[inside].sum())
        norm = sx * sx + sy * sy
        if norm > best_norm:
            best_norm = norm
            best = (sx, sy)
    kp.orientation = math.atan2(best[1], best[0]) % TWO_PI
    kp.orientation_fallback = False
    return kp.orientation


_DESC_UNITS = np.arange(20, dtype=np.float64) - 9.5
_DESC_OX, _DESC_OY = np.meshgrid(_DESC_UNITS, _DESC_UNITS)   # (row=y, col=x)
_DESC_WEIGHTS = np.exp(-(_DESC_OX ** 2 + _DESC_OY ** 2) / (2.0 * DESCRIPTOR_SIGMA ** 2))


def compute_descriptor(ii: IntegralImage, kp: KeyPoint) -> np.ndarray:
    """64-component oriented Haar descriptor, unit length unless all-zero.

    The 20s x 20s window around the keypoint, rotated by its orientation, is
    split into 4x4 subregions sampled 5x5 each; every subregion contributes
    (sum dx, sum dy, sum |dx|, sum |dy|) of Gaussian-weighted responses
    rotated into the keypoint frame.
    """
    s = kp.scale
    sr = max(1, int(math.floor(s + 0.5)))
    cos_t = math.cos(kp.orientation)
    sin_t = math.sin(kp.orientation)
    ox = _DESC_OX * s
    oy = _DESC_OY * s
    px = np.floor(kp.x + ox * cos_t - oy * sin_t + 0.5).astype(np.int64)
    py = np.floor(kp.y + ox * sin_t + oy * cos_t + 0.5).astype(np.int64)
    hx = _haar_x(ii.padded, ii.width, ii.height, px, py, sr)
    hy = _haar_y(ii.padded, ii.width, ii.height, px, py, sr)
    dx = _DESC_WEIGHTS * (cos_t * hx + sin_t * hy)
    dy = _DESC_WEIGHTS * (-sin_t * hx + cos_t * hy)
    blocks = np.empty((4, 4, 4), dtype=np.float64)
    blocks[:, :, 0] = dx.reshape(4, 5, 4, 5).sum(axis=(1, 3))
    blocks[:, :, 1] = dy.reshape(4, 5, 4, 5).sum(axis=(1, 3))
    blocks[:, :, 2] = np.abs(dx).reshape(4, 5, 4, 5).sum(axis=(1, 3))
    blocks[:, :, 3] = np.abs(dy).reshape(4, 5, 4, 5).sum(axis=(1, 3))
    desc = blocks.reshape(64)
    norm = math.sqrt(float((desc * desc).sum()))
    if norm > 0.0:
        desc /= norm
    kp.descriptor = desc
    return desc


def describe_keypoints(ii: IntegralImage, kps: list[KeyPoint]) -> list[KeyPoint]:
    """Assign orientation and descriptor to every keypoint, in place."""
    for kp in kps:
        assign_orientation(ii, kp)
        compute_descriptor(ii, kp)
    return kps


def match_descriptors(a: list[KeyPoint], b: list[KeyPoint], ratio: float = 0.7) -> list[Match]:
    """Sign-gated nearest-neighbor matching with Lowe's ratio test.

    For every keypoint in `a` the nearest and second-nearest descriptors in
    `b` with the same laplacian_sign are found; the pair is kept iff
    d1/d2 < ratio. A lone sign-compatible candidate is kept iff
    d1 < 0.5. When several keypoints of `a` claim the same keypoint of `b`
    only the smallest-distance claim survives. Output is sorted by
    ascending distance.
    """
    if not a or not b:
        return []
    descs_b = np.stack([kp.descriptor for kp in b])
    signs_b = np.array([kp.laplacian_sign for kp in b])
    claims: dict[int, tuple[float, int]] = {}
    for i, kp in enumerate(a):
        idx = np.nonzero(signs_b == kp.laplacian_sign)[0]
        if idx.size == 0:
            continue
        diff = descs_b[idx] - kp.descriptor
        dists = np.sqrt((diff * diff).sum(axis=1))
        order = np.argsort(dists, kind="stable")
        j1 = int(idx[order[0]])
        d1 = float(dists[order[0]])
        if idx.size == 1:
            if d1 >= LONE_MATCH_LIMIT:
                continue
        else:
            d2 = float(dists[order[1]])
            if d2 <= 0.0 or d1 / d2 >= ratio:
                continue
        held = claims.get(j1)
        if held is None or (d1, i) < held:
            claims[j1] = (d1, i)
    matches = [Match(i, j, d) for j, (d, i) in claims.items()]
    matches.sort(key=lambda m: (m.distance, m.index_a, m.index_b))
    return matches


def _anchors(width: int, height: int) -> list[tuple[float, float]]:
    xmid = (width - 1) / 2.0
    ymid = (height - 1) / 2.0
    xmax = float(width - 1)
    ymax = float(height - 1)
    # clockwise from the top-left corner, edge midpoints interleaved
    return [(0.0, 0.0), (xmid, 0.0), (xmax, 0.0), (xmax, ymid),
            (xmax, ymax), (xmid, ymax), (0.0, ymax), (0.0, ymid)]


def select_extremity_points(kps: list[KeyPoint], width: int, height: int) -> ExtremitySelection:
    """Pick 8 keypoints nearest the image corners and edge midpoints.

    Anchors are visited in a fixed clockwise order; each claims its nearest
    unclaimed keypoint (ties by higher response, then input order). Once all
    keypoints are claimed the remaining anchors reuse the nearest keypoint
    and are flagged. An empty keypoint list is an error: lower
    hessian_threshold to detect more points.
    """
    if not kps:
        raise ExtremitySelectionError(
            "no keypoints to seed agents from; lower hessian_threshold")
    claimed: set[int] = set()
    points: list[KeyPoint] = []
    reused: list[bool] = []
    for ax, ay in _anchors(width, height):
        free = [k for k in range(len(kps)) if k not in claimed]
        pool = free if free else list(range(len(kps)))
        best = min(pool, key=lambda k: ((kps[k].x - ax) ** 2 + (kps[k].y - ay) ** 2,
                                        -kps[k].response, k))
        points.append(kps[best])
        reused.append(not free)
        if free:
            claimed.add(best)
    return ExtremitySelection(points, tuple(reused))


def format_keypoint(kp: KeyPoint) -> str:
    """One dump line: x y scale response sign orientation then 64 descriptor values."""
    if kp.descriptor is None:
        raise ValueError("keypoint has no descriptor to format")
    fields = [f"{kp.x:.9g}", f"{kp.y:.9g}", f"{kp.scale:.9g}", f"{kp.response:.9g}",
              f"{kp.laplacian_sign:d}", f"{kp.orientation:.9g}"]
    fields.extend(f"{v:.9g}" for v in kp.descriptor)
    return " ".join(fields)


def copy_keypoint(kp: KeyPoint) -> KeyPoint:
    """Independent copy; the descriptor array is shared (treated read-only)."""
    return replace(kp)
