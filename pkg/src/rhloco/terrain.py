"""Synthetic 2.5D elevation maps and the foothold queries built on them.

Stands in for an onboard perception stack: a raw heightmap pins stance
foothold heights, a smoothed copy provides a slope-proportional foothold
cost that steers footholds away from edges, and step edges extracted from
the raw map become part of the task description.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import se2_into_frame, wrap_angle

FORMAT_VERSION = 1

# sentinel descriptor used to pad when fewer edges exist than requested
SENTINEL_DISTANCE = 10.0


@dataclass(frozen=True)
class EdgeDescriptor:
    """One stairstep rise: a fitted line through the jump cells."""

    point: tuple        # (x, y) m, centroid of the rise
    yaw: float          # rad, line orientation relative to the +y axis
    height_change: float  # m, signed (uphill positive along +x-ish normal)
    extent: float       # m, length of the rise along the line

    def encode(self) -> np.ndarray:
        return np.array([self.point[0], self.point[1], self.yaw,
                         self.height_change, self.extent])


@dataclass
class Heightmap:
    """Row-major elevation grid. Cell (i, j) center sits at
    (origin + j*resolution, origin_y + i*resolution)."""

    heights: np.ndarray          # (rows, cols)
    resolution: float            # m / cell
    origin: tuple = (0.0, 0.0)   # world (x, y) of cell (0, 0) center
    k_slope: float = 1.0
    _smoothed: np.ndarray = field(default=None, repr=False)
    _grad: tuple = field(default=None, repr=False)

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=float)
        if self.heights.ndim != 2:
            raise ValueError("heights must be a 2D grid")
        if self.resolution <= 0.0:
            raise ValueError("resolution must be > 0")
        if not np.all(np.isfinite(self.heights)):
            raise ValueError("heights must be finite")

    # -- smoothing ----------------------------------------------------------

    @property
    def smoothed(self) -> np.ndarray:
        """5x5 normalized box filter applied twice; same dimensions."""
        if self._smoothed is None:
            sm = self.heights
            for _ in range(2):
                sm = ndimage.uniform_filter(sm, size=5, mode="nearest")
            self._smoothed = sm
        return self._smoothed

    @property
    def _smoothed_gradient(self):
        if self._grad is None:
            gy, gx = np.gradient(self.smoothed, self.resolution)
            self._grad = (gx, gy)
        return self._grad

    # -- queries ------------------------------------------------------------

    def _frac_index(self, x, y):
        j = (np.asarray(x, dtype=float) - self.origin[0]) / self.resolution
        i = (np.asarray(y, dtype=float) - self.origin[1]) / self.resolution
        rows, cols = self.heights.shape
        return np.clip(i, 0.0, rows - 1.0), np.clip(j, 0.0, cols - 1.0)

    def _bilinear(self, grid, x, y):
        i, j = self._frac_index(x, y)
        i0 = np.clip(np.floor(i).astype(int), 0, grid.shape[0] - 2) \
            if grid.shape[0] > 1 else np.zeros_like(i, dtype=int)
        j0 = np.clip(np.floor(j).astype(int), 0, grid.shape[1] - 2) \
            if grid.shape[1] > 1 else np.zeros_like(j, dtype=int)
        i1 = np.minimum(i0 + 1, grid.shape[0] - 1)
        j1 = np.minimum(j0 + 1, grid.shape[1] - 1)
        fi = i - i0
        fj = j - j0
        return ((1 - fi) * (1 - fj) * grid[i0, j0]
                + (1 - fi) * fj * grid[i0, j1]
                + fi * (1 - fj) * grid[i1, j0]
                + fi * fj * grid[i1, j1])

    def height_at(self, x, y):
        """Bilinear height on the raw map; exact at cell centers."""
        return self._bilinear(self.heights, x, y)

    def smooth_height_at(self, x, y):
        return self._bilinear(self.smoothed, x, y)

    def slope_cost_at(self, x, y):
        """k_slope * ||grad h_smoothed||, gradient by central differences."""
        gx, gy = self._smoothed_gradient
        gxi = self._bilinear(gx, x, y)
        gyi = self._bilinear(gy, x, y)
        return self.k_slope * np.sqrt(gxi ** 2 + gyi ** 2)

    # -- persistence ----------------------------------------------------------

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            rows, cols = self.heights.shape
            writer.writerow([
                "rows", rows, "cols", cols,
                "resolution", repr(self.resolution),
                "origin_x", repr(self.origin[0]),
                "origin_y", repr(self.origin[1]),
                "format_version", FORMAT_VERSION,
            ])
            for row in self.heights:
                writer.writerow([repr(float(h)) for h in row])

    @classmethod
    def load_csv(cls, path) -> "Heightmap":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            meta = dict(zip(header[0::2], header[1::2]))
            rows = int(meta["rows"])
            heights = np.array([[float(v) for v in next(reader)]
                                for _ in range(rows)])
        return cls(heights=heights, resolution=float(meta["resolution"]),
                   origin=(float(meta["origin_x"]), float(meta["origin_y"])))


def flat_map(x_range=(-1.5, 4.5), y_range=(-1.5, 1.5), resolution=0.02,
             k_slope=1.0) -> Heightmap:
    cols = int(round((x_range[1] - x_range[0]) / resolution)) + 1
    rows = int(round((y_range[1] - y_range[0]) / resolution)) + 1
    return Heightmap(np.zeros((rows, cols)), resolution,
                     origin=(x_range[0], y_range[0]), k_slope=k_slope)


def make_stairs(steps, resolution=0.02, x_range=(-1.5, 4.5),
                y_range=(-1.5, 1.5), k_slope=1.0) -> Heightmap:
    """Piecewise-constant stairstep terrain.

    steps: iterable of (distance, height_change, yaw). Each step raises the
    terrain by height_change on the far side of the line through
    (distance, 0) with in-plane normal (cos yaw, sin yaw); yaw = 0 gives a
    rise at x >= distance. Heights accumulate across steps.
    """
    hm = flat_map(x_range, y_range, resolution, k_slope)
    rows, cols = hm.heights.shape
    xs = hm.origin[0] + resolution * np.arange(cols)
    ys = hm.origin[1] + resolution * np.arange(rows)
    gx, gy = np.meshgrid(xs, ys)
    for dist, dh, yaw in steps:
        beyond = (gx - dist) * np.cos(yaw) + gy * np.sin(yaw) >= 0.0
        hm.heights[beyond] += dh
    return hm


def extract_edges(hmap: Heightmap, threshold: float = 0.02,
                  min_cells: int = 3) -> list:
    """Detect cell-to-cell height jumps above threshold and fit a line
    segment to each contiguous group of jump cells.

    Intended for stairstep rises oriented within roughly +-45 deg of the
    y axis (jumps measured along x). Returns EdgeDescriptor list; empty on
    flat terrain.
    """
    h = hmap.heights
    res = hmap.resolution
    dx = h[:, 1:] - h[:, :-1]  # jump between columns j and j+1
    mask = np.abs(dx) > threshold
    if not np.any(mask):
        return []
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    edges = []
    for lab in range(1, count + 1):
        ii, jj = np.nonzero(labels == lab)
        if ii.size < min_cells:
            continue
        # cell centers: the rise sits halfway between columns jj and jj+1
        x = hmap.origin[0] + res * (jj + 0.5)
        y = hmap.origin[1] + res * ii
        cx, cy = x.mean(), y.mean()
        pts = np.stack([x - cx, y - cy], axis=1)
        # principal direction of the rise line; yaw follows the make_stairs
        # convention (in-plane normal at angle yaw from +x), so a rise along
        # the y axis has yaw 0; wrapped to (-pi/2, pi/2]
        _, _, vt = np.linalg.svd(pts, full_matrices=False)
        direction = vt[0]
        yaw = np.arctan2(-direction[0], direction[1])
        if yaw > np.pi / 2:
            yaw -= np.pi
        elif yaw <= -np.pi / 2:
            yaw += np.pi
        along = pts @ direction
        extent = float(along.max() - along.min()) + res
        dh = float(np.mean(dx[ii, jj]))
        edges.append(EdgeDescriptor(point=(float(cx), float(cy)),
                                    yaw=float(yaw), height_change=dh,
                                    extent=extent))
    edges.sort(key=lambda e: e.point[0])
    return edges


def sample_stairs_spec(rng, n_steps: int, x_first: float = 0.9,
                       spacing=(0.25, 1.0), heights=(-0.16, 0.16),
                       yaw_limit: float = np.deg2rad(15.0),
                       y_half: float = 1.75) -> list:
    """Random stairstep spec with spacings, signed heights and yaws drawn
    from the given ranges, constrained so consecutive risers do not intersect
    within |y| <= y_half (crossing risers are not a stairstep field and make
    edge extraction ill-posed)."""
    spec = []
    x = x_first
    prev_yaw = 0.0
    for k in range(n_steps):
        if k == 0:
            yaw = float(rng.uniform(-yaw_limit, yaw_limit))
            gap = 0.0
        else:
            gap = float(rng.uniform(*spacing))
            x += gap
            lim = gap / (y_half + 0.15)
            lo = max(-yaw_limit, np.arctan(np.tan(prev_yaw) - lim))
            hi = min(yaw_limit, np.arctan(np.tan(prev_yaw) + lim))
            yaw = float(rng.uniform(lo, hi))
        dh = float(rng.uniform(*heights))
        spec.append((x, dh, yaw))
        prev_yaw = yaw
    return spec


def sentinel_obstacle() -> np.ndarray:
    """Far-flat placeholder keeping the task encoding fixed-size."""
    return np.array([SENTINEL_DISTANCE, 0.0, 0.0, 0.0])


def obstacle_encoding(edge: EdgeDescriptor, base_pose) -> np.ndarray:
    """(ahead distance, height change, relative yaw, extent) of an edge in
    the frame of SE(2) base_pose."""
    rel = se2_into_frame(base_pose, np.asarray(edge.point, dtype=float))
    return np.array([rel[0], edge.height_change,
                     wrap_angle(edge.yaw - base_pose[2]), edge.extent])


def nearest_obstacles(edges, base_pose, n: int = 2) -> np.ndarray:
    """Encodings of the n nearest edges ahead of the robot, padded with
    sentinels; shape (n, 4), sorted by ahead distance."""
    ahead = []
    for e in edges:
        enc = obstacle_encoding(e, base_pose)
        if enc[0] >= -0.05:
            ahead.append(enc)
    ahead.sort(key=lambda enc: enc[0])
    while len(ahead) < n:
        ahead.append(sentinel_obstacle())
    return np.stack(ahead[:n])
