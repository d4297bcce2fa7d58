"""Basin classification and Julia-set rasterization.

Pixels are classified by which attracting cycle captures their orbit,
with attraction time for shading; pixels that never get captured within
the iteration budget are the Julia-set proxy.  Output is always writable
as binary PPM (byte-reproducible); PNG goes through matplotlib.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import RationalMap, chordal_array, is_inf
from .portrait import portrait_of

__all__ = [
    "Viewport",
    "Raster",
    "attracting_cycles",
    "classify_point",
    "classify_grid",
    "render",
    "write_ppm",
    "raster_rgb",
]

JULIA_PROXY = -1
_CAPTURE_RADIUS = 1e-3

# basin index -> RGB hue (shaded by attraction time); fixed palette
_PALETTE = (
    (66, 135, 245),   # blue
    (240, 160, 50),   # orange
    (90, 200, 120),   # green
    (200, 90, 200),   # purple
    (230, 80, 80),    # red
    (80, 210, 210),   # teal
)


@dataclass(frozen=True)
class Viewport:
    """Square region of the plane mapped onto a pixel grid."""

    center: complex = 0j
    width: float = 4.0
    pixels: tuple = (512, 512)

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("viewport width must be positive")
        w, h = self.pixels
        if w < 64 or h < 64:
            raise ValueError("viewport needs at least 64x64 pixels")

    @property
    def height(self) -> float:
        w, h = self.pixels
        return self.width * h / w

    def grid(self) -> np.ndarray:
        w, h = self.pixels
        xs = self.center.real + self.width * (np.arange(w) + 0.5 - w / 2) / w
        ys = self.center.imag + self.height * (np.arange(h) + 0.5 - h / 2) / h
        return xs[None, :] + 1j * ys[::-1, None]

    def pixel_size(self) -> float:
        return self.width / self.pixels[0]


@dataclass(frozen=True)
class Raster:
    """Per-pixel basin labels and attraction times for one viewport."""

    labels: np.ndarray      # int16, JULIA_PROXY where never captured
    times: np.ndarray       # int32 iteration of capture (0 if never)
    viewport: Viewport
    cycles: tuple           # the attracting cycles used for labeling


def attracting_cycles(rmap: RationalMap, max_steps=64):
    """Distinct attracting (|multiplier| < 1) cycles from the portrait."""
    port = portrait_of(rmap, max_steps=max_steps)
    out = []
    seen = set()
    for n in port.nodes:
        pre, per = port.chain(n.label)
        cur = n.label
        for _ in range(pre):
            cur = port.successor(cur)
        cyc = []
        lab = cur
        for _ in range(per):
            cyc.append(port.node(lab).point)
            lab = port.successor(lab)
        key = tuple(sorted(str(p) for p in cyc))
        if key in seen:
            continue
        seen.add(key)
        if abs(rmap.multiplier(cyc)) < 1.0:
            out.append(tuple(cyc))
    return out


def classify_point(rmap, z, cycles, max_iter=200, capture=_CAPTURE_RADIUS):
    """Index of the capturing attracting cycle, or JULIA_PROXY."""
    labels, _ = classify_grid(
        rmap, np.asarray([[complex(z)]]), cycles, max_iter=max_iter, capture=capture
    )
    return int(labels[0, 0])


def classify_grid(rmap, grid, cycles, max_iter=200, capture=_CAPTURE_RADIUS,
                  threads=1):
    """Vectorized capture-time classification of a complex grid.

    Returns (labels, times).  Deterministic for fixed inputs regardless of
    thread count (rows are partitioned, then reassembled in order).
    """
    grid = np.asarray(grid, dtype=complex)
    if threads > 1 and grid.shape[0] >= 2 * threads:
        blocks = np.array_split(np.arange(grid.shape[0]), threads)
        labels = np.empty(grid.shape, dtype=np.int16)
        times = np.empty(grid.shape, dtype=np.int32)

        def work(rows):
            return classify_grid(rmap, grid[rows], cycles,
                                 max_iter=max_iter, capture=capture)

        with ThreadPoolExecutor(max_workers=threads) as pool:
            for rows, (lb, tm) in zip(blocks, pool.map(work, blocks)):
                labels[rows] = lb
                times[rows] = tm
        return labels, times

    z = grid.copy()
    labels = np.full(grid.shape, JULIA_PROXY, dtype=np.int16)
    times = np.zeros(grid.shape, dtype=np.int32)
    free = np.ones(grid.shape, dtype=bool)
    for it in range(max_iter):
        for ci, cyc in enumerate(cycles):
            near = np.zeros(grid.shape, dtype=bool)
            for p in cyc:
                near |= chordal_array(z, p) < capture
            newly = free & near
            if newly.any():
                labels[newly] = ci
                times[newly] = it
                free &= ~newly
        if not free.any():
            break
        z = rmap.eval_array(z)
    return labels, times


def render(rmap: RationalMap, viewport: Viewport, max_iter=200, cycles=None,
           threads=1) -> Raster:
    """Rasterize basins of attraction over the viewport."""
    if cycles is None:
        cycles = attracting_cycles(rmap)
    labels, times = classify_grid(
        rmap, viewport.grid(), cycles, max_iter=max_iter, threads=threads
    )
    return Raster(labels, times, viewport, tuple(cycles))


def raster_rgb(raster: Raster) -> np.ndarray:
    """uint8 RGB image: basin hue shaded by attraction time, Julia black."""
    h, w = raster.labels.shape
    img = np.zeros((h, w, 3), dtype=np.uint8)
    t = raster.times.astype(np.int64)
    # brightness decays with capture time; integer math for reproducibility
    shade = 255 - np.minimum(170, 6 * t)
    for ci in range(len(raster.cycles)):
        mask = raster.labels == ci
        r, g, b = _PALETTE[ci % len(_PALETTE)]
        img[mask, 0] = (r * shade[mask]) // 255
        img[mask, 1] = (g * shade[mask]) // 255
        img[mask, 2] = (b * shade[mask]) // 255
    return img


def write_ppm(raster: Raster, path):
    """Binary PPM (P6); byte-identical for identical rasters."""
    img = raster_rgb(raster)
    h, w, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def boundary_radius_profile(raster: Raster, label=0):
    """Radii where the given basin label stops, sampled by pixel rows.

    Used by the render sanity check: for z**2 the basin of 0 must end at
    radius 1 to within one pixel.
    """
    grid = raster.viewport.grid()
    inside = raster.labels == label
    rad = np.abs(grid - raster.viewport.center)
    if not inside.any():
        return 0.0, 0.0
    return float(rad[inside].max()), float(rad[~inside].min()) if (~inside).any() else 0.0
