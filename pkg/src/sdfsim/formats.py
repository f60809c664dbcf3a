"""File formats: PFM / PGM / PPM images and color-mapped depth previews.

Heightfields carry their own binary format (see Heightfield.to_bytes); this
module covers the image side.

  - PFM: lossless float interchange. Grayscale "Pf", scale -1.0 (little
    endian), scanlines stored bottom-to-top per the format convention.
  - 8-bit PGM: quick inspection; depth is scaled by 100 (value = whole
    centimeters, clamped to 255).
  - 16-bit PGM (heightfields): values = (h - offset) / scale, with offset and
    scale recorded in header comments; sample bytes are big-endian.
  - PPM: color-mapped depth using a fixed 5-stop cool-to-warm ramp over
    [0, 2] m; invalid pixels render black.
"""

from __future__ import annotations

import numpy as np

from .camera import DepthImage
from .terrain import Heightfield

PGM8_METERS_TO_UNITS = 100.0
COLORMAP_RANGE_M = 2.0

# (position in [0,1], rgb) - cool (near) to warm (far)
COLOR_STOPS = (
    (0.00, (0, 0, 255)),
    (0.25, (0, 255, 255)),
    (0.50, (0, 255, 0)),
    (0.75, (255, 255, 0)),
    (1.00, (255, 0, 0)),
)


def save_pfm(img: DepthImage, path) -> None:
    data = img.data.astype("<f4")
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{img.width} {img.height}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(data[::-1, :].tobytes())


def load_pfm(path) -> DepthImage:
    with open(path, "rb") as f:
        if f.readline().strip() != b"Pf":
            raise ValueError("not a grayscale PFM file")
        w, h = (int(tok) for tok in f.readline().split())
        scale = float(f.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        body = np.frombuffer(f.read(4 * w * h), dtype=dtype).reshape(h, w)
        return DepthImage(body[::-1, :])


def save_pgm8(img: DepthImage, path, meters_to_units: float = PGM8_METERS_TO_UNITS) -> None:
    units = np.clip(np.round(img.data * meters_to_units), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{img.width} {img.height}\n255\n".encode("ascii"))
        f.write(units.tobytes())


def save_heightfield_pgm16(field: Heightfield, path) -> None:
    h = field.heights.astype(np.float64)
    offset = float(h.min())
    span = float(h.max()) - offset
    scale = span / 65535.0 if span > 0 else 1.0
    units = np.round((h - offset) / scale).astype(">u2")
    with open(path, "wb") as f:
        f.write(b"P5\n")
        f.write(f"# scale {scale!r}\n# offset {offset!r}\n".encode("ascii"))
        f.write(f"{field.cols} {field.rows}\n65535\n".encode("ascii"))
        f.write(units.tobytes())


def load_heightfield_pgm16(path) -> np.ndarray:
    """Recover metric heights from a 16-bit heightfield PGM."""
    with open(path, "rb") as f:
        if f.readline().strip() != b"P5":
            raise ValueError("not a binary PGM file")
        scale = offset = None
        line = f.readline()
        while line.startswith(b"#"):
            key, _, val = line[1:].strip().partition(b" ")
            if key == b"scale":
                scale = float(val)
            elif key == b"offset":
                offset = float(val)
            line = f.readline()
        cols, rows = (int(tok) for tok in line.split())
        maxval = int(f.readline())
        if maxval != 65535 or scale is None or offset is None:
            raise ValueError("missing 16-bit heightfield metadata")
        units = np.frombuffer(f.read(2 * rows * cols), dtype=">u2").reshape(rows, cols)
        return units.astype(np.float64) * scale + offset


def depth_colormap(data: np.ndarray, max_meters: float = COLORMAP_RANGE_M) -> np.ndarray:
    """Map depths (meters) to an (H, W, 3) uint8 image; 0.0 pixels stay black."""
    t = np.clip(np.asarray(data, dtype=np.float64) / max_meters, 0.0, 1.0)
    rgb = np.zeros(t.shape + (3,), dtype=np.float64)
    for (t0, c0), (t1, c1) in zip(COLOR_STOPS[:-1], COLOR_STOPS[1:]):
        seg = (t >= t0) & (t <= t1)
        w = (t[seg] - t0) / (t1 - t0)
        for ch in range(3):
            rgb[seg, ch] = c0[ch] + (c1[ch] - c0[ch]) * w
    out = np.round(rgb).astype(np.uint8)
    out[np.asarray(data) <= 0.0] = 0
    return out


def save_ppm(rgb: np.ndarray, path) -> None:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w = rgb.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(rgb.tobytes())


def save_depth_ppm(img: DepthImage, path, max_meters: float = COLORMAP_RANGE_M) -> None:
    save_ppm(depth_colormap(img.data, max_meters), path)
