"""Map export: an 8-bit binary PGM plus a small YAML sidecar.

Pixel values: 0 occupied (log-odds > 0.1), 254 free (log-odds < -0.1),
205 unknown. Image row 0 is the top of the map (largest y), as in the
usual ROS ``map_server`` layout. The sidecar records the image file name,
resolution and the world position of the lower-left corner of the
lower-left cell. Loaded maps get log-odds +1 / -1 / 0 for the three
classes, which round-trips the classification exactly.
"""
from __future__ import annotations

import os
from typing import Tuple

import numpy as np
import yaml

from ..core import OccupancyGridMap, Pose2

PIX_OCCUPIED = 0
PIX_FREE = 254
PIX_UNKNOWN = 205
THRESHOLD = 0.1


class MapFormatError(ValueError):
    pass


def map_to_image(grid: OccupancyGridMap) -> np.ndarray:
    img = np.full(grid.cells.shape, PIX_UNKNOWN, dtype=np.uint8)
    img[grid.cells > THRESHOLD] = PIX_OCCUPIED
    img[grid.cells < -THRESHOLD] = PIX_FREE
    return img[::-1].copy()


def write_pgm(path: str, img: np.ndarray) -> None:
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def read_pgm(path: str) -> np.ndarray:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise MapFormatError(f"{path}: {e.strerror or e}") from e
    tokens = []
    pos = 0
    # header: magic, width, height, maxval separated by whitespace; '#' comments
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MapFormatError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != b"P5":
        raise MapFormatError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as e:
        raise MapFormatError(f"{path}: bad PGM header") from e
    if maxval != 255 or w <= 0 or h <= 0:
        raise MapFormatError(f"{path}: unsupported PGM geometry {w}x{h} maxval {maxval}")
    body = data[pos:]
    if len(body) != w * h:
        raise MapFormatError(f"{path}: expected {w * h} pixel bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w)


def save_map(grid: OccupancyGridMap, directory: str, stem: str = "map") -> Tuple[str, str]:
    pgm = os.path.join(directory, stem + ".pgm")
    meta = os.path.join(directory, stem + ".yaml")
    write_pgm(pgm, map_to_image(grid))
    doc = {
        "image": stem + ".pgm",
        "resolution": grid.resolution,
        "origin": [round(grid.origin.x, 9), round(grid.origin.y, 9), 0.0],
        "occupied_pixel": PIX_OCCUPIED,
        "free_pixel": PIX_FREE,
        "unknown_pixel": PIX_UNKNOWN,
        "log_odds_threshold": THRESHOLD,
    }
    with open(meta, "w") as f:
        yaml.safe_dump(doc, f, sort_keys=True)
    return pgm, meta


def load_map(meta_path: str) -> OccupancyGridMap:
    """Load a map from its YAML sidecar (or from ``X.pgm`` next to ``X.yaml``)."""
    if meta_path.endswith(".pgm"):
        meta_path = meta_path[:-4] + ".yaml"
    try:
        with open(meta_path) as f:
            doc = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise MapFormatError(f"{meta_path}: {e}") from e
    if not isinstance(doc, dict) or not {"image", "resolution", "origin"} <= set(doc):
        raise MapFormatError(f"{meta_path}: needs image, resolution and origin")
    try:
        res = float(doc["resolution"])
        ox, oy = float(doc["origin"][0]), float(doc["origin"][1])
    except (TypeError, ValueError, IndexError) as e:
        raise MapFormatError(f"{meta_path}: bad resolution/origin") from e
    img = read_pgm(os.path.join(os.path.dirname(meta_path), str(doc["image"])))[::-1]
    if not np.isin(img, (PIX_OCCUPIED, PIX_FREE, PIX_UNKNOWN)).all():
        raise MapFormatError(f"{meta_path}: image holds pixel values other than 0/205/254")
    cells = np.zeros(img.shape)
    cells[img == PIX_OCCUPIED] = 1.0
    cells[img == PIX_FREE] = -1.0
    return OccupancyGridMap(res, img.shape[1], img.shape[0], Pose2(ox, oy, 0.0), cells, img != PIX_UNKNOWN)
