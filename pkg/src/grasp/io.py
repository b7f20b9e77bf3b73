"""PNG input/output and resizing (OpenCV underneath, RGB order on our side)."""
from __future__ import annotations

import hashlib
from pathlib import Path

import cv2
import numpy as np

from .errors import InvalidInput
from .image import ImageTensor

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def read_image(path) -> ImageTensor:
    """Decode an 8- or 16-bit image into ``[0, 1]`` RGB (or single-channel gray).

    Alpha channels are dropped. Raises :class:`InvalidInput` if the file
    cannot be decoded.
    """
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise InvalidInput(f"cannot decode image {path}")
    if raw.dtype == np.uint8:
        data = raw.astype(np.float64) / 255.0
    elif raw.dtype == np.uint16:
        data = raw.astype(np.float64) / 65535.0
    else:
        raise InvalidInput(f"unsupported pixel type {raw.dtype} in {path}")
    if data.ndim == 3:
        if data.shape[2] == 4:
            data = data[:, :, :3]
        if data.shape[2] == 3:
            data = data[:, :, ::-1]
        elif data.shape[2] != 1:
            raise InvalidInput(f"unsupported channel count {data.shape[2]} in {path}")
    return ImageTensor(data)


def to_uint16(img: ImageTensor) -> np.ndarray:
    unit = (img.data - img.pixel_range[0]) / img.range_width
    return np.rint(np.clip(unit, 0.0, 1.0) * 65535.0).astype(np.uint16)


def write_png16(path, img: ImageTensor) -> Path:
    """Write ``img`` as a 16-bit PNG; round-trip error is at most 1/(2*65535)."""
    path = Path(path)
    q = to_uint16(img)
    q = q[:, :, 0] if q.shape[2] == 1 else q[:, :, ::-1]
    if not cv2.imwrite(str(path), np.ascontiguousarray(q)):
        raise OSError(f"failed to write {path}")
    return path


def to_rgb(img: ImageTensor) -> ImageTensor:
    if img.channels == 3:
        return img
    return img.with_data(np.repeat(img.data, 3, axis=2))


def resize_bilinear(img: ImageTensor, height: int, width: int) -> ImageTensor:
    if (img.height, img.width) == (height, width):
        return img
    out = cv2.resize(img.data, (width, height), interpolation=cv2.INTER_LINEAR)
    if out.ndim == 2:
        out = out[:, :, None]
    return img.with_data(out)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def expand_inputs(paths) -> list[Path]:
    """Files as given; directories contribute their image files in sorted order."""
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(q for q in p.iterdir()
                              if q.is_file() and q.suffix.lower() in IMAGE_SUFFIXES))
        else:
            out.append(p)
    return out
