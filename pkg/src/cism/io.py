"""Bit-exact raster file I/O.

Single-image format ``CISM1``::

    bytes 0-4   magic b"CISM1"
    byte  5     version, always 1
    u32 LE      rows
    u32 LE      cols
    f64 LE      pixel_size_nm
    payload     rows*cols little-endian float32, row-major

Stack format ``CISMS``: magic b"CISMS", u32 LE element count, then that many
concatenated CISM1 records.

Pixel values are float64 in memory and float32 on disk, so one write/read
cycle quantizes to float32; a second cycle is bit-exact.  Masks export to
ASCII PBM and images optionally to 16-bit PNG (min-max scaled, scaling
recorded in a sidecar) for viewing only; neither is ever read back.
"""

import struct
import zlib

import numpy as np

from .image import Image2D, ISMDataset

MAGIC_IMAGE = b"CISM1"
MAGIC_STACK = b"CISMS"
_VERSION = 1
_HEADER = struct.Struct("<5sBIId")


class RasterFormatError(Exception):
    """Raised when a raster file is malformed; message names the bad field."""


def _encode_image(img: Image2D) -> bytes:
    header = _HEADER.pack(MAGIC_IMAGE, _VERSION, img.rows, img.cols, img.pixel_size_nm)
    payload = img.data.astype("<f4").tobytes(order="C")
    return header + payload


def _decode_image(buf: bytes, offset: int, context: str = "") -> tuple[Image2D, int]:
    where = f" in {context}" if context else ""
    if len(buf) - offset < _HEADER.size:
        raise RasterFormatError(f"truncated header{where}: "
                                f"{len(buf) - offset} bytes, need {_HEADER.size}")
    magic, version, rows, cols, pixel_size = _HEADER.unpack_from(buf, offset)
    if magic != MAGIC_IMAGE:
        raise RasterFormatError(f"bad magic{where}: expected {MAGIC_IMAGE!r}, got {magic!r}")
    if version != _VERSION:
        raise RasterFormatError(f"bad version{where}: expected {_VERSION}, got {version}")
    if rows < 1 or cols < 1:
        raise RasterFormatError(f"bad dimensions{where}: rows={rows} cols={cols}")
    n_values = rows * cols
    if n_values > (len(buf) - offset - _HEADER.size) // 4:
        raise RasterFormatError(
            f"truncated payload{where}: rows*cols={n_values} values declared, "
            f"{(len(buf) - offset - _HEADER.size) // 4} available"
        )
    if not np.isfinite(pixel_size) or pixel_size <= 0:
        raise RasterFormatError(f"bad pixel_size_nm{where}: {pixel_size}")
    start = offset + _HEADER.size
    end = start + 4 * n_values
    values = np.frombuffer(buf[start:end], dtype="<f4").astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise RasterFormatError(f"non-finite payload values{where}")
    return Image2D(values.reshape(rows, cols), pixel_size), end


def write_raster(img: Image2D, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_encode_image(img))


def read_raster(path) -> Image2D:
    with open(path, "rb") as fh:
        buf = fh.read()
    img, end = _decode_image(buf, 0)
    if end != len(buf):
        raise RasterFormatError(f"trailing bytes after payload: {len(buf) - end}")
    return img


def write_stack(images, path) -> None:
    """Write a sequence of images (or an ISMDataset) as one CISMS file."""
    if isinstance(images, ISMDataset):
        images = images.elements
    images = list(images)
    with open(path, "wb") as fh:
        fh.write(MAGIC_STACK)
        fh.write(struct.pack("<I", len(images)))
        for img in images:
            fh.write(_encode_image(img))


def read_stack(path) -> list[Image2D]:
    """Read a CISMS file back as a list of images.

    Callers attach detector geometry themselves when an ISMDataset is
    needed; the file stores only the rasters.
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 9:
        raise RasterFormatError(f"truncated stack header: {len(buf)} bytes")
    if buf[:5] != MAGIC_STACK:
        raise RasterFormatError(f"bad stack magic: expected {MAGIC_STACK!r}, got {buf[:5]!r}")
    (count,) = struct.unpack_from("<I", buf, 5)
    if count < 1:
        raise RasterFormatError(f"bad element_count: {count}")
    images = []
    offset = 9
    for k in range(count):
        img, offset = _decode_image(buf, offset, context=f"stack element {k}")
        images.append(img)
    if offset != len(buf):
        raise RasterFormatError(f"trailing bytes after stack payload: {len(buf) - offset}")
    return images


# -- side-channel text formats ------------------------------------------------

def format_kv(entries: dict) -> str:
    lines = [f"{key} = {value}" for key, value in entries.items()]
    return "\n".join(lines) + "\n"


def parse_kv_text(text: str) -> dict:
    """Parse 'key = value' lines; '#' starts a comment, blank lines ignored."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        if key in entries:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value.strip()
    return entries


def write_sidecar(path, entries: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_kv(entries))


def read_sidecar(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv_text(fh.read())


# -- export-only formats -------------------------------------------------------

def write_pbm(pattern: np.ndarray, path) -> None:
    """ASCII PBM bitmap; 1 = sampled scan point for mask inspection."""
    pattern = np.asarray(pattern, dtype=bool)
    rows, cols = pattern.shape
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"P1\n{cols} {rows}\n")
        for i in range(rows):
            fh.write(" ".join("1" if v else "0" for v in pattern[i]) + "\n")


def _png_chunk(tag: bytes, body: bytes) -> bytes:
    crc = zlib.crc32(tag + body) & 0xFFFFFFFF
    return struct.pack(">I", len(body)) + tag + body + struct.pack(">I", crc)


def write_png16(img: Image2D, path) -> None:
    """16-bit grayscale PNG for viewing; scaling stored in '<path>.scale.txt'."""
    lo = float(img.data.min())
    hi = float(img.data.max())
    span = hi - lo if hi > lo else 1.0
    scaled = np.round((img.data - lo) / span * 65535.0).astype(">u2")
    rows = scaled.shape[0]
    raw = b"".join(b"\x00" + scaled[i].tobytes() for i in range(rows))
    ihdr = struct.pack(">IIBBBBB", img.cols, img.rows, 16, 0, 0, 0, 0)
    blob = (b"\x89PNG\r\n\x1a\n"
            + _png_chunk(b"IHDR", ihdr)
            + _png_chunk(b"IDAT", zlib.compress(raw, 9))
            + _png_chunk(b"IEND", b""))
    with open(path, "wb") as fh:
        fh.write(blob)
    write_sidecar(str(path) + ".scale.txt",
                  {"min": repr(lo), "max": repr(hi), "levels": 65535})
