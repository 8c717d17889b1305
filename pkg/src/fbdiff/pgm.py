"""Plain (P2) and binary (P5) PGM images with maxval 255."""
import numpy as np


class PGMError(ValueError):
    """Malformed PGM data; ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte {offset})")
        self.offset = offset


def _tokens(data, start, count):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    pos, out = start, []
    n = len(data)
    while len(out) < count:
        while pos < n and (data[pos : pos + 1].isspace() or data[pos : pos + 1] == b"#"):
            if data[pos : pos + 1] == b"#":
                while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        if pos >= n:
            raise PGMError("truncated header", pos)
        begin = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        tok = data[begin:pos]
        if not tok.isdigit():
            raise PGMError(f"expected an integer, got {tok!r}", begin)
        out.append((int(tok), begin))
    return out, pos


def parse_pgm(data: bytes) -> np.ndarray:
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise PGMError(f"unknown magic number {magic!r}", 0)
    header, pos = _tokens(data, 2, 3)
    (width, _), (height, hpos), (maxval, mpos) = header
    if width < 1 or height < 1:
        raise PGMError("image dimensions must be positive", hpos)
    if maxval != 255:
        raise PGMError(f"only maxval 255 is supported, got {maxval}", mpos)
    count = width * height
    if magic == b"P5":
        if pos >= len(data) or not data[pos : pos + 1].isspace():
            raise PGMError("missing whitespace after maxval", pos)
        pos += 1
        payload = data[pos : pos + count]
        if len(payload) < count:
            raise PGMError(f"truncated payload: {len(payload)} of {count} bytes", pos + len(payload))
        values = np.frombuffer(payload, dtype=np.uint8)
    else:
        try:
            items, _ = _tokens(data, pos, count)
        except PGMError as err:
            raise PGMError(f"truncated or malformed payload: {err.args[0]}", err.offset) from None
        bad = [(v, at) for v, at in items if v > maxval]
        if bad:
            raise PGMError(f"sample {bad[0][0]} exceeds maxval", bad[0][1])
        values = np.array([v for v, _ in items], dtype=np.uint8)
    return values.reshape(height, width).astype(float)


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return parse_pgm(fh.read())


def encode_pgm(image, binary=True) -> bytes:
    """Round half-to-even, clamp to [0, 255], and serialize."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError(f"PGM images are 2D, got shape {img.shape}")
    pixels = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    height, width = pixels.shape
    if binary:
        return f"P5\n{width} {height}\n255\n".encode() + pixels.tobytes()
    rows = "\n".join(" ".join(str(v) for v in row) for row in pixels)
    return f"P2\n{width} {height}\n255\n{rows}\n".encode()


def write_pgm(image, path, binary=True):
    with open(path, "wb") as fh:
        fh.write(encode_pgm(image, binary))
