#!/usr/bin/env python3
"""Regenerate the bundled 256x256 photo fixtures from scikit-image / scikit-learn sample images.

Usage: python3 tools/make_fixtures.py [out_dir]
"""
import io
import os
import struct
import sys
import zlib

import numpy as np
import skimage.data
import skimage.io
import sklearn.datasets
from skimage.transform import rescale

SIZE = 256

# (source, rescale factor, top, left, pristine?)
CROPS = [
    ("astronaut.png", 1.0, 0, 96, True),
    ("astronaut.png", 1.0, 96, 192, True),
    ("astronaut.png", 0.75, 0, 0, True),
    ("coffee.png", 1.0, 0, 0, True),
    ("coffee.png", 1.0, 96, 288, True),
    ("coffee.png", 0.75, 0, 192, True),
    ("chelsea.png", 1.0, 0, 192, True),
    ("china", 1.0, 96, 192, True),
    ("astronaut.png", 1.0, 256, 256, False),
    ("coffee.png", 1.0, 144, 144, False),
    ("chelsea.png", 1.0, 44, 0, False),
    ("rocket.jpg", 1.0, 0, 96, False),
    ("rocket.jpg", 1.0, 160, 384, False),
    ("motorcycle_left.png", 1.0, 0, 96, False),
    ("motorcycle_right.png", 1.0, 192, 480, False),
    ("china", 1.0, 0, 0, False),
    ("china", 1.0, 160, 384, False),
    ("flower", 1.0, 96, 192, False),
    ("flower", 1.0, 0, 384, False),
    ("motorcycle_left.png", 0.6, 0, 0, False),
]


def load(name):
    if name in ("china", "flower"):
        imgs = sklearn.datasets.load_sample_images()
        idx = [os.path.basename(f) for f in imgs.filenames].index(name + ".jpg")
        return imgs.images[idx].astype(float)
    path = os.path.join(os.path.dirname(skimage.data.__file__), name)
    return skimage.io.imread(path)[..., :3].astype(float)


def pattern(h, w):
    """Codec test pattern: value(r, c, k) = (7r + 13c + 50k) mod 256."""
    r, c, k = np.meshgrid(np.arange(h), np.arange(w), np.arange(3), indexing="ij")
    return ((7 * r + 13 * c + 50 * k) % 256).astype(np.uint8)


def write_png16(path, h, w):
    """16-bit RGB PNG written chunk by chunk; sample = (1000r + 37c + 9000k) mod 65536."""
    r, c, k = np.meshgrid(np.arange(h), np.arange(w), np.arange(3), indexing="ij")
    v = ((1000 * r + 37 * c + 9000 * k) % 65536).astype(">u2")
    raw = b"".join(b"\x00" + v[i].tobytes() for i in range(h))

    def chunk(tag, data):
        return struct.pack(">I", len(data)) + tag + data + struct.pack(">I", zlib.crc32(tag + data))

    with open(path, "wb") as f:
        f.write(b"\x89PNG\r\n\x1a\n")
        f.write(chunk(b"IHDR", struct.pack(">IIBBBBB", w, h, 16, 2, 0, 0, 0)))
        f.write(chunk(b"IDAT", zlib.compress(raw)))
        f.write(chunk(b"IEND", b""))


def write_codecs(out):
    from PIL import Image

    d = os.path.join(out, "codec")
    os.makedirs(d, exist_ok=True)
    h, w = 9, 11
    rgb = pattern(h, w)
    Image.fromarray(rgb).save(os.path.join(d, "pattern.png"))
    Image.fromarray(rgb).save(os.path.join(d, "pattern.bmp"))
    Image.fromarray(rgb[..., 0]).save(os.path.join(d, "gray.png"))
    Image.fromarray(rgb[..., 0]).convert("P").save(os.path.join(d, "palette.bmp"))
    rgba = np.dstack([rgb, np.full((h, w), 17, np.uint8)])
    Image.fromarray(rgba).save(os.path.join(d, "alpha.png"))
    Image.fromarray(np.full((1, 1, 3), 255, np.uint8)).save(os.path.join(d, "white.png"))
    write_png16(os.path.join(d, "deep.png"), h, w)
    buf = io.BytesIO()
    Image.fromarray(pattern(64, 64)).save(buf, format="JPEG", quality=95)
    with open(os.path.join(d, "pattern.jpg"), "wb") as f:
        f.write(buf.getvalue())
    with open(os.path.join(d, "truncated.jpg"), "wb") as f:
        f.write(buf.getvalue()[: len(buf.getvalue()) // 2])
    with open(os.path.join(d, "not_an_image.png"), "wb") as f:
        f.write(b"plain text, not pixels\n")


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(__file__), "..", "tests", "fixtures")
    os.makedirs(out, exist_ok=True)
    lines = ["file,source,scale,top,left,pristine"]
    for i, (src, scale, top, left, pristine) in enumerate(CROPS):
        im = load(src)
        if scale != 1.0:
            im = rescale(im, scale, channel_axis=2, anti_aliasing=True, preserve_range=True)
        crop = np.clip(np.round(im[top:top + SIZE, left:left + SIZE]), 0, 255).astype(np.uint8)
        assert crop.shape == (SIZE, SIZE, 3), (src, crop.shape)
        stem = os.path.splitext(src)[0]
        fname = f"{i:02d}_{stem}.png"
        skimage.io.imsave(os.path.join(out, fname), crop, check_contrast=False)
        lines.append(f"{fname},{src},{scale},{top},{left},{int(pristine)}")
    with open(os.path.join(out, "fixtures.csv"), "w") as f:
        f.write("\n".join(lines) + "\n")
    write_codecs(out)


if __name__ == "__main__":
    main()
