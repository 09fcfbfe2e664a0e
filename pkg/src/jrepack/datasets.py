"""Deterministic test corpus of baseline JPEG files.

The standard set holds 18 natural images (9 colour, 9 grey) from the sample
data shipped with scikit-image and scikit-learn, encoded with libjpeg
through Pillow.  ``cameraman`` is encoded at the quality whose file size is
closest to 50483 bytes; the rest use quality 90, which puts them in the
1.5 to 3 bits per pixel range of classic test-set JPEGs.

The wild set exercises the container paths the standard set does not:
restart markers, 4:4:4 and 4:2:2 sampling, odd sizes, optimized Huffman
tables, extra APPn/COM segments and bytes after EOI.  Two photographs
that were JPEG-compressed by their original camera workflow are included as is.

Needs the ``corpus`` extra (Pillow, scikit-image, scikit-learn).
"""

from __future__ import annotations

import io
from importlib import resources
from pathlib import Path

import numpy as np

CAMERAMAN_TARGET_BYTES = 50483
STANDARD_QUALITY = 90


def _skimage(name, grey=False):
    from skimage import data
    from skimage.color import rgb2gray

    a = getattr(data, name)()
    if grey and a.ndim == 3:
        a = np.round(rgb2gray(a[..., :3]) * 255).astype(np.uint8)
    return a


def _sklearn_bytes(name):
    return (resources.files("sklearn.datasets.images") / name).read_bytes()


def _sklearn(name, grey=False):
    from PIL import Image

    im = Image.open(io.BytesIO(_sklearn_bytes(name)))
    return np.asarray(im.convert("L" if grey else "RGB"))


def _retina():
    from PIL import Image

    a = _skimage("retina")
    return np.asarray(Image.fromarray(a).resize((705, 705), Image.Resampling.LANCZOS))


# (file stem, loader); colour first, then grey.
STANDARD_IMAGES = [
    ("cat", lambda: _skimage("chelsea")),
    ("astronaut-color", lambda: _skimage("astronaut")),
    ("coffee-color", lambda: _skimage("coffee")),
    ("rocket", lambda: _skimage("rocket")),
    ("china-color", lambda: _sklearn("china.jpg")),
    ("flower-color", lambda: _sklearn("flower.jpg")),
    ("ihc", lambda: _skimage("immunohistochemistry")),
    ("retina", _retina),
    ("hubble", lambda: _skimage("hubble_deep_field")),
    ("cameraman", lambda: _skimage("camera")),
    ("astronaut-grey", lambda: _skimage("astronaut", grey=True)),
    ("coffee-grey", lambda: _skimage("coffee", grey=True)),
    ("china-grey", lambda: _sklearn("china.jpg", grey=True)),
    ("coins", lambda: _skimage("coins")),
    ("moon", lambda: _skimage("moon")),
    ("brick", lambda: _skimage("brick")),
    ("gravel", lambda: _skimage("gravel")),
    ("clock", lambda: _skimage("clock")),
]


def encode_jpeg(pixels, quality=STANDARD_QUALITY, **options) -> bytes:
    """Baseline JPEG bytes of ``pixels`` (grey or RGB uint8) via Pillow."""
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(np.asarray(pixels, dtype=np.uint8)).save(
        buf, "JPEG", quality=quality, **options
    )
    return buf.getvalue()


def quality_for_size(pixels, target, lo=1, hi=100):
    """Quality whose output size is closest to ``target`` bytes."""
    best = None
    for q in range(lo, hi + 1):
        size = len(encode_jpeg(pixels, q))
        if best is None or abs(size - target) < abs(best[1] - target):
            best = (q, size)
    return best[0]


def standard_set():
    """List of ``(name, jpeg_bytes)`` for the 18-image standard set."""
    out = []
    for name, load in STANDARD_IMAGES:
        a = load()
        q = quality_for_size(a, CAMERAMAN_TARGET_BYTES, 80, 95) if name == "cameraman" else STANDARD_QUALITY
        out.append((name, encode_jpeg(a, q)))
    return out


def _odd_crop(a, h, w):
    return np.ascontiguousarray(a[:h, :w])


def wild_set():
    """List of ``(name, jpeg_bytes)`` for the in-the-wild set."""
    astro = _skimage("astronaut")
    coffee = _skimage("coffee")
    chelsea = _skimage("chelsea")
    camera = _skimage("camera")
    rocket = _skimage("rocket")
    out = [
        ("rst-rows-420", encode_jpeg(astro, 85, restart_marker_rows=2)),
        ("rst-blocks-444-optimized", encode_jpeg(
            _odd_crop(coffee, 397, 589), 92, subsampling=0, optimize=True,
            restart_marker_blocks=7,
        )),
        ("rst-422-odd", encode_jpeg(
            _odd_crop(chelsea, 299, 437), 80, subsampling=1, restart_marker_rows=1,
        )),
        ("rst-grey-comment-exif", encode_jpeg(
            _odd_crop(camera, 509, 503), 75, restart_marker_blocks=13,
            comment=b"scanned 2019, archive copy", exif=_tiny_exif(),
        )),
        ("rst-trailer", encode_jpeg(rocket, 95, restart_marker_rows=3) + b"\x00TRAILER-BYTES\xff\xd9"),
        ("china-original", _sklearn_bytes("china.jpg")),
        ("flower-original", _sklearn_bytes("flower.jpg")),
    ]
    return out


def _tiny_exif():
    from PIL import Image

    ex = Image.Exif()
    ex[0x010F] = "ExampleCam"  # Make
    ex[0x0110] = "Model 1"  # Model
    return ex.tobytes()


def progressive_sample():
    """A progressive JPEG, which the repacker must reject."""
    return encode_jpeg(_skimage("coins"), 85, progressive=True)


def write_corpus(directory, include_wild=True):
    """Write the corpus as ``.jpg`` files; returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    items = standard_set() + (wild_set() if include_wild else [])
    paths = []
    for name, blob in items:
        p = directory / f"{name}.jpg"
        p.write_bytes(blob)
        paths.append(p)
    return paths
