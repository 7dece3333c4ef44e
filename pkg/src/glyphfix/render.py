"""Deterministic rasterization of description trees into grayscale images.

Each structure operator splits its bounding box per a fixed layout table;
surround operators draw the first operand over the whole box and shrink the
second into an operator-specific pocket.  Leaf stroke programs are mapped
into their box with a small inset, jittered by a whole-glyph affine, and
rasterized with anti-aliased thickness.  Given the same (tree, style) the
output is bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grammar import IDSTree, Internal, Leaf, SymbolVocabulary
from .primitives import PrimitiveSet

LEAF_INSET = 0.08
MIN_BOX_PX = 4.0
FULL = (0.0, 0.0, 1.0, 1.0)

#: (box of first operand, box of second operand), unit coordinates, y down.
LAYOUTS: dict[str, tuple[tuple, tuple]] = {
    "lr": ((0.0, 0.0, 0.48, 1.0), (0.52, 0.0, 1.0, 1.0)),
    "ab": ((0.0, 0.0, 1.0, 0.48), (0.0, 0.52, 1.0, 1.0)),
    "sur_b": (FULL, (0.27, 0.04, 0.73, 0.52)),
    "sur_t": (FULL, (0.27, 0.48, 0.73, 0.96)),
    "sur_tl": (FULL, (0.42, 0.42, 0.96, 0.96)),
    "sur_tr": (FULL, (0.04, 0.42, 0.58, 0.96)),
    "sur_bl": (FULL, (0.42, 0.04, 0.96, 0.58)),
    "sur_full": (FULL, (0.28, 0.28, 0.72, 0.72)),
    "sur_l": (FULL, (0.42, 0.27, 0.96, 0.73)),
    "ovl": (FULL, FULL),
}


class BoxTooSmallError(ValueError):
    """Raised when layout recursion leaves a region under 4 px on a side."""


@dataclass(frozen=True)
class GlyphStyle:
    """Concrete rendering knobs for one sample; fully determines the image."""

    rotation: float = 0.0
    shear: float = 0.0
    scale: float = 1.0
    thickness: float = 1.6
    noise_sigma: float = 0.0
    seed: int = 0

    @classmethod
    def neutral(cls, thickness: float = 1.6) -> "GlyphStyle":
        return cls(thickness=thickness)


def _sub_box(outer, inner):
    x0, y0, x1, y1 = outer
    a0, b0, a1, b1 = inner
    w, h = x1 - x0, y1 - y0
    return (x0 + a0 * w, y0 + b0 * h, x0 + a1 * w, y0 + b1 * h)


def _collect_segments(tree: IDSTree, box, vocab: SymbolVocabulary,
                      prims: PrimitiveSet, image_size: int, out: list) -> None:
    x0, y0, x1, y1 = box
    if (x1 - x0) * image_size < MIN_BOX_PX or (y1 - y0) * image_size < MIN_BOX_PX:
        raise BoxTooSmallError(f"layout region {box} below {MIN_BOX_PX} px")
    if isinstance(tree, Leaf):
        inset = _sub_box(box, (LEAF_INSET, LEAF_INSET, 1.0 - LEAF_INSET, 1.0 - LEAF_INSET))
        ix0, iy0, ix1, iy1 = inset
        w, h = ix1 - ix0, iy1 - iy0
        for seg in sorted(prims.program_of(tree.radical)):
            pts = np.array(seg[1:], dtype=np.float64).reshape(-1, 2)
            pts = np.column_stack([ix0 + pts[:, 0] * w, iy0 + pts[:, 1] * h])
            out.append((seg[0], pts))
        return
    name = vocab.name_of(tree.op)
    try:
        box_a, box_b = LAYOUTS[name]
    except KeyError:
        raise ValueError(f"structure symbol {name!r} has no layout") from None
    _collect_segments(tree.left, _sub_box(box, box_a), vocab, prims, image_size, out)
    _collect_segments(tree.right, _sub_box(box, box_b), vocab, prims, image_size, out)


def _affine(points: np.ndarray, style: GlyphStyle) -> np.ndarray:
    c, s = np.cos(style.rotation), np.sin(style.rotation)
    rot = np.array([[c, -s], [s, c]])
    shear = np.array([[1.0, style.shear], [0.0, 1.0]])
    mat = style.scale * rot @ shear
    return (points - 0.5) @ mat.T + 0.5


def _polyline(kind: str, pts: np.ndarray) -> np.ndarray:
    if kind == "line":
        return pts
    # quadratic bezier through (p0, control, p1)
    t = np.linspace(0.0, 1.0, 9)[:, None]
    p0, ctrl, p1 = pts[0], pts[1], pts[2]
    return ((1 - t) ** 2) * p0 + 2 * t * (1 - t) * ctrl + (t ** 2) * p1


def _draw_segment(img: np.ndarray, p0: np.ndarray, p1: np.ndarray,
                  radius: float, aa: float = 0.8) -> None:
    size = img.shape[0]
    reach = radius + aa
    xmin = max(int(np.floor(min(p0[0], p1[0]) - reach)), 0)
    xmax = min(int(np.ceil(max(p0[0], p1[0]) + reach)), size - 1)
    ymin = max(int(np.floor(min(p0[1], p1[1]) - reach)), 0)
    ymax = min(int(np.ceil(max(p0[1], p1[1]) + reach)), size - 1)
    if xmin > xmax or ymin > ymax:
        return
    xs = np.arange(xmin, xmax + 1) + 0.5
    ys = np.arange(ymin, ymax + 1) + 0.5
    px, py = np.meshgrid(xs, ys)
    d = p1 - p0
    len2 = float(d @ d)
    if len2 < 1e-12:
        dist = np.hypot(px - p0[0], py - p0[1])
    else:
        t = ((px - p0[0]) * d[0] + (py - p0[1]) * d[1]) / len2
        t = np.clip(t, 0.0, 1.0)
        dist = np.hypot(px - (p0[0] + t * d[0]), py - (p0[1] + t * d[1]))
    val = np.clip((radius + aa - dist) / aa, 0.0, 1.0)
    patch = img[ymin:ymax + 1, xmin:xmax + 1]
    np.maximum(patch, val, out=patch)


def render(tree: IDSTree, style: GlyphStyle, prims: PrimitiveSet,
           vocab: SymbolVocabulary, image_size: int = 64) -> np.ndarray:
    """Rasterize a tree into an (image_size, image_size) float image in [0, 1]."""
    segments: list = []
    _collect_segments(tree, FULL, vocab, prims, image_size, segments)
    img = np.zeros((image_size, image_size), dtype=np.float64)
    radius = style.thickness / 2.0
    for kind, pts in segments:
        pts = _affine(pts, style) * image_size
        poly = _polyline(kind, pts)
        for i in range(len(poly) - 1):
            _draw_segment(img, poly[i], poly[i + 1], radius)
    if style.noise_sigma > 0:
        rng = np.random.default_rng(style.seed)
        img = img + rng.normal(0.0, style.noise_sigma, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def write_pgm(path, img: np.ndarray) -> None:
    """8-bit binary PGM (P5)."""
    arr = np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM back into a float image in [0, 1]."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(b"P5"):
        raise ValueError(f"{path} is not a binary PGM")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            while blob[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        fields.append(blob[start:pos])
    pos += 1
    w, h, maxval = (int(f) for f in fields)
    arr = np.frombuffer(blob, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)
    return arr.astype(np.float64) / float(maxval)
