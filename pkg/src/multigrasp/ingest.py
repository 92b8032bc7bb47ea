"""Cornell-style dataset ingestion.

On-disk formats:

* ``<id>r.ppm``   binary P6 colour image, maxval 255
* ``<id>d.pgm``   binary P5 depth, maxval 255 or 65535 (big-endian); 0 = no data
* ``<id>.pcd``    ASCII PCD v0.7 with ``z`` and ``index`` fields (alternative depth)
* ``<id>cpos.txt`` / ``<id>cneg.txt``  rectangles, 4 lines of ``x y`` per rectangle

Parsers never raise anything but :class:`~multigrasp.errors.DataError`
subclasses on bad input.
"""
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (BadHeader, BadMagic, BadMaxval, DataError, DimensionMismatch,
                     IndexOutOfRange, MalformedLine, MissingField, NonRectangular,
                     ShortPayload, TruncatedGroup, UnsupportedEncoding)
from .geometry import GraspRect, polygon_to_rect, rect_to_polygon

log = logging.getLogger(__name__)

ANNOTATION_RTOL = 0.05


@dataclass
class RgbImage:
    data: np.ndarray  # (H, W, 3) uint8

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[2] != 3 or self.data.shape[0] == 0 or self.data.shape[1] == 0:
            raise DimensionMismatch(f"expected a non-empty (H, W, 3) array, got {self.data.shape}")

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]


@dataclass
class DepthImage:
    depth: np.ndarray  # (H, W) float64
    valid: np.ndarray  # (H, W) bool

    def __post_init__(self):
        self.depth = np.where(self.valid, self.depth, 0.0)

    @property
    def width(self):
        return self.depth.shape[1]

    @property
    def height(self):
        return self.depth.shape[0]


class RgdImage(RgbImage):
    """Three byte channels: red, green, normalized depth."""


@dataclass
class DatasetSample:
    rgd: RgdImage
    positives: list
    negatives: list = field(default_factory=list)
    source_id: str = ""
    blue: np.ndarray = None  # original blue channel, kept for RGB-mode input
    report: dict = field(default_factory=dict)

    @property
    def width(self):
        return self.rgd.width

    @property
    def height(self):
        return self.rgd.height

    def input_image(self, mode="RGD"):
        """(H, W, 3) uint8 array for the network in ``mode`` RGD or RGB."""
        if mode.upper() == "RGB":
            if self.blue is None:
                raise DataError("sample has no blue channel for RGB input", self.source_id)
            img = self.rgd.data.copy()
            img[..., 2] = self.blue
            return img
        return self.rgd.data


# --- rectangle files --------------------------------------------------------

def _text(data):
    if isinstance(data, str):
        return data
    try:
        return bytes(data).decode("ascii")
    except UnicodeDecodeError as exc:
        raise MalformedLine(f"non-ASCII byte at offset {exc.start}") from None


def parse_rect_file(data, source=None):
    """Parse rectangle annotations.

    Returns ``(polygons, skipped)``: a list of (4, 2) vertex arrays and the
    number of 4-line groups dropped for holding a non-finite coordinate.
    """
    lines = [ln.strip() for ln in _text(data).splitlines()]
    lines = [ln for ln in lines if ln]
    pts = []
    for i, ln in enumerate(lines, 1):
        tok = ln.split()
        if len(tok) != 2:
            raise MalformedLine(f"line {i}: expected 2 values, got {len(tok)}", source)
        try:
            pts.append((float(tok[0]), float(tok[1])))
        except ValueError:
            raise MalformedLine(f"line {i}: non-numeric token in {ln!r}", source) from None
    if len(pts) % 4:
        raise TruncatedGroup(f"{len(pts)} vertex lines is not a multiple of 4", source)
    polys, skipped = [], 0
    for g in range(0, len(pts), 4):
        poly = np.array(pts[g:g + 4])
        if np.all(np.isfinite(poly)):
            polys.append(poly)
        else:
            skipped += 1
    return polys, skipped


def format_rect_file(rects):
    """Serialize rects (GraspRect or (4, 2) arrays) in annotation format."""
    out = []
    for r in rects:
        poly = rect_to_polygon(r) if isinstance(r, GraspRect) else np.asarray(r)
        for x, y in poly:
            out.append(f"{float(x)!r} {float(y)!r}\n")
    return "".join(out)


# --- PCD --------------------------------------------------------------------

def parse_pcd(data, width, height, source=None):
    """Place ASCII PCD points into a ``width`` x ``height`` depth image by their ``index`` field."""
    text = _text(data)
    lines = text.splitlines()
    header = {}
    body_start = None
    for i, ln in enumerate(lines):
        s = ln.strip()
        if not s or s.startswith("#"):
            continue
        key, _, rest = s.partition(" ")
        header[key.upper()] = rest.split()
        if key.upper() == "DATA":
            body_start = i + 1
            break
    if body_start is None:
        raise BadHeader("no DATA line", source)
    enc = header["DATA"][0].lower() if header["DATA"] else ""
    if enc != "ascii":
        raise UnsupportedEncoding(f"DATA {enc or '<missing>'} not supported (ascii only)", source)
    fields = header.get("FIELDS")
    if not fields:
        raise MissingField("no FIELDS line", source)
    try:
        counts = [int(c) for c in header.get("COUNT", ["1"] * len(fields))]
    except ValueError:
        raise BadHeader("non-integer COUNT", source) from None
    if len(counts) != len(fields) or any(c < 1 for c in counts):
        raise BadHeader("COUNT does not match FIELDS", source)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(int)
    cols = {f: int(offsets[k]) for k, f in enumerate(fields)}
    for need in ("z", "index"):
        if need not in cols:
            raise MissingField(f"FIELDS lacks {need!r}", source)
    ncol = int(offsets[-1])
    npoints = None
    if "POINTS" in header:
        try:
            npoints = int(header["POINTS"][0])
        except (ValueError, IndexError):
            raise BadHeader("bad POINTS value", source) from None
    depth = np.zeros((height, width))
    valid = np.zeros((height, width), dtype=bool)
    zc, ic = cols["z"], cols["index"]
    n = 0
    for k, ln in enumerate(lines[body_start:], body_start + 1):
        tok = ln.split()
        if not tok:
            continue
        if len(tok) != ncol:
            raise MalformedLine(f"line {k}: expected {ncol} values, got {len(tok)}", source)
        try:
            z = float(tok[zc])
            idx = float(tok[ic])
        except ValueError:
            raise MalformedLine(f"line {k}: non-numeric value", source) from None
        if not math.isfinite(idx) or idx != int(idx) or not 0 <= idx < width * height:
            raise IndexOutOfRange(f"line {k}: index {tok[ic]} outside {width}x{height}", source)
        n += 1
        if math.isfinite(z):
            r, c = divmod(int(idx), width)
            depth[r, c] = z
            valid[r, c] = True
    if npoints is not None and n != npoints:
        raise ShortPayload(f"POINTS says {npoints}, found {n}", source)
    return DepthImage(depth, valid)


def format_pcd(depth):
    """ASCII PCD text for the valid pixels of a DepthImage."""
    rows, cols = np.nonzero(depth.valid)
    n = len(rows)
    head = ("# .PCD v0.7 - Point Cloud Data file format\n"
            "VERSION 0.7\nFIELDS x y z rgb index\nSIZE 4 4 4 4 4\nTYPE F F F F U\nCOUNT 1 1 1 1 1\n"
            f"WIDTH {n}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {n}\nDATA ascii\n")
    body = []
    for r, c in zip(rows, cols):
        z = float(depth.depth[r, c])
        body.append(f"{float(c)!r} {float(r)!r} {z!r} 0 {int(r * depth.width + c)}\n")
    return head + "".join(body)


# --- netpbm -----------------------------------------------------------------

_WS = b" \t\r\n\x0b\x0c"


def _netpbm_header(buf, source):
    fields = []
    i = 2
    n = len(buf)
    while len(fields) < 3:
        while i < n and (buf[i] in _WS or buf[i] == ord("#")):
            if buf[i] == ord("#"):
                while i < n and buf[i] not in b"\r\n":
                    i += 1
            else:
                i += 1
        j = i
        while j < n and buf[j] not in _WS and buf[j] != ord("#"):
            j += 1
        if j == i:
            raise BadHeader("truncated header", source)
        tok = buf[i:j]
        if not tok.isdigit():
            raise BadHeader(f"non-numeric header token {tok[:16]!r}", source)
        fields.append(int(tok))
        i = j
    if i >= n or buf[i] not in _WS:
        raise BadHeader("missing whitespace after maxval", source)
    return fields, i + 1


def parse_netpbm(data, source=None):
    """Decode binary P6 (to RgbImage) or P5 (to DepthImage, 0 = invalid)."""
    buf = bytes(data)
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise BadMagic(f"unsupported magic {magic!r} (binary P5/P6 only)", source)
    if len(buf) < 3 or buf[2] not in _WS:
        raise BadMagic("magic not followed by whitespace", source)
    (w, h, maxval), off = _netpbm_header(buf, source)
    if w <= 0 or h <= 0:
        raise BadHeader(f"bad dimensions {w}x{h}", source)
    if magic == b"P6":
        if maxval != 255:
            raise BadMaxval(f"P6 maxval {maxval} unsupported (255 only)", source)
        need = w * h * 3
        if len(buf) - off < need:
            raise ShortPayload(f"need {need} bytes, have {len(buf) - off}", source)
        arr = np.frombuffer(buf, dtype=np.uint8, count=need, offset=off).reshape(h, w, 3)
        return RgbImage(arr.copy())
    if maxval not in (255, 65535):
        raise BadMaxval(f"P5 maxval {maxval} unsupported (255 or 65535)", source)
    dt = np.dtype(np.uint8) if maxval == 255 else np.dtype(">u2")
    need = w * h * dt.itemsize
    if len(buf) - off < need:
        raise ShortPayload(f"need {need} bytes, have {len(buf) - off}", source)
    arr = np.frombuffer(buf, dtype=dt, count=w * h, offset=off).reshape(h, w)
    depth = arr.astype(np.float64)
    return DepthImage(depth, arr != 0)


def format_ppm(img):
    arr = np.ascontiguousarray(img.data if isinstance(img, RgbImage) else img, dtype=np.uint8)
    h, w = arr.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + arr.tobytes()


def format_pgm(values, maxval=255):
    arr = np.asarray(values)
    h, w = arr.shape
    if maxval == 255:
        payload = np.ascontiguousarray(arr, dtype=np.uint8).tobytes()
    elif maxval == 65535:
        payload = np.ascontiguousarray(arr, dtype=">u2").tobytes()
    else:
        raise BadMaxval(f"maxval {maxval} unsupported")
    return f"P5\n{w} {h}\n{maxval}\n".encode("ascii") + payload


# --- composition ------------------------------------------------------------

DEGENERATE_DEPTH_VALUE = 128


def compose_rgd(rgb, depth):
    """Replace blue with per-image min-max normalized depth; no-data pixels become 0."""
    if (rgb.width, rgb.height) != (depth.width, depth.height):
        raise DimensionMismatch(f"colour {rgb.width}x{rgb.height} vs depth {depth.width}x{depth.height}")
    out = rgb.data.copy()
    d = np.zeros(depth.depth.shape, dtype=np.uint8)
    valid = depth.valid
    if valid.any():
        z = depth.depth[valid]
        lo, hi = z.min(), z.max()
        if hi > lo:
            d[valid] = np.floor(255.0 * (z - lo) / (hi - lo) + 0.5).astype(np.uint8)
        else:
            log.debug("degenerate depth range, mapping valid pixels to %d", DEGENERATE_DEPTH_VALUE)
            d[valid] = DEGENERATE_DEPTH_VALUE
    out[..., 2] = d
    return RgdImage(out)


# --- samples ----------------------------------------------------------------

def read_file(path):
    """Bytes of ``path``; unreadable files raise DataError."""
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read: {exc.strerror}", str(path)) from None


def rects_in_bounds(rects, width, height):
    """Split ``rects`` into (inside, dropped_count); a rect is inside when all corners are."""
    keep = []
    for r in rects:
        p = rect_to_polygon(r)
        if p[:, 0].min() >= 0 and p[:, 1].min() >= 0 and p[:, 0].max() <= width and p[:, 1].max() <= height:
            keep.append(r)
    return keep, len(rects) - len(keep)


def _load_rects(path, width, height, rtol):
    polys, nan_skipped = parse_rect_file(read_file(path), source=str(path))
    rects, nonrect = [], 0
    for p in polys:
        try:
            rects.append(polygon_to_rect(p, rtol=rtol))
        except NonRectangular:
            nonrect += 1
    rects, oob = rects_in_bounds(rects, width, height)
    return rects, {"nan_skipped": nan_skipped, "nonrect_skipped": nonrect, "out_of_bounds": oob}


def load_depth(path, width, height):
    raw = read_file(path)
    if raw[:2] in (b"P5", b"P6"):
        dimg = parse_netpbm(raw, source=str(path))
        if isinstance(dimg, RgbImage):
            raise DataError("depth image must be P5", str(path))
        return dimg
    return parse_pcd(raw, width, height, source=str(path))


def load_sample(image_path, depth_path, pos_path, neg_path=None, source_id=None,
                rtol=ANNOTATION_RTOL):
    image_path = Path(image_path)
    rgb = parse_netpbm(read_file(image_path), source=str(image_path))
    if not isinstance(rgb, RgbImage):
        raise DataError("colour image must be P6", str(image_path))
    depth = load_depth(depth_path, rgb.width, rgb.height)
    try:
        rgd = compose_rgd(rgb, depth)
    except DimensionMismatch as exc:
        raise DimensionMismatch(str(exc), str(depth_path)) from None
    pos, pos_rep = _load_rects(pos_path, rgb.width, rgb.height, rtol)
    report = {"positives": pos_rep}
    neg = []
    if neg_path is not None and Path(neg_path).exists():
        neg, report["negatives"] = _load_rects(neg_path, rgb.width, rgb.height, rtol)
    if not pos:
        log.warning("%s: no usable positive rectangles", pos_path)
    sid = source_id if source_id is not None else image_path.name[:-len("r.ppm")] if image_path.name.endswith("r.ppm") else image_path.stem
    return DatasetSample(rgd, pos, neg, sid, blue=rgb.data[..., 2].copy(), report=report)


_IMG_RE = re.compile(r"^(?P<id>.+)r\.ppm$")


def discover(root):
    """Map sample id -> dict of paths for every ``<id>r.ppm`` under ``root``."""
    root = Path(root)
    found = {}
    for img in sorted(root.glob("*r.ppm")):
        sid = _IMG_RE.match(img.name).group("id")
        depth = next((p for p in (root / f"{sid}d.pgm", root / f"{sid}.pcd") if p.exists()), None)
        found[sid] = {
            "image": img,
            "depth": depth,
            "pos": root / f"{sid}cpos.txt",
            "neg": root / f"{sid}cneg.txt",
        }
    return found


def load_dataset(root, ids=None):
    entries = discover(root)
    if ids is not None:
        entries = {k: entries[k] for k in ids if k in entries}
    samples = []
    for sid, e in entries.items():
        if e["depth"] is None:
            raise DataError("no depth file (<id>d.pgm or <id>.pcd)", str(e["image"]))
        samples.append(load_sample(e["image"], e["depth"], e["pos"], e["neg"], source_id=sid))
    return samples


def load_object_map(root):
    """Sample id -> object id from ``objects.json`` if present, else identity."""
    path = Path(root) / "objects.json"
    if not path.exists():
        return {}
    try:
        return {str(k): str(v) for k, v in json.loads(path.read_text()).items()}
    except (ValueError, AttributeError) as exc:
        raise DataError(f"bad object map: {exc}", str(path)) from None


def write_sample(sample, root, sid=None):
    """Write ``sample`` in the on-disk layout; returns the id used."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    sid = sid or sample.source_id
    img = sample.rgd.data.copy()
    if sample.blue is not None:
        img[..., 2] = sample.blue
    (root / f"{sid}r.ppm").write_bytes(format_ppm(img))
    (root / f"{sid}d.pgm").write_bytes(format_pgm(sample.rgd.data[..., 2]))
    (root / f"{sid}cpos.txt").write_text(format_rect_file(sample.positives))
    if sample.negatives:
        (root / f"{sid}cneg.txt").write_text(format_rect_file(sample.negatives))
    return sid
