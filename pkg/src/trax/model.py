"""Region and image values plus their text encodings.

Coordinates are real-valued pixels, origin top-left, x right, y down.
Regions and images are immutable; the text forms defined here are exactly
the strings used as wire arguments and as trajectory-file lines.

Region text:  "N"            -> special integer code
              "x,y,w,h"      -> rectangle
              "x1,y1,...,xn,yn" (2n >= 6) -> polygon
Image text:   "file:///abs/path"                -> path reference
              "data:image/<fmt>;base64,<data>"  -> in-memory payload
"""

from __future__ import annotations

import base64
import binascii
import re
from dataclasses import dataclass

from .errors import BadImageText, BadRegionText, SpecialNotConvertible

# Special trajectory codes; never legal inside a state message.
SPECIAL_UNKNOWN = 0
SPECIAL_INIT = 1
SPECIAL_FAILURE = 2

RECTANGLE = "rectangle"
POLYGON = "polygon"

PATH = "path"
MEMORY = "memory"

MEMORY_FORMATS = ("png", "jpeg", "pgm")


@dataclass(frozen=True)
class Rectangle:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"rectangle sides must be positive: {self.w}x{self.h}")


@dataclass(frozen=True)
class Polygon:
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = self.points
        if len(pts) < 3:
            raise ValueError("polygon needs at least 3 points")
        for i in range(len(pts)):
            if pts[i] == pts[(i + 1) % len(pts)]:
                raise ValueError("consecutive polygon points must differ")


@dataclass(frozen=True)
class Special:
    code: int


Region = Rectangle | Polygon | Special


@dataclass(frozen=True)
class PathImage:
    path: str

    def __post_init__(self):
        if not self.path.startswith("/"):
            raise ValueError(f"image path must be absolute: {self.path!r}")


@dataclass(frozen=True)
class MemoryImage:
    format: str
    data: bytes

    def __post_init__(self):
        if self.format not in MEMORY_FORMATS:
            raise ValueError(f"unknown image format {self.format!r}")
        if not self.data:
            raise ValueError("empty image payload")


Image = PathImage | MemoryImage


def region_kind(region: Region) -> str:
    if isinstance(region, Rectangle):
        return RECTANGLE
    if isinstance(region, Polygon):
        return POLYGON
    return "special"


def format_real(value: float) -> str:
    """Canonical coordinate rendering: up to 4 fractional digits, trailing
    zeros trimmed, integers without a point."""
    text = f"{value:.4f}".rstrip("0").rstrip(".")
    if text in ("-0", ""):
        return "0"
    return text


def parse_region(text: str) -> Region:
    tokens = text.split(",")
    if len(tokens) == 1:
        token = tokens[0].strip()
        try:
            return Special(int(token))
        except ValueError:
            raise BadRegionText(f"not a special code: {text!r}") from None
    try:
        values = [float(t) for t in tokens]
    except ValueError:
        raise BadRegionText(f"non-numeric coordinate in {text!r}") from None
    if len(values) == 4:
        if values[2] <= 0 or values[3] <= 0:
            raise BadRegionText(f"nonpositive rectangle size in {text!r}")
        return Rectangle(*values)
    if len(values) >= 6 and len(values) % 2 == 0:
        points = tuple(zip(values[0::2], values[1::2]))
        try:
            return Polygon(points)
        except ValueError as exc:
            raise BadRegionText(str(exc)) from None
    raise BadRegionText(f"bad coordinate count {len(values)} in {text!r}")


def format_region(region: Region) -> str:
    if isinstance(region, Special):
        return str(region.code)
    if isinstance(region, Rectangle):
        return ",".join(format_real(v) for v in (region.x, region.y, region.w, region.h))
    return ",".join(format_real(v) for p in region.points for v in p)


def convert_region(region: Region, target: str) -> Region:
    """Convert between rectangle and polygon representations.

    Polygon -> rectangle is the axis-aligned bounding box; rectangle ->
    polygon lists the 4 corners starting at (x, y), counter-clockwise in
    image coordinates. Same-kind conversion returns the region unchanged.
    """
    if target not in (RECTANGLE, POLYGON):
        raise ValueError(f"unknown target kind {target!r}")
    if isinstance(region, Special):
        raise SpecialNotConvertible(f"cannot convert special code {region.code}")
    if region_kind(region) == target:
        return region
    if isinstance(region, Rectangle):
        x, y, w, h = region.x, region.y, region.w, region.h
        return Polygon(((x, y), (x + w, y), (x + w, y + h), (x, y + h)))
    xs = [p[0] for p in region.points]
    ys = [p[1] for p in region.points]
    return Rectangle(min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys))


_DATA_RE = re.compile(r"data:image/([a-z]+);base64,(.*)\Z", re.DOTALL)


def parse_image(text: str) -> Image:
    if text.startswith("file://"):
        path = text[len("file://"):]
        if not path.startswith("/"):
            raise BadImageText(f"image path must be absolute: {text!r}")
        return PathImage(path)
    match = _DATA_RE.fullmatch(text)
    if match:
        fmt, payload = match.groups()
        if fmt not in MEMORY_FORMATS:
            raise BadImageText(f"unknown image format {fmt!r}")
        try:
            data = base64.b64decode(payload, validate=True)
        except binascii.Error:
            raise BadImageText("invalid base64 payload") from None
        if not data:
            raise BadImageText("empty image payload")
        return MemoryImage(fmt, data)
    raise BadImageText(f"unknown image scheme: {text[:40]!r}")


def format_image(image: Image) -> str:
    if isinstance(image, PathImage):
        return "file://" + image.path
    return f"data:image/{image.format};base64," + base64.b64encode(image.data).decode("ascii")


def image_kind(image: Image) -> str:
    return PATH if isinstance(image, PathImage) else MEMORY
