"""Text codec for spatial and temporal grounding coordinates.

Boxes travel as ``[label,xLeft,yTop,xRight,yBottom]`` with corners
normalized to [0, 1]; time segments as ``(tStart,tEnd)`` in seconds with a
fixed 30 s audio window. Parsing is total: every input yields a value or
exactly one of three error classes (no match, malformed, out of range) so
an evaluator can count failure modes separately. Also provides instruction
template rendering and the segmentation-mask to bounding-box conversion.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "AUDIO_WINDOW_SECONDS",
    "BoundingBox",
    "TimeSegment",
    "GroundedObject",
    "InstructionTemplate",
    "CodecError",
    "NoMatchError",
    "MalformedError",
    "OutOfRangeError",
    "serialize_box",
    "parse_box",
    "normalize_box",
    "serialize_time",
    "parse_time",
    "render_instruction",
    "seg_mask_to_bbox",
    "TEMPLATES",
]

AUDIO_WINDOW_SECONDS = 30.0


class CodecError(ValueError):
    """Base class for the three parsing failure modes."""


class NoMatchError(CodecError):
    """No bracketed/parenthesized group found in the input."""


class MalformedError(CodecError):
    """A group was found but has the wrong arity or non-numeric fields."""


class OutOfRangeError(CodecError):
    """Parsed numbers violate the coordinate invariants."""


@dataclass(frozen=True)
class BoundingBox:
    x_left: float
    y_top: float
    x_right: float
    y_bottom: float

    def __post_init__(self):
        vals = (self.x_left, self.y_top, self.x_right, self.y_bottom)
        if not all(np.isfinite(v) for v in vals):
            raise OutOfRangeError("box coordinates must be finite")
        if not (0.0 <= self.x_left < self.x_right <= 1.0):
            raise OutOfRangeError(
                f"need 0 <= x_left < x_right <= 1, got ({self.x_left}, {self.x_right})"
            )
        if not (0.0 <= self.y_top < self.y_bottom <= 1.0):
            raise OutOfRangeError(
                f"need 0 <= y_top < y_bottom <= 1, got ({self.y_top}, {self.y_bottom})"
            )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_left, self.y_top, self.x_right, self.y_bottom)


@dataclass(frozen=True)
class TimeSegment:
    t_start: float
    t_end: float

    def __post_init__(self):
        if not (np.isfinite(self.t_start) and np.isfinite(self.t_end)):
            raise OutOfRangeError("segment times must be finite")
        if not (0.0 <= self.t_start < self.t_end <= AUDIO_WINDOW_SECONDS):
            raise OutOfRangeError(
                f"need 0 <= start < end <= {AUDIO_WINDOW_SECONDS}, "
                f"got ({self.t_start}, {self.t_end})"
            )

    def as_tuple(self) -> tuple[float, float]:
        return (self.t_start, self.t_end)


_LABEL_FORBIDDEN = re.compile(r"[\[\],()]")


@dataclass(frozen=True)
class GroundedObject:
    label: str
    box: BoundingBox

    def __post_init__(self):
        if not self.label:
            raise ValueError("label must be non-empty")
        if _LABEL_FORBIDDEN.search(self.label):
            raise ValueError(f"label may not contain brackets or commas: {self.label!r}")


def serialize_box(obj: GroundedObject, precision: int = 2) -> str:
    """Render as ``[label,x1,y1,x2,y2]`` with fixed-point coordinates."""
    fmt = f"{{:.{precision}f}}"
    coords = ",".join(fmt.format(v) for v in obj.box.as_tuple())
    return f"[{obj.label},{coords}]"


_BRACKET_GROUP = re.compile(r"\[([^\[\]]*)\]")


def parse_box(text: str) -> GroundedObject:
    """Extract the first bracketed 5-tuple as a labeled box.

    Responses often ramble; the first bracketed group is the deterministic
    choice of answer. Raises NoMatchError / MalformedError / OutOfRangeError.
    """
    match = _BRACKET_GROUP.search(text)
    if match is None:
        raise NoMatchError("no bracketed group in input")
    parts = [p.strip() for p in match.group(1).split(",")]
    if len(parts) != 5:
        raise MalformedError(f"expected 5 comma-separated fields, got {len(parts)}")
    label = parts[0]
    if not label:
        raise MalformedError("empty label field")
    try:
        vals = [float(p) for p in parts[1:]]
    except ValueError as exc:
        raise MalformedError(f"non-numeric coordinate: {exc}") from exc
    if not all(np.isfinite(v) for v in vals):
        raise OutOfRangeError("non-finite coordinate")
    box = BoundingBox(*vals)
    return GroundedObject(label=label, box=box)


def normalize_box(
    pixel_box: tuple[int, int, int, int], width: int, height: int
) -> BoundingBox:
    """Divide pixel corner coordinates by the image dimensions."""
    if width < 1 or height < 1:
        raise ValueError("image dimensions must be >= 1 pixel")
    x0, y0, x1, y1 = pixel_box
    if not (0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height):
        raise ValueError(
            f"pixel box {pixel_box} not inside {width}x{height} image"
        )
    return BoundingBox(x0 / width, y0 / height, x1 / width, y1 / height)


def serialize_time(seg: TimeSegment, precision: int = 1) -> str:
    """Render as ``(tStart,tEnd)`` with fixed-point seconds."""
    fmt = f"{{:.{precision}f}}"
    return f"({fmt.format(seg.t_start)},{fmt.format(seg.t_end)})"


_PAREN_GROUP = re.compile(r"\(([^()]*)\)")


def parse_time(text: str) -> TimeSegment:
    """Extract the first parenthesized pair as a time segment."""
    match = _PAREN_GROUP.search(text)
    if match is None:
        raise NoMatchError("no parenthesized group in input")
    parts = [p.strip() for p in match.group(1).split(",")]
    if len(parts) != 2:
        raise MalformedError(f"expected 2 comma-separated fields, got {len(parts)}")
    try:
        t0, t1 = (float(p) for p in parts)
    except ValueError as exc:
        raise MalformedError(f"non-numeric time: {exc}") from exc
    if not (np.isfinite(t0) and np.isfinite(t1)):
        raise OutOfRangeError("non-finite time")
    return TimeSegment(t0, t1)


PLACEHOLDERS = frozenset(
    {"<image>", "<audio>", "<obj>", "<placeholder_bbox>", "<placeholder_time>"}
)

_TOKEN = re.compile(r"<[A-Za-z_]+>")


@dataclass(frozen=True)
class InstructionTemplate:
    """Prompt text whose angle-bracket tokens come from the allowed set."""

    text: str

    def __post_init__(self):
        for tok in _TOKEN.findall(self.text):
            if tok not in PLACEHOLDERS:
                raise ValueError(f"unknown placeholder {tok!r} in template")

    def placeholders(self) -> set[str]:
        return set(_TOKEN.findall(self.text))


def render_instruction(template: InstructionTemplate, bindings: dict[str, str]) -> str:
    """Substitute every placeholder; all other text is left byte-identical."""
    needed = template.placeholders()
    unknown = set(bindings) - PLACEHOLDERS
    if unknown:
        raise ValueError(f"unknown placeholders in bindings: {sorted(unknown)}")
    missing = needed - set(bindings)
    if missing:
        raise ValueError(f"missing bindings for: {sorted(missing)}")
    out = template.text
    for tok in needed:
        out = out.replace(tok, bindings[tok])
    return out


def seg_mask_to_bbox(mask: np.ndarray) -> tuple[tuple[int, int, int, int], BoundingBox]:
    """Tight box over a binary mask's set pixels.

    Takes the top-most, left-most, bottom-most and right-most set pixels
    and closes the rectangle through them. Returns the pixel box as
    (left, top, right, bottom) with exclusive right/bottom, plus the box
    normalized by the mask's width/height so it contains its extreme
    pixels. Raises ValueError on an empty mask.
    """
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError("mask must be 2-D")
    rows = np.flatnonzero(m.any(axis=1))
    cols = np.flatnonzero(m.any(axis=0))
    if rows.size == 0:
        raise ValueError("mask has no set pixels")
    h, w = m.shape
    top, bottom = int(rows.min()), int(rows.max()) + 1
    left, right = int(cols.min()), int(cols.max()) + 1
    return (left, top, right, bottom), BoundingBox(
        left / w, top / h, right / w, bottom / h
    )


# Instruction catalog for the three fine-grained tasks plus captioning.
# Spatial grounding answers use the bracketed box format, temporal
# localization the parenthesized pair, fact checking binary True/False.
_ARIG = [
    "Given the audio and image pair, identify the object category of the audio. Now, provide a bounding box for that object in the image. The answer should be in the form [<obj>,xLeft,yTop,xRight,yBottom]. <obj> represents the object category. xLeft,yTop are coordinates of the top-left corner and xRight,yBottom are coordinates of the bottom-right corner of the bounding box. The coordinates should be within the range 0 to 1.",
    "From the given audio and image pair first identify the object category of the audio. Then localize the corresponding object in the image by providing a bounding box. The answer should be in the form [<obj>,xLeft,yTop,xRight,yBottom]. <obj> represents the object category. xLeft,yTop are coordinates of the top-left corner and xRight,yBottom are coordinates of the bottom-right corner of the bounding box. The coordinates should be within the range 0 to 1.",
    "Given the audio and image pair, identify the object category of the audio. Now, localize the object in the image by providing a bounding box. The answer should be in the form [<obj>,xLeft,yTop,xRight,yBottom]. <obj> represents the object category. xLeft,yTop are coordinates of the top-left corner and xRight,yBottom are coordinates of the bottom-right corner of the bounding box. The coordinates should be within the range 0 to 1.",
    "Considering the audio and image pair, determine the object class of the audio. Next, localize the same object in the image by providing a bounding box. The answer should be in the form [<obj>,xLeft,yTop,xRight,yBottom]. <obj> represents the class of the object. xLeft,yTop are coordinates of the top-left corner and xRight,yBottom are coordinates of the bottom-right corner of the bounding box. The coordinates should be within the range 0 to 1.",
    "Considering the audio and image pair, recognize the object category of the audio. Subsequently, draw a bounding box around that object shown in the image. The answer should be in the form [<obj>,xLeft,yTop,xRight,yBottom]. <obj> represents the category of the object. xLeft,yTop are coordinates of the top-left corner and xRight,yBottom are coordinates of the bottom-right corner of the bounding box. The coordinates should be within the range 0 to 1.",
    "Considering the audio and image pair, recognize the object category of the audio. Next, draw a bounding box around that object in the image. The answer should be in the form [<obj>,xLeft,yTop,xRight,yBottom]. <obj> represents the category of the object. xLeft,yTop are coordinates of the top-left corner and xRight,yBottom are coordinates of the bottom-right corner of the bounding box. Ensure the bounding box is within the range 0 to 1.",
]

_IGATL = [
    "Identify the object category from the image. Now, find the time duration in the audio where that object is making the sound. The output should be in the form (tStart,tEnd) where tStart and tEnd are the start and end times respectively. tStart is less than tEnd. The minimum value of tStart is 0. The maximum value of tEnd is 30.",
    "Given the image, identify the object category. Next, output the time window in the audio where that object is making the sound. The output should be in the form (tStart,tEnd) where tStart and tEnd are the start and end times respectively. tStart is less than tEnd. The minimum value of tStart is 0. The maximum value of tEnd is 30.",
    "Which object do you see in the image? Please find the time window in the audio where that object is making the sound. The output should be in the form (tStart,tEnd) where tStart and tEnd are the start and end times respectively. tStart is less than tEnd. The minimum value of tStart is 0. The maximum value of tEnd is 30.",
    "Recognise the object category from the image. Now, indicate the time duration in the audio where that object is making the sound. The output should be in the form (tStart,tEnd) where tStart and tEnd are the start and end times respectively. tStart is less than tEnd. The minimum value of tStart is 0. The maximum value of tEnd is 30.",
    "What is the category of the object that you see in the image? Now, indicate the temporal duration in the audio where that object is making the sound. The output should be in the form (tStart,tEnd) where tStart and tEnd are the start and end times respectively. tStart is less than tEnd. The minimum value of tStart is 0. The maximum value of tEnd is 30.",
]

_AVFACT = [
    "Does the object inside the bounding box <placeholder_bbox> of the image produce the same sound as in the given audio? Answer in True or False.",
    "Given the image, does the object inside the bounding box <placeholder_bbox> produce the same sound as in the given audio? Answer in True or False.",
    "The object inside the bounding box <placeholder_bbox> of the image produces the same sound as in the given audio. True or False?",
    "From the audio-image pair, verify if the object inside the bounding box <placeholder_bbox> produces the same sound as present in the given audio. Answer in True or False.",
    "The object in the given audio between time duration <placeholder_time> is present in the image. True or False?",
    "Listen to the audio in the time window <placeholder_time>. Does this object exist in the image? Answer in True or False.",
    "Listen to the audio in the time window <placeholder_time>. Verify if the same object is present in the image. True or False?",
    "The time segment <placeholder_time> contains the object as present in the image. True or False?",
    "Listen to the audio in the time window <placeholder_time>. The same object is within the bounding box <placeholder_bbox> in the image. True or False?",
    "Does the object inside the bounding box <placeholder_bbox> of the image produce the same sound as within the time duration <placeholder_time> in the given audio? Answer in True or False.",
    "The object inside the bounding box <placeholder_bbox> of the image produces the same sound as in the time segment <placeholder_time> of the audio. True or False?",
    "The time segment <placeholder_time> contains the object in the bounding box <placeholder_bbox> of the image. True or False?",
    "Here is an audio-image pair. Does the given audio correspond to the object shown in the image? Answer in True or False.",
    "Does the given audio correspond to the object shown in the image? Answer in True or False.",
    "Does the given audio associate with the object shown in the image? Answer in True or False.",
    "Here is an audio-image pair. Does the given image associate with the object sounding in the audio? Answer in True or False.",
]

_AVC = [
    "Considering the audio input, generate a caption for the image.",
]

TEMPLATES: dict[str, list[InstructionTemplate]] = {
    "arig": [InstructionTemplate(t) for t in _ARIG],
    "igatl": [InstructionTemplate(t) for t in _IGATL],
    "avfact": [InstructionTemplate(t) for t in _AVFACT],
    "avc": [InstructionTemplate(t) for t in _AVC],
}
