"""Desk-scale data curation: label matching, scoring, and synthetic scenes.

Mirrors the curation pipeline of the real system at toy size: a manually
curated image-to-audio class lookup drives pair matching, text acts as the
bridge for cross-modal similarity scores, audio is padded or trimmed to a
fixed window, and a seeded generator emits synthetic scenes whose class
signature is planted inside a ground-truth box (image) and segment
(audio). Scenes stand in for encoder features, which are out of scope.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

import numpy as np

from avalign.codec import AUDIO_WINDOW_SECONDS, BoundingBox, TimeSegment
from avalign.tensor import Tensor

__all__ = [
    "LookupRow",
    "ClassLookupTable",
    "load_lookup",
    "PairingCandidate",
    "match_pairs",
    "bridged_similarity",
    "TopKResult",
    "top_k",
    "pad_or_trim_audio",
    "SceneSpec",
    "SyntheticScene",
    "generate_dataset",
    "scene_sanity",
    "save_scenes",
    "load_scenes",
]


@dataclass(frozen=True)
class LookupRow:
    image_label: str
    audio_primary: str | None
    audio_alt: str | None

    @property
    def usable(self) -> bool:
        return self.audio_primary is not None or self.audio_alt is not None

    def audio_labels(self) -> set[str]:
        return {lab for lab in (self.audio_primary, self.audio_alt) if lab}


@dataclass(frozen=True)
class ClassLookupTable:
    rows: tuple[LookupRow, ...]

    def __post_init__(self):
        seen = set()
        for row in self.rows:
            if row.image_label in seen:
                raise ValueError(f"duplicate image label {row.image_label!r}")
            seen.add(row.image_label)

    def by_image_label(self) -> dict[str, LookupRow]:
        return {r.image_label: r for r in self.rows}


def load_lookup(path: str) -> ClassLookupTable:
    """Read a 3-column CSV (image, audio, audio alternative; "--" = absent).

    Rows missing both audio columns are kept but flagged unusable so the
    caller can report coverage.
    """
    rows = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(rec)}")
            image, primary, alt = (c.strip() for c in rec)
            rows.append(
                LookupRow(
                    image_label=image,
                    audio_primary=None if primary == "--" else primary,
                    audio_alt=None if alt == "--" else alt,
                )
            )
    return ClassLookupTable(tuple(rows))


@dataclass(frozen=True)
class PairingCandidate:
    image_id: str
    audio_id: str
    matched_label: str
    score: float

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0,1], got {self.score}")


def match_pairs(
    image_meta: Iterable[tuple[str, str]],
    audio_meta: Iterable[tuple[str, str]],
    table: ClassLookupTable,
    scorer: Callable[[str, str], float] | None = None,
) -> list[PairingCandidate]:
    """Cross product of images and audios whose labels map to the same row.

    ``image_meta``/``audio_meta`` are (id, label) pairs. Unmapped labels
    simply produce no candidates. Output is sorted by (image_id, audio_id)
    so permuting the inputs cannot change the result.
    """
    lookup = table.by_image_label()
    audio_by_label: dict[str, list[str]] = {}
    for aid, label in audio_meta:
        audio_by_label.setdefault(label, []).append(aid)
    out = []
    for iid, label in image_meta:
        row = lookup.get(label)
        if row is None or not row.usable:
            continue
        for audio_label in row.audio_labels():
            for aid in audio_by_label.get(audio_label, ()):
                score = 1.0 if scorer is None else float(scorer(iid, aid))
                out.append(PairingCandidate(iid, aid, label, score))
    out.sort(key=lambda c: (c.image_id, c.audio_id))
    return out


def bridged_similarity(clip_scores, clap_scores) -> float:
    """Image-audio affinity through shared text labels.

    Both inputs are per-label similarity vectors in [0, 1] (image vs text,
    audio vs text); their normalized inner product sum(clip * clap) / N
    stays in [0, 1] and is the pairing score.
    """
    a = np.asarray(clip_scores, dtype=np.float64)
    b = np.asarray(clap_scores, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"score vectors must share 1-D shape, got {a.shape}, {b.shape}")
    for name, vec in (("clip", a), ("clap", b)):
        if vec.min() < 0 or vec.max() > 1:
            raise ValueError(f"{name} scores must lie in [0, 1]")
    return float(a @ b) / a.size


class TopKResult(NamedTuple):
    ids: list[str]
    short: bool


def top_k(scores: Iterable[tuple[str, float]], k: int = 3) -> TopKResult:
    """The k highest-scoring ids, ties broken lexicographically.

    Fewer than k items returns all of them with ``short=True``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(scores, key=lambda kv: (-kv[1], kv[0]))
    return TopKResult([kv[0] for kv in ranked[:k]], short=len(ranked) < k)


def pad_or_trim_audio(tokens: Tensor, target_tokens: int, onset: int = 0) -> Tensor:
    """Fix a token sequence to ``target_tokens`` rows.

    Takes rows [onset, min(onset + target, length)) then right-pads with
    zero rows, matching the fixed-window trim rule for long clips and the
    zero-padding rule for short ones.
    """
    if tokens.ndim != 2 or tokens.shape[0] < 1:
        raise ValueError("tokens must be a non-empty SxD tensor")
    if target_tokens < 1:
        raise ValueError("target length must be >= 1")
    s = tokens.shape[0]
    if not (0 <= onset < s):
        raise ValueError(f"onset {onset} outside sequence of length {s}")
    window = tokens.data[onset: min(onset + target_tokens, s)]
    if window.shape[0] < target_tokens:
        pad = np.zeros((target_tokens - window.shape[0], tokens.shape[1]))
        window = np.vstack([window, pad])
    return Tensor(window)


@dataclass(frozen=True)
class SceneSpec:
    """Geometry and signal parameters of the synthetic scene generator.

    Class identity is an orthonormal feature direction, separate blocks
    for image and audio so the two modalities start in different feature
    subspaces. Inside the box/segment the signature has unit amplitude;
    outside it decays so attention has a gradient to climb. Noise is
    bounded uniform, which keeps the planted argmax guarantees exact.
    """

    grid_h: int = 6
    grid_w: int = 6
    audio_tokens: int = 8
    n_classes: int = 6
    noise: float = 0.3
    outside_amplitude: float = 0.25
    spatial_decay: float = 6.0
    temporal_decay: float = 0.25
    min_box_size: float = 0.25
    max_box_size: float = 0.5
    min_segment_seconds: float = 7.5
    max_segment_seconds: float = 15.0

    @property
    def feature_dim(self) -> int:
        return 2 * self.n_classes

    def image_signature(self, class_id: int) -> np.ndarray:
        e = np.zeros(self.feature_dim)
        e[class_id] = 1.0
        return e

    def audio_signature(self, class_id: int) -> np.ndarray:
        e = np.zeros(self.feature_dim)
        e[self.n_classes + class_id] = 1.0
        return e


@dataclass(frozen=True)
class SyntheticScene:
    id: str
    image: Tensor  # grid_h x grid_w x feature_dim
    audio: Tensor  # audio_tokens x feature_dim
    gt_box: BoundingBox
    gt_segment: TimeSegment
    class_id: int
    audio_class_id: int
    is_positive: bool

    @property
    def grid_hw(self) -> tuple[int, int]:
        return self.image.shape[0], self.image.shape[1]

    def image_patches(self) -> Tensor:
        h, w, d = self.image.shape
        return self.image.reshape((h * w, d))


def _sample_box(rng: np.random.Generator, spec: SceneSpec) -> BoundingBox:
    w = rng.uniform(spec.min_box_size, spec.max_box_size)
    h = rng.uniform(spec.min_box_size, spec.max_box_size)
    x0 = rng.uniform(0.02, 0.98 - w)
    y0 = rng.uniform(0.02, 0.98 - h)
    return BoundingBox(x0, y0, x0 + w, y0 + h)


def _sample_segment(rng: np.random.Generator, spec: SceneSpec) -> TimeSegment:
    length = rng.uniform(spec.min_segment_seconds, spec.max_segment_seconds)
    start = rng.uniform(0.2, AUDIO_WINDOW_SECONDS - length - 0.2)
    return TimeSegment(start, start + length)


def _make_scene(idx: int, rng: np.random.Generator, spec: SceneSpec,
                positive: bool) -> SyntheticScene:
    class_id = int(rng.integers(spec.n_classes))
    if positive:
        audio_class = class_id
    else:
        audio_class = int((class_id + 1 + rng.integers(spec.n_classes - 1))
                          % spec.n_classes)
    box = _sample_box(rng, spec)
    segment = _sample_segment(rng, spec)

    h, w, d = spec.grid_h, spec.grid_w, spec.feature_dim
    ys = (np.arange(h) + 0.5) / h
    xs = (np.arange(w) + 0.5) / w
    dy = np.maximum(np.maximum(box.y_top - ys, ys - box.y_bottom), 0.0)
    dx = np.maximum(np.maximum(box.x_left - xs, xs - box.x_right), 0.0)
    dist = np.sqrt(dy[:, None] ** 2 + dx[None, :] ** 2)
    amp = np.where(
        dist == 0.0, 1.0, spec.outside_amplitude * np.exp(-spec.spatial_decay * dist)
    )
    image = amp[:, :, None] * spec.image_signature(class_id)[None, None, :]
    image = image + rng.uniform(-spec.noise, spec.noise, size=(h, w, d))

    token_times = (np.arange(spec.audio_tokens) + 0.5) * (
        AUDIO_WINDOW_SECONDS / spec.audio_tokens
    )
    t_dist = np.maximum(
        np.maximum(segment.t_start - token_times, token_times - segment.t_end), 0.0
    )
    t_amp = np.where(
        t_dist == 0.0, 1.0, spec.outside_amplitude * np.exp(-spec.temporal_decay * t_dist)
    )
    audio = t_amp[:, None] * spec.audio_signature(audio_class)[None, :]
    audio = audio + rng.uniform(-spec.noise, spec.noise,
                                size=(spec.audio_tokens, d))

    return SyntheticScene(
        id=f"scene{idx:05d}",
        image=Tensor(image),
        audio=Tensor(audio),
        gt_box=box,
        gt_segment=segment,
        class_id=class_id,
        audio_class_id=audio_class,
        is_positive=positive,
    )


def generate_dataset(
    seed: int,
    n: int,
    positive_fraction: float = 0.5,
    spec: SceneSpec = SceneSpec(),
) -> list[SyntheticScene]:
    """Seeded, reproducible scene list with an exact positive count.

    Positives are placed by deterministic interleaving rather than
    sampling, so ``n * positive_fraction`` (rounded down per prefix) holds
    exactly for every prefix of the dataset.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 <= positive_fraction <= 1.0):
        raise ValueError("positive_fraction must be in [0, 1]")
    rng = np.random.default_rng(seed)
    scenes = []
    placed_pos = 0
    for i in range(n):
        want = int(np.floor((i + 1) * positive_fraction + 1e-9))
        positive = want > placed_pos
        placed_pos += positive
        scenes.append(_make_scene(i, rng, spec, positive))
    return scenes


def scene_sanity(scene: SyntheticScene, spec: SceneSpec) -> bool:
    """Exhaustive-scan check of the planted-signal invariants.

    The strongest patch along the image class signature must sit inside
    the box, and the strongest audio token along the audio signature must
    sit inside the segment.
    """
    h, w = scene.grid_hw
    proj = scene.image.data @ spec.image_signature(scene.class_id)
    i, j = np.unravel_index(int(np.argmax(proj)), (h, w))
    yc, xc = (i + 0.5) / h, (j + 0.5) / w
    box = scene.gt_box
    if not (box.x_left <= xc <= box.x_right and box.y_top <= yc <= box.y_bottom):
        return False
    aproj = scene.audio.data @ spec.audio_signature(scene.audio_class_id)
    l = int(np.argmax(aproj))
    t = (l + 0.5) * AUDIO_WINDOW_SECONDS / scene.audio.shape[0]
    return scene.gt_segment.t_start <= t <= scene.gt_segment.t_end


def save_scenes(scenes: list[SyntheticScene], path: str) -> None:
    """Write scenes as JSONL, one self-describing object per line."""
    with open(path, "w") as fh:
        for s in scenes:
            rec = {
                "id": s.id,
                "class_id": s.class_id,
                "audio_class_id": s.audio_class_id,
                "is_positive": s.is_positive,
                "box": list(s.gt_box.as_tuple()),
                "segment": list(s.gt_segment.as_tuple()),
                "grid": [s.image.shape[0], s.image.shape[1]],
                "feature_dim": s.image.shape[2],
                "image": s.image.data.reshape(-1).tolist(),
                "audio": s.audio.data.reshape(-1).tolist(),
            }
            fh.write(json.dumps(rec) + "\n")


def load_scenes(path: str) -> list[SyntheticScene]:
    scenes = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            h, w = rec["grid"]
            d = rec["feature_dim"]
            n_audio = len(rec["audio"]) // d
            scenes.append(
                SyntheticScene(
                    id=rec["id"],
                    image=Tensor(np.asarray(rec["image"]).reshape(h, w, d)),
                    audio=Tensor(np.asarray(rec["audio"]).reshape(n_audio, d)),
                    gt_box=BoundingBox(*rec["box"]),
                    gt_segment=TimeSegment(*rec["segment"]),
                    class_id=rec["class_id"],
                    audio_class_id=rec["audio_class_id"],
                    is_positive=rec["is_positive"],
                )
            )
    return scenes
