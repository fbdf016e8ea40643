"""Core domain types for cross-view tracking evaluation.

Boxes are axis-aligned, anchored at the top-left corner, in continuous pixel
units (no rasterization). Frames are 1-based. Identities are integer labels
shared across views: the same physical object carries the same identity in
every view of a scene.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Iterator, Mapping, Optional


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left corner plus positive width/height."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"bbox {name} must be finite, got {value!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"bbox sides must be positive, got w={self.w}, h={self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        # Derived from the corner coordinates so that the identical-box case
        # reproduces the intersection arithmetic exactly (IoU == 1.0).
        return (self.x2 - self.x) * (self.y2 - self.y)


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union of two boxes on the closed real plane.

    Symmetric, bounded in [0, 1]; 0 for disjoint boxes and exactly 1 for
    identical boxes.
    """
    ix = min(a.x2, b.x2) - max(a.x, b.x)
    iy = min(a.y2, b.y2) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class Detection:
    """One observation of an object: a box in one view at one frame."""

    view_id: int
    frame: int
    identity: int
    bbox: BBox


@dataclass(frozen=True)
class Track:
    """All detections of one identity, ordered by (frame, view)."""

    identity: int
    detections: tuple[Detection, ...]

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.detections, key=lambda d: (d.frame, d.view_id)))
        object.__setattr__(self, "detections", ordered)

    def frames(self) -> tuple[int, ...]:
        return tuple(sorted({d.frame for d in self.detections}))

    def views(self) -> tuple[int, ...]:
        return tuple(sorted({d.view_id for d in self.detections}))


@dataclass(frozen=True)
class Scene:
    """Synchronized multi-view ground truth with globally consistent identities."""

    name: str
    num_views: int
    frames_per_view: int
    image_size: tuple[int, int]
    gt_tracks: tuple[Track, ...]

    def identities(self) -> frozenset[int]:
        return frozenset(t.identity for t in self.gt_tracks)

    def all_detections(self) -> Iterator[Detection]:
        for track in self.gt_tracks:
            yield from track.detections

    def detection_count(self) -> int:
        return sum(len(t.detections) for t in self.gt_tracks)


@dataclass(frozen=True)
class Violation:
    """A single validation finding; violations are data, not faults."""

    kind: str
    message: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __iter__(self) -> Iterator[Violation]:
        return iter(self.violations)

    def __len__(self) -> int:
        return len(self.violations)


def validate_scene(scene: Scene) -> ValidationReport:
    """Check every structural invariant of a scene.

    An empty report means all downstream operations on the scene are total.
    Each violation names the offending track or detection.
    """
    found: list[Violation] = []
    if scene.num_views < 2:
        found.append(Violation("scene", f"num_views must be >= 2, got {scene.num_views}"))
    if scene.frames_per_view < 1:
        found.append(
            Violation("scene", f"frames_per_view must be >= 1, got {scene.frames_per_view}")
        )
    seen_identities: set[int] = set()
    seen_slots: set[tuple[int, int, int]] = set()
    for track in scene.gt_tracks:
        if track.identity in seen_identities:
            found.append(
                Violation("duplicate-track", f"identity {track.identity} appears in two tracks")
            )
        seen_identities.add(track.identity)
        for det in track.detections:
            where = f"(view={det.view_id}, frame={det.frame}, identity={det.identity})"
            if det.identity != track.identity:
                found.append(
                    Violation(
                        "track-identity",
                        f"detection {where} stored under track identity {track.identity}",
                    )
                )
            if not 0 <= det.view_id < scene.num_views:
                found.append(Violation("range", f"detection {where} has out-of-range view"))
            if not 1 <= det.frame <= scene.frames_per_view:
                found.append(Violation("range", f"detection {where} has out-of-range frame"))
            slot = (det.view_id, det.frame, det.identity)
            if slot in seen_slots:
                found.append(Violation("duplicate", f"duplicate detection at {where}"))
            seen_slots.add(slot)
    return ValidationReport(tuple(found))


# Attribute vocabulary: 8 categories, 74 words in total counting the "null"
# entry once per category.

ATTRIBUTE_CATEGORIES: tuple[str, ...] = (
    "headwear_color",
    "headwear_style",
    "coat",
    "trousers",
    "shoes",
    "held_item_color",
    "held_item_style",
    "transportation",
)

_COLORS = ("white", "black", "gray", "green", "pink", "red", "yellow", "blue", "orange", "purple")


@dataclass(frozen=True)
class AttributeVocabulary:
    """Per-category word lists for attribute validation."""

    words: Mapping[str, tuple[str, ...]]

    def categories(self) -> tuple[str, ...]:
        return tuple(self.words)

    def words_for(self, category: str) -> tuple[str, ...]:
        return self.words[category]

    def total_words(self) -> int:
        return sum(len(v) for v in self.words.values())


DEFAULT_VOCABULARY = AttributeVocabulary(
    words={
        "headwear_color": _COLORS + ("null",),
        "headwear_style": ("with cap", "with helmet", "null"),
        "coat": tuple(f"{c} coat" for c in _COLORS) + ("null",),
        "trousers": tuple(f"{c} trousers" for c in _COLORS) + ("null",),
        "shoes": tuple(f"{c} shoes" for c in _COLORS) + ("null",),
        "held_item_color": _COLORS + ("null",),
        "held_item_style": (
            "a bag",
            "a plastic bag",
            "a handbag",
            "a schoolbag",
            "a cart",
            "a box",
            "a child",
            "a stick",
            "a book",
            "a mobile phone",
            "a can",
            "null",
        ),
        "transportation": ("a bicycle", "an electric bike", "a tricycle", "null"),
    }
)


@dataclass(frozen=True)
class AttributeSet:
    """One optional word per attribute category; None means absent."""

    headwear_color: Optional[str] = None
    headwear_style: Optional[str] = None
    coat: Optional[str] = None
    trousers: Optional[str] = None
    shoes: Optional[str] = None
    held_item_color: Optional[str] = None
    held_item_style: Optional[str] = None
    transportation: Optional[str] = None

    def items(self) -> Iterator[tuple[str, Optional[str]]]:
        for f in fields(self):
            yield f.name, getattr(self, f.name)


def validate_attributes(
    attrs: AttributeSet, vocab: AttributeVocabulary = DEFAULT_VOCABULARY
) -> ValidationReport:
    """Check each attribute value against its category's word list."""
    found: list[Violation] = []
    for category, value in attrs.items():
        if value is None:
            continue
        if category not in vocab.words:
            found.append(Violation("unknown-category", f"no vocabulary for category {category!r}"))
            continue
        if value not in vocab.words_for(category):
            found.append(
                Violation("vocabulary", f"{value!r} is not a listed {category} word")
            )
    return ValidationReport(tuple(found))


@dataclass(frozen=True)
class LanguageDescription:
    """A referring query: text, attribute decomposition, and referred identities.

    The referred set may be empty (a query matching nobody), a single identity,
    or many identities.
    """

    id: str
    text: str
    attributes: AttributeSet
    referred_identities: frozenset[int]


def validate_description(
    desc: LanguageDescription,
    scene: Optional[Scene] = None,
    vocab: AttributeVocabulary = DEFAULT_VOCABULARY,
) -> ValidationReport:
    """Validate a description's attributes and (optionally) its referred set."""
    found = list(validate_attributes(desc.attributes, vocab).violations)
    if scene is not None:
        known = scene.identities()
        for identity in sorted(desc.referred_identities):
            if identity not in known:
                found.append(
                    Violation(
                        "referred-identity",
                        f"description {desc.id!r} refers to unknown identity {identity}",
                    )
                )
    return ValidationReport(tuple(found))
