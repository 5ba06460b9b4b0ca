"""Fog-side color work: neighborhood clustering of region pixels and
translation of cluster centers into the human-readable names operators
query with.

Clustering is Lloyd iteration in RGB space with a deterministic seeded
init; clusters holding under OUTLIER_FRACTION of the region are treated as
noise (shadow lines and similar) and their pixels folded into the nearest
surviving cluster, so member counts always conserve the pixel total.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import EmptyRegion, KTooLarge, ParseError
from .regions import PixelRegion

PALETTE_HEADER = "ivise-palette v1"
PALETTE_KINDS = ("clothing24", "skin", "hair")

OUTLIER_FRACTION = 0.02     # clusters below this share of pixels are noise
CONVERGENCE_STEP = 0.5      # max per-channel centroid movement to stop
MAX_ITERATIONS = 100
HAIR_OTHER_DISTANCE = 120.0  # beyond this, a hair centroid reads as "other"


@dataclass
class ColorCluster:
    centroid: tuple[float, float, float]
    member_count: int
    section: str


@dataclass
class ColorDictionary:
    """Ordered (name, anchor RGB) palette; an anchor of None marks the
    distance-fallback entry (only the hair palette carries one)."""

    palette_kind: str
    entries: tuple[tuple[str, Optional[tuple[int, int, int]]], ...]

    def __post_init__(self):
        if self.palette_kind not in PALETTE_KINDS:
            raise ValueError(f"unknown palette kind {self.palette_kind!r}")
        names = [n for n, _ in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("palette names must be unique")
        anchored = [n for n, a in self.entries if a is not None]
        if self.palette_kind == "clothing24" and len(anchored) != 24:
            raise ValueError(f"clothing palette needs 24 anchored entries, got {len(anchored)}")
        if self.palette_kind == "skin" and set(names) != {"white", "black"}:
            raise ValueError("skin palette names must be exactly white/black")
        if self.palette_kind == "hair":
            if set(names) != {"black", "brown", "blond", "red", "other"}:
                raise ValueError("hair palette names must be black/brown/blond/red/other")
            if any(n == "other" and a is not None for n, a in self.entries):
                raise ValueError("hair 'other' is the fallback and carries no anchor")

    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.entries)


DEFAULT_CLOTHING = ColorDictionary("clothing24", (
    ("red", (255, 0, 0)),
    ("orange", (255, 128, 0)),
    ("yellow", (255, 255, 0)),
    ("green", (0, 255, 0)),
    ("cyan", (0, 255, 255)),
    ("blue", (0, 0, 255)),
    ("purple", (128, 0, 128)),
    ("pink", (255, 105, 180)),
    ("brown", (139, 69, 19)),
    ("grey", (128, 128, 128)),
    ("black", (0, 0, 0)),
    ("white", (255, 255, 255)),
    ("dark-red", (139, 0, 0)),
    ("dark-green", (0, 100, 0)),
    ("dark-blue", (0, 0, 139)),
    ("dark-grey", (64, 64, 64)),
    ("dark-brown", (80, 45, 20)),
    ("dark-purple", (75, 0, 110)),
    ("light-blue", (120, 180, 255)),
    ("light-green", (144, 238, 144)),
    ("light-grey", (192, 192, 192)),
    ("light-yellow", (255, 255, 153)),
    ("light-pink", (255, 182, 193)),
    ("light-orange", (255, 190, 120)),
))

DEFAULT_SKIN = ColorDictionary("skin", (
    ("white", (235, 210, 190)),
    ("black", (90, 60, 45)),
))

DEFAULT_HAIR = ColorDictionary("hair", (
    ("black", (30, 25, 25)),
    ("brown", (105, 70, 45)),
    ("blond", (220, 190, 130)),
    ("red", (150, 60, 50)),
    ("other", None),
))


@dataclass
class PaletteSet:
    clothing: ColorDictionary
    skin: ColorDictionary
    hair: ColorDictionary

    def for_section(self, section: str) -> ColorDictionary:
        if section == "face":
            return self.skin
        if section == "hair":
            return self.hair
        return self.clothing


DEFAULT_PALETTES = PaletteSet(DEFAULT_CLOTHING, DEFAULT_SKIN, DEFAULT_HAIR)


def load_palette(path: str) -> ColorDictionary:
    """Read `name r g b` lines under an `ivise-palette v1 <kind>` header.

    The hair file lists the four anchored names; the fallback entry is
    implicit and appended here.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [(i + 1, ln.strip()) for i, ln in enumerate(fh.read().splitlines())
                 if ln.strip() and not ln.strip().startswith("#")]
    if not lines:
        raise ParseError("palette file is empty")
    first_no, header = lines[0]
    parts = header.split()
    if len(parts) != 3 or " ".join(parts[:2]) != PALETTE_HEADER:
        raise ParseError(f"bad palette header {header!r}", line=first_no)
    kind = parts[2]
    if kind not in PALETTE_KINDS:
        raise ParseError(f"unknown palette kind {kind!r}", line=first_no)
    entries = []
    for lineno, line in lines[1:]:
        tokens = line.split()
        if len(tokens) != 4:
            raise ParseError("palette line needs `name r g b`", line=lineno)
        name = tokens[0].lower()
        try:
            rgb = tuple(int(t) for t in tokens[1:])
        except ValueError as exc:
            raise ParseError(f"bad channel value: {exc}", line=lineno) from exc
        if any(not 0 <= c <= 255 for c in rgb):
            raise ParseError("channels must be 0..255", line=lineno)
        entries.append((name, rgb))
    if kind == "hair":
        entries.append(("other", None))
    return ColorDictionary(kind, tuple(entries))


def cluster_pixels(region: PixelRegion, k: int, seed: int) -> list[ColorCluster]:
    """Cluster region pixels into at most k RGB neighborhoods.

    Deterministic: the seed picks the first center, the rest follow by
    farthest-point spread; Lloyd assign/update runs until centroids move
    under CONVERGENCE_STEP per channel or MAX_ITERATIONS. Undersized
    clusters are dropped and their pixels reassigned, then centers get one
    final exact mean update. Result is sorted by descending member count.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if region.pixel_count == 0:
        raise EmptyRegion(f"{region.section} region has no pixels")
    if k > region.pixel_count:
        raise KTooLarge(f"k={k} exceeds {region.pixel_count} pixels")

    pixels = region.pixels.astype(np.float64)
    n = pixels.shape[0]
    rng = np.random.default_rng(seed)

    centers = np.empty((k, 3), dtype=np.float64)
    centers[0] = pixels[int(rng.integers(n))]
    if k > 1:
        dist2 = np.sum((pixels - centers[0]) ** 2, axis=1)
        for j in range(1, k):
            centers[j] = pixels[int(np.argmax(dist2))]
            dist2 = np.minimum(dist2, np.sum((pixels - centers[j]) ** 2, axis=1))

    for _ in range(MAX_ITERATIONS):
        _, sums, counts = kernels.kmeans_assign(pixels, centers)
        new_centers = centers.copy()
        nonzero = counts > 0
        new_centers[nonzero] = sums[nonzero] / counts[nonzero, None]
        movement = float(np.max(np.abs(new_centers - centers))) if k else 0.0
        centers = new_centers
        if movement < CONVERGENCE_STEP:
            break

    # exact fixed point: final assignment, then centers become exact means
    labels, sums, counts = kernels.kmeans_assign(pixels, centers)

    min_members = OUTLIER_FRACTION * n
    survivors = np.nonzero(counts >= min_members)[0]
    if survivors.size == 0:
        survivors = np.array([int(np.argmax(counts))])
    if survivors.size < k:
        surv_centers = np.array([
            sums[j] / counts[j] if counts[j] else centers[j] for j in survivors])
        dropped = ~np.isin(labels, survivors)
        if np.any(dropped):
            relabel, extra_sums, extra_counts = kernels.kmeans_assign(
                pixels[dropped], surv_centers)
            sums = sums[survivors] + extra_sums
            counts = counts[survivors] + extra_counts
        else:
            sums = sums[survivors]
            counts = counts[survivors]
    else:
        sums = sums[survivors]
        counts = counts[survivors]

    clusters = [
        ColorCluster(tuple(float(v) for v in sums[i] / counts[i]),
                     int(counts[i]), region.section)
        for i in range(len(survivors)) if counts[i] > 0
    ]
    clusters.sort(key=lambda c: (-c.member_count, c.centroid))
    return clusters


def name_color(centroid: Sequence[float], dictionary: ColorDictionary) -> str:
    """Nearest anchor by Euclidean RGB distance; dictionary order breaks
    ties; past the fallback distance the hair palette answers "other"."""
    best_name = None
    best_d2 = None
    fallback = None
    for name, anchor in dictionary.entries:
        if anchor is None:
            fallback = name
            continue
        d2 = ((centroid[0] - anchor[0]) ** 2
              + (centroid[1] - anchor[1]) ** 2
              + (centroid[2] - anchor[2]) ** 2)
        if best_d2 is None or d2 < best_d2:
            best_d2 = d2
            best_name = name
    if fallback is not None and best_d2 is not None and best_d2 > HAIR_OTHER_DISTANCE ** 2:
        return fallback
    if best_name is None:
        raise ValueError("palette has no anchored entries")
    return best_name


def describe_region(region: PixelRegion, k: int, palettes: PaletteSet,
                    seed: int) -> list[tuple[str, int]]:
    """Cluster a region and map its centers through the section's palette.

    Face and hair always cluster with a single neighborhood; duplicate
    names merge by summing member counts.
    """
    if region.section in ("face", "hair"):
        k = 1
    dictionary = palettes.for_section(region.section)
    merged: dict[str, int] = {}
    for cluster in cluster_pixels(region, k, seed):
        name = name_color(cluster.centroid, dictionary)
        merged[name] = merged.get(name, 0) + cluster.member_count
    return sorted(merged.items(), key=lambda kv: (-kv[1], kv[0]))
