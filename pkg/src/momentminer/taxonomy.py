"""Category taxonomy: non-selfie categories plus the Selfie super-category.

The taxonomy used throughout the package is a flat list of non-selfie
category labels plus one "Selfie" super-category which is the union of
four subcategories (indoor / outdoor / holding-something / face-mask).
Two built-in taxonomies are provided: the full 46-category production
taxonomy and a reduced 12-category one sized for fast synthetic runs.
"""
from __future__ import annotations

from dataclasses import dataclass

SELFIE = "Selfie"

INDOOR_SELFIE = "Indoor Ordinary Selfie"
OUTDOOR_SELFIE = "Outdoor Selfie"
HOLDING_SELFIE = "Holding Something Selfie"
FACEMASK_SELFIE = "Face Mask Selfie"

SELFIE_SUBCATEGORIES = (
    INDOOR_SELFIE,
    OUTDOOR_SELFIE,
    HOLDING_SELFIE,
    FACEMASK_SELFIE,
)

ONE_FACE = "one-face"
MULTI_FACE = "multi-face"
EXCLUDED = "excluded"

FULL_CATEGORIES = (
    "Pet",
    "Bed",
    "Big Word Ad",
    "Small Group Photo",
    "Poster",
    "Chart",
    "Pink Goods",
    "Child",
    "Flower",
    "Cosmetic",
    "Cosmetics Ad",
    "Activity",
    "Large Group Photo",
    "Building",
    "TV & Poster Screenshot",
    "Toy",
    "Snack",
    "Landscape Photo",
    "Tourist Photo",
    "Sunglass & Handbag",
    "Photoshop Photo",
    "Star",
    "Beauty Ad",
    "Cosmetic Tips",
    "Display Rack",
    "Hand & Leg",
    "Wallet & Accessory",
    "Fruit & Cake",
    "WeChat Moment",
    "Motto",
    "WeChat Expression",
    "QR-code",
    "WeChat Wallet",
    "Chat Screenshot",
    "Other Ad",
    "Comic",
    "Essay",
    "Other Goods",
    "Shoes",
    "Necklace & Bracelet",
    "Clothes",
    "Baby",
    "Full-Length Photo",
    "Special Effects Photo",
    "Very Long Picture",
    "Meal",
)

REDUCED_CATEGORIES = (
    "Child",
    "Baby",
    "Cosmetic",
    "Cosmetics Ad",
    "Building",
    "Landscape Photo",
    "Meal",
    "Snack",
    "Clothes",
    "Shoes",
    "Chat Screenshot",
    "Motto",
)


@dataclass(frozen=True)
class Taxonomy:
    """Non-selfie category labels; the Selfie super-category is implicit."""

    categories: tuple[str, ...]

    def __post_init__(self):
        if SELFIE in self.categories:
            raise ValueError("taxonomy lists non-selfie categories only")
        if len(set(self.categories)) != len(self.categories):
            raise ValueError("duplicate category labels")

    @property
    def all_labels(self) -> tuple[str, ...]:
        """Non-selfie categories followed by the Selfie super-category."""
        return self.categories + (SELFIE,)

    def index(self, category: str) -> int:
        return self.categories.index(category)


FULL_TAXONOMY = Taxonomy(FULL_CATEGORIES)
REDUCED_TAXONOMY = Taxonomy(REDUCED_CATEGORIES)
