from __future__ import annotations

import enum
import re


class UnknownCategoryToken(ValueError):
    pass


class Category(str, enum.Enum):
    FAKE_NEWS = "FakeNews"
    ORGANIZATIONS = "Organizations"
    POLITICAL_AFFILIATES = "PoliticalAffiliates"
    DEFAULT_INDIVIDUALS = "DefaultIndividuals"
    UNCATEGORIZED = "Uncategorized"

    def __str__(self) -> str:
        return self.value

    @property
    def index(self) -> int:
        """Position in the fixed tie-break order; Uncategorized has none."""
        if self is Category.UNCATEGORIZED:
            raise ValueError("Uncategorized has no class index")
        return CATEGORIES.index(self)

    @classmethod
    def parse(cls, token: str) -> Category:
        """Accept 'FakeNews', 'Fake News', 'fake_news', 'FAKE-NEWS', ..."""
        key = re.sub(r"[^0-9a-z]", "", str(token).lower())
        try:
            return _BY_KEY[key]
        except KeyError:
            raise UnknownCategoryToken(f"unknown category token: {token!r}") from None


# Fixed order used for every tie-break and as the class index of the models.
CATEGORIES: tuple[Category, ...] = (
    Category.FAKE_NEWS,
    Category.ORGANIZATIONS,
    Category.POLITICAL_AFFILIATES,
    Category.DEFAULT_INDIVIDUALS,
)

_BY_KEY = {re.sub(r"[^0-9a-z]", "", c.value.lower()): c for c in Category}
_BY_KEY.update({"fn": Category.FAKE_NEWS, "org": Category.ORGANIZATIONS,
                "pa": Category.POLITICAL_AFFILIATES, "di": Category.DEFAULT_INDIVIDUALS})


def first_in_order(candidates) -> Category:
    """Earliest category of `candidates` in the fixed order."""
    return min(candidates, key=CATEGORIES.index)
