"""Social-footprint classification of influence-operation accounts."""

from footprint.categories import CATEGORIES, Category

__version__ = "0.1.0"

__all__ = ["CATEGORIES", "Category", "__version__"]
