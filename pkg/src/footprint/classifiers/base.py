from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from footprint.categories import CATEGORIES, Category


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Prediction:
    account_id: str
    category: Category
    distribution: dict[Category, float]


class Classifier:
    """Shared predict contract. Subclasses provide ``predict_proba`` and
    ``feature_names``; classes are category indices in the fixed order."""

    feature_names: list[str]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.feature_names):
            raise DimensionMismatch(f"expected {len(self.feature_names)} features, got {X.shape[1]}")
        return X

    def predict_labels(self, X: np.ndarray) -> np.ndarray:
        # argmax returns the first maximum, i.e. the earliest category on ties
        return np.argmax(self.predict_proba(X), axis=1)

    def predictions(self, account_ids: Sequence[str], X: np.ndarray) -> list[Prediction]:
        P = self.predict_proba(X)
        out = []
        for aid, row in zip(account_ids, P):
            dist = {c: float(p) for c, p in zip(CATEGORIES, row)}
            out.append(Prediction(aid, CATEGORIES[int(np.argmax(row))], dist))
        return out
