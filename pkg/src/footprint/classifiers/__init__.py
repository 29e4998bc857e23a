from footprint.classifiers.base import Classifier, DimensionMismatch, Prediction
from footprint.classifiers.baselines import BASELINE_KINDS, UnsupportedKind, train_baseline
from footprint.classifiers.forest import (
    ForestModel,
    SingleClassTrainingSet,
    TrainConfig,
    predict,
    train_forest,
    train_tree,
    tree_rng,
)
from footprint.classifiers.tree import (
    EmptyNode,
    Leaf,
    Split,
    SplitChoice,
    Tree,
    best_split,
    gini_impurity,
    grow_tree,
)

__all__ = [
    "BASELINE_KINDS", "Classifier", "DimensionMismatch", "EmptyNode", "ForestModel", "Leaf",
    "Prediction", "SingleClassTrainingSet", "Split", "SplitChoice", "TrainConfig", "Tree",
    "UnsupportedKind", "best_split", "gini_impurity", "grow_tree", "predict", "train_baseline",
    "train_forest", "train_tree", "tree_rng",
]
