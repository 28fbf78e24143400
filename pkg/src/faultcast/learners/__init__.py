"""From-scratch learners used across the pipeline."""

from .boosting import GradientBoostedClassifier, class_weight_vector
from .ensemble import ExtraTreesRegressor, RandomForestClassifier
from .linear import LogisticRegression, RidgeRegression
from .tree import DecisionTreeClassifier, TreeNodes

__all__ = [
    "DecisionTreeClassifier",
    "ExtraTreesRegressor",
    "GradientBoostedClassifier",
    "LogisticRegression",
    "RandomForestClassifier",
    "RidgeRegression",
    "TreeNodes",
    "class_weight_vector",
]
