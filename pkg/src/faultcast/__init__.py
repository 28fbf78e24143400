"""faultcast: sensor-failure classification pipeline.

Columnar tables with missingness masks, banded model-based imputation,
feature engineering and recursive feature selection, from-scratch learners,
a two-stage stacked ensemble, imbalance-aware metrics, and a synthetic data
generator, all tied together by the ``faultcast`` CLI.
"""

__version__ = "0.1.0"
