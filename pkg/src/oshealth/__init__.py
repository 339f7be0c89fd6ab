"""Per-project forecasting of monthly open-source health indicators."""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    FEATURES,
    HORIZONS,
    IndicatorId,
    MonthlyRecord,
    ProjectSeries,
    split_horizon,
    split_midway,
    to_supervised,
    validate_series,
)
from .decart import DEConfig, de_optimize, decart_tune, decode_hyperparams  # noqa: E402
from .learners import CartHyperParams, LearnerKind, LearnerSpec, cart_fit, tree_predict  # noqa: E402
from .metrics import mae, mre, sa  # noqa: E402

__all__ = [
    "FEATURES", "HORIZONS", "IndicatorId", "MonthlyRecord", "ProjectSeries",
    "split_horizon", "split_midway", "to_supervised", "validate_series",
    "DEConfig", "de_optimize", "decart_tune", "decode_hyperparams",
    "CartHyperParams", "LearnerKind", "LearnerSpec", "cart_fit", "tree_predict",
    "mae", "mre", "sa",
]
