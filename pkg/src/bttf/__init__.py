"""Two-stage linear forecasting with look-ahead augmentation, parallel
self-refinement and a variance/correlation-selected top-K ensemble."""

from .augment import (AugmentedWindow, AugmentedWindows, SegmentSpec, build_augmented,
                      default_segment_width, enumerate_segments, first_stage_forecasts)
from .data import DatasetSpec, load_csv, write_csv
from .ensemble import (EnsembleStats, KGrid, decompose_error, meancorr_stat, score, select_k,
                       topk_average, variance_stat)
from .errors import (ConfigError, DataFormatError, DivergenceError, InsufficientDataError,
                     ParameterError, PipelineError, PoolError, ShapeError)
from .experiment import ExperimentConfig, emit_report, load_config, run_experiment
from .linear import (LinearForecaster, TrainConfig, TrainReport, decompose, forward, grad_mse,
                     init_model, loss_mse, train)
from .metrics import EvalResult, evaluate, gain_percent
from .refine import (RefinementPool, load_pool, pool_predict, refinement_delta, save_pool,
                     train_pool)
from .timeseries import (Scaler, SplitSpec, TimeSeries, WindowPair, Windows, fit_scaler,
                         make_windows, split_series)

__version__ = "0.1.0"
