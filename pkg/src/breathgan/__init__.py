"""Toolkit for GAN-based augmentation of labeled breathing time series.

Trains conditional recurrent GANs on fixed-length airflow windows, generates
synthetic data to enlarge, rebalance or personalize training sets, and
quantifies both synthetic-data quality (T metric, MMD) and the downstream
classifier gains (kappa, accuracy, sensitivity, specificity).
"""

from .data import (
    APNEIC,
    NON_APNEIC,
    AhiReport,
    Recording,
    Window,
    WindowedDataset,
    class_ratio,
    compute_ahi,
    load_recording,
    preprocess,
    split_by_events,
    split_by_recordings,
    windowize,
)
from .gan import GanConfig, GanModel, generate, new_model, train
from .metrics import (
    ConfusionMatrix,
    QualityReport,
    aggregate,
    cohen_kappa,
    confusion_stats,
    evaluate_quality,
    mmd2_unbiased,
    optimize_kernel,
    t_metric,
    t_test_one_tailed,
    trts,
    tstr,
)
from .mixture import MixturePlan, effective_mixture, make_plan, sample_subset, train_mixture
from .oracle import OracleSpec, OracleRecordingSpec, generate_corpus, oracle_density_distance

__version__ = "0.1.0"
