"""P300-based scoring of generative image models from EEG, plus GAN metrics.

The pipeline runs preprocess -> beamformer -> scoring on an
:class:`EpochSet`; :mod:`neuroscore.synth` provides ground-truth data and
:mod:`neuroscore.stats` the correlation machinery.
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    GAN_CATEGORIES,
    STANDARD,
    TARGET_CATEGORIES,
    Epoch,
    EpochSet,
    EventMarker,
    Recording,
    ScoreTable,
    extract_epochs,
    read_epochset,
    read_recording,
    write_epochset,
    write_recording,
)
from .beamformer import SpatialFilter, SourceSignal, optimal_latency_search, solve_filter  # noqa: E402
from .metrics import fid, inception_score, metric_report, mmd_squared  # noqa: E402
from .preprocess import PreprocessConfig, preprocess_epochs, preprocess_recording  # noqa: E402
from .scoring import NeuroscoreResult, aggregate_scores, compute_neuroscore  # noqa: E402
from .stats import bootstrap_correlation, correlate_tables, pearson  # noqa: E402
from .synth import GroundTruth, SynthSpec, generate  # noqa: E402
