"""Step-aware active learning for multi-step video step recognition."""

from .exceptions import StepALError
from .harness import CycleReport, ExperimentConfig, compare_strategies, run_experiment
from .learner import LinearModel, SoftmaxRegression, TrainConfig, infer, train
from .metrics import MetricReport, evaluate
from .pool import ClipRecord, DatasetPool, PoolState, VideoRecord
from .step_repr import StepAwareEncoder, StepAwareRepr, build_repr
from .strategies import SelectionRequest, SelectionResult, get_strategy, strategy_names
from .synthgen import GenConfig, benchmark_suite, generate
from .wkmeans import WeightedKMeans, nearest_to_centers, weighted_kmeans

__version__ = "0.1.0"
