"""fedsim: a deterministic federated-learning simulator.

Simulates communication rounds across K devices over a real or synthetic
dataset. A configurable fraction of the training data stays on the server in
a dispensing queue; each round, devices can receive fresh samples, train
locally, and report their class-distribution entropy. Aggregation is either
the classic count-weighted mean or entropy-ranked selection with
entropy-weighted averaging. An analysis layer measures weight divergence,
per-device bias, reliability, and a strongly-convex convergence bound.
"""

from . import errors
from .analysis import (
    BoundInputs,
    BoundResult,
    DivergenceRecord,
    ReliabilityRecord,
    bias_term,
    convergence_bound,
    estimate_heterogeneity_gap,
    reliability_index,
    system_reliability_index,
    weight_divergence,
)
from .data import (
    DatasetMeta,
    LabeledSet,
    class_histogram,
    concat_sets,
    load_cifar,
    load_csv,
    load_mnist,
    make_synthetic,
    save_csv,
)
from .federation import (
    AggregationPolicy,
    DeviceRoundStats,
    EntropyReport,
    FederationState,
    RoundConfig,
    RoundReport,
    aggregate_ddfl,
    aggregate_fedavg,
    normalized_entropy,
    run_round,
    select_devices,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    MetricsRow,
    derived_segment_size,
    emit_plot_data,
    format_sweep_table,
    load_config,
    run_experiment,
    run_sweep,
    validate_config,
)
from .nn import (
    EvalMetrics,
    ModelSpec,
    TrainConfig,
    evaluate,
    gradient,
    init_model,
    local_train,
    predict_proba,
)
from .params import Layout, ParamVector, param_count, split_layers
from .partition import (
    DeviceState,
    GlobalQueue,
    PartitionPlan,
    accumulate,
    dispense,
    partition,
    split_global_queue,
)
from .seeds import derive_seed

__version__ = "0.1.0"

__all__ = [
    "AggregationPolicy",
    "BoundInputs",
    "BoundResult",
    "DatasetMeta",
    "DeviceRoundStats",
    "DeviceState",
    "DivergenceRecord",
    "EntropyReport",
    "EvalMetrics",
    "ExperimentConfig",
    "ExperimentResult",
    "FederationState",
    "GlobalQueue",
    "LabeledSet",
    "Layout",
    "MetricsRow",
    "ModelSpec",
    "ParamVector",
    "PartitionPlan",
    "ReliabilityRecord",
    "RoundConfig",
    "RoundReport",
    "TrainConfig",
    "accumulate",
    "aggregate_ddfl",
    "aggregate_fedavg",
    "bias_term",
    "class_histogram",
    "concat_sets",
    "convergence_bound",
    "derive_seed",
    "derived_segment_size",
    "dispense",
    "emit_plot_data",
    "errors",
    "estimate_heterogeneity_gap",
    "evaluate",
    "format_sweep_table",
    "gradient",
    "init_model",
    "load_cifar",
    "load_config",
    "load_csv",
    "load_mnist",
    "local_train",
    "make_synthetic",
    "normalized_entropy",
    "param_count",
    "partition",
    "predict_proba",
    "reliability_index",
    "run_experiment",
    "run_round",
    "run_sweep",
    "save_csv",
    "select_devices",
    "split_global_queue",
    "split_layers",
    "system_reliability_index",
    "validate_config",
    "weight_divergence",
]
