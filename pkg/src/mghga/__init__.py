"""Momentum-gradient feature poisoning of two-layer hypergraph networks."""

from .attack import (
    AttackConfig,
    AttackResult,
    AttackState,
    Surrogate,
    clip_features,
    compute_budget,
    degree_constrained,
    fga_attack,
    mghga_attack,
    modify_continuous,
    modify_discrete,
    momentum_update,
    nda_attack,
    random_attack,
    select_feature,
    sign,
)
from .data_io import (
    Dataset,
    DatasetManifest,
    SplitSpec,
    load_attack_result,
    load_checkpoint,
    load_dataset,
    make_split,
    save_attack_result,
    save_checkpoint,
    save_dataset,
)
from .errors import (
    ConfigError,
    DataFormatError,
    DegenerateHypergraphError,
    DimensionError,
    DivergenceError,
    FeatureModeError,
    MGHGAError,
    SelectionError,
)
from .experiment import (
    Construction,
    ExperimentConfig,
    ExperimentReport,
    run_experiment,
    run_single,
    save_report,
    load_report,
    sweep,
    transfer_matrix,
)
from .hgnn import (
    LabelData,
    ModelParams,
    TrainConfig,
    accuracy,
    forward,
    grad_features,
    grad_params,
    loss,
    predict,
    train,
)
from .hypergraph import (
    Hypergraph,
    build_epsilon_hypergraph,
    build_knn_hypergraph,
    normalized_operator,
    pairwise_distances,
)

__version__ = "0.1.0"
