"""FedGiA federated training with FedAvg, FedProx and FedPD baselines."""

from ._core import (
    ClientDataset,
    ConfigError,
    CurvatureBound,
    CurvatureVariant,
    FederatedProblem,
    LossKind,
    LossModel,
    ParseError,
    RunStatus,
    RunTrace,
    SummaryRow,
    SyntheticSpec,
    TraceRow,
    curvature_bound,
    default_t,
    default_tol,
    generate_linear_noniid,
    load_dataset,
    loss_gradient,
    loss_value,
    partition_dataset,
    run,
    run_experiment,
    spectral_norm,
)

ALGORITHMS = ("fedavg", "fedprox", "fedpd", "fedgia-d", "fedgia-g")

__all__ = [name for name in dir() if not name.startswith("_")]
