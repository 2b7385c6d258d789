"""Federated learning simulator with client unlearning by projected gradient ascent."""

from ._core import (
    Arch,
    CheckpointError,
    ConfigError,
    Model,
    clip_grad,
    compute_delta,
    compute_reference,
    fedavg,
    forward,
    load_idx,
    loss_and_grad,
    make_synthetic,
    param_count,
    project_l2,
    run_experiment,
)

__all__ = [
    "Arch",
    "CheckpointError",
    "ConfigError",
    "Model",
    "clip_grad",
    "compute_delta",
    "compute_reference",
    "fedavg",
    "forward",
    "load_idx",
    "loss_and_grad",
    "make_synthetic",
    "param_count",
    "project_l2",
    "run_experiment",
]
