"""Experiment orchestration: configuration, datasets, error studies and the CLI."""

from .config import SEED_OFFSETS, ExperimentConfig, derive_seed, dump_config, load_config
from .data import (
    LogConductivity,
    generate_dataset,
    mode_moments,
    moment_matched_transport,
    read_dataset,
    sample_noise_fields,
    write_dataset,
)
from .experiments import (
    SCHEMAS,
    ErrorRecord,
    convergence_rate,
    eigenvalue_convention_gap,
    fem_convergence_study,
    mc_estimate,
    monomial_experiment,
    monomial_values,
    pde_experiment,
    pde_mc_reference,
    pde_qoi,
    read_records,
    train_from_config,
    training_size_study,
    truncation_study,
    write_records,
)

__all__ = [
    "ExperimentConfig", "derive_seed", "SEED_OFFSETS", "load_config", "dump_config",
    "LogConductivity", "generate_dataset", "mode_moments", "moment_matched_transport",
    "read_dataset", "write_dataset", "sample_noise_fields",
    "ErrorRecord", "SCHEMAS", "write_records", "read_records", "mc_estimate", "monomial_values",
    "train_from_config", "monomial_experiment", "pde_qoi", "pde_mc_reference", "pde_experiment",
    "fem_convergence_study", "convergence_rate", "truncation_study", "eigenvalue_convention_gap",
    "training_size_study",
]
