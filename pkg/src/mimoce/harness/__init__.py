"""Dataset pipeline, training loop and evaluation."""

from .dataset import Dataset, DatasetSplit, build_dataset, load_split, split_counts
from .evaluation import DomainMismatch, evaluate_mse, mse_row
from .training import (MIXED_SNR_DB, PlateauSchedule, TrainConfig, TrainingDiverged, TrainReport, estimator_io, fit,
                       train, train_mixed_snr)

__all__ = [
    "Dataset", "DatasetSplit", "build_dataset", "load_split", "split_counts",
    "DomainMismatch", "evaluate_mse", "mse_row",
    "MIXED_SNR_DB", "PlateauSchedule", "TrainConfig", "TrainReport", "TrainingDiverged", "estimator_io", "fit",
    "train", "train_mixed_snr",
]
