"""Simulator for rational edge devices choosing whether to join collaborative training."""
from ._validation import ConfigError, ContractViolation, ParseError, ShortageError
from .cluster import ClusterAssignment, fair_strategy, kmeans_1d
from .dataset import LabeledDataset, PartitionPlan, SensorLog
from .device import DeviceState, TrainingConfig
from .estimators import (
    CollaborativeMLPClassifier,
    FairStrategySelector,
    OptimalKMeans1D,
    SensorWindowTransformer,
)
from .experiment import ExperimentConfig, RunReport, run_experiment
from .game import CostModel, LossRecord, PayoffConfig, enumerate_nash, is_nash
from .model import ModelSpec
from .server import ServerState

__version__ = "0.1.0"

__all__ = [
    "ClusterAssignment", "CollaborativeMLPClassifier", "ConfigError", "ContractViolation",
    "CostModel", "DeviceState", "ExperimentConfig", "FairStrategySelector", "LabeledDataset",
    "LossRecord", "ModelSpec", "OptimalKMeans1D", "ParseError", "PartitionPlan",
    "PayoffConfig", "RunReport", "SensorLog", "SensorWindowTransformer", "ServerState",
    "ShortageError", "TrainingConfig", "enumerate_nash", "fair_strategy", "is_nash",
    "kmeans_1d", "run_experiment",
]
