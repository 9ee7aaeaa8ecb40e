"""Mock-based unit testing for the data preparation and model design
stages of tabular deep-learning pipelines."""

from .data_checks import DataStageConfig, TrainBudget, run_data_stage
from .engine import LayerDef, Model, TrainConfig, forward, gradients, train
from .errors import ContractError, MockcheckError, ParseError, ShapeError
from .findings import FIX_CATALOG, Finding, fix_for, majority_vote
from .mocks import (
    MockDataConfig,
    build_mock_model,
    generate_mock_data,
    mock_model_recipe,
    mock_model_spec,
)
from .model_checks import DynamicsBudget, ModelStageConfig, run_model_stage
from .pipeline import (
    DataInterface,
    Dataset,
    ModelInterface,
    ModelSpec,
    load_dataset,
    parse_data_interface,
    parse_model_interface,
    parse_model_spec,
)
from .report import Report, render_report, run_repeated

__version__ = "0.1.0"

__all__ = [
    "ContractError", "DataInterface", "DataStageConfig", "Dataset", "DynamicsBudget", "FIX_CATALOG",
    "Finding", "LayerDef", "MockDataConfig", "MockcheckError", "Model", "ModelInterface", "ModelSpec",
    "ModelStageConfig", "ParseError", "Report", "ShapeError", "TrainBudget", "TrainConfig",
    "build_mock_model", "fix_for", "forward", "generate_mock_data", "gradients", "load_dataset",
    "majority_vote", "mock_model_recipe", "mock_model_spec", "parse_data_interface",
    "parse_model_interface", "parse_model_spec", "render_report", "run_data_stage", "run_model_stage",
    "run_repeated", "train",
]
