"""Quantum-enhanced LSTM embeddings and RBF-kernel portfolio allocation."""

from .allocation import DivMomAllocator, GraphAllocator, divmom_select, graph_allocate, momentum_scores
from .backtest import BacktestConfig, make_rolling_windows, run_backtest, grid_search_lambda
from .data import ReturnsTable, SyntheticConfig, generate_synthetic_universe, load_returns_csv
from .exceptions import (
    ConfigError,
    DataError,
    DegenerateGeometryError,
    InvalidReturnError,
    NumericalError,
    QlstmRbfError,
    TrainingDivergedError,
)
from .manifold import RBFKernel, embed_all, rbf_kernel
from .recurrent import QLSTMAutoencoder, train_autoencoder
from .vqc import vqc_backward, vqc_forward

__version__ = "0.1.0"

__all__ = [
    "BacktestConfig",
    "ConfigError",
    "DataError",
    "DegenerateGeometryError",
    "DivMomAllocator",
    "GraphAllocator",
    "InvalidReturnError",
    "NumericalError",
    "QLSTMAutoencoder",
    "QlstmRbfError",
    "RBFKernel",
    "ReturnsTable",
    "SyntheticConfig",
    "TrainingDivergedError",
    "divmom_select",
    "embed_all",
    "generate_synthetic_universe",
    "graph_allocate",
    "grid_search_lambda",
    "load_returns_csv",
    "make_rolling_windows",
    "momentum_scores",
    "rbf_kernel",
    "run_backtest",
    "train_autoencoder",
    "vqc_backward",
    "vqc_forward",
]
