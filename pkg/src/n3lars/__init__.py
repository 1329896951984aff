"""Nonlinear non-negative LARS feature selection over normalized HSIC scores."""

from .data import Dataset, ParseError, generate_synthetic, load_dataset, standardize
from .kernels import (
    KernelConfig,
    NormalizedGram,
    NystromFactor,
    center_normalize,
    default_basis,
    delta_gram,
    gaussian_gram,
    nystrom_factor,
    output_factor,
)
from .metrics import redundancy_rate
from .nhsic import NhsicScores, build_scores, hsic_exact, nhsic_approx, nhsic_exact
from .parallel import ScoringEngine, ShardPlan, make_plan
from .screening import iterative_screen, mr_rank
from .solver import SelectionPath, kkt_check, lars_path, select

__version__ = "0.1.0"
