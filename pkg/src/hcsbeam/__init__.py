"""
Multi-user beamforming with a capacity/sidelobe trade-off.

Zero-forcing (ZF), isophoric steering (ISO) and the hybrid HCS method for
dual-polarized uniform linear arrays, with a synthetic geometry-based
channel, pattern metrics and an experiment harness.
"""

from .channel import ChannelConfig, ChannelEnsemble, ReceiverLayout, generate_ensemble, random_layout
from .errors import (
    BeamSynthesisError,
    ConfigError,
    DegenerateGeometry,
    DimensionMismatch,
    ElementFactorNull,
    GridMismatch,
    HcsError,
    InvalidParam,
    RankDeficient,
    VisibleRegionOverflow,
    ZeroPattern,
    ZeroVector,
)
from .geometry import ArrayGeometry, ElementFactor, make_ula
from .harness import ExperimentConfig, emit_csv, run_experiment
from .linalg import pseudo_inverse
from .metrics import MetricsReport, NoiseModel
from .pattern import AngularGrid, FarFieldPattern, PatternIntegrator, SectorSpec, radiate
from .synthesis import HcsSynthesizer, hcs_excitation_set, iso_excitation_set, zf_excitation_set

__version__ = "0.1.0"

__all__ = [
    "AngularGrid",
    "ArrayGeometry",
    "BeamSynthesisError",
    "ChannelConfig",
    "ChannelEnsemble",
    "ConfigError",
    "DegenerateGeometry",
    "DimensionMismatch",
    "ElementFactor",
    "ElementFactorNull",
    "ExperimentConfig",
    "FarFieldPattern",
    "GridMismatch",
    "HcsError",
    "HcsSynthesizer",
    "InvalidParam",
    "MetricsReport",
    "NoiseModel",
    "PatternIntegrator",
    "RankDeficient",
    "ReceiverLayout",
    "SectorSpec",
    "VisibleRegionOverflow",
    "ZeroPattern",
    "ZeroVector",
    "emit_csv",
    "generate_ensemble",
    "hcs_excitation_set",
    "iso_excitation_set",
    "make_ula",
    "pseudo_inverse",
    "radiate",
    "random_layout",
    "run_experiment",
    "zf_excitation_set",
]
