"""Quantum-repeater performance for single-photon and photon-pair sources."""
from .errors import (
    DivergenceError,
    InfeasibleError,
    InvalidParameterError,
    RepeaterError,
    TruncationError,
)
from .fock import BeamSplitterSpec, DetectorModel, MixedState, ModeRegister, PureState
from .link import ChainReport, LinkOutcome, RepeaterParams, SourceModel, chain_analysis, elementary_link
from .rates import Efficiencies, PerformanceReport, optimize_sps, t_tot_generic, t_tot_sps

__version__ = "0.1.0"
