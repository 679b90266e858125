"""Hadamard-coded BPSK words, their conversion to pulse position modulation,
and the resulting photon-counting and Dolinar-assisted information rates."""

from .hadamard import HadamardMatrix, Codeword, construct, validate
from .infotheory import BETA, ChannelParams
from .simulation import Scheme, SchemeConfig, compare_report, run_trials

__all__ = [
    "BETA",
    "ChannelParams",
    "Codeword",
    "HadamardMatrix",
    "Scheme",
    "SchemeConfig",
    "compare_report",
    "construct",
    "run_trials",
    "validate",
]
__version__ = "0.1.0"
