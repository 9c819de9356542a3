"""Simulation laboratory for key-limited Shannon cipher systems with a distortion-seeking eavesdropper."""

from .core import (
    DistortionMeasure,
    SourceDistribution,
    dmax,
    sample_source,
    sequence_distortion,
    sequence_log_probability,
)
from .codebook import Codebook, NotTypical, bin_contents, build_partition, locate
from .cipher import Message, decode, decode_error_probability, encode
from .adversary import (
    DistortionReport,
    brute_force_oracle,
    expected_adversary_distortion,
    optimal_reproduction,
    posterior_given_message,
    suffstat_equivalence_check,
)

__version__ = "0.1.0"
