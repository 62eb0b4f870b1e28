"""qgc-mac - Rate regions and nested quasi-group codes for the MAC with states."""

__version__ = "0.1.0"

from .bounds import gp_outer_max, verify_decompositions, verify_ptp_table
from .channels import ChannelSpec, builtin_example1, load_channel, resolve_channel
from .errors import (
    DomainError,
    QgcMacError,
    ResourceCapError,
    VerificationError,
)
from .modrings import Z4, RingSpec, circular_convolve, sumset
from .probinfo import JointPmf, Pmf, entropy, mutual_information
from .qgcsim import (
    ExperimentConfig,
    QgcSimulator,
    RateConfig,
    TrialStats,
    covering_experiment,
    run_example1,
)
from .regions import (
    combined_rates,
    gp_rates,
    gp_search,
    lemma4_assignment,
    qgc_sum_rate,
    region_hull,
    resolve_assignment,
)

__all__ = [
    "ChannelSpec",
    "builtin_example1",
    "load_channel",
    "resolve_channel",
    "DomainError",
    "QgcMacError",
    "ResourceCapError",
    "VerificationError",
    "RingSpec",
    "Z4",
    "circular_convolve",
    "sumset",
    "Pmf",
    "JointPmf",
    "entropy",
    "mutual_information",
    "gp_rates",
    "qgc_sum_rate",
    "combined_rates",
    "gp_search",
    "lemma4_assignment",
    "region_hull",
    "resolve_assignment",
    "verify_ptp_table",
    "gp_outer_max",
    "verify_decompositions",
    "QgcSimulator",
    "ExperimentConfig",
    "RateConfig",
    "TrialStats",
    "run_example1",
    "covering_experiment",
]
