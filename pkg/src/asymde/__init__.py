"""Codeword-averaged density evolution for LDPC codes on asymmetric binary channels."""

__version__ = "0.1.0"

from asymde.channels import BASC, BEC, BSC, BiAWGNC, CompositeBiAWGNC, ZChannel, channel_family, parse_channel
from asymde.de import decodable, run_coset_de, run_de, stability, threshold_search, typicality_compare
from asymde.density import DensityPair, GridSpec, QuantizedDensity
from asymde.ensemble import DegreeDistribution, builtin_code, resolve_code, sample_graph

__all__ = [
    "BASC", "BEC", "BSC", "BiAWGNC", "CompositeBiAWGNC", "ZChannel", "channel_family", "parse_channel",
    "decodable", "run_coset_de", "run_de", "stability", "threshold_search", "typicality_compare",
    "DensityPair", "GridSpec", "QuantizedDensity",
    "DegreeDistribution", "builtin_code", "resolve_code", "sample_graph",
]
