"""Iterative Tucker compilation of amplitude vectors into shallow layered circuits."""

from .corrgraph import CorrelationGraph, Partition, cut_value, pair_weights, partition_blocks, partition_pairs
from .engine import CircuitPlan, EngineConfig, IterationTrace, run
from .statevec import StateVector, fidelity, normalize, reduced_density, schmidt_spectrum
from .tucker import BlockFactor, closest_product, hosvd_factors, monotone_gauge, tucker_step

__version__ = "0.1.0"
