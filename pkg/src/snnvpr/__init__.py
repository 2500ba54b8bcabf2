"""Spiking neural network for visual place recognition.

A two-layer conductance-based LIF network learns place-selective neurons
from reference traverses with unsupervised STDP; query images are matched by
decoding the spike counts of the trained network.
"""

from .assignment import SCHEMES, AssignmentTable, assign_standard, build_counts, score
from .checkpoint import Checkpoint
from .config import RunConfig, load_config
from .data import DatasetManifest, SynthSpec, generate_synthetic, load_manifest
from .errors import CheckpointError, ConfigError, DataError, ValidationError
from .evaluation import PRCurve, pr_curve, sad_matrix, sequence_aggregate, to_distance
from .network import NetworkState, NeuronParams, SynapseParams, build_network, present, step
from .pipeline import evaluate, query, train
from .signal import EncodingConfig, encode_poisson, patch_normalize, preprocess, resize

__version__ = "0.1.0"

__all__ = [
    "SCHEMES", "AssignmentTable", "assign_standard", "build_counts", "score",
    "Checkpoint", "RunConfig", "load_config",
    "DatasetManifest", "SynthSpec", "generate_synthetic", "load_manifest",
    "CheckpointError", "ConfigError", "DataError", "ValidationError",
    "PRCurve", "pr_curve", "sad_matrix", "sequence_aggregate", "to_distance",
    "NetworkState", "NeuronParams", "SynapseParams", "build_network", "present", "step",
    "evaluate", "query", "train",
    "EncodingConfig", "encode_poisson", "patch_normalize", "preprocess", "resize",
]
