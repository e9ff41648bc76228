"""Graph-based surrogate models for chain-like multi-degree-of-freedom structures.

Submodules
----------
graph
    Graphs, adjacency layouts, neighbor aggregation and the graph file format.
oracle
    Newmark-beta ground-truth solver, excitations and episode CSV files.
nn
    Numpy MLP, attention layer, Smooth-L1 loss and Adam with manual gradients.
surrogate
    Dataset assembly, teacher-forced training and autoregressive rollout.
metrics
    NMSE, R squared, peak error and MAC.
spectral
    Welch PSD, STFT and attention-history extraction.
checkpoint, config, experiments, cli
    Persistence, configuration, end-to-end study helpers and the ``gdtm`` command.
"""

from .graph import (
    AdjacencySet, Edge, Graph, GraphError, aggregate, build_chain_adjacency,
    build_heterogeneous_adjacency, chain_graph, homogeneous_adjacency, load_graph, save_graph,
    scale_edges,
)
from .metrics import MetricReport, mac, nmse, peak_error, r_squared
from .nn import ShapeError
from .oracle import (
    EpisodeRecord, ExcitationSpec, MdofSystem, SolverConfig, SolverError, generate_excitation,
    newmark_solve, uniform_chain,
)
from .spectral import extract_attention_history, psd, stft
from .surrogate import (
    RolloutError, SurrogateModel, TrainConfig, TrainingError, evaluate_rollout, fit_surrogate,
    linear_oracle_surrogate, rollout,
)

__version__ = "0.1.0"
