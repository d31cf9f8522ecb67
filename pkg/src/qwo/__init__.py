"""QWO: whitening plus Gram-Schmidt construction of order-induced DAGs for
linear Gaussian models, with GRaSP and hill-climbing permutation search."""

from .algorithm import (
    DEFAULT_TAU,
    ORACLE_TAU,
    DegenerateWhiteningError,
    QwoBuilder,
    QwoState,
    constraint_residuals,
    extract_graph,
    qwo_build,
    qwo_update,
)
from .metrics import dag_to_cpdag, evaluate, pshd, skeleton_f1
from .model import (
    Cpdag,
    Dag,
    DiGraph,
    GraphError,
    LigamModel,
    Permutation,
    d_separated,
    graph_of,
    is_compatible,
    load_fixture,
    oracle_gpi,
    read_edges,
    write_edges,
)
from .scores import BicBuilder, ScoreCache, bic_local_score, grow_shrink_parents
from .search import DiscoveryResult, SearchConfig, discover, grasp_search, hc_search, initial_permutation, tuck
from .synth import GenConfig, sample_data, sample_er_dag, sample_ligam, simulate
from .whitening import (
    SingularCovarianceError,
    WhiteningContext,
    build_whitening,
    estimate_covariance,
    oracle_whitening,
    whiten_data,
)

__version__ = "0.1.0"
