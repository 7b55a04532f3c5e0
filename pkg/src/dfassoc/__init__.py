"""Distribution-free measures of association from optimal-transport ranks."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .estimator import EstimateResult, RankPipeline, eta_hat_plain, eta_hat_rank
from .graphs import (GeometricGraph, GraphSpec, GraphStats, build_graph, common_neighbors,
                     graph_stats, knn_graph, mst_graph)
from .grids import (GridSpec, ReferenceGrid, default_grid, make_halton, make_iid_uniform,
                    make_lattice_1d, parse_grid)
from .inference import (NullTable, NullTableKey, TableCache, TestResult, VarianceComponents,
                        build_null_table, exact_variance_of_Nn, test_independence,
                        variance_components)
from .kernels import Kernel, NullMoments, gram_summary, mmd_squared, null_moments
from .oracles import (KnownModel, eta_rank_equivalence_check, parse_model,
                      population_eta_rank_oracle, sample, xi_population)
from .ranks import RankAssignment, brute_force_ranks, compute_ranks, population_rank_oracle
