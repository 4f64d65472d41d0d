"""socdiff: social-network-aware diffusion recommendation on bipartite graphs.

Core layout:

- :mod:`socdiff.networks`: immutable bipartite/social graph containers
- :mod:`socdiff.diffusion`: md/hc/hybrid/smd kernels, cold-start, dense oracle
- :mod:`socdiff.metrics`: ranking score, precision, diversity, novelty, congestion
- :mod:`socdiff.harness`: splits, repeated runs, sweeps, cold-start comparison
- :mod:`socdiff.datasets`: edge-list parsing and report/split persistence
- :mod:`socdiff.verify`: randomized invariant suite with a dense oracle
- :mod:`socdiff.service`: FastAPI wrapper; :mod:`socdiff.cli`: thin client
"""

__version__ = "0.1.0"

from .diffusion import (DiffusionEngine, KernelSpec, ScoreVector,
                        coldstart_scores, grm_scores, hc_scores, hybrid_scores,
                        kernel_label, md_scores, smd_scores, transfer_matrix)
from .errors import (EdgeError, NetworkMismatchError, NoProfileError,
                     NotEvaluableError, OracleSizeError, ParseError,
                     SocdiffError, SplitMismatchError, UnreachableUserError)
from .harness import (ColdstartComparison, EvaluationResult, ExperimentConfig,
                      LinkSplit, SweepPoint, SweepResult, coldstart_experiment,
                      degree_distribution, degree_group_analysis,
                      improvement_over_baseline, run_evaluation, run_seed,
                      split_links, sweep_parameter, synth_generate,
                      tercile_buckets, training_network)
from .metrics import (MetricsReport, RecommendationList, congestion, coverage,
                      evaluate_all, inter_diversity, intra_diversity_user,
                      item_cosine_similarity, novelty_user, precision_user,
                      ranking_score_user, top_l)
from .networks import (BipartiteNetwork, CombinedNetwork, SocialNetwork,
                       build_bipartite, build_social, combine)
from .datasets import (IdMap, load_dataset, load_split, parse_bipartite_file,
                       parse_social_file, persist_split, write_report)

__all__ = [name for name in dir() if not name.startswith("_")]
