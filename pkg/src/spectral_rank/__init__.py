"""Spectral ranking and rank inference for multiway comparison data."""

from .bootstrap import (BootstrapResult, BootstrapScores, BootstrapSpec,
                        bootstrap_scores, quantile, run_bootstrap)
from .data import (Comparison, ComparisonDataset, FullRanking, GraphDiagnostics,
                   break_full_ranking, check_rankability, degree_stats,
                   format_choice_csv, parse_choice_csv)
from .errors import (FitError, GenerationError, NumericError, ParameterError,
                     ParseError, SpectralRankError, UnsupportedConfigurationError,
                     ValidationError)
from .inference import (RankInterval, TestDecision, rank_cis, screen_top_k,
                        test_top_k, two_sample_item_test, two_sample_topk_test)
from .simulation import (FixedGraphConfig, MCReport, PLConfig, gen_fixed_heterogeneous,
                         gen_pl_random, mle_choice, mle_pl, monte_carlo_run, theta_grid)
from .spectral import (SpectralFit, TransitionMatrix, WeightScheme, build_transition,
                       estimate_theta, fit, population_transition,
                       stationary_distribution)
from .variance import (JContributions, VarianceReport, j_contributions, sigma_km,
                       sigma_matrix, var_J_fixed, var_J_pl_random)

__version__ = "0.1.0"

__all__ = [
    "BootstrapResult", "BootstrapScores", "BootstrapSpec", "bootstrap_scores",
    "quantile", "run_bootstrap",
    "Comparison", "ComparisonDataset", "FullRanking", "GraphDiagnostics",
    "break_full_ranking", "check_rankability", "degree_stats", "format_choice_csv",
    "parse_choice_csv",
    "FitError", "GenerationError", "NumericError", "ParameterError", "ParseError",
    "SpectralRankError", "UnsupportedConfigurationError", "ValidationError",
    "RankInterval", "TestDecision", "rank_cis", "screen_top_k", "test_top_k",
    "two_sample_item_test", "two_sample_topk_test",
    "FixedGraphConfig", "MCReport", "PLConfig", "gen_fixed_heterogeneous",
    "gen_pl_random", "mle_choice", "mle_pl", "monte_carlo_run", "theta_grid",
    "SpectralFit", "TransitionMatrix", "WeightScheme", "build_transition",
    "estimate_theta", "fit", "population_transition", "stationary_distribution",
    "JContributions", "VarianceReport", "j_contributions", "sigma_km",
    "sigma_matrix", "var_J_fixed", "var_J_pl_random",
]
