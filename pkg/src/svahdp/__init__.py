"""Small-variance-asymptotics objectives and optimisers for HDP mixtures and the HDP-HMM."""
from .combinatorics import (Concentrations, CrfCounts, crf_log_prob_counts, crf_log_prob_seatings,
                            crp_log_prob, crp_partition_log_prob, log_rising_factorial, log_stirling1u,
                            set_partitions, stirling1u)
from .hdp_means import FitOptions, fit_hdp_means
from .objectives import (GroupedClustering, GroupedDataset, HmmDirectSolution, HmmSolution, Hyperparams,
                         SequenceDataset, hdp_hmm_comb_objective, hdp_hmm_direct_objective,
                         hdp_mixture_objective, kl_divergence)
from .sva_hmm import (fit_hmm_combinatorial, fit_hmm_direct, fit_hmm_direct_sweep, update_shared_weights,
                      update_transition_rows, viterbi_path)

__version__ = "0.1.0"

__all__ = [
    "Concentrations", "CrfCounts", "crf_log_prob_counts", "crf_log_prob_seatings", "crp_log_prob",
    "crp_partition_log_prob", "log_rising_factorial", "log_stirling1u", "set_partitions", "stirling1u",
    "FitOptions", "fit_hdp_means", "GroupedClustering", "GroupedDataset", "HmmDirectSolution", "HmmSolution",
    "Hyperparams", "SequenceDataset", "hdp_hmm_comb_objective", "hdp_hmm_direct_objective",
    "hdp_mixture_objective", "kl_divergence", "fit_hmm_combinatorial", "fit_hmm_direct",
    "fit_hmm_direct_sweep", "update_shared_weights", "update_transition_rows", "viterbi_path",
]
