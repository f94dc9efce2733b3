"""Learning mixtures of linear regressions and hyperplane arrangements."""

from .boost import BoostConfig, boost, cosine_bracket, cosine_gradient
from .descent import (DescentConfig, fourier_moment_descent, learn_with_noise,
                      learn_without_noise, optimistic_descent)
from .hyperplanes import hyperplane_moment_descent, learn_hyperplanes
from .lowerbound import build_mlr_pair, moment_match_sigmas, moment_table
from .minvar import (compare_min_variances, estimate_max_variance,
                     estimate_min_variance, mixture_moment)
from .model import (HyperplaneModel, HyperplaneSampler, MlrModel, MlrSampler,
                    RecoveryReport, Samples, ZeroMeanGmm, residual_gmm,
                    sample_hyperplanes, sample_mlr, score_recovery)
from .piecewise import PiecewisePoly, fourier_moment, fourier_transform
from .subspace import approx_block_svd, hyperplane_moment_matrix, mlr_moment_matrix

__version__ = "0.1.0"
