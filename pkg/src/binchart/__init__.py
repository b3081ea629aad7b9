"""Moving-buffer binary control chart for very small mean shifts."""

__version__ = "0.1.0"

from .arl import ArlEstimate, SimConfig, arl_curve, estimate_arl, estimate_arl_classic
from .baselines import CusumChart, EwmaChart, ShewhartChart, calibrate_baseline, estimate_baseline_arl
from .chart import (BufferChart, ChartLimits, ClassicNpChart, RunLength, Signal, binarize,
                    buffer_limits, classic_limits, init_buffer, run_length, step)
from .design import (DesignResult, UnreachableError, calibrate_classic_k, calibrate_k,
                     exact_arl_markov, exact_classic_arl, log_arl_profile, optimize_buffer)
from .limit import (BufferStrategy, analytic_covariance, check_conditions, covariance_check,
                    censor_at_one, finite_N_stopping, ks_distance, sample_stopping, sample_tau1,
                    simulate_tau, simulate_tau1)
from .noise import (ChangePointSpec, ErrorDist, ImageNoiseModel, LocalAlternative, gen_stream,
                    jump_to_delta, sample_image, shift_probability)
from .rng import DEFAULT_SEED, substream
