"""Reservoir computing, its kernel limits, and convergence experiments."""

from .backend import backend_name
from .kernels import (
    Activation,
    KernelArgs,
    KernelDomainError,
    KernelFunction,
    QuadratureRule,
    activate,
    kernel_closed_form,
    kernel_quadrature,
)
from .reservoir import (
    DeepConfig,
    DivergenceError,
    NumericalRankError,
    ReservoirConfig,
    StateTrajectory,
    WeightSet,
    deep_run,
    init_state,
    make_rng,
    rc_gram,
    run,
    run_batch,
    sample_weights,
    step,
    train_readout,
)
from .rkernel import (
    RKParams,
    RKState,
    deep_rk_gram,
    deep_rk_init,
    deep_rk_step,
    min_eigenvalue,
    rk_gram,
    rk_init,
    rk_step,
)
from .experiments import (
    DeepSizesResult,
    ExperimentResult,
    ScanSpec,
    Topology,
    convergence_metric,
    convergence_scan,
    cross_term_probe,
    deep_size_scan,
    optimize_deep_sizes,
    sparse_rf_experiment,
    sparsity_scan,
)
from .simplex import NelderMeadResult, NonFiniteObjectiveError, nelder_mead

__version__ = "0.1.0"
