"""Joint reflecting-surface and precoder optimization for finite-alphabet
MIMO links: union-bound symbol-error-rate objectives, per-element and
manifold reflect optimizers, minimum-error and max-min-distance precoders,
an alternating outer loop, exhaustive-search oracles, a Monte-Carlo
maximum-likelihood simulator, and an experiment runner.
"""

from .alternating import (
    AlternatingReport,
    PrecodeScheme,
    ReflectScheme,
    SchemeCombo,
    alternate,
)
from .errors import (
    CapacityError,
    ConfigurationError,
    ContractViolationError,
    IllConditionedChannelError,
    SpecValidationError,
)
from .experiments import (
    ExperimentSpec,
    ResultRow,
    load_spec,
    run_experiment,
    run_large_n_study,
)
from .metrics import (
    PrecodePairCache,
    Precoder,
    ReflectPairCache,
    ReflectVector,
    build_precode_cache,
    build_reflect_cache,
    distance_direct,
    effective_channel,
    pair_weights,
    q_function,
    ser_union_bound,
    ser_union_bound_log,
    union_bound_ps,
)
from .model import (
    ChannelSet,
    SymbolVectorSet,
    SystemConfig,
    enumerate_vectors,
    gen_channels,
    make_constellation,
    perturb_csi,
    symbol_set_for,
)
from .oracle import GridSpec, es_joint, es_precoder, es_reflecting
from .precoding import (
    PrecodeOptReport,
    eigen_precoding,
    mmed_precoding,
    mser_precoding,
    random_precoding,
    zf_precoding,
)
from .reflecting import (
    ReflectOptReport,
    VmserParams,
    emser_reflecting,
    quantize_phases,
    random_reflecting,
    sumdist_reflecting,
    vmser_reflecting,
)
from .simulate import McResult, simulate_ser

__version__ = "0.1.0"

__all__ = [
    "AlternatingReport",
    "CapacityError",
    "ChannelSet",
    "ConfigurationError",
    "ContractViolationError",
    "ExperimentSpec",
    "GridSpec",
    "IllConditionedChannelError",
    "McResult",
    "PrecodeOptReport",
    "PrecodePairCache",
    "PrecodeScheme",
    "Precoder",
    "ReflectOptReport",
    "ReflectPairCache",
    "ReflectScheme",
    "ReflectVector",
    "ResultRow",
    "SchemeCombo",
    "SpecValidationError",
    "SymbolVectorSet",
    "SystemConfig",
    "VmserParams",
    "alternate",
    "build_precode_cache",
    "build_reflect_cache",
    "distance_direct",
    "effective_channel",
    "eigen_precoding",
    "emser_reflecting",
    "enumerate_vectors",
    "es_joint",
    "es_precoder",
    "es_reflecting",
    "gen_channels",
    "load_spec",
    "make_constellation",
    "mmed_precoding",
    "mser_precoding",
    "pair_weights",
    "perturb_csi",
    "q_function",
    "quantize_phases",
    "random_precoding",
    "random_reflecting",
    "run_experiment",
    "run_large_n_study",
    "ser_union_bound",
    "ser_union_bound_log",
    "simulate_ser",
    "sumdist_reflecting",
    "symbol_set_for",
    "union_bound_ps",
    "vmser_reflecting",
    "zf_precoding",
]
