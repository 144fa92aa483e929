"""Stationary Markov chains generated by copulas: grid kernels, mixing coefficients, simulation."""

from .copulas import (
    Clayton,
    Copula,
    FrechetM,
    Gumbel,
    Independence,
    MarshallOlkin,
    Mixture,
    StudentT,
    cdf,
    conditional_cdf,
    density,
    describe,
    inverse_conditional,
    validate,
)
from .errors import (
    BadWeights,
    CopulaChainError,
    InvalidSpec,
    NoConvergence,
    NumericalFailure,
    OutOfRangeParameter,
    ResolutionMismatch,
    TooShort,
)
from .grid import TransitionMatrix, cell_volume, checkerboard_cdf, discretize, fold, mix, power
from .mixing import (
    DoeblinReport,
    MixingProfile,
    beta_coeff,
    doeblin_report,
    geometric_rate,
    mixing_profile,
    phi_coeff,
    rho_coeff,
)
from .simulate import (
    ChainPath,
    PiecewiseLinearCDF,
    PointMassMixture,
    Uniform01,
    empirical_transition,
    generalized_inverse,
    sample_chain,
)

__version__ = "0.1.0"
