"""Skew-elliptical distributions: representations, densities, characteristic
functions and moments, with Monte Carlo cross-checks."""

from .charfn import (
    CfValue,
    cf_generic,
    cf_mc,
    cf_skew_normal,
    cf_skew_t,
    cf_skew_uniform,
    cf_theorem32,
)
from .density import logpdf, pdf
from .exceptions import (
    MomentNotFoundError,
    NumericalError,
    QuadratureError,
    RangeError,
    SkellError,
    ValidationError,
)
from .model import (
    DensityGenerator,
    MixingLaw,
    SkewEllipticalParams,
    custom,
    derive_params,
    load_model,
    normal,
    smsn,
    student_t,
)
from .moments import MomentSet, qform_mean, qform_second, radial_ratios, se_moments, sn_moments
from .sampling import RngState, sample_conditioning, sample_representation
from .special import hyp0f1, omega_n, tau

__version__ = "0.1.0"

__all__ = [
    "CfValue",
    "DensityGenerator",
    "MixingLaw",
    "MomentNotFoundError",
    "MomentSet",
    "NumericalError",
    "QuadratureError",
    "RangeError",
    "RngState",
    "SkellError",
    "SkewEllipticalParams",
    "ValidationError",
    "cf_generic",
    "cf_mc",
    "cf_skew_normal",
    "cf_skew_t",
    "cf_skew_uniform",
    "cf_theorem32",
    "custom",
    "derive_params",
    "hyp0f1",
    "load_model",
    "logpdf",
    "normal",
    "omega_n",
    "pdf",
    "qform_mean",
    "qform_second",
    "radial_ratios",
    "sample_conditioning",
    "sample_representation",
    "se_moments",
    "sn_moments",
    "smsn",
    "student_t",
    "tau",
]
