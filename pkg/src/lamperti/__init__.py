"""Recurrence and transience classification for Markov chains on the nonnegative integers."""

from .chain_model import (
    BirthDeath,
    DriftQuantities,
    JumpDistribution,
    JumpKernel,
    Rescaled,
    SplittableExample,
    SubChain,
    drift,
    drift_table,
    kernel,
    rescale,
)
from .criteria import (
    CriteriaConfig,
    bd_oracle,
    classify,
    corollary_test,
    lamperti_test,
    ratio_test,
    series_test,
)
from .drift_stats import FitConfig, fit_asymptotics, fit_component, profile
from .simulator import SimConfig, consistency_check, simulate
from .spec_lang import evaluate, parse, to_source
from .specfile import load_spec, spec_from_dict
from .splitter import aggregate, decompose, extract_subchain
from .verdict import Label, Verdict

__all__ = [
    "BirthDeath", "DriftQuantities", "JumpDistribution", "JumpKernel", "Rescaled",
    "SplittableExample", "SubChain", "drift", "drift_table", "kernel", "rescale",
    "CriteriaConfig", "bd_oracle", "classify", "corollary_test", "lamperti_test",
    "ratio_test", "series_test", "FitConfig", "fit_asymptotics", "fit_component",
    "profile", "SimConfig", "consistency_check", "simulate", "evaluate", "parse",
    "to_source", "load_spec", "spec_from_dict", "aggregate", "decompose",
    "extract_subchain", "Label", "Verdict",
]
