"""Chatterjee's rank correlation xi_n and its central limit theory.

Modules
-------
model      joint laws, generative models and samples
estimator  xi_n with random tie-breaking among equal x values
vstat      V-statistics over consecutive X-sorted pairs
theory     limiting mean and variance, exact or by Monte Carlo
inference  plug-in normal and m-out-of-n bootstrap intervals
sim        repeated-sampling experiments and normality diagnostics
cli        command-line interface
"""

from .errors import XiError
from .estimator import reorder_by_x, xi_n, xicor
from .model import GenerativeModel, JointPMF, Sample, builtin_model, make_pmf, sample
from .theory import TheoryReport, exact_sigma, mc_theory, model_theory

__version__ = "0.1.0"

__all__ = [
    "GenerativeModel",
    "JointPMF",
    "Sample",
    "TheoryReport",
    "XiError",
    "builtin_model",
    "exact_sigma",
    "make_pmf",
    "mc_theory",
    "model_theory",
    "reorder_by_x",
    "sample",
    "xi_n",
    "xicor",
]
