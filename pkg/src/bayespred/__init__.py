"""Bayes predictive densities and their Kullback-Leibler risk.

Exponential and location-scale families, alpha-class and shrinkage
priors, closed-form and quadrature predictive densities, exact and Monte
Carlo risk, the second-order risk expansion with its alpha-class
optimisation, and the superharmonic-prior analysis for location families.
"""

from .asymptotics import (
    AlphaSolveResult,
    ExpansionResult,
    Extrapolation,
    MinimaxReport,
    alpha_solve,
    excess_risk_extrapolate,
    g_term_1d,
    g_term_general,
    g_theta,
    minimax_probe_1d,
)
from .cumulants import CumulantTensors, cumulants, identities_check
from .families import FAMILY_NAMES, Family, FamilyError, make_family
from .kernels import BACKEND
from .lemma1 import closed_form_cumulants, lemma1_mc, lemma1_tensors
from .location import (
    DominanceVerdict,
    LaplacianReport,
    dominance_experiment,
    prior_term_location,
    superharmonic_scan,
    uniform_gap_probe,
)
from .predictive import PredictiveDensity, bayes_predictive, estimative
from .priors import Prior, alpha_prior, jeffreys, parse_prior, shrinkage_prior, uniform_prior
from .risk import RiskDifference, RiskEstimate, kl_divergence, risk_difference, risk_exact, risk_mc

__version__ = "0.1.0"

__all__ = [
    "AlphaSolveResult",
    "BACKEND",
    "CumulantTensors",
    "DominanceVerdict",
    "ExpansionResult",
    "Extrapolation",
    "FAMILY_NAMES",
    "Family",
    "FamilyError",
    "LaplacianReport",
    "MinimaxReport",
    "PredictiveDensity",
    "Prior",
    "RiskDifference",
    "RiskEstimate",
    "alpha_prior",
    "alpha_solve",
    "bayes_predictive",
    "closed_form_cumulants",
    "cumulants",
    "dominance_experiment",
    "estimative",
    "excess_risk_extrapolate",
    "g_term_1d",
    "g_term_general",
    "g_theta",
    "identities_check",
    "jeffreys",
    "kl_divergence",
    "lemma1_mc",
    "lemma1_tensors",
    "make_family",
    "minimax_probe_1d",
    "parse_prior",
    "prior_term_location",
    "risk_difference",
    "risk_exact",
    "risk_mc",
    "shrinkage_prior",
    "superharmonic_scan",
    "uniform_gap_probe",
    "uniform_prior",
]
