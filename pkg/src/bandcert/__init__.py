"""Certified numerics for band-width estimates of the index of Dirac operators."""

__version__ = "0.1.0"

from .certify import CertificationError, CertifiedValue
from .chains import (BudgetAllocation, ChainReport, GeometryParams, PscParams, even_chain,
                     odd_chain, psc_vanishing_scale)
from .envelope import b_envelope, certified_sup, p_norm_bound, threshold_solve
from .kernels import H1, H2, kernel_by_name, kernel_eval, tail_majorant
from .optimizer import KernelFamily, minimize_constant, recertify
from .quasi_exp import build_f, build_g, minimal_m, sup_defect, sup_exp_error

__all__ = [
    "BudgetAllocation", "CertificationError", "CertifiedValue", "ChainReport", "GeometryParams",
    "H1", "H2", "KernelFamily", "PscParams", "b_envelope", "build_f", "build_g", "certified_sup",
    "even_chain", "kernel_by_name", "kernel_eval", "minimal_m", "minimize_constant",
    "odd_chain", "p_norm_bound", "psc_vanishing_scale", "recertify", "sup_defect",
    "sup_exp_error", "tail_majorant", "threshold_solve",
]
