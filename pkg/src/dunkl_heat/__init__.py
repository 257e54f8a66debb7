"""Numerical toolkit for two-sided Dunkl heat kernel bounds.

Modules: rootsys (root systems and reflection groups), bounds (the rational
factor Lambda, volumes, envelopes), kernel (exact kernels in rank one and for
Z_2^N), pde (a polar finite-volume solver in the plane), harness and cli
(sweeps and reports).
"""

from .bounds import envelope, lambda_bruteforce, lambda_dihedral, lambda_dp, volume_comparable
from .kernel import heat_kernel_1d, heat_kernel_product, rosler_eval_1d
from .rootsys import build_dihedral, build_product_A1, generate_group

__version__ = "0.1.0"

__all__ = ["build_dihedral", "build_product_A1", "generate_group", "envelope", "lambda_bruteforce",
           "lambda_dihedral", "lambda_dp", "volume_comparable", "heat_kernel_1d",
           "heat_kernel_product", "rosler_eval_1d"]
