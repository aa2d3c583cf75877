"""Numerical laboratory for centralizers on finite Köthe lattices."""

__version__ = "0.1.0"

from .measure import (AtomSpace, DisjointFamily, DomainError, KVec, are_disjoint,
                      decreasing_rearrangement, rank_function, support, xlog_ratio)
from .spaces import (KotheNorm, LorentzNorm, LpNorm, LpSumL2Blocks, PConcavification,
                     PConvexification, SchlumprechtNorm, SchreierDualNorm, SchreierNorm,
                     norm_lorentz, norm_lp, norm_lp_sum_l2_blocks, norm_pconvexification,
                     norm_schlumprecht, norm_schreier, norm_schreier_dual)
from .centralizers import (BlockDerivation, Centralizer, Decomposition, DiagonalMultiplier,
                           Kappa, KaltonPeck, LorentzDerivation, Lozanovskii, ScaledKP,
                           SolverConfig, SolverFailure, ZeroMap, block_derivation,
                           derivation_from_decomposition, kalton_kappa, kalton_peck,
                           lorentz_derivation, lozanovskii_decompose, twisted_norm)
