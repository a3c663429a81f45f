"""Kolmogorov-Arnold style representations that survive an adversary on the hidden layer."""

from .adversary import (Adversary, AffineRational, Composition, CoordMonotonePoly, Identity,
                        RationalAffineFamily, Translation, TranslationPath, modulus_of_inverse,
                        random_rational_affine)
from .engine import (RunReport, Target, appx_eval, iterate, lemma_multi, lemma_single, lemma_step,
                     represent_multi, sup_norm_grid)
from .exact import GammaBasis, GammaNumber, gamma_basis, gn_add, gn_compare, gn_to_float
from .inner import (ConstructionBudget, InnerTuple, ReferenceTuple, choose_resolution,
                    construct_phi_h, construct_phi_multi, eval_phi, forced_positions)
from .lattice import RedInterval, RedLattice, RedSolid
from .outer import OuterFunction, build_outer, eval_outer, lipschitz, sum_outer, sup_norm_outer
from .probes import affine_commute_check, corner_obstruction, equicontinuity_probe
from .targets import catalog, make_target

__version__ = "0.1.0"
