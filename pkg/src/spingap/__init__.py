"""Numerical toolkit for spectral-gap and log-Sobolev inequalities of
conservative spin systems: 1D measure engine with exponential tilting,
concentration-profile transference calculus, spin-system Monte Carlo,
the mean-spin reduction fixed point, sub-Gaussian chaos tails, and
discretized-generator gap estimation.
"""

from . import chaos, measure1d, potentials, spectral, spin, tilt, transference
from .errors import SpinGapError
from .measure1d import (Measure1D, MeasureStats, bakry_emery_lsi,
                        holley_stroock, invert_tilt, lp_density_ratio,
                        moment, normalize, psi1_norm, recentred_tilt, stats,
                        tilt as tilt_measure, tv_distance, w_decompose,
                        weakly_gaussian_certificate)
from .potentials import (Potential1D, gaussian, power, tabulated,
                         two_sided_exp, uniform, weakly_gaussian)
from .transference import (ConcentrationProfile, DensityTailModel,
                           UniversalConstants, empirical_profile,
                           ls_transfer_constant, pessimistic_inverse,
                           profile_from_lsi, profile_from_sg,
                           sg_transfer_lp, sg_transfer_median,
                           sg_transfer_tv, superimpose_lp_bound,
                           transfer_integral, transfer_pointwise,
                           tv_from_density_tail)

__version__ = "0.1.0"
