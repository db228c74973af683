"""Numerical lab for extrinsic biharmonic maps into spheres."""

__version__ = "0.1.0"

from .bienergy import MinimizeConfig, el_residual, energy, minimize
from .grid import GridDomain, SphereField, load_field, save_field
from .homogeneity import deficit_table, fit_homogeneous
from .monotonicity import density_profile, monotone_diff, theta
from .oracle import OracleMap, cylindrical, exact_theta, planted_multi, radial
from .regscale import RegScale, lp_derivative_sum, lp_reciprocal
from .strata import ScaleLadder, count_singular, decomposition_census, scale_sequence, stratum

__all__ = [
    "GridDomain", "SphereField", "load_field", "save_field",
    "MinimizeConfig", "energy", "el_residual", "minimize",
    "OracleMap", "radial", "cylindrical", "planted_multi", "exact_theta",
    "theta", "monotone_diff", "density_profile",
    "fit_homogeneous", "deficit_table",
    "RegScale", "lp_reciprocal", "lp_derivative_sum",
    "ScaleLadder", "scale_sequence", "stratum", "decomposition_census", "count_singular",
]
