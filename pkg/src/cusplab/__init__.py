"""cusplab: a numerical laboratory for self-similar gradient blow-up.

Builds the cusp blow-up profiles of the Camassa-Holm / Hunter-Saxton family,
verifies the weighted profile inequalities behind their stability analysis,
runs Lagrangian marker simulations of the actual blow-up, and extracts
blow-up times, Holder exponents and self-similar convergence diagnostics.
"""

from .profiles import (
    ProfileParams,
    ProfileTable,
    build_profile,
    eval_profile,
    asymptotic_state,
    rescale_beta,
    profile_residual,
    taylor_check,
    third_derivative_origin,
    v_of_w,
    save_table,
    load_table,
)

__version__ = "0.1.0"
