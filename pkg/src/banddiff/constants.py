"""Numerical constants and tolerances.

Library defaults and the acceptance suite both read from here, so a
tolerance changed in one place changes everywhere.
"""

# Chebyshev truncation: K = ceil(t + K_CUBE * t**(1/3) + K_OFFSET).
K_CUBE = 12.0
K_OFFSET = 30.0

# Supported range of the Bessel evaluator.
BESSEL_K_MAX = 200_000
BESSEL_T_MAX = 1.0e5

# Chebyshev engine safety factor on the spectral radius of H/2.
SPECTRAL_SAFETY = 0.05
# Recursion vectors larger than this times (n + 1) signal divergence.
BLOWUP_FACTOR = 1.0e8

DEFAULT_TOL = 1.0e-12
DENSE_CAP = 4096
DIAGRAM_EDGE_CAP = 14
DIAGRAM_VALUE_EDGE_CAP = 8
DIAGRAM_VALUE_SITE_CAP = 8

# Gauss-Legendre nodes for the lambda = sin(theta) quadrature of L(T, X).
LIMIT_PROFILE_NODES = 64

# Audit constant for the per-pairing bound on sum_x R_x.
AUDIT_C = 10.0

# Acceptance tolerances.
TOL_CHEB_VS_DENSE = 1e-8
TOL_NB_VS_DENSE = 1e-7
TOL_NB_RECURSION = 1e-12
TOL_ORTHONORMALITY = 1e-10
A_BOUND_C = 3.0
LIMIT_LAW_SUP_TOL = 0.02
LIMIT_LAW_SLACK = 3.0
LIMIT_LAW_TIMES = (250, 500, 1000, 2000)
LIMIT_LAW_GRID = (0.05, 0.95)
TOL_CLOSED_FORM = 1e-12
THEOREM1_TOL = 0.03
THEOREM1_SIGMAS = 3.0
LADDER_TV_TOL = 0.05
DELOC_SLACK = 0.1
DELOC_SIGMAS = 3.0
TOL_QUADRATURE = 1e-8

# Envelope constant for f_t on [delta, 1 - delta]: the Krasikov bound gives
# t |alpha_[t lam]|^2 <~ 2 f(lam), so the sup over [0.1, 0.9] is ~ 2 f(0.9).
F_T_ENVELOPE_FACTOR = 2.0

# Named test functions for the diffusion comparison.
TEST_FUNCTIONS = ("one", "x", "gauss", "cos", "far")

# Subexponential localisation set used by the delocalization experiment:
# exponent gamma, threshold K, and delta = DELOC_DELTA_FRACTION * 2^-gamma.
DELOC_GAMMA = 1.0
DELOC_K = 10.0
DELOC_DELTA_FRACTION = 0.9
